#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdqsd/model.hpp"

namespace bdqsd {

/// How a finite-range check visits {n in N^r : |n| <= max_size}. Shells
/// |n| = s are enumerated completely while the cumulative state count stays
/// within `budget`; beyond that a geometric grid of shells is visited, each
/// on an evenly spaced lattice of about `per_shell` states that includes
/// the axis extremes.
struct SweepPlan {
  Count max_size = 10'000;
  double budget = 5e6;
  std::size_t per_shell = 512;
  std::size_t shells_per_decade = 40;
};

struct Shell {
  Count size = 0;
  bool exhaustive = true;
};

std::vector<Shell> plan_shells(std::size_t dimension, const SweepPlan& plan);

/// "exhaustive" or "exhaustive to |n|=s, sampled above".
std::string describe_sweep(std::size_t dimension, const SweepPlan& plan);

/// Calls fn(StateView) for the states of one shell, in lexicographic order.
void for_each_in_shell(std::size_t dimension, const Shell& shell,
                       std::size_t per_shell,
                       const std::function<void(StateView)>& fn);

/// Evaluates fn(shell) for every shell, in parallel when `parallel` is set.
/// Results are stored by shell index, so the output does not depend on the
/// thread count.
template <typename Result, typename Fn>
std::vector<Result> map_shells(std::span<const Shell> shells, Fn&& fn,
                               bool parallel = true) {
  std::vector<Result> out(shells.size());
  const auto count = static_cast<std::ptrdiff_t>(shells.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    out[static_cast<std::size_t>(k)] = fn(shells[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Least-squares slope of log(y) against log(x), over points with x in
/// [lo, hi] and y > 0. Returns NaN with fewer than two usable points.
double log_log_slope(std::span<const double> x, std::span<const double> y,
                     double lo, double hi);

}  // namespace bdqsd
