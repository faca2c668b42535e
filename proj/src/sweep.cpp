#include "bdqsd/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace bdqsd {

namespace {

// C(s, r): interior states with |n| <= s.
double states_up_to(Count s, std::size_t r) {
  if (s < r) return 0.0;
  double c = 1.0;
  for (std::size_t k = 0; k < r; ++k) {
    c *= static_cast<double>(s - k) / static_cast<double>(k + 1);
  }
  return c;
}

Count exhaustive_limit(std::size_t r, const SweepPlan& plan) {
  Count lo = 0;
  Count hi = plan.max_size;
  while (lo < hi) {
    const Count mid = lo + (hi - lo + 1) / 2;
    if (states_up_to(mid, r) <= plan.budget) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

std::vector<Count> spaced_values(Count lo, Count hi, std::size_t m) {
  std::vector<Count> out;
  if (hi < lo) return out;
  const Count span = hi - lo;
  if (span + 1 <= m || m < 2) {
    for (Count v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  for (std::size_t k = 0; k < m; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(m - 1);
    const Count v = lo + static_cast<Count>(std::llround(frac * static_cast<double>(span)));
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

void compositions(std::size_t r, std::size_t pos, Count remaining,
                  std::size_t per_axis, bool exhaustive, State& n,
                  const std::function<void(StateView)>& fn) {
  if (pos + 1 == r) {
    n[pos] = remaining;
    fn(StateView(n));
    return;
  }
  const Count slots_after = r - pos - 1;
  const Count hi = remaining - slots_after;
  if (exhaustive) {
    for (Count v = 1; v <= hi; ++v) {
      n[pos] = v;
      compositions(r, pos + 1, remaining - v, per_axis, exhaustive, n, fn);
    }
  } else {
    for (Count v : spaced_values(1, hi, per_axis)) {
      n[pos] = v;
      compositions(r, pos + 1, remaining - v, per_axis, exhaustive, n, fn);
    }
  }
}

}  // namespace

std::vector<Shell> plan_shells(std::size_t dimension, const SweepPlan& plan) {
  std::vector<Shell> shells;
  const Count full = exhaustive_limit(dimension, plan);
  for (Count s = dimension; s <= std::min(full, plan.max_size); ++s) {
    shells.push_back({s, true});
  }
  if (full >= plan.max_size) return shells;

  const Count start = std::max<Count>(full + 1, dimension);
  std::set<Count> sizes;
  const double ratio =
      std::pow(10.0, 1.0 / static_cast<double>(plan.shells_per_decade));
  for (double s = static_cast<double>(start); s < static_cast<double>(plan.max_size);
       s *= ratio) {
    sizes.insert(static_cast<Count>(std::llround(s)));
  }
  sizes.insert(plan.max_size);
  for (Count s : sizes) {
    if (s >= start && s <= plan.max_size) shells.push_back({s, false});
  }
  return shells;
}

std::string describe_sweep(std::size_t dimension, const SweepPlan& plan) {
  const Count full = exhaustive_limit(dimension, plan);
  if (full >= plan.max_size) {
    return fmt::format("exhaustive to |n|={}", plan.max_size);
  }
  return fmt::format("exhaustive to |n|={}, sampled shells to |n|={}", full,
                     plan.max_size);
}

void for_each_in_shell(std::size_t dimension, const Shell& shell,
                       std::size_t per_shell,
                       const std::function<void(StateView)>& fn) {
  if (shell.size < dimension) return;
  State n(dimension, 1);
  std::size_t per_axis = per_shell;
  if (dimension > 2) {
    per_axis = static_cast<std::size_t>(std::ceil(std::pow(
        static_cast<double>(per_shell), 1.0 / static_cast<double>(dimension - 1))));
  }
  compositions(dimension, 0, shell.size, std::max<std::size_t>(per_axis, 2),
               shell.exhaustive, n, fn);
}

double log_log_slope(std::span<const double> x, std::span<const double> y,
                     double lo, double hi) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] < lo || x[k] > hi || !(y[k] > 0.0) || !std::isfinite(y[k])) continue;
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::nan("");
  const double dm = static_cast<double>(m);
  const double denom = dm * sxx - sx * sx;
  if (denom <= 0.0) return std::nan("");
  return (dm * sxy - sx * sy) / denom;
}

}  // namespace bdqsd
