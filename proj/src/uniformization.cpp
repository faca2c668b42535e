#include "bdqsd/uniformization.hpp"

#include <algorithm>
#include <cmath>

#include "bdqsd/kernels.hpp"

namespace bdqsd {

PoissonWeights poisson_weights(double mean, double tail) {
  PoissonWeights out;
  if (mean <= 0.0) {
    out.weights = {1.0};
    return out;
  }
  // Unnormalized weights relative to the mode, grown outwards until the
  // terms are negligible, then normalized. Avoids exp(-mean) underflow.
  const auto mode = static_cast<std::size_t>(std::floor(mean));
  constexpr double kNegligible = 1e-40;
  std::vector<double> down;  // mode-1, mode-2, ...
  for (std::size_t k = mode; k > 0; --k) {
    const double w = (down.empty() ? 1.0 : down.back()) *
                     static_cast<double>(k) / mean;
    if (w < kNegligible) break;
    down.push_back(w);
  }
  std::vector<double> up{1.0};  // mode, mode+1, ...
  for (std::size_t k = mode + 1;; ++k) {
    const double w = up.back() * mean / static_cast<double>(k);
    if (w < kNegligible) break;
    up.push_back(w);
  }
  std::vector<double> all(down.rbegin(), down.rend());
  all.insert(all.end(), up.begin(), up.end());
  std::size_t first = mode - down.size();

  double total = 0.0;
  for (double w : all) total += w;
  for (double& w : all) w /= total;

  // Trim each tail while its cumulative mass stays below tail/2.
  std::size_t lo = 0;
  double dropped = 0.0;
  while (lo + 1 < all.size() && dropped + all[lo] < 0.5 * tail) {
    dropped += all[lo++];
  }
  std::size_t hi = all.size();
  dropped = 0.0;
  while (hi > lo + 1 && dropped + all[hi - 1] < 0.5 * tail) {
    dropped += all[--hi];
  }
  out.first = first + lo;
  out.weights.assign(all.begin() + static_cast<std::ptrdiff_t>(lo),
                     all.begin() + static_cast<std::ptrdiff_t>(hi));
  return out;
}

const PoissonWeights& Propagator::weights_for(double t) {
  if (t != cached_t_) {
    cached_ = poisson_weights(q_->uniformization_rate() * t);
    cached_t_ = t;
  }
  return cached_;
}

template <typename Step>
void Propagator::apply(std::vector<double>& x, double t, Step&& step) {
  if (t <= 0.0) return;
  const auto& pw = weights_for(t);
  const double rate = q_->uniformization_rate();
  power_ = x;
  next_.resize(x.size());
  acc_.assign(x.size(), 0.0);
  for (std::size_t k = 0;; ++k) {
    if (k >= pw.first) {
      const double w = pw.weights[k - pw.first];
      for (std::size_t i = 0; i < x.size(); ++i) acc_[i] += w * power_[i];
    }
    if (k == pw.last()) break;
    step(*q_, rate, power_, next_);
    power_.swap(next_);
  }
  x.swap(acc_);
}

void Propagator::left(std::vector<double>& x, double t) {
  apply(x, t, [](const SubGenerator& q, double rate, std::span<const double> in,
                 std::span<double> out) {
    kernels::left_step(q, rate, in, out);
  });
}

void Propagator::right(std::vector<double>& x, double t) {
  apply(x, t, [](const SubGenerator& q, double rate, std::span<const double> in,
                 std::span<double> out) {
    kernels::right_step(q, rate, in, out);
  });
}

}  // namespace bdqsd
