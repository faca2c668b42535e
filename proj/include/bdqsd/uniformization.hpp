#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bdqsd/truncation.hpp"

namespace bdqsd {

/// Poisson(mean) probabilities on [first, first + weights.size()), with both
/// tails dropped so that the discarded mass is below `tail`.
struct PoissonWeights {
  std::size_t first = 0;
  std::vector<double> weights;

  std::size_t last() const { return first + weights.size() - 1; }
};

PoissonWeights poisson_weights(double mean, double tail = kPoissonTailCut);

/// exp(tQ) applied from the left (row vectors, laws) or the right (column
/// vectors, functions), reusing the Poisson weights of repeated steps.
class Propagator {
 public:
  explicit Propagator(const SubGenerator& q) : q_(&q) {}

  /// x <- x exp(tQ)
  void left(std::vector<double>& x, double t);
  /// x <- exp(tQ) x
  void right(std::vector<double>& x, double t);

 private:
  const PoissonWeights& weights_for(double t);
  template <typename Step>
  void apply(std::vector<double>& x, double t, Step&& step);

  const SubGenerator* q_;
  double cached_t_ = -1.0;
  PoissonWeights cached_;
  std::vector<double> power_;
  std::vector<double> next_;
  std::vector<double> acc_;
};

}  // namespace bdqsd
