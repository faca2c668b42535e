#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bdqsd/model.hpp"

namespace bdqsd {

/// Interior states {n in N^r : |n| <= N} in lexicographic order.
class TruncatedSpace {
 public:
  /// Throws DomainError when N < r (empty interior).
  TruncatedSpace(std::size_t dimension, Count level);

  std::size_t dimension() const { return dimension_; }
  Count level() const { return level_; }
  std::size_t size() const { return size_; }

  StateView state(std::size_t index) const {
    return {coords_.data() + index * dimension_, dimension_};
  }
  std::optional<std::size_t> index_of(StateView n) const;
  bool contains(StateView n) const { return index_of(n).has_value(); }

  /// |n| == N: single births from here leave the truncation.
  bool on_outer_shell(std::size_t index) const {
    return total_size(state(index)) == level_;
  }

  /// Index of (1,...,1), always the first state.
  std::size_t unit_index() const { return 0; }

 private:
  std::size_t dimension_;
  Count level_;
  std::size_t size_ = 0;
  std::vector<Count> coords_;
};

TruncatedSpace enumerate_space(std::size_t dimension, Count level);

/// Compressed sparse rows of the off-diagonal part of a generator.
struct SparseRows {
  std::vector<std::size_t> offsets;  // size + 1
  std::vector<std::size_t> columns;
  std::vector<double> values;

  std::size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t nonzeros() const { return values.size(); }
};

/// Generator of the chain killed on exit from the truncation or on
/// absorption. Off-diagonal entries are rates between enumerated states,
/// the diagonal is -total_rate, and `kill` holds the rate of mass lost.
class SubGenerator {
 public:
  SubGenerator(SparseRows rows, std::vector<double> diagonal,
               std::vector<double> kill);

  std::size_t size() const { return diagonal_.size(); }
  const SparseRows& rows() const { return rows_; }
  /// Transpose of rows(): entry (j, i) holds Q(i, j).
  const SparseRows& columns() const { return columns_; }
  std::span<const double> diagonal() const { return diagonal_; }
  std::span<const double> kill() const { return kill_; }
  /// 1.05 * max |Q(n, n)|
  double uniformization_rate() const { return uniformization_rate_; }

  double entry(std::size_t row, std::size_t col) const;
  /// Row sums, taken as -kill: the killed rates are summed directly, so
  /// no cancellation against the diagonal.
  std::vector<double> row_sums() const;

 private:
  SparseRows rows_;
  SparseRows columns_;
  std::vector<double> diagonal_;
  std::vector<double> kill_;
  double uniformization_rate_ = 0.0;
};

inline constexpr double kUniformizationFactor = 1.05;

SubGenerator assemble(const Model& model, const TruncatedSpace& space);

struct SolverOptions {
  double tol = 1e-12;
  std::size_t max_iter = 1'000'000;
};

struct QsdResult {
  std::vector<double> alpha;  // quasi-stationary distribution, sums to 1
  double lambda0 = 0.0;       // extinction rate
  std::vector<double> eta;    // right eigenfunction, alpha . eta = 1
  double alpha_residual = 0.0;  // || alpha Q + lambda0 alpha ||_1
  double eta_residual = 0.0;    // || Q eta + lambda0 eta ||_1
  std::size_t alpha_iterations = 0;
  std::size_t eta_iterations = 0;
};

/// Uniformized power iteration for the principal left and right
/// eigenvectors. The left iteration stops when the extrapolated TV error is
/// below tol and the induced error on lambda0 is below tol * max(1, lambda0). Throws IterationLimitError or NumericalError (reducible).
QsdResult solve_qsd(const SubGenerator& q, const SolverOptions& options = {});

/// Throws NumericalError when the off-diagonal graph is not strongly
/// connected.
void require_irreducible(const SubGenerator& q);

struct ConditionalLaw {
  std::vector<double> law;  // mu_t, conditioned on survival
  double survival = 1.0;
};

inline constexpr double kPoissonTailCut = 1e-14;
inline constexpr double kSurvivalFloor = 1e-300;

/// mu0 exp(tQ) by uniformization. Throws NumericalError when the survival
/// probability underflows below 1e-300.
ConditionalLaw transient_conditional(const SubGenerator& q,
                                     std::span<const double> initial,
                                     double t);

double survival_probability(const SubGenerator& q,
                            std::span<const double> initial, double t);

/// E_n(tau_G ^ tau_boundary) for every state of the space; zero on G.
std::vector<double> expected_hitting_time(const SubGenerator& q,
                                          const TruncatedSpace& space,
                                          std::span<const State> target);
std::vector<double> expected_hitting_time(const Model& model,
                                          const TruncatedSpace& space,
                                          std::span<const State> target);

/// Point mass on `index`.
std::vector<double> point_mass(std::size_t size, std::size_t index);

}  // namespace bdqsd
