#include "bdqsd/truncation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "bdqsd/error.hpp"
#include "bdqsd/kernels.hpp"
#include "bdqsd/uniformization.hpp"

namespace bdqsd {

TruncatedSpace::TruncatedSpace(std::size_t dimension, Count level)
    : dimension_(dimension), level_(level) {
  if (dimension < 1) throw DomainError("truncation: dimension must be >= 1");
  if (level < dimension) {
    throw DomainError(fmt::format(
        "truncation.N: level {} < dimension {} leaves no interior state",
        level, dimension));
  }
  State n(dimension, 1);
  Count size = dimension;
  while (true) {
    coords_.insert(coords_.end(), n.begin(), n.end());
    ++size_;
    std::size_t pos = dimension;
    bool advanced = false;
    while (pos > 0) {
      --pos;
      n[pos] += 1;
      size += 1;
      if (size <= level) {
        advanced = true;
        break;
      }
      size -= n[pos] - 1;
      n[pos] = 1;
    }
    if (!advanced) break;
  }
}

std::optional<std::size_t> TruncatedSpace::index_of(StateView n) const {
  if (n.size() != dimension_) return std::nullopt;
  std::size_t lo = 0;
  std::size_t hi = size_;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const auto s = state(mid);
    if (std::lexicographical_compare(s.begin(), s.end(), n.begin(), n.end())) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < size_ && std::equal(n.begin(), n.end(), state(lo).begin())) {
    return lo;
  }
  return std::nullopt;
}

TruncatedSpace enumerate_space(std::size_t dimension, Count level) {
  return TruncatedSpace(dimension, level);
}

namespace {

SparseRows transpose(const SparseRows& rows, std::size_t size) {
  SparseRows out;
  out.offsets.assign(size + 1, 0);
  for (std::size_t c : rows.columns) out.offsets[c + 1] += 1;
  for (std::size_t i = 0; i < size; ++i) out.offsets[i + 1] += out.offsets[i];
  out.columns.resize(rows.columns.size());
  out.values.resize(rows.values.size());
  std::vector<std::size_t> cursor(out.offsets.begin(), out.offsets.end() - 1);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t k = rows.offsets[i]; k < rows.offsets[i + 1]; ++k) {
      const std::size_t slot = cursor[rows.columns[k]]++;
      out.columns[slot] = i;
      out.values[slot] = rows.values[k];
    }
  }
  return out;
}

}  // namespace

SubGenerator::SubGenerator(SparseRows rows, std::vector<double> diagonal,
                           std::vector<double> kill)
    : rows_(std::move(rows)),
      diagonal_(std::move(diagonal)),
      kill_(std::move(kill)) {
  columns_ = transpose(rows_, diagonal_.size());
  double max_rate = 0.0;
  for (double d : diagonal_) max_rate = std::max(max_rate, std::abs(d));
  uniformization_rate_ = kUniformizationFactor * max_rate;
  if (uniformization_rate_ == 0.0) uniformization_rate_ = 1.0;
}

double SubGenerator::entry(std::size_t row, std::size_t col) const {
  if (row == col) return diagonal_[row];
  for (std::size_t k = rows_.offsets[row]; k < rows_.offsets[row + 1]; ++k) {
    if (rows_.columns[k] == col) return rows_.values[k];
  }
  return 0.0;
}

std::vector<double> SubGenerator::row_sums() const {
  std::vector<double> sums(size());
  for (std::size_t i = 0; i < size(); ++i) sums[i] = -kill_[i];
  return sums;
}

SubGenerator assemble(const Model& model, const TruncatedSpace& space) {
  if (model.dimension() != space.dimension()) {
    throw DomainError(fmt::format(
        "assemble: model dimension {} does not match space dimension {}",
        model.dimension(), space.dimension()));
  }
  const std::size_t size = space.size();
  SparseRows rows;
  rows.offsets.reserve(size + 1);
  rows.offsets.push_back(0);
  std::vector<double> diagonal(size);
  std::vector<double> kill(size);

  std::vector<Move> moves;
  std::vector<std::pair<std::size_t, double>> entries;
  for (std::size_t i = 0; i < size; ++i) {
    const auto n = space.state(i);
    moves.clear();
    model.moves(n, moves);
    entries.clear();
    double total = 0.0;
    double lost = 0.0;
    for (const auto& m : moves) {
      total += m.rate;
      const State target = model.target(n, m);
      if (is_absorbed(target)) {
        lost += m.rate;
        continue;
      }
      if (auto j = space.index_of(target)) {
        entries.emplace_back(*j, m.rate);
      } else {
        lost += m.rate;
      }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].first == entries[k - 1].first) {
        rows.values.back() += entries[k].second;
      } else {
        rows.columns.push_back(entries[k].first);
        rows.values.push_back(entries[k].second);
      }
    }
    rows.offsets.push_back(rows.values.size());
    diagonal[i] = -total;
    kill[i] = lost;
  }
  return SubGenerator(std::move(rows), std::move(diagonal), std::move(kill));
}

void require_irreducible(const SubGenerator& q) {
  const std::size_t n = q.size();
  if (n == 0) throw NumericalError("solver: empty generator");
  auto reach = [n](const SparseRows& adj) {
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      for (std::size_t k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) {
        const std::size_t j = adj.columns[k];
        if (adj.values[k] > 0.0 && !seen[j]) {
          seen[j] = true;
          ++count;
          queue.push_back(j);
        }
      }
    }
    return count;
  };
  if (reach(q.rows()) != n || reach(q.columns()) != n) {
    throw NumericalError(
        "solver: the truncated space is reducible under the model dynamics");
  }
}

namespace {

// Bounds the distance to the limit by the geometric tail of the remaining
// changes. The contraction factor is the larger of the estimates over the
// last kShort and kLong sweeps.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(double tol) : tol_(tol) {}

  /// Infinite until the change is below tol and a contraction is visible.
  double tail(double diff) {
    history_.push_back(diff);
    if (history_.size() > kLong + 1) history_.pop_front();
    if (!(diff < tol_)) return kInf;
    if (diff < 1e-3 * tol_) return diff;
    if (history_.size() <= kLong) return kInf;
    const double rho = std::max(contraction(kShort), contraction(kLong));
    if (!(rho < 1.0)) return kInf;
    return diff * rho / (1.0 - rho);
  }

 private:
  static constexpr std::size_t kShort = 16;
  static constexpr std::size_t kLong = 256;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double contraction(std::size_t window) const {
    const double then = history_[history_.size() - 1 - window];
    if (!(then > 0.0)) return kInf;
    return std::pow(history_.back() / then, 1.0 / static_cast<double>(window));
  }

  double tol_;
  std::deque<double> history_;
};

double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

QsdResult solve_qsd(const SubGenerator& q, const SolverOptions& options) {
  require_irreducible(q);
  const std::size_t n = q.size();
  const double rate = q.uniformization_rate();
  QsdResult result;

  // Left eigenvector: alpha <- alpha P / |alpha P|_1.
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  std::vector<double> y(n);
  const auto kill = q.kill();
  double max_kill = 0.0;
  for (double k : kill) max_kill = std::max(max_kill, k);
  {
    // A TV error e moves the leak rate sum_i alpha_i kill_i by at most
    // 2 e max(kill); stop when both alpha and lambda0 are within tol.
    ConvergenceMonitor monitor(options.tol);
    bool converged = (n == 1);
    double diff = 0.0;
    std::size_t it = 0;
    while (!converged) {
      if (it >= options.max_iter) {
        throw IterationLimitError(
            fmt::format("solver: QSD iteration did not converge in {} sweeps "
                        "(last TV change {:.3e})",
                        options.max_iter, diff),
            diff);
      }
      ++it;
      kernels::left_step(q, rate, x, y);
      double mass = 0.0;
      for (double v : y) mass += v;
      diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] /= mass;
        diff += std::abs(y[i] - x[i]);
      }
      diff *= 0.5;
      x.swap(y);
      const double tail = monitor.tail(diff);
      if (tail < options.tol) {
        double leak = 0.0;
        for (std::size_t i = 0; i < n; ++i) leak += x[i] * kill[i];
        converged = 2.0 * max_kill * tail <= options.tol * std::max(1.0, leak);
      }
    }
    result.alpha_iterations = it;
  }
  result.alpha = x;
  double lambda0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) lambda0 += result.alpha[i] * kill[i];
  result.lambda0 = lambda0;

  // Right eigenvector: eta <- P eta, normalized by its sup norm.
  std::vector<double> h(n, 1.0);
  {
    ConvergenceMonitor monitor(options.tol);
    bool converged = (n == 1);
    double diff = 0.0;
    std::size_t it = 0;
    while (!converged) {
      if (it >= options.max_iter) {
        throw IterationLimitError(
            fmt::format("solver: eigenfunction iteration did not converge in "
                        "{} sweeps (last change {:.3e})",
                        options.max_iter, diff),
            diff);
      }
      ++it;
      kernels::right_step(q, rate, h, y);
      double top = 0.0;
      for (double v : y) top = std::max(top, std::abs(v));
      diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] /= top;
        diff = std::max(diff, std::abs(y[i] - h[i]));
      }
      h.swap(y);
      converged = monitor.tail(diff) < options.tol;
    }
    result.eta_iterations = it;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += result.alpha[i] * h[i];
  for (double& v : h) v /= dot;
  result.eta = std::move(h);

  std::vector<double> r(n);
  kernels::left_multiply(q, result.alpha, r);
  for (std::size_t i = 0; i < n; ++i) r[i] += lambda0 * result.alpha[i];
  result.alpha_residual = l1_norm(r);
  kernels::right_multiply(q, result.eta, r);
  for (std::size_t i = 0; i < n; ++i) r[i] += lambda0 * result.eta[i];
  result.eta_residual = l1_norm(r);
  return result;
}

std::vector<double> point_mass(std::size_t size, std::size_t index) {
  std::vector<double> v(size, 0.0);
  v.at(index) = 1.0;
  return v;
}

namespace {

void require_law(const SubGenerator& q, std::span<const double> initial,
                 double t) {
  if (initial.size() != q.size()) {
    throw DomainError(fmt::format(
        "initial law has {} entries, the space has {}", initial.size(),
        q.size()));
  }
  double mass = 0.0;
  for (double v : initial) {
    if (!(v >= 0.0)) throw DomainError("initial law has a negative entry");
    mass += v;
  }
  if (std::abs(mass - 1.0) > 1e-9) {
    throw DomainError(
        fmt::format("initial law sums to {} instead of 1", mass));
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw DomainError(fmt::format("time must be finite and >= 0 (got {})", t));
  }
}

}  // namespace

ConditionalLaw transient_conditional(const SubGenerator& q,
                                     std::span<const double> initial,
                                     double t) {
  require_law(q, initial, t);
  std::vector<double> nu(initial.begin(), initial.end());
  Propagator(q).left(nu, t);
  double survival = 0.0;
  for (double v : nu) survival += v;
  if (!(survival >= kSurvivalFloor)) {
    throw NumericalError(fmt::format(
        "conditioning impossible: survival probability {:.3e} at t={} is "
        "below 1e-300",
        survival, t));
  }
  for (double& v : nu) v /= survival;
  return {std::move(nu), survival};
}

double survival_probability(const SubGenerator& q,
                            std::span<const double> initial, double t) {
  return transient_conditional(q, initial, t).survival;
}

std::vector<double> expected_hitting_time(const SubGenerator& q,
                                          const TruncatedSpace& space,
                                          std::span<const State> target) {
  if (q.size() != space.size()) {
    throw DomainError("hitting time: generator and space sizes differ");
  }
  if (target.empty()) throw DomainError("hitting time: empty target set G");
  std::vector<bool> in_target(space.size(), false);
  for (const auto& g : target) {
    const auto idx = space.index_of(g);
    if (!idx) {
      throw DomainError(fmt::format("hitting time: {} is not in the space",
                                    format_state(g)));
    }
    in_target[*idx] = true;
  }
  std::vector<std::ptrdiff_t> local(space.size(), -1);
  std::ptrdiff_t unknowns = 0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (!in_target[i]) local[i] = unknowns++;
  }
  std::vector<double> u(space.size(), 0.0);
  if (unknowns == 0) return u;

  // (-Q restricted to the complement of G) u = 1
  std::vector<Eigen::Triplet<double>> triplets;
  const auto& rows = q.rows();
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (local[i] < 0) continue;
    triplets.emplace_back(local[i], local[i], -q.diagonal()[i]);
    for (std::size_t k = rows.offsets[i]; k < rows.offsets[i + 1]; ++k) {
      const std::size_t j = rows.columns[k];
      if (local[j] >= 0) triplets.emplace_back(local[i], local[j], -rows.values[k]);
    }
  }
  Eigen::SparseMatrix<double> a(unknowns, unknowns);
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw NumericalError("hitting time: singular linear system");
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(unknowns);
  const Eigen::VectorXd sol = lu.solve(ones);
  if (lu.info() != Eigen::Success) {
    throw NumericalError("hitting time: linear solve failed");
  }
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (local[i] >= 0) u[i] = sol[local[i]];
  }
  return u;
}

std::vector<double> expected_hitting_time(const Model& model,
                                          const TruncatedSpace& space,
                                          std::span<const State> target) {
  return expected_hitting_time(assemble(model, space), space, target);
}

}  // namespace bdqsd
