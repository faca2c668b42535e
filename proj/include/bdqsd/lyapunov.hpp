#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bdqsd/model.hpp"
#include "bdqsd/sweep.hpp"
#include "bdqsd/truncation.hpp"

namespace bdqsd {

/// V_eps(n) = sum_{j=1}^{|n|} j^-(1+eps), and 0 on the boundary.
double v_eps(StateView n, double eps);
double v_eps_size(Count size, double eps);

struct VBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Bracket of V_eps(n) - V_eps(m) for 1 <= |m| <= |n|:
/// lower = ((|m|+1)^-eps - (|n|+1)^-eps) / eps,
/// upper = (|m|^-eps - |n|^-eps) / eps.
VBounds v_eps_bounds(Count m_size, Count n_size, double eps);

using StateFunction = std::function<double(StateView)>;

/// Lf(n) = sum over transitions of rate * (f(target) - f(n)). Absorbed
/// targets are passed to f as they are; f is expected to vanish there.
double apply_generator(const Model& model, const StateFunction& f,
                       StateView n);

/// L V_eps(n), using that V_eps depends on |n| only. Agrees with
/// apply_generator(model, v_eps, n) up to rounding.
double lyapunov_drift(const Model& model, StateView n, double eps);

/// L 1_{N^r}(n) = -(rate of moves into the boundary).
double absorption_drift(const Model& model, StateView n);

/// Exponents (beta1, beta2) read off the model: zero for constant rates,
/// the declared values otherwise. Empty when a callback or tabulated model
/// declares neither.
std::optional<std::pair<double, double>> declared_exponents(const Model& model);

struct LyapunovParams {
  double eps = 0.5;
  double window_hi = 1.0;  // window is (0, window_hi)

  /// (0, gamma - gamma beta2).
  static LyapunovParams for_model(const Model& model);
  bool admissible() const { return eps > 0.0 && eps < window_hi; }
};

enum class Verdict { kPassOnRange, kFailWithWitness, kInconclusive };

std::string to_string(Verdict verdict);

struct AssumptionReport {
  std::string hypothesis;
  Verdict verdict = Verdict::kInconclusive;
  Count n_check = 0;
  std::string sweep;
  std::map<std::string, double> constants;
  std::optional<State> witness;
  /// Smallest slack of the checked inequality over the range.
  std::optional<double> worst_margin;
  std::vector<std::string> notes;
};

struct ResidualPoint {
  Count size = 0;
  double value = 0.0;
};

struct DriftReport {
  std::string inequality;
  Verdict verdict = Verdict::kInconclusive;
  double eps = 0.0;
  Count n_check = 0;
  std::string sweep;
  std::map<std::string, double> constants;
  std::vector<ResidualPoint> residual;
  std::optional<State> witness;
  std::optional<double> worst_margin;
  std::optional<double> error_estimate;
  std::vector<std::string> notes;
};

/// Finite-range sweep options shared by the range checks. `max_size` is
/// replaced by the n_check argument.
struct CheckOptions {
  SweepPlan sweep;
  bool parallel = true;
};

AssumptionReport check_h1(const Model& model, Count n_check,
                          const CheckOptions& options = {});

/// Ratio must exceed `threshold` at |n| = n_check.
AssumptionReport check_h2(const Model& model, Count n_check,
                          double threshold = 10.0,
                          const CheckOptions& options = {});

/// C_r defaults to r^-(1+gamma).
AssumptionReport check_remark1(const Model& model, Count n_check,
                               std::optional<double> c_r = std::nullopt,
                               const CheckOptions& options = {});

/// Threshold r < 1 + e gamma with a grid search for (eps, delta) satisfying
/// (r-1)(1/gamma)(1-eps/gamma)^(gamma/eps-1) <= 1-delta.
AssumptionReport check_thm2(std::size_t r, double gamma);

/// As above, after checking neutral competition exactly and bounded-growth
/// birth and death rates on |n| <= n_check.
AssumptionReport check_thm2(const Model& model, Count n_check,
                            const CheckOptions& options = {});

/// Working inequality of the neutral case at (eps, delta).
double thm2_lhs(std::size_t r, double gamma, double eps);

/// L V_eps(n) <= C1 - C2 |n|^(gamma - eps - gamma beta2) on |n| <= n_check.
/// Throws DomainError when eps is outside the admissible window.
DriftReport check_drift(const Model& model, double eps, Count n_check,
                        const CheckOptions& options = {});

/// Conditional drift inequality
///   mu_t(V) - mu_0(V) <= int_0^t [mu_s(LV) - mu_s(V) mu_s(L1)] ds
/// on a uniform grid (laws[k] at time k*step), plus the smallest C > 1 with
///   mu_s(LV) - mu_s(V) mu_s(L1) <= C - mu_s(|n|^p) / C at every grid time.
DriftReport check_conditional_drift(const Model& model,
                                    const TruncatedSpace& space,
                                    std::span<const std::vector<double>> laws,
                                    double step, double eps);

/// Computes the laws with the truncated semigroup, then checks as above.
DriftReport check_conditional_drift(const Model& model,
                                    const TruncatedSpace& space,
                                    const SubGenerator& q,
                                    std::span<const double> initial,
                                    double step, double t_max, double eps);

AssumptionReport check_catastrophes(const Model& model, Count n_check,
                                    const CheckOptions& options = {});

AssumptionReport check_multibirth(const Model& model);

}  // namespace bdqsd
