#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdqsd/truncation.hpp"

namespace bdqsd {

/// Half the L1 distance. Throws DomainError on a length mismatch.
double tv_distance(std::span<const double> mu, std::span<const double> nu);

/// Uniform grid start, start + step, ..., stop.
struct TimeGrid {
  double start = 0.0;
  double stop = 20.0;
  double step = 0.05;

  /// Parses "start:stop:step".
  static TimeGrid parse(const std::string& text);
  std::size_t intervals() const;
  std::vector<double> points() const;
  /// Same span with half the step.
  TimeGrid refined() const { return {start, stop, step / 2.0}; }
  void validate() const;
};

struct ConvergenceCurve {
  std::vector<double> times;
  std::vector<State> initials;
  std::vector<std::vector<double>> tv;        // [initial][time]
  std::vector<std::vector<double>> survival;  // [initial][time]
};

/// TV(mu_t, alpha) and P(t < tau) from each point mass on the grid.
ConvergenceCurve convergence_curve(const SubGenerator& q,
                                   const TruncatedSpace& space,
                                   const QsdResult& qsd,
                                   std::span<const State> initials,
                                   const TimeGrid& grid);

/// Same from arbitrary initial laws; `initials` in the result stays empty.
ConvergenceCurve convergence_curve(const SubGenerator& q, const QsdResult& qsd,
                                   std::span<const std::vector<double>> laws,
                                   const TimeGrid& grid);

/// Every state of the space, which includes (1,...,1) and the corners.
std::vector<State> all_initials(const TruncatedSpace& space);

inline constexpr double kFitWindowLow = 1e-6;
inline constexpr double kFitWindowHigh = 1e-1;
inline constexpr std::size_t kFitMinPoints = 5;
inline constexpr double kFlatDecay = 1e-9;

struct RateFit {
  double prefactor = 0.0;  // exp(intercept)
  double rate = 0.0;       // lambda = -slope
  /// Smallest C with TV <= C exp(-rate t) at every window point.
  double envelope_prefactor = 0.0;
  double window_low = kFitWindowLow;
  double window_high = kFitWindowHigh;
  double t_first = 0.0;
  double t_last = 0.0;
  std::size_t points = 0;
  double residual = 0.0;  // RMS of log TV about the line
  /// Total log-decay across the window at most kFlatDecay (flat or rising).
  bool degenerate = false;

  double envelope(double t) const;
};

/// Least squares of log TV against t over the points with TV in the
/// window. Throws NumericalError with fewer than 5 such points.
RateFit fit_rate(std::span<const double> times, std::span<const double> tv);
std::vector<RateFit> fit_rate(const ConvergenceCurve& curve);

struct MixingCertificate {
  State nu;  // reference point mass, (1,...,1)
  double t0 = 0.0;
  std::optional<double> c1;
  std::optional<State> c1_argmin;
  std::optional<double> c1_recomputed;
  std::optional<double> c2;
  std::optional<State> c2_argmin;
  std::optional<double> c2_time;
  std::optional<double> c2_recomputed;
  std::vector<std::string> notes;

  /// c1 and c2 (when present) are positive and reproduced within `tol`.
  bool valid(double tol = 1e-9) const;
};

/// c1 = min_x P_x(X_t0 = (1,...,1)) / P_x(t0 < tau). Recomputed with two
/// steps of t0/2.
MixingCertificate verify_a1(const SubGenerator& q, const TruncatedSpace& space,
                            double t0);

/// c2 = min over the grid and x of P_nu(t < tau) / P_x(t < tau). Recomputed
/// on the grid with half the step.
MixingCertificate verify_a2(const SubGenerator& q, const TruncatedSpace& space,
                            const TimeGrid& grid);

struct PlateauPoint {
  double t = 0.0;
  double error = 0.0;
};

/// max_x |exp(lambda0 t) P_x(t < tau) - eta(x)| on the grid.
std::vector<PlateauPoint> eta_plateau(const SubGenerator& q, const QsdResult& qsd,
                                      const TimeGrid& grid);

}  // namespace bdqsd
