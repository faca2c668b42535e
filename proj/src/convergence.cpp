#include "bdqsd/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "bdqsd/error.hpp"
#include "bdqsd/uniformization.hpp"

namespace bdqsd {

namespace {

double sum_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

// Scales x to unit sum and returns the factor removed.
double normalize_sum(std::vector<double>& x) {
  const double s = sum_of(x);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw NumericalError("propagated law lost all mass");
  }
  for (double& v : x) v /= s;
  return s;
}

double normalize_max(std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, v);
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw NumericalError("propagated survival vector vanished");
  }
  for (double& v : x) v /= m;
  return m;
}

std::size_t unit_index_checked(const TruncatedSpace& space) {
  const State unit(space.dimension(), 1);
  const auto idx = space.index_of(unit);
  if (!idx) throw DomainError("(1,...,1) is not in the space");
  return *idx;
}

struct A1Result {
  double c1 = 0.0;
  std::size_t argmin = 0;
};

A1Result a1_constant(const SubGenerator& q, std::size_t x0, double t0, int pieces) {
  std::vector<double> hit = point_mass(q.size(), x0);
  std::vector<double> alive(q.size(), 1.0);
  Propagator prop(q);
  for (int k = 0; k < pieces; ++k) {
    prop.right(hit, t0 / pieces);
    prop.right(alive, t0 / pieces);
  }
  A1Result out{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t x = 0; x < q.size(); ++x) {
    if (!(alive[x] >= kSurvivalFloor)) {
      throw NumericalError(fmt::format(
          "survival probability {:.3e} from state index {} underflows", alive[x], x));
    }
    const double ratio = hit[x] / alive[x];
    if (ratio < out.c1) {
      out.c1 = ratio;
      out.argmin = x;
    }
  }
  return out;
}

struct A2Result {
  double c2 = 1.0;
  std::size_t argmin = 0;
  double time = 0.0;
};

A2Result a2_constant(const SubGenerator& q, std::size_t x0, const TimeGrid& grid) {
  std::vector<double> u(q.size(), 1.0);
  Propagator prop(q);
  if (grid.start > 0.0) {
    prop.right(u, grid.start);
    normalize_max(u);
  }
  A2Result out{std::numeric_limits<double>::infinity(), 0, grid.start};
  const auto points = grid.points();
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (k > 0) {
      prop.right(u, grid.step);
      normalize_max(u);
    }
    for (std::size_t x = 0; x < u.size(); ++x) {
      const double ratio = u[x0] / u[x];
      if (ratio < out.c2) {
        out.c2 = ratio;
        out.argmin = x;
        out.time = points[k];
      }
    }
  }
  return out;
}

}  // namespace

double tv_distance(std::span<const double> mu, std::span<const double> nu) {
  if (mu.size() != nu.size()) {
    throw DomainError(fmt::format("tv_distance: lengths {} and {} differ", mu.size(),
                                  nu.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
  return std::min(1.0, 0.5 * s);
}

TimeGrid TimeGrid::parse(const std::string& text) {
  std::stringstream in(text);
  std::string part;
  std::vector<double> values;
  while (std::getline(in, part, ':')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(part, &used));
      if (part.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("time grid '{}': '{}' is not a number", text, part));
    }
  }
  if (values.size() != 3) {
    throw ValidationError(fmt::format("time grid '{}': expected start:stop:step", text));
  }
  TimeGrid g{values[0], values[1], values[2]};
  g.validate();
  return g;
}

void TimeGrid::validate() const {
  if (!(start >= 0.0) || !std::isfinite(stop) || !(stop >= start) || !(step > 0.0)) {
    throw ValidationError(fmt::format(
        "time grid {}:{}:{} must satisfy 0 <= start <= stop and step > 0", start, stop,
        step));
  }
}

std::size_t TimeGrid::intervals() const {
  return static_cast<std::size_t>(std::llround((stop - start) / step));
}

std::vector<double> TimeGrid::points() const {
  validate();
  const std::size_t n = intervals();
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = start + static_cast<double>(k) * step;
  return t;
}

std::vector<State> all_initials(const TruncatedSpace& space) {
  std::vector<State> out;
  out.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto s = space.state(i);
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

ConvergenceCurve convergence_curve(const SubGenerator& q, const QsdResult& qsd,
                                   std::span<const std::vector<double>> laws,
                                   const TimeGrid& grid) {
  if (qsd.alpha.size() != q.size()) {
    throw DomainError("convergence curve: QSD and generator sizes differ");
  }
  ConvergenceCurve curve;
  curve.times = grid.points();
  const std::size_t n_times = curve.times.size();
  curve.tv.assign(laws.size(), std::vector<double>(n_times));
  curve.survival.assign(laws.size(), std::vector<double>(n_times));
  const auto count = static_cast<std::ptrdiff_t>(laws.size());
  std::string failure;
  bool failed = false;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = 0; j < count; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    try {
      if (laws[idx].size() != q.size()) throw DomainError("initial law size mismatch");
      Propagator prop(q);
      std::vector<double> x = laws[idx];
      double log_survival = std::log(normalize_sum(x));
      if (grid.start > 0.0) {
        prop.left(x, grid.start);
        log_survival += std::log(normalize_sum(x));
      }
      for (std::size_t k = 0; k < n_times; ++k) {
        if (k > 0) {
          prop.left(x, grid.step);
          log_survival += std::log(normalize_sum(x));
        }
        curve.tv[idx][k] = tv_distance(x, qsd.alpha);
        curve.survival[idx][k] = std::min(1.0, std::exp(log_survival));
      }
    } catch (const std::exception& e) {
#pragma omp critical(bdqsd_curve_failure)
      {
        if (!failed) {
          failed = true;
          failure = e.what();
        }
      }
    }
  }
  if (failed) throw NumericalError("convergence curve: " + failure);
  return curve;
}

ConvergenceCurve convergence_curve(const SubGenerator& q, const TruncatedSpace& space,
                                   const QsdResult& qsd,
                                   std::span<const State> initials,
                                   const TimeGrid& grid) {
  if (q.size() != space.size()) {
    throw DomainError("convergence curve: generator and space sizes differ");
  }
  std::vector<std::vector<double>> laws;
  laws.reserve(initials.size());
  for (const auto& x : initials) {
    const auto idx = space.index_of(x);
    if (!idx) {
      throw DomainError(fmt::format("converge.initials: {} is not in the truncated space",
                                    format_state(x)));
    }
    laws.push_back(point_mass(space.size(), *idx));
  }
  auto curve = convergence_curve(q, qsd, laws, grid);
  curve.initials.assign(initials.begin(), initials.end());
  return curve;
}

double RateFit::envelope(double t) const {
  return envelope_prefactor * std::exp(-rate * t);
}

RateFit fit_rate(std::span<const double> times, std::span<const double> tv) {
  if (times.size() != tv.size()) throw DomainError("fit_rate: length mismatch");
  RateFit fit;
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::vector<std::size_t> used;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (tv[k] < kFitWindowLow || tv[k] > kFitWindowHigh) continue;
    const double y = std::log(tv[k]);
    st += times[k];
    sy += y;
    stt += times[k] * times[k];
    sty += times[k] * y;
    used.push_back(k);
  }
  if (used.size() < kFitMinPoints) {
    throw NumericalError(fmt::format(
        "no fit: {} grid points with TV in [1e-6, 1e-1], at least {} needed",
        used.size(), kFitMinPoints));
  }
  const double m = static_cast<double>(used.size());
  const double denom = m * stt - st * st;
  if (!(denom > 0.0)) throw NumericalError("no fit: degenerate time window");
  const double slope = (m * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / m;
  fit.rate = -slope;
  fit.prefactor = std::exp(intercept);
  fit.points = used.size();
  fit.t_first = times[used.front()];
  fit.t_last = times[used.back()];
  fit.degenerate = !(fit.rate * (fit.t_last - fit.t_first) > kFlatDecay);
  double rss = 0.0;
  fit.envelope_prefactor = fit.prefactor;
  for (std::size_t k : used) {
    const double e = std::log(tv[k]) - (intercept + slope * times[k]);
    rss += e * e;
    fit.envelope_prefactor =
        std::max(fit.envelope_prefactor, tv[k] * std::exp(fit.rate * times[k]));
  }
  for (std::size_t k : used) {
    while (tv[k] > fit.envelope(times[k])) {
      fit.envelope_prefactor =
          std::nextafter(fit.envelope_prefactor, std::numeric_limits<double>::infinity());
    }
  }
  fit.residual = std::sqrt(rss / m);
  return fit;
}

std::vector<RateFit> fit_rate(const ConvergenceCurve& curve) {
  std::vector<RateFit> out;
  out.reserve(curve.tv.size());
  for (const auto& tv : curve.tv) out.push_back(fit_rate(curve.times, tv));
  return out;
}

bool MixingCertificate::valid(double tol) const {
  if (!c1 && !c2) return false;
  if (c1 && !(*c1 > 0.0)) return false;
  if (c2 && !(*c2 > 0.0)) return false;
  if (c1 && c1_recomputed && !(std::abs(*c1 - *c1_recomputed) <= tol)) return false;
  if (c2 && c2_recomputed && !(std::abs(*c2 - *c2_recomputed) <= tol)) return false;
  return true;
}

MixingCertificate verify_a1(const SubGenerator& q, const TruncatedSpace& space,
                            double t0) {
  if (!(t0 >= 0.0) || !std::isfinite(t0)) {
    throw DomainError(fmt::format("converge.t0: must be >= 0 (got {})", t0));
  }
  if (q.size() != space.size()) throw DomainError("generator and space sizes differ");
  const std::size_t x0 = unit_index_checked(space);
  MixingCertificate cert;
  cert.nu = State(space.dimension(), 1);
  cert.t0 = t0;
  const auto once = a1_constant(q, x0, t0, 1);
  const auto twice = a1_constant(q, x0, t0, 2);
  cert.c1 = once.c1;
  cert.c1_recomputed = twice.c1;
  const auto w = space.state(once.argmin);
  cert.c1_argmin = State(w.begin(), w.end());
  if (t0 == 0.0) cert.notes.push_back("t0 = 0: the conditional law is the point mass at x");
  return cert;
}

MixingCertificate verify_a2(const SubGenerator& q, const TruncatedSpace& space,
                            const TimeGrid& grid) {
  grid.validate();
  if (q.size() != space.size()) throw DomainError("generator and space sizes differ");
  const std::size_t x0 = unit_index_checked(space);
  MixingCertificate cert;
  cert.nu = State(space.dimension(), 1);
  const auto coarse = a2_constant(q, x0, grid);
  const auto fine = a2_constant(q, x0, grid.refined());
  cert.c2 = coarse.c2;
  cert.c2_recomputed = fine.c2;
  cert.c2_time = coarse.time;
  const auto w = space.state(coarse.argmin);
  cert.c2_argmin = State(w.begin(), w.end());
  cert.notes.push_back(
      "survival vectors are renormalized at every step, so the ratio does not underflow");
  return cert;
}

std::vector<PlateauPoint> eta_plateau(const SubGenerator& q, const QsdResult& qsd,
                                      const TimeGrid& grid) {
  if (qsd.eta.size() != q.size()) throw DomainError("eta and generator sizes differ");
  const auto points = grid.points();
  std::vector<double> w(q.size(), 1.0);
  Propagator prop(q);
  auto advance = [&](double dt) {
    prop.right(w, dt);
    const double grow = std::exp(qsd.lambda0 * dt);
    for (double& v : w) v *= grow;
  };
  if (grid.start > 0.0) advance(grid.start);
  std::vector<PlateauPoint> out;
  out.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (k > 0) advance(grid.step);
    double err = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) err = std::max(err, std::abs(w[x] - qsd.eta[x]));
    if (!std::isfinite(err)) {
      // exp(lambda0 t) P_x(t < tau) left the double range; stop here.
      break;
    }
    out.push_back({points[k], err});
  }
  return out;
}

}  // namespace bdqsd
