#include "bdqsd/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "bdqsd/error.hpp"
#include "bdqsd/kernels.hpp"
#include "bdqsd/uniformization.hpp"

namespace bdqsd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Log-log slopes on the top decade above / below these count as growth or
// boundedness.
constexpr double kGrowthSlope = 0.05;
constexpr double kBoundedSlope = 0.01;
constexpr std::size_t kPrefixCacheLimit = std::size_t{1} << 24;

struct PrefixCache {
  double eps = std::nan("");
  std::vector<double> prefix{0.0};
};

double term(Count j, double eps) {
  return std::pow(static_cast<double>(j), -(1.0 + eps));
}

// Sum of j^-(1+eps) for j in (from, to].
double partial_sum(Count from, Count to, double eps) {
  double s = 0.0;
  for (Count j = from + 1; j <= to; ++j) s += term(j, eps);
  return s;
}

struct Extremum {
  double value = std::nan("");
  State where;

  void take_max(double v, StateView n) {
    if (where.empty() || v > value) {
      value = v;
      where.assign(n.begin(), n.end());
    }
  }
  void take_min(double v, StateView n) {
    if (where.empty() || v < value) {
      value = v;
      where.assign(n.begin(), n.end());
    }
  }
};

std::vector<Shell> shells_for(std::size_t r, Count n_check,
                              const CheckOptions& options) {
  SweepPlan plan = options.sweep;
  plan.max_size = n_check;
  return plan_shells(r, plan);
}

std::string sweep_text(std::size_t r, Count n_check, const CheckOptions& options) {
  SweepPlan plan = options.sweep;
  plan.max_size = n_check;
  return describe_sweep(r, plan);
}

template <typename Acc, typename Visit>
std::vector<Acc> sweep_shells(std::size_t r, std::span<const Shell> shells,
                              const CheckOptions& options, Visit&& visit) {
  return map_shells<Acc>(
      shells,
      [&](const Shell& shell) {
        Acc acc;
        for_each_in_shell(r, shell, options.sweep.per_shell,
                          [&](StateView n) { visit(acc, n); });
        return acc;
      },
      options.parallel);
}

double top_decade_slope(std::span<const Shell> shells, std::span<const double> y,
                        Count n_check) {
  std::vector<double> x(shells.size());
  for (std::size_t k = 0; k < shells.size(); ++k) {
    x[k] = static_cast<double>(shells[k].size);
  }
  const double hi = static_cast<double>(n_check);
  return log_log_slope(x, y, hi / 10.0, hi);
}

bool nondecreasing_top_half(std::span<const Shell> shells,
                            std::span<const double> y, Count n_check) {
  const double half = static_cast<double>(n_check) / 2.0;
  std::optional<double> prev;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    if (static_cast<double>(shells[k].size) < half) continue;
    if (prev && y[k] < *prev * (1.0 - 1e-12)) return false;
    prev = y[k];
  }
  return true;
}

bool nonincreasing_top_half(std::span<const Shell> shells,
                            std::span<const double> y, Count n_check) {
  const double half = static_cast<double>(n_check) / 2.0;
  std::optional<double> prev;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    if (static_cast<double>(shells[k].size) < half) continue;
    if (prev && y[k] > *prev * (1.0 + 1e-12)) return false;
    prev = y[k];
  }
  return true;
}

double pow_gamma(double x, double gamma) {
  return x > 0.0 ? std::pow(x, gamma) : 0.0;
}

State unit_state(std::size_t r) { return State(r, 1); }

// Per-shell extremes of the birth, death and intraspecific competition rates.
struct RateShell {
  Extremum birth_max;
  Extremum death_max;
  Extremum comp_min;
  std::optional<State> bad_birth;
  std::optional<State> bad_comp;
};

std::vector<RateShell> rate_sweep(const Model& model, std::span<const Shell> shells,
                                  const CheckOptions& options) {
  const std::size_t r = model.dimension();
  return sweep_shells<RateShell>(r, shells, options, [&](RateShell& acc, StateView n) {
    for (std::size_t i = 0; i < r; ++i) {
      const double b = model.birth(n, i);
      const double d = model.death(n, i);
      const double c = model.competition(n, i, i);
      acc.birth_max.take_max(b, n);
      acc.death_max.take_max(d, n);
      acc.comp_min.take_min(c, n);
      if (!(b > 0.0) && !acc.bad_birth) acc.bad_birth = State(n.begin(), n.end());
      if (!(c > 0.0) && !acc.bad_comp) acc.bad_comp = State(n.begin(), n.end());
    }
  });
}

struct GrowthBounds {
  double beta1 = 0.0;
  double beta2 = 0.0;
  bool fitted = false;
  bool fit_failed = false;
};

GrowthBounds exponents_for(const Model& model, std::span<const Shell> shells,
                           std::span<const RateShell> rates, Count n_check) {
  GrowthBounds g;
  if (auto declared = declared_exponents(model)) {
    g.beta1 = declared->first;
    g.beta2 = declared->second;
    return g;
  }
  g.fitted = true;
  std::vector<double> up(shells.size());
  std::vector<double> down(shells.size());
  for (std::size_t k = 0; k < shells.size(); ++k) {
    up[k] = std::max(rates[k].birth_max.value, rates[k].death_max.value);
    down[k] = rates[k].comp_min.value;
  }
  const double s1 = top_decade_slope(shells, up, n_check);
  const double s2 = top_decade_slope(shells, down, n_check);
  if (std::isnan(s1) || std::isnan(s2)) {
    g.fit_failed = true;
    return g;
  }
  auto snap = [](double x) { return std::abs(x) < 1e-9 ? 0.0 : x; };
  g.beta1 = std::max(0.0, snap(s1));
  g.beta2 = snap(-s2);
  return g;
}

struct BirthDeathBounds {
  double b_bar = 0.0;
  double d_bar = 0.0;
  double c_low = kInf;
  double b_growth = 0.0;  // slope of max b / |n|^beta1 on the top decade
  double d_growth = 0.0;
  double c_growth = 0.0;
};

BirthDeathBounds bounds_for(std::span<const Shell> shells,
                            std::span<const RateShell> rates, double beta1,
                            double beta2, Count n_check) {
  BirthDeathBounds out;
  std::vector<double> b(shells.size()), d(shells.size()), c(shells.size());
  for (std::size_t k = 0; k < shells.size(); ++k) {
    const double s = static_cast<double>(shells[k].size);
    b[k] = rates[k].birth_max.value / std::pow(s, beta1);
    d[k] = rates[k].death_max.value / std::pow(s, beta1);
    c[k] = rates[k].comp_min.value * std::pow(s, beta2);
    out.b_bar = std::max(out.b_bar, b[k]);
    out.d_bar = std::max(out.d_bar, d[k]);
    out.c_low = std::min(out.c_low, c[k]);
  }
  auto slope_or_zero = [&](const std::vector<double>& y) {
    const double s = top_decade_slope(shells, y, n_check);
    return std::isnan(s) ? 0.0 : s;
  };
  out.b_growth = slope_or_zero(b);
  out.d_growth = slope_or_zero(d);
  out.c_growth = slope_or_zero(c);
  return out;
}

AssumptionReport make_report(std::string name, const Model& model, Count n_check,
                             const CheckOptions& options) {
  AssumptionReport rep;
  rep.hypothesis = std::move(name);
  rep.n_check = n_check;
  rep.sweep = sweep_text(model.dimension(), n_check, options);
  return rep;
}

void fail(AssumptionReport& rep, State witness, std::string note) {
  rep.verdict = Verdict::kFailWithWitness;
  rep.witness = std::move(witness);
  rep.notes.push_back(std::move(note));
}

// Checks positivity and the upper growth of b and d shared by (H1) and
// (H3). Returns false after recording a failure.
bool check_birth_death_growth(AssumptionReport& rep, const GrowthBounds& g,
                              const BirthDeathBounds& bounds,
                              std::span<const RateShell> rates) {
  for (const auto& shell : rates) {
    if (shell.bad_birth) {
      fail(rep, *shell.bad_birth,
           fmt::format("b_i(n) is not positive at n = {}",
                       format_state(*shell.bad_birth)));
      return false;
    }
  }
  if (!g.fitted) {
    const auto& top = rates.back();
    if (bounds.b_growth > kGrowthSlope) {
      fail(rep, top.birth_max.where,
           fmt::format("max_i b_i(n) / |n|^beta1 still grows like |n|^{:.3g} on "
                       "the top decade; beta1 = {} is too small",
                       bounds.b_growth, g.beta1));
      return false;
    }
    if (bounds.d_growth > kGrowthSlope) {
      fail(rep, top.death_max.where,
           fmt::format("max_i d_i(n) / |n|^beta1 still grows like |n|^{:.3g} on "
                       "the top decade; beta1 = {} is too small",
                       bounds.d_growth, g.beta1));
      return false;
    }
  }
  return true;
}

struct DriftShell {
  Extremum lv_max;
};

}  // namespace

double v_eps_size(Count size, double eps) {
  if (!(eps > 0.0)) throw DomainError(fmt::format("eps must be > 0 (got {})", eps));
  if (size == 0) return 0.0;
  if (size > kPrefixCacheLimit) return partial_sum(0, size, eps);
  thread_local PrefixCache cache;
  if (cache.eps != eps) {
    cache.eps = eps;
    cache.prefix.assign(1, 0.0);
  }
  auto& p = cache.prefix;
  while (p.size() <= size) {
    const Count j = p.size();
    p.push_back(p.back() + term(j, eps));
  }
  return p[size];
}

double v_eps(StateView n, double eps) {
  if (!(eps > 0.0)) throw DomainError(fmt::format("eps must be > 0 (got {})", eps));
  if (!is_interior(n)) return 0.0;
  return v_eps_size(total_size(n), eps);
}

VBounds v_eps_bounds(Count m_size, Count n_size, double eps) {
  if (!(eps > 0.0)) throw DomainError(fmt::format("eps must be > 0 (got {})", eps));
  if (m_size < 1 || m_size > n_size) {
    throw DomainError(fmt::format(
        "v_eps_bounds needs 1 <= |m| <= |n| (got |m| = {}, |n| = {})", m_size,
        n_size));
  }
  const double m = static_cast<double>(m_size);
  const double n = static_cast<double>(n_size);
  return {(std::pow(m + 1.0, -eps) - std::pow(n + 1.0, -eps)) / eps,
          (std::pow(m, -eps) - std::pow(n, -eps)) / eps};
}

double apply_generator(const Model& model, const StateFunction& f, StateView n) {
  const auto moves = transitions(model, n);
  const double here = f(n);
  double acc = 0.0;
  for (const auto& t : moves) acc += t.rate * (f(StateView(t.target)) - here);
  return acc;
}

double lyapunov_drift(const Model& model, StateView n, double eps) {
  if (!is_interior(n)) {
    throw DomainError(fmt::format("generator evaluated at non-interior state {}",
                                  format_state(n)));
  }
  const Count s = total_size(n);
  const double v = v_eps_size(s, eps);
  thread_local std::vector<Move> moves;
  moves.clear();
  model.moves(n, moves);
  double acc = 0.0;
  std::size_t litter_type = model.dimension();
  std::vector<Litter> litters;
  for (const auto& m : moves) {
    switch (m.kind) {
      case MoveKind::kBirth: {
        Count grow = 1;
        if (model.has_multibirth()) {
          if (litter_type != m.type) {
            litters = model.litters(n, m.type);
            litter_type = m.type;
          }
          grow = total_size(litters[m.litter].increment);
        }
        acc += m.rate * partial_sum(s, s + grow, eps);
        break;
      }
      case MoveKind::kDeath:
        acc += m.rate * (n[m.type] == 1 ? -v : -term(s, eps));
        break;
      case MoveKind::kCatastrophe:
        acc -= m.rate * v;
        break;
    }
  }
  return acc;
}

double absorption_drift(const Model& model, StateView n) {
  thread_local std::vector<Move> moves;
  moves.clear();
  model.moves(n, moves);
  double acc = 0.0;
  for (const auto& m : moves) {
    if (m.kind == MoveKind::kCatastrophe ||
        (m.kind == MoveKind::kDeath && n[m.type] == 1)) {
      acc -= m.rate;
    }
  }
  return acc;
}

std::optional<std::pair<double, double>> declared_exponents(const Model& model) {
  const auto& rates = model.rates();
  switch (rates.family) {
    case RateFamily::kConstant:
      return std::pair{0.0, 0.0};
    case RateFamily::kPowerLaw:
      return std::pair{rates.beta1.value_or(0.0), rates.beta2.value_or(0.0)};
    case RateFamily::kTabulated:
    case RateFamily::kCallback:
      if (rates.beta1 || rates.beta2) {
        return std::pair{rates.beta1.value_or(0.0), rates.beta2.value_or(0.0)};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

LyapunovParams LyapunovParams::for_model(const Model& model) {
  const double beta2 = declared_exponents(model).value_or(std::pair{0.0, 0.0}).second;
  LyapunovParams p;
  p.window_hi = model.gamma() * (1.0 - beta2);
  p.eps = p.window_hi / 2.0;
  return p;
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kPassOnRange:
      return "pass-on-range";
    case Verdict::kFailWithWitness:
      return "fail-with-witness";
    case Verdict::kInconclusive:
      return "inconclusive";
  }
  return "unknown";
}

AssumptionReport check_h1(const Model& model, Count n_check,
                          const CheckOptions& options) {
  auto rep = make_report("H1", model, n_check, options);
  const double gamma = model.gamma();
  const auto shells = shells_for(model.dimension(), n_check, options);
  if (shells.empty()) {
    rep.notes.push_back("no interior state with |n| <= n_check");
    return rep;
  }
  const auto rates = rate_sweep(model, shells, options);
  const auto g = exponents_for(model, shells, rates, n_check);
  if (g.fit_failed) {
    rep.notes.push_back("exponents undeclared and the top decade is too short to fit them");
    return rep;
  }
  if (g.fitted) {
    rep.notes.push_back("beta1, beta2 fitted by log-log least squares on the top decade");
  }
  const auto bounds = bounds_for(shells, rates, g.beta1, g.beta2, n_check);
  rep.constants = {{"b_bar", bounds.b_bar},    {"d_bar", bounds.d_bar},
                   {"c_low", bounds.c_low},    {"beta1", g.beta1},
                   {"beta2", g.beta2},         {"gamma", gamma},
                   {"beta1_plus_gamma_beta2", g.beta1 + gamma * g.beta2}};
  rep.worst_margin = gamma - (g.beta1 + gamma * g.beta2);

  if (!check_birth_death_growth(rep, g, bounds, rates)) return rep;
  for (const auto& shell : rates) {
    if (shell.bad_comp) {
      fail(rep, *shell.bad_comp,
           fmt::format("c_ii(n) is not positive at n = {}",
                       format_state(*shell.bad_comp)));
      return rep;
    }
  }
  const auto& top = rates.back();
  if (!(g.beta2 < 1.0)) {
    fail(rep, top.comp_min.where, fmt::format("beta2 = {} is not < 1", g.beta2));
    return rep;
  }
  if (!(g.beta1 + gamma * g.beta2 < gamma)) {
    fail(rep, top.birth_max.where,
         fmt::format("beta1 + gamma beta2 = {} is not < gamma = {}",
                     g.beta1 + gamma * g.beta2, gamma));
    return rep;
  }
  if (!g.fitted && bounds.c_growth < -kGrowthSlope) {
    fail(rep, top.comp_min.where,
         fmt::format("min_i c_ii(n) |n|^beta2 decays like |n|^{:.3g} on the top "
                     "decade; beta2 = {} is too small",
                     bounds.c_growth, g.beta2));
    return rep;
  }
  rep.verdict = Verdict::kPassOnRange;
  return rep;
}

AssumptionReport check_h2(const Model& model, Count n_check, double threshold,
                          const CheckOptions& options) {
  auto rep = make_report("H2", model, n_check, options);
  const std::size_t r = model.dimension();
  const auto shells = shells_for(r, n_check, options);
  if (shells.empty()) {
    rep.notes.push_back("no interior state with |n| <= n_check");
    return rep;
  }
  struct Acc {
    Extremum ratio;
  };
  const auto acc = sweep_shells<Acc>(r, shells, options, [&](Acc& a, StateView n) {
    const double s = static_cast<double>(total_size(n));
    double cross = 0.0;
    double diag = 0.0;
    double diag_min = kInf;
    for (std::size_t j = 0; j < r; ++j) {
      for (std::size_t k = 0; k < r; ++k) {
        const double c = model.competition(n, j, k);
        if (j == k) {
          diag += c;
          diag_min = std::min(diag_min, c);
        } else {
          cross += c;
        }
      }
    }
    a.ratio.take_min(diag_min / (cross + diag / s), n);
  });
  std::vector<double> y(shells.size());
  for (std::size_t k = 0; k < shells.size(); ++k) y[k] = acc[k].ratio.value;

  const double at_top = y.back();
  const double slope = top_decade_slope(shells, y, n_check);
  const bool monotone = nondecreasing_top_half(shells, y, n_check);
  rep.constants = {{"ratio_at_n_check", at_top},
                   {"growth_exponent", slope},
                   {"threshold", threshold}};
  rep.worst_margin = at_top - threshold;
  if (monotone && at_top >= threshold && slope >= kGrowthSlope) {
    rep.verdict = Verdict::kPassOnRange;
    return rep;
  }
  if (std::isnan(slope) || slope < kBoundedSlope) {
    fail(rep, acc.back().ratio.where,
         fmt::format("ratio does not grow on the top decade (log-log slope {:.3g}); "
                     "minimum {:.6g} at n = {}",
                     slope, at_top, format_state(acc.back().ratio.where)));
    return rep;
  }
  rep.notes.push_back("growth of the ratio not established on the range");
  return rep;
}

AssumptionReport check_remark1(const Model& model, Count n_check,
                               std::optional<double> c_r,
                               const CheckOptions& options) {
  const std::size_t r = model.dimension();
  const double gamma = model.gamma();
  const double cr = c_r.value_or(std::pow(static_cast<double>(r), -(1.0 + gamma)));
  if (!(cr > 0.0)) {
    throw DomainError(fmt::format("check.C_r: must be > 0 (got {})", cr));
  }
  auto rep = make_report("Remark1", model, n_check, options);
  rep.constants["C_r"] = cr;

  if (r == 1) {
    // No mixed terms: the condition stands in for (H2) and the c_ii part
    // of (H1), so check those.
    const auto h1 = check_h1(model, n_check, options);
    const auto h2 = check_h2(model, n_check, 10.0, options);
    rep.notes.push_back("r = 1: checked as H1 and H2");
    for (const auto& [k, v] : h1.constants) rep.constants["H1." + k] = v;
    for (const auto& [k, v] : h2.constants) rep.constants["H2." + k] = v;
    for (const auto* sub : {&h1, &h2}) {
      if (sub->verdict == Verdict::kFailWithWitness) {
        rep.verdict = Verdict::kFailWithWitness;
        rep.witness = sub->witness;
        for (const auto& note : sub->notes) rep.notes.push_back(sub->hypothesis + ": " + note);
        return rep;
      }
    }
    rep.verdict = (h1.verdict == Verdict::kPassOnRange &&
                   h2.verdict == Verdict::kPassOnRange)
                      ? Verdict::kPassOnRange
                      : Verdict::kInconclusive;
    return rep;
  }

  const auto shells = shells_for(r, n_check, options);
  if (shells.empty()) {
    rep.notes.push_back("no interior state with |n| <= n_check");
    return rep;
  }
  const double beta1 = declared_exponents(model).value_or(std::pair{0.0, 0.0}).first;
  if (!declared_exponents(model)) rep.notes.push_back("beta1 undeclared; using 0");
  const double growth_power = std::max(beta1, gamma);

  struct Acc {
    Extremum slack;   // lhs - C_r rhs
    Extremum growth;  // lhs / |n|^(beta1 v gamma)
  };
  const auto acc = sweep_shells<Acc>(r, shells, options, [&](Acc& a, StateView n) {
    const double s = static_cast<double>(total_size(n));
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double pw = pow_gamma(model.competition_pressure(n, j), gamma);
      if (n[j] == 1) {
        rhs += pw;
      } else {
        lhs += static_cast<double>(n[j]) / s * pw;
      }
    }
    a.slack.take_min(lhs - cr * rhs, n);
    a.growth.take_min(lhs / std::pow(s, growth_power), n);
  });

  std::optional<std::size_t> last_bad;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    if (acc[k].slack.value < 0.0) last_bad = k;
  }
  const double half = static_cast<double>(n_check) / 2.0;
  if (last_bad && static_cast<double>(shells[*last_bad].size) >= half) {
    const auto& w = acc[*last_bad].slack.where;
    fail(rep, w,
         fmt::format("left side below C_r times right side at n = {} (slack {:.6g})",
                     format_state(w), acc[*last_bad].slack.value));
    return rep;
  }
  const Count n0 = last_bad ? shells[*last_bad + 1].size : shells.front().size;
  rep.constants["n0"] = static_cast<double>(n0);
  double worst = kInf;
  for (std::size_t k = last_bad ? *last_bad + 1 : 0; k < shells.size(); ++k) {
    worst = std::min(worst, acc[k].slack.value);
  }
  rep.worst_margin = worst;

  std::vector<double> y(shells.size());
  for (std::size_t k = 0; k < shells.size(); ++k) y[k] = acc[k].growth.value;
  const double slope = top_decade_slope(shells, y, n_check);
  rep.constants["growth_exponent"] = slope;
  rep.constants["growth_power"] = growth_power;
  if (nondecreasing_top_half(shells, y, n_check) && slope >= kGrowthSlope) {
    rep.verdict = Verdict::kPassOnRange;
    return rep;
  }
  if (std::isnan(slope) || slope < kBoundedSlope) {
    fail(rep, acc.back().growth.where,
         fmt::format("left side is not >> |n|^{} on the top decade (log-log slope "
                     "{:.3g}); minimum at n = {}",
                     growth_power, slope, format_state(acc.back().growth.where)));
    return rep;
  }
  rep.notes.push_back("growth of the left side not established on the range");
  return rep;
}

double thm2_lhs(std::size_t r, double gamma, double eps) {
  const double x = eps / gamma;
  return (static_cast<double>(r) - 1.0) / gamma * std::pow(1.0 - x, 1.0 / x - 1.0);
}

AssumptionReport check_thm2(std::size_t r, double gamma) {
  if (r < 1 || !(gamma > 0.0)) {
    throw DomainError(fmt::format("check_thm2 needs r >= 1 and gamma > 0 (got {}, {})",
                                  r, gamma));
  }
  AssumptionReport rep;
  rep.hypothesis = "Thm2";
  const double threshold = 1.0 + std::numbers::e * gamma;
  rep.constants = {{"r", static_cast<double>(r)},
                   {"gamma", gamma},
                   {"threshold", threshold}};
  rep.worst_margin = threshold - static_cast<double>(r);
  const bool arithmetic = static_cast<double>(r) < threshold;

  // eps = gamma x with x on a geometric grid in (0, 1).
  double best_eps = std::nan("");
  double best_lhs = kInf;
  for (int k = 0; k <= 400; ++k) {
    const double x = std::pow(10.0, -8.0 + 8.0 * k / 400.0) * (1.0 - 1e-9);
    const double eps = gamma * x;
    if (!(eps > 0.0 && eps < gamma)) continue;
    const double lhs = thm2_lhs(r, gamma, eps);
    if (lhs < best_lhs) {
      best_lhs = lhs;
      best_eps = eps;
    }
  }
  if (best_lhs < 1.0) {
    double delta = std::min(1.0 - best_lhs, std::nextafter(1.0, 0.0));
    while (delta > 0.0 && !(best_lhs <= 1.0 - delta)) delta = std::nextafter(delta, 0.0);
    if (delta > 0.0) {
      rep.constants["eps"] = best_eps;
      rep.constants["delta"] = delta;
      rep.constants["lhs"] = best_lhs;
    }
  }
  const bool found = rep.constants.count("delta") > 0;
  if (arithmetic && found) {
    rep.verdict = Verdict::kPassOnRange;
  } else if (!arithmetic) {
    fail(rep, unit_state(r),
         fmt::format("r = {} is not < 1 + e gamma = {:.6f}; the bound fails at every "
                     "state, reported at (1,...,1)",
                     r, threshold));
  } else {
    rep.notes.push_back("r < 1 + e gamma but no (eps, delta) found on the grid");
  }
  return rep;
}

AssumptionReport check_thm2(const Model& model, Count n_check,
                            const CheckOptions& options) {
  const std::size_t r = model.dimension();
  auto rep = check_thm2(r, model.gamma());
  rep.n_check = n_check;
  rep.sweep = sweep_text(r, n_check, options);
  if (rep.verdict == Verdict::kFailWithWitness) return rep;

  const auto shells = shells_for(r, n_check, options);
  const State unit = unit_state(r);
  const double c = model.competition(unit, 0, 0);
  rep.constants["c"] = c;
  struct Acc {
    std::optional<State> off;
  };
  const auto neutral = sweep_shells<Acc>(r, shells, options, [&](Acc& a, StateView n) {
    if (a.off) return;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        if (model.competition(n, i, j) != c) {
          a.off = State(n.begin(), n.end());
          return;
        }
      }
    }
  });
  if (!(c > 0.0)) {
    fail(rep, unit, "H4: competition constant c is not positive");
    return rep;
  }
  for (const auto& a : neutral) {
    if (a.off) {
      fail(rep, *a.off,
           fmt::format("H4: competition is not neutral at n = {}", format_state(*a.off)));
      return rep;
    }
  }

  const auto rates = rate_sweep(model, shells, options);
  const auto g = exponents_for(model, shells, rates, n_check);
  if (g.fit_failed) {
    rep.verdict = Verdict::kInconclusive;
    rep.notes.push_back("H3: exponents undeclared and not fittable on the range");
    return rep;
  }
  const auto bounds = bounds_for(shells, rates, g.beta1, 0.0, n_check);
  rep.constants["b_bar"] = bounds.b_bar;
  rep.constants["d_bar"] = bounds.d_bar;
  rep.constants["beta1"] = g.beta1;
  if (!check_birth_death_growth(rep, g, bounds, rates)) return rep;
  if (!(g.beta1 < model.gamma())) {
    fail(rep, rates.back().birth_max.where,
         fmt::format("H3: beta1 = {} is not < gamma = {}", g.beta1, model.gamma()));
    return rep;
  }
  if (g.fitted) rep.notes.push_back("H3: beta1 fitted on the top decade");
  return rep;
}

DriftReport check_drift(const Model& model, double eps, Count n_check,
                        const CheckOptions& options) {
  auto params = LyapunovParams::for_model(model);
  params.eps = eps;
  if (!params.admissible()) {
    throw DomainError(fmt::format("check.eps: {} is outside the admissible window (0, {})",
                                  eps, params.window_hi));
  }
  const std::size_t r = model.dimension();
  const double beta2 = declared_exponents(model).value_or(std::pair{0.0, 0.0}).second;
  const double p = model.gamma() - eps - model.gamma() * beta2;

  DriftReport rep;
  rep.inequality = "L V_eps(n) <= C1 - C2 |n|^p";
  rep.eps = eps;
  rep.n_check = n_check;
  rep.sweep = sweep_text(r, n_check, options);
  rep.constants["p"] = p;
  if (!declared_exponents(model)) rep.notes.push_back("beta2 undeclared; using 0");

  const auto shells = shells_for(r, n_check, options);
  if (shells.empty()) {
    rep.notes.push_back("no interior state with |n| <= n_check");
    return rep;
  }
  auto sweep = [&] {
    return sweep_shells<DriftShell>(r, shells, options, [&](DriftShell& a, StateView n) {
      a.lv_max.take_max(lyapunov_drift(model, n, eps), n);
    });
  };
  const auto acc = sweep();
  for (std::size_t k = 0; k < shells.size(); ++k) {
    rep.residual.push_back({shells[k].size, acc[k].lv_max.value});
  }
  const auto& top = acc.back().lv_max;
  if (!(top.value < 0.0)) {
    rep.verdict = Verdict::kFailWithWitness;
    rep.witness = top.where;
    rep.notes.push_back(fmt::format(
        "L V_eps is not negative at the top of the range: {:.6g} at n = {}", top.value,
        format_state(top.where)));
    return rep;
  }

  // Linear fit of max L V against |n|^p on the top decade.
  const double lo = static_cast<double>(n_check) / 10.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    const double s = static_cast<double>(shells[k].size);
    if (s < lo) continue;
    const double x = std::pow(s, p);
    sx += x;
    sy += acc[k].lv_max.value;
    sxx += x * x;
    sxy += x * acc[k].lv_max.value;
    ++m;
  }
  double slope = std::nan("");
  if (m >= 2) {
    const double dm = static_cast<double>(m);
    const double denom = dm * sxx - sx * sx;
    if (denom > 0.0) slope = (dm * sxy - sx * sy) / denom;
  }
  const double s_top = static_cast<double>(shells.back().size);
  double c2 = 0.0;
  if (slope < 0.0) {
    c2 = -slope / 2.0;
  } else {
    c2 = -top.value / (2.0 * std::pow(s_top, p));
    rep.notes.push_back("asymptotic slope not negative on the top decade; C2 from the top shell");
  }
  double c1 = -kInf;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    const double s = static_cast<double>(shells[k].size);
    c1 = std::max(c1, acc[k].lv_max.value + c2 * std::pow(s, p));
  }
  if (!(c1 > 0.0)) c1 = std::numeric_limits<double>::min();

  // Re-verify on a fresh sweep and raise C1 past any rounding gap.
  const auto again = sweep();
  double margin = kInf;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    const double s = static_cast<double>(shells[k].size);
    while (again[k].lv_max.value > c1 - c2 * std::pow(s, p)) {
      c1 = std::nextafter(c1, kInf);
    }
  }
  for (std::size_t k = 0; k < shells.size(); ++k) {
    const double s = static_cast<double>(shells[k].size);
    margin = std::min(margin, c1 - c2 * std::pow(s, p) - again[k].lv_max.value);
  }
  rep.constants["C1"] = c1;
  rep.constants["C2"] = c2;
  rep.worst_margin = margin;
  rep.verdict = Verdict::kPassOnRange;
  return rep;
}

DriftReport check_conditional_drift(const Model& model, const TruncatedSpace& space,
                                    const SubGenerator& q,
                                    std::span<const std::vector<double>> laws,
                                    double step, double eps) {
  if (!(eps > 0.0)) throw DomainError(fmt::format("check.eps: must be > 0 (got {})", eps));
  if (laws.empty()) throw DomainError("conditional drift needs at least one law");
  if (!(step > 0.0)) throw DomainError("conditional drift needs a positive time step");
  const std::size_t size = space.size();
  if (q.size() != size) throw DomainError("generator and space sizes differ");
  for (const auto& law : laws) {
    if (law.size() != size) throw DomainError("law size differs from the space size");
  }
  const double beta2 = declared_exponents(model).value_or(std::pair{0.0, 0.0}).second;
  const double p = model.gamma() - model.gamma() * beta2 - eps;

  // Generator of the truncated chain: leaving the space counts as absorption.
  std::vector<double> v(size), lv(size), l1(size), growth(size);
  for (std::size_t i = 0; i < size; ++i) {
    v[i] = v_eps(space.state(i), eps);
    growth[i] = std::pow(static_cast<double>(total_size(space.state(i))), p);
  }
  kernels::right_multiply(q, v, lv);
  const auto kill = q.kill();
  for (std::size_t i = 0; i < size; ++i) l1[i] = -kill[i];

  const std::size_t steps = laws.size() - 1;
  std::vector<double> g(laws.size()), h(laws.size()), mv(laws.size());
  for (std::size_t k = 0; k < laws.size(); ++k) {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      const double w = laws[k][i];
      a += w * lv[i];
      b += w * v[i];
      c += w * l1[i];
      d += w * growth[i];
    }
    g[k] = a - b * c;
    mv[k] = b;
    h[k] = d;
  }

  DriftReport rep;
  rep.inequality = "mu_t(V) - mu_0(V) <= int_0^t [mu_s(LV) - mu_s(V) mu_s(L1)] ds";
  rep.eps = eps;
  rep.n_check = space.level();
  rep.sweep = fmt::format("time grid 0:{}:{}", static_cast<double>(steps) * step, step);

  double margin = kInf;
  double err = 0.0;
  double integral = 0.0;
  double coarse = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    integral += step * 0.5 * (g[k - 1] + g[k]);
    if (k % 2 == 0) {
      coarse += 2.0 * step * 0.5 * (g[k - 2] + g[k]);
      err = std::max(err, std::abs(integral - coarse) / 3.0);
    }
    const double lhs = mv[k] - mv[0];
    margin = std::min(margin, integral - lhs);
    rep.residual.push_back({static_cast<Count>(k), integral - lhs});
  }
  if (steps == 0) margin = 0.0;
  rep.worst_margin = margin;
  rep.error_estimate = err;

  double c = 1.0;
  for (std::size_t k = 0; k < laws.size(); ++k) {
    c = std::max(c, (g[k] + std::sqrt(g[k] * g[k] + 4.0 * h[k])) / 2.0);
  }
  if (!(c > 1.0)) c = std::nextafter(1.0, 2.0);
  for (std::size_t k = 0; k < laws.size(); ++k) {
    while (g[k] > c - h[k] / c) c = std::nextafter(c, kInf);
  }
  rep.constants["C"] = c;
  rep.constants["p"] = p;
  rep.constants["max_mu_V"] = *std::max_element(mv.begin(), mv.end());
  rep.constants["V_sup_bound"] = 1.0 + 1.0 / eps;
  rep.notes.push_back(
      "mu_t(V) is bounded by 1 + 1/eps; the bound 1/eps used in the drift argument is "
      "smaller, the safe value is reported");

  if (margin >= 0.0) {
    rep.verdict = Verdict::kPassOnRange;
  } else if (-margin <= err) {
    rep.verdict = Verdict::kInconclusive;
    rep.notes.push_back("quadrature error estimate exceeds the margin; refine the grid");
  } else {
    rep.verdict = Verdict::kFailWithWitness;
    rep.witness = State(space.state(space.unit_index()).begin(),
                        space.state(space.unit_index()).end());
    rep.notes.push_back("inequality violated beyond the quadrature error estimate");
  }
  return rep;
}

DriftReport check_conditional_drift(const Model& model, const TruncatedSpace& space,
                                    const SubGenerator& q,
                                    std::span<const double> initial, double step,
                                    double t_max, double eps) {
  if (!(step > 0.0) || !(t_max >= 0.0)) {
    throw DomainError("conditional drift needs step > 0 and t_max >= 0");
  }
  const auto steps = static_cast<std::size_t>(std::llround(t_max / step));
  std::vector<std::vector<double>> laws;
  laws.reserve(steps + 1);
  std::vector<double> x(initial.begin(), initial.end());
  Propagator prop(q);
  auto normalized = [](std::vector<double> y) {
    double s = 0.0;
    for (double w : y) s += w;
    if (!(s > kSurvivalFloor)) throw NumericalError("survival probability underflow");
    for (double& w : y) w /= s;
    return y;
  };
  laws.push_back(normalized(x));
  for (std::size_t k = 0; k < steps; ++k) {
    prop.left(x, step);
    laws.push_back(normalized(x));
    x = laws.back();
  }
  return check_conditional_drift(model, space, q, laws, step, eps);
}

AssumptionReport check_catastrophes(const Model& model, Count n_check,
                                    const CheckOptions& options) {
  if (!model.has_catastrophes()) {
    throw DomainError("extensions.catastrophe: extension not enabled");
  }
  const std::size_t r = model.dimension();
  auto rep = make_report("catastrophes", model, n_check, options);

  if (r == 1) {
    const Count n_max = n_check;
    std::vector<double> b(n_max + 1), d(n_max + 1), a(n_max + 1);
    for (Count n = 1; n <= n_max; ++n) {
      const State s{n};
      const double dn = static_cast<double>(n);
      b[n] = dn * model.birth(s, 0);
      d[n] = dn * model.per_capita_death(s, 0);
      a[n] = model.catastrophe(s);
    }
    // Suffix extremes over [n0, n_max]; delta(n0) = max a_n/n / c_low(n0).
    std::vector<double> b_bar(n_max + 2, 0.0), c_low(n_max + 2, kInf),
        a_rate(n_max + 2, 0.0);
    std::vector<Count> a_arg(n_max + 2, n_max);
    for (Count n = n_max; n >= 1; --n) {
      const double dn = static_cast<double>(n);
      b_bar[n] = std::max(b_bar[n + 1], b[n] / dn);
      c_low[n] = std::min(c_low[n + 1], d[n] / (dn * dn));
      if (a[n] / dn >= a_rate[n + 1]) {
        a_rate[n] = a[n] / dn;
        a_arg[n] = n;
      } else {
        a_rate[n] = a_rate[n + 1];
        a_arg[n] = a_arg[n + 1];
      }
    }
    auto delta_at = [&](Count n0) {
      return c_low[n0] > 0.0 ? a_rate[n0] / c_low[n0] : kInf;
    };
    const Count half = std::max<Count>(1, n_max / 2);
    for (Count n0 = 1; n0 <= half; ++n0) {
      const double delta = delta_at(n0);
      if (delta < 1.0) {
        rep.constants = {{"b_bar", b_bar[n0]},
                         {"c_low", c_low[n0]},
                         {"delta", delta},
                         {"n0", static_cast<double>(n0)}};
        rep.worst_margin = 1.0 - delta;
        if (delta == 0.0) {
          rep.notes.push_back("a_n vanishes from n0 on; any delta in (0,1) works");
        }
        rep.verdict = Verdict::kPassOnRange;
        return rep;
      }
    }
    const double delta = delta_at(half);
    rep.constants = {{"b_bar", b_bar[half]}, {"c_low", c_low[half]}, {"delta", delta}};
    rep.worst_margin = 1.0 - delta;
    fail(rep, State{a_arg[half]},
         fmt::format("a_n <= delta c n needs delta = {:.6g} >= 1 at n = {}", delta,
                     a_arg[half]));
    return rep;
  }

  const auto shells = shells_for(r, n_check, options);
  if (shells.empty()) {
    rep.notes.push_back("no interior state with |n| <= n_check");
    return rep;
  }
  const double gamma = model.gamma();
  struct Acc {
    Extremum ratio;
  };
  const auto acc = sweep_shells<Acc>(r, shells, options, [&](Acc& x, StateView n) {
    double cmin = kInf;
    for (std::size_t i = 0; i < r; ++i) cmin = std::min(cmin, model.competition(n, i, i));
    const double s = static_cast<double>(total_size(n));
    x.ratio.take_max(model.catastrophe(n) / (cmin * std::pow(s, gamma)), n);
  });
  std::vector<double> y(shells.size());
  for (std::size_t k = 0; k < shells.size(); ++k) y[k] = acc[k].ratio.value;
  const double slope = top_decade_slope(shells, y, n_check);
  rep.constants = {{"ratio_at_n_check", y.back()}, {"decay_exponent", slope}};
  const bool zero = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; });
  if (zero || (nonincreasing_top_half(shells, y, n_check) && slope <= -kGrowthSlope)) {
    rep.verdict = Verdict::kPassOnRange;
    return rep;
  }
  if (std::isnan(slope) || slope > -kBoundedSlope) {
    fail(rep, acc.back().ratio.where,
         fmt::format("a(n) / (min_i c_ii(n) |n|^gamma) does not decay (log-log slope "
                     "{:.3g}); maximum at n = {}",
                     slope, format_state(acc.back().ratio.where)));
    return rep;
  }
  rep.notes.push_back("decay of the ratio not established on the range");
  return rep;
}

AssumptionReport check_multibirth(const Model& model) {
  if (!model.has_multibirth()) {
    throw DomainError("extensions.litter_sizes: multibirth extension not enabled");
  }
  AssumptionReport rep;
  rep.hypothesis = "multibirth";
  const auto& law = *model.extensions().multibirth;
  const State unit = unit_state(model.dimension());
  if (!law.per_type.empty()) {
    double m = 0.0;
    for (const auto& litters : law.per_type) {
      double mean = 0.0;
      for (const auto& l : litters) {
        mean += static_cast<double>(total_size(l.increment)) * l.probability;
      }
      m = std::max(m, mean);
    }
    rep.constants["M"] = m;
    rep.verdict = Verdict::kPassOnRange;
    rep.notes.push_back("M computed over the declared finite support");
    return rep;
  }
  if (!law.declared_mean) {
    rep.notes.push_back("litter law given by a callback without a declared mean");
    return rep;
  }
  rep.constants["M"] = *law.declared_mean;
  if (std::isfinite(*law.declared_mean)) {
    rep.verdict = Verdict::kPassOnRange;
    rep.notes.push_back("M read from the declared mean");
  } else {
    fail(rep, unit, "declared mean litter size is infinite");
  }
  return rep;
}

}  // namespace bdqsd
