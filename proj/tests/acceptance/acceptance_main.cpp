// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <fmt/core.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "../test_support.hpp"
#include "bdqsd/config.hpp"
#include "bdqsd/convergence.hpp"
#include "bdqsd/lyapunov.hpp"
#include "bdqsd/simulation.hpp"
#include "bdqsd/truncation.hpp"

using namespace bdqsd;
using bdqsd::testing::config_path;
using bdqsd::testing::Gen;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Instance {
  ConfigDocument cfg;
  Model model;
  TruncatedSpace space;
  SubGenerator q;
  QsdResult qsd;
};

Instance load_instance(const std::string& name) {
  auto cfg = load_config(config_path(name));
  auto model = build_model(cfg);
  auto space = enumerate_space(cfg.r, *cfg.n_trunc);
  auto q = assemble(model, space);
  auto qsd = solve_qsd(q, {cfg.tol, cfg.max_iter});
  return {std::move(cfg), std::move(model), std::move(space), std::move(q), std::move(qsd)};
}

// Principal left eigenvector of the dense generator, normalized to a law.
// The rate is the leak sum_i v_i kill_i of that eigenvector.
std::pair<std::vector<double>, double> dense_qsd(const SubGenerator& q) {
  const auto n = static_cast<Eigen::Index>(q.size());
  Eigen::MatrixXd qt = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      qt(j, i) = q.entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(qt);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < n; ++k) {
    if (es.eigenvalues()(k).real() > es.eigenvalues()(best).real()) best = k;
  }
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  v /= v.sum();
  double leak = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) leak += v(i) * q.kill()[static_cast<std::size_t>(i)];
  return {std::vector<double>(v.data(), v.data() + n), leak};
}

// Fixed point at the listed times and survival against exp(-lambda0 t).
struct Stationarity {
  double worst_tv = 0.0;
  double worst_rel = 0.0;
};

Stationarity stationarity(const Instance& inst) {
  Stationarity s;
  for (double t : {0.5, 1.0, 5.0}) {
    const auto res = transient_conditional(inst.q, inst.qsd.alpha, t);
    s.worst_tv = std::max(s.worst_tv, tv_distance(res.law, inst.qsd.alpha));
  }
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.05 * k;
    const double exact = std::exp(-inst.qsd.lambda0 * t);
    const double surv = survival_probability(inst.q, inst.qsd.alpha, t);
    s.worst_rel = std::max(s.worst_rel, std::abs(surv - exact) / exact);
  }
  return s;
}

// V_eps by direct summation in long double.
double v_reference(Count size, double eps) {
  long double total = 0.0L;
  for (Count j = size; j >= 1; --j) total += std::pow(static_cast<long double>(j), -(1.0L + eps));
  return static_cast<double>(total);
}

Outcome solver_oracle() {
  Gen gen(20240601);
  const double gammas[] = {0.5, 1.0, 2.0};
  double worst_tv = 0.0, worst_dl = 0.0, worst_states = 0.0;
  Stopwatch clock;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = trial % 2 + 1;
    std::vector<double> b(r), d(r), c(r * r);
    for (auto& x : b) x = gen.uniform(0.5, 4.0);
    for (auto& x : d) x = gen.uniform(0.0, 1.0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        c[i * r + j] = i == j ? gen.uniform(0.5, 2.0) : gen.uniform(0.0, 0.5);
      }
    }
    const auto model =
        bdqsd::testing::constant_model(r, gammas[(trial / 2) % 3], b, d, c);
    const auto space = enumerate_space(r, r == 1 ? 60 : 31);
    const auto q = assemble(model, space);
    const auto power = solve_qsd(q);
    const auto [alpha, lambda] = dense_qsd(q);
    worst_tv = std::max(worst_tv, tv_distance(power.alpha, alpha));
    worst_dl = std::max(worst_dl, std::abs(power.lambda0 - lambda));
    worst_states = std::max(worst_states, static_cast<double>(space.size()));
  }
  const double secs = clock.seconds();
  return {worst_tv < 1e-10 && worst_dl < 1e-10 && secs < 30.0 && worst_states <= 500,
          fmt::format("max TV {:.2e}, max |dlambda0| {:.2e}, max states {}, {:.1f} s", worst_tv,
                      worst_dl, worst_states, secs)};
}

Outcome fixed_point(const Instance& ref) {
  const auto s = stationarity(ref);
  return {s.worst_tv < 1e-8, fmt::format("N = {}, max TV over t in {{0.5, 1, 5}} = {:.2e}",
                                         ref.space.level(), s.worst_tv)};
}

Outcome mortality_plateau(const Instance& ref) {
  const auto s = stationarity(ref);
  return {s.worst_rel < 1e-6,
          fmt::format("lambda0 = {:.10f}, max relative error on [0, 5] = {:.2e}",
                      ref.qsd.lambda0, s.worst_rel)};
}

Outcome convergence_rate(const Instance& ref) {
  const auto h2 = check_h2(ref.model, ref.cfg.n_check);
  const auto curve =
      convergence_curve(ref.q, ref.space, ref.qsd, ref.cfg.initials, ref.cfg.t_grid);
  const auto fits = fit_rate(curve);
  bool dominated = true;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (fits[i].degenerate) dominated = false;
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      const double tv = curve.tv[i][k];
      if (curve.times[k] < fits[i].t_first || curve.times[k] > fits[i].t_last) continue;
      if (tv < kFitWindowLow || tv > kFitWindowHigh) continue;
      ++checked;
      if (tv > fits[i].envelope(curve.times[k])) dominated = false;
    }
  }
  const double ratio = fits[0].rate / fits[1].rate;
  return {h2.verdict == Verdict::kPassOnRange && dominated && checked > 0 &&
              std::abs(ratio - 1.0) <= 0.1,
          fmt::format("H2 {}, lambda fits {:.4f} (1,1) / {:.4f} (20,20), ratio {:.4f}, "
                      "{} window points dominated: {}",
                      to_string(h2.verdict), fits[0].rate, fits[1].rate, ratio, checked,
                      dominated ? "yes" : "no")};
}

Outcome mixing_certificates(const Instance& ref, const Instance& logistic) {
  bool pass = true;
  std::string detail;
  for (const Instance* inst : {&ref, &logistic}) {
    const auto a1 = verify_a1(inst->q, inst->space, 2.0);
    const auto a2 = verify_a2(inst->q, inst->space, inst->cfg.t_grid);
    const double d1 = std::abs(*a1.c1 - *a1.c1_recomputed);
    const double d2 = std::abs(*a2.c2 - *a2.c2_recomputed);
    pass = pass && *a1.c1 > 0.0 && *a2.c2 > 0.0 && d1 <= 1e-9 && d2 <= 1e-9;
    detail += fmt::format("{}r={}: c1 {:.4e} (d {:.1e}), c2 {:.4e} (d {:.1e})",
                          detail.empty() ? "" : "; ", inst->cfg.r, *a1.c1, d1, *a2.c2, d2);
  }
  return {pass, detail};
}

Outcome lyapunov_machinery(const Instance& ref) {
  Gen gen(99);
  std::size_t bad_bounds = 0;
  for (int k = 0; k < 10000; ++k) {
    const double eps = gen.uniform(0.01, 2.0);
    Count m = gen.integer(1, 5000);
    Count n = gen.integer(1, 5000);
    if (m > n) std::swap(m, n);
    const double vm = v_eps_size(m, eps);
    const double vn = v_eps_size(n, eps);
    const double vm_ref = v_reference(m, eps);
    const double vn_ref = v_reference(n, eps);
    const auto br = v_eps_bounds(m, n, eps);
    const double slack = 1e-12;
    const bool ok = vn >= 1.0 && vn <= 1.0 + 1.0 / eps && std::abs(vm - vm_ref) < slack &&
                    std::abs(vn - vn_ref) < slack && br.lower <= vn_ref - vm_ref + slack &&
                    vn_ref - vm_ref <= br.upper + slack;
    if (!ok) ++bad_bounds;
  }

  const auto logistic = bdqsd::testing::logistic_1d();
  const Count n_check = 10000;
  const auto drift = check_drift(logistic, 0.5, n_check);
  bool drift_ok = drift.verdict == Verdict::kPassOnRange;
  double c1 = 0.0, c2 = 0.0;
  if (drift_ok) {
    c1 = drift.constants.at("C1");
    c2 = drift.constants.at("C2");
    const double p = drift.constants.at("p");
    drift_ok = c1 > 0.0 && c2 > 0.0;
    const StateFunction v = [](StateView n) { return v_eps(n, 0.5); };
    for (Count n = 1; n <= n_check && drift_ok; ++n) {
      const State s{n};
      const double lv = apply_generator(logistic, v, s);
      if (lv > c1 - c2 * std::pow(static_cast<double>(n), p) + 1e-12) drift_ok = false;
    }
  }

  const auto mu0 = point_mass(ref.space.size(), ref.space.unit_index());
  const auto prop = check_conditional_drift(ref.model, ref.space, ref.q, mu0, 0.01, 5.0, 0.5);
  const bool prop_ok = prop.verdict == Verdict::kPassOnRange && prop.worst_margin &&
                       *prop.worst_margin > 0.0;
  return {bad_bounds == 0 && drift_ok && prop_ok,
          fmt::format("V bound violations {}/10000; drift {} C1 {:.4g} C2 {:.4g}; "
                      "conditional margin {:.3e}",
                      bad_bounds, to_string(drift.verdict), c1, c2,
                      prop.worst_margin.value_or(std::nan("")))};
}

Outcome thm2_threshold() {
  struct Case {
    std::size_t r;
    double gamma;
    Verdict expected;
  };
  const Case cases[] = {{3, 1.0, Verdict::kPassOnRange},
                        {4, 1.0, Verdict::kFailWithWitness},
                        {9, 3.0, Verdict::kPassOnRange}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto rep = check_thm2(c.r, c.gamma);
    bool ok = rep.verdict == c.expected;
    if (rep.constants.count("eps")) {
      const double eps = rep.constants.at("eps");
      const double delta = rep.constants.at("delta");
      const double lhs = (static_cast<double>(c.r) - 1.0) / c.gamma *
                         std::pow(1.0 - eps / c.gamma, c.gamma / eps - 1.0);
      ok = ok && eps > 0.0 && eps < c.gamma && delta > 0.0 && delta < 1.0 &&
           lhs <= 1.0 - delta && thm2_lhs(c.r, c.gamma, eps) <= 1.0 - delta;
    }
    pass = pass && ok;
    detail += fmt::format("{}(gamma={}, r={}) {}", detail.empty() ? "" : "; ", c.gamma, c.r,
                          to_string(rep.verdict));
  }
  return {pass, detail};
}

std::string serialize(const EmpiricalLaw& law) {
  std::string out = fmt::format("{:.17g} {:.17g}\n", law.total_weight, law.survival);
  for (const auto& [s, w] : law.weights) out += fmt::format("{} {:.17g}\n", format_state(s), w);
  return out;
}

Outcome monte_carlo(const Instance& ref) {
  const State x0 = ref.cfg.start();
  const RngPlan rng{ref.cfg.seed};
  const auto start = point_mass(ref.space.size(), *ref.space.index_of(x0));

  Stopwatch naive_clock;
  const auto naive = estimate_conditional(ref.model, x0, 3.0, 100000, rng);
  const double naive_secs = naive_clock.seconds();
  const auto naive_again = estimate_conditional(ref.model, x0, 3.0, 100000, rng);
  const double naive_tv = naive.tv_to(ref.space, transient_conditional(ref.q, start, 3.0).law);

  Stopwatch fv_clock;
  const auto fv = fleming_viot(ref.model, x0, 10000, 10.0, rng);
  const double fv_secs = fv_clock.seconds();
  const auto fv_again = fleming_viot(ref.model, x0, 10000, 10.0, rng);
  const double fv_tv = fv.tv_to(ref.space, transient_conditional(ref.q, start, 10.0).law);

  const bool same =
      serialize(naive) == serialize(naive_again) && serialize(fv) == serialize(fv_again);
  return {naive_tv < 0.05 && fv_tv < 0.05 && same && naive_secs < 120 && fv_secs < 120,
          fmt::format("naive TV {:.4f} ({:.1f} s), FV TV {:.4f} ({:.1f} s), reruns identical: {}",
                      naive_tv, naive_secs, fv_tv, fv_secs, same ? "yes" : "no")};
}

Outcome extensions() {
  const auto cat = load_instance("catastrophe1d.cfg");
  const auto cat_rep = check_catastrophes(cat.model, cat.cfg.n_check);
  auto heavy_cfg = cat.cfg;
  heavy_cfg.catastrophe_coef = 2.0;
  const auto heavy_rep = check_catastrophes(build_model(heavy_cfg), cat.cfg.n_check);

  const auto litter = load_instance("multibirth1d.cfg");
  const auto mb = check_multibirth(litter.model);
  const double m = mb.constants.count("M") ? mb.constants.at("M") : std::nan("");

  const auto s_cat = stationarity(cat);
  const auto s_lit = stationarity(litter);
  const bool pass = cat_rep.verdict == Verdict::kPassOnRange &&
                    heavy_rep.verdict == Verdict::kFailWithWitness &&
                    mb.verdict == Verdict::kPassOnRange && std::abs(m - 2.0) < 1e-12 &&
                    s_cat.worst_tv < 1e-8 && s_cat.worst_rel < 1e-6 && s_lit.worst_tv < 1e-8 &&
                    s_lit.worst_rel < 1e-6;
  return {pass, fmt::format("a=0.5n {}, a=2n {}, M = {:.12g}; catastrophe TV {:.1e} rel {:.1e}; "
                            "multibirth TV {:.1e} rel {:.1e}",
                            to_string(cat_rep.verdict), to_string(heavy_rep.verdict), m,
                            s_cat.worst_tv, s_cat.worst_rel, s_lit.worst_tv, s_lit.worst_rel)};
}

Outcome qprocess() {
  const auto model = bdqsd::testing::logistic_1d();
  const auto space = enumerate_space(1, 2);
  const auto q = assemble(model, space);
  const auto qsd = solve_qsd(q);
  const auto gen = qprocess_generator(q, qsd);
  double worst_row = 0.0;
  for (double s : gen.row_sums()) worst_row = std::max(worst_row, std::abs(s));

  const double horizon = 1e4;
  const auto path = simulate_qprocess(model, q, qsd, space, State{1}, horizon, RngPlan{42});
  const auto occ = occupation_measure(path, space, horizon);
  std::vector<double> target{qsd.alpha[0] * qsd.eta[0], qsd.alpha[1] * qsd.eta[1]};
  const double total = target[0] + target[1];
  for (auto& x : target) x /= total;
  const double tv = tv_distance(occ, target);
  return {worst_row < 1e-12 && tv < 0.05,
          fmt::format("max |row sum| {:.1e}, occupation TV {:.4f} over t = {:g}", worst_row, tv,
                      horizon)};
}

}  // namespace

int main() {
  const auto ref = load_instance("ref2d.cfg");
  const auto logistic = load_instance("logistic1d.cfg");

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, [] { return solver_oracle(); }},
      {2, [&] { return fixed_point(ref); }},
      {3, [&] { return mortality_plateau(ref); }},
      {4, [&] { return convergence_rate(ref); }},
      {5, [&] { return mixing_certificates(ref, logistic); }},
      {6, [&] { return lyapunov_machinery(ref); }},
      {7, [] { return thm2_threshold(); }},
      {8, [&] { return monte_carlo(ref); }},
      {9, [] { return extensions(); }},
      {10, [] { return qprocess(); }},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, fmt::format("exception: {}", e.what())};
    }
    if (!out.pass) ++failures;
    fmt::print("criterion {}: {} | {}\n", id, out.pass ? "PASS" : "FAIL", out.detail);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
