#include "bdqsd/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <omp.h>

#include "bdqsd/config.hpp"
#include "bdqsd/convergence.hpp"
#include "bdqsd/error.hpp"
#include "bdqsd/lyapunov.hpp"
#include "bdqsd/report.hpp"
#include "bdqsd/simulation.hpp"
#include "bdqsd/truncation.hpp"

namespace bdqsd {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::optional<Count> trunc;
  int threads = 0;
  std::optional<double> t;
  std::optional<std::size_t> traj;
  std::optional<std::size_t> particles;
  std::optional<std::uint64_t> seed;
  std::optional<Count> nmax;
  std::optional<double> eps;
  std::optional<double> cr;
  std::optional<double> t0;
  bool compare_double = false;
  bool all_initials = false;
};

constexpr double kDriftStep = 0.01;
constexpr double kDriftHorizon = 5.0;

Json header(const std::string& command, const ConfigDocument& cfg) {
  Json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["command"] = command;
  doc["config"] = cfg.echo();
  return doc;
}

Count truncation_level(const Options& opt, const ConfigDocument& cfg) {
  if (opt.trunc) {
    if (*opt.trunc < cfg.r) {
      throw ValidationError(fmt::format("--trunc: must be >= r = {} (got {})", cfg.r, *opt.trunc));
    }
    return *opt.trunc;
  }
  if (cfg.n_trunc) return *cfg.n_trunc;
  throw ValidationError("truncation.N: required (or pass --trunc)");
}

struct Solved {
  TruncatedSpace space;
  SubGenerator q;
  QsdResult qsd;
};

Solved solve_at(const Model& model, const ConfigDocument& cfg, Count level) {
  TruncatedSpace space(model.dimension(), level);
  SubGenerator q = assemble(model, space);
  QsdResult qsd = solve_qsd(q, {cfg.tol, cfg.max_iter});
  return {std::move(space), std::move(q), std::move(qsd)};
}

double outer_shell_mass(const TruncatedSpace& space, std::span<const double> law) {
  double m = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space.on_outer_shell(i)) m += law[i];
  }
  return m;
}

// TV between a law on the N-truncation and one on the 2N-truncation.
double tv_across(const TruncatedSpace& small, std::span<const double> a,
                 const TruncatedSpace& big, std::span<const double> b) {
  std::vector<double> lifted(big.size(), 0.0);
  for (std::size_t i = 0; i < small.size(); ++i) lifted[*big.index_of(small.state(i))] = a[i];
  return tv_distance(lifted, b);
}

std::string label(StateView n) { return format_state(n); }

void run_solve(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const Count level = truncation_level(opt, cfg);
  const auto s = solve_at(model, cfg, level);
  write_text(out / "qsd.csv", distribution_csv(s.space, s.qsd.alpha));
  write_text(out / "eta.csv", distribution_csv(s.space, s.qsd.eta));
  Json doc = header("solve", cfg);
  doc["truncation"] = {{"N", level},
                       {"states", s.space.size()},
                       {"alpha_outer_shell_mass", outer_shell_mass(s.space, s.qsd.alpha)}};
  doc["qsd"] = summary_json(s.qsd);
  if (opt.compare_double) {
    const auto d = solve_at(model, cfg, 2 * level);
    doc["truncation"]["tv_N_vs_2N"] = tv_across(s.space, s.qsd.alpha, d.space, d.qsd.alpha);
    doc["truncation"]["lambda0_2N"] = d.qsd.lambda0;
  }
  write_json(out / "summary.json", doc);
}

void run_simulate(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const double t = opt.t.value_or(cfg.t_max);
  const std::size_t traj = opt.traj.value_or(cfg.trajectories);
  const RngPlan rng{opt.seed.value_or(cfg.seed)};
  const State x0 = cfg.start();
  const auto law = estimate_conditional(model, x0, t, traj, rng);
  write_text(out / "law.csv", distribution_csv(cfg.r, law));
  Json doc = header("simulate", cfg);
  doc["seed"] = rng.seed;
  doc["t"] = t;
  doc["trajectories"] = traj;
  doc["survival_estimate"] = law.survival;
  doc["survivors"] = law.total_weight;
  if (opt.trunc || cfg.n_trunc) {
    const Count level = truncation_level(opt, cfg);
    TruncatedSpace space(cfg.r, level);
    const auto q = assemble(model, space);
    const auto idx = space.index_of(x0);
    if (!idx) throw DomainError(fmt::format("simulation.x0: {} is outside the truncation", label(x0)));
    const auto exact = transient_conditional(q, point_mass(space.size(), *idx), t);
    doc["truncation"] = {{"N", level},
                         {"tv_to_truncated_exact", law.tv_to(space, exact.law)},
                         {"exact_survival", exact.survival}};
  }
  write_json(out / "summary.json", doc);
}

void run_fv(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const double t = opt.t.value_or(cfg.t_max);
  const std::size_t particles = opt.particles.value_or(cfg.particles);
  const RngPlan rng{opt.seed.value_or(cfg.seed)};
  const auto law = fleming_viot(model, cfg.start(), particles, t, rng);
  write_text(out / "fv_law.csv", distribution_csv(cfg.r, law));
  Json doc = header("fv", cfg);
  doc["seed"] = rng.seed;
  doc["t"] = t;
  doc["particles"] = particles;
  if (opt.trunc || cfg.n_trunc) {
    const auto s = solve_at(model, cfg, truncation_level(opt, cfg));
    doc["truncation"] = {{"N", s.space.level()},
                         {"tv_to_truncated_qsd", law.tv_to(s.space, s.qsd.alpha)}};
  }
  write_json(out / "summary.json", doc);
}

void run_qprocess(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const auto s = solve_at(model, cfg, truncation_level(opt, cfg));
  const double t = opt.t.value_or(cfg.t_max);
  const RngPlan rng{opt.seed.value_or(cfg.seed)};
  const auto path = simulate_qprocess(model, s.q, s.qsd, s.space, cfg.start(), t, rng);
  const auto occ = occupation_measure(path, s.space, t);
  write_text(out / "occupation.csv", distribution_csv(s.space, occ));
  std::vector<double> product(s.space.size());
  double total = 0.0;
  for (std::size_t i = 0; i < product.size(); ++i) {
    product[i] = s.qsd.alpha[i] * s.qsd.eta[i];
    total += product[i];
  }
  for (double& v : product) v /= total;
  Json doc = header("qprocess", cfg);
  doc["seed"] = rng.seed;
  doc["t"] = t;
  doc["events"] = path.events.size();
  doc["tv_to_alpha_eta"] = tv_distance(occ, product);
  doc["qsd"] = summary_json(s.qsd);
  write_json(out / "summary.json", doc);
}

void run_check(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const Count n_check = opt.nmax.value_or(cfg.n_check);
  if (n_check < cfg.r) {
    throw ValidationError(fmt::format("--nmax: must be >= r = {} (got {})", cfg.r, n_check));
  }
  const double eps = opt.eps ? *opt.eps : cfg.eps.value_or(LyapunovParams::for_model(model).eps);
  const std::optional<double> c_r = opt.cr ? opt.cr : cfg.c_r;
  Json doc = header("check", cfg);
  doc["n_check"] = n_check;
  doc["eps"] = eps;
  Json assumptions = Json::array();
  assumptions.push_back(to_json(check_h1(model, n_check)));
  assumptions.push_back(to_json(check_h2(model, n_check)));
  assumptions.push_back(to_json(check_remark1(model, n_check, c_r)));
  assumptions.push_back(to_json(check_thm2(model, n_check)));
  if (model.has_catastrophes()) assumptions.push_back(to_json(check_catastrophes(model, n_check)));
  if (model.has_multibirth()) assumptions.push_back(to_json(check_multibirth(model)));
  doc["assumptions"] = std::move(assumptions);
  Json drift = Json::array();
  drift.push_back(to_json(check_drift(model, eps, n_check)));
  if (opt.trunc || cfg.n_trunc) {
    TruncatedSpace space(cfg.r, truncation_level(opt, cfg));
    const auto q = assemble(model, space);
    drift.push_back(to_json(check_conditional_drift(
        model, space, q, point_mass(space.size(), space.unit_index()), kDriftStep,
        kDriftHorizon, eps)));
  }
  doc["drift"] = std::move(drift);
  write_json(out / "report.json", doc);
}

void run_converge(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const auto s = solve_at(model, cfg, truncation_level(opt, cfg));
  const auto initials = opt.all_initials ? all_initials(s.space) : cfg.initials;
  const auto curve = convergence_curve(s.q, s.space, s.qsd, initials, cfg.t_grid);
  std::vector<CurveRow> tv_rows, survival_rows;
  for (std::size_t j = 0; j < curve.initials.size(); ++j) {
    const std::string name = label(curve.initials[j]);
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      tv_rows.push_back({curve.times[k], curve.tv[j][k], name});
      survival_rows.push_back({curve.times[k], curve.survival[j][k], name});
    }
  }
  write_text(out / "curves.csv", curve_csv(tv_rows, true));
  write_text(out / "survival.csv", curve_csv(survival_rows, true));
  std::vector<CurveRow> plateau_rows;
  for (const auto& p : eta_plateau(s.q, s.qsd, cfg.t_grid)) plateau_rows.push_back({p.t, p.error, ""});
  write_text(out / "eta_plateau.csv", curve_csv(plateau_rows, false));

  Json doc = header("converge", cfg);
  doc["truncation"] = {{"N", s.space.level()}, {"states", s.space.size()}};
  doc["qsd"] = summary_json(s.qsd);
  Json fits = Json::array();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t j = 0; j < curve.initials.size(); ++j) {
    Json entry;
    entry["initial"] = to_json(curve.initials[j]);
    try {
      const auto fit = fit_rate(curve.times, curve.tv[j]);
      entry["fit"] = to_json(fit);
      lo = std::min(lo, fit.rate);
      hi = std::max(hi, fit.rate);
    } catch (const NumericalError& e) {
      entry["fit"] = nullptr;
      entry["error"] = e.what();
    }
    fits.push_back(std::move(entry));
  }
  doc["rate_fits"] = std::move(fits);
  if (hi > 0.0) doc["lambda_spread"] = (hi - lo) / hi;
  write_json(out / "summary.json", doc);
}

void run_certify(const Options& opt, const ConfigDocument& cfg, const fs::path& out) {
  const Model model = build_model(cfg);
  const auto s = solve_at(model, cfg, truncation_level(opt, cfg));
  const double t0 = opt.t0.value_or(cfg.t0);
  const auto a1 = verify_a1(s.q, s.space, t0);
  const auto a2 = verify_a2(s.q, s.space, cfg.t_grid);
  Json doc = header("certify", cfg);
  doc["truncation"] = {{"N", s.space.level()}, {"states", s.space.size()}};
  doc["A1"] = to_json(a1);
  doc["A2"] = to_json(a2);
  doc["valid"] = a1.valid() && a2.valid();
  write_json(out / "certificate.json", doc);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
      return kExitValidation;
    case ErrorKind::kNumerical:
      return kExitNumerical;
    case ErrorKind::kIo:
      return kExitIo;
  }
  return kExitNumerical;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Quasi-stationary distributions of multi-type competitive birth-death processes",
               kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1, 1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "INI config file")->required();
    sub->add_option("--out", opt.out, "output directory (default: $BDQSD_OUT_DIR or .)");
    sub->add_option("--threads", opt.threads, "maximum OpenMP threads")->check(CLI::NonNegativeNumber);
    sub->add_option("--trunc", opt.trunc, "truncation level N (overrides truncation.N)");
  };
  auto* solve = app.add_subcommand("solve", "QSD, extinction rate and eigenfunction");
  common(solve);
  solve->add_flag("--compare-double", opt.compare_double, "also solve at 2N and report the TV gap");
  auto* simulate = app.add_subcommand("simulate", "conditional law by naive Monte Carlo");
  common(simulate);
  simulate->add_option("--t", opt.t, "observation time");
  simulate->add_option("--traj", opt.traj, "number of trajectories");
  simulate->add_option("--seed", opt.seed, "master seed");
  auto* fv = app.add_subcommand("fv", "conditional law by a Fleming-Viot particle system");
  common(fv);
  fv->add_option("--t", opt.t, "observation time");
  fv->add_option("--particles", opt.particles, "number of particles");
  fv->add_option("--seed", opt.seed, "master seed");
  auto* qprocess = app.add_subcommand("qprocess", "occupation measure of the Q-process");
  common(qprocess);
  qprocess->add_option("--t", opt.t, "horizon");
  qprocess->add_option("--seed", opt.seed, "master seed");
  auto* check = app.add_subcommand("check", "hypothesis and drift checks on a finite range");
  common(check);
  check->add_option("--nmax", opt.nmax, "largest |n| checked");
  check->add_option("--eps", opt.eps, "Lyapunov exponent eps");
  check->add_option("--cr", opt.cr, "constant C_r");
  auto* converge = app.add_subcommand("converge", "TV convergence curves and rate fits");
  common(converge);
  converge->add_flag("--all-initials", opt.all_initials, "start from every truncated state");
  auto* certify = app.add_subcommand("certify", "mixing certificates (A1), (A2)");
  common(certify);
  certify->add_option("--t0", opt.t0, "minorization time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (opt.threads > 0) omp_set_num_threads(opt.threads);
    fs::path out = opt.out;
    if (opt.out.empty()) {
      const char* env = std::getenv(kOutDirVariable);
      out = (env && *env) ? fs::path(env) : fs::path(".");
    }
    const auto cfg = load_config(opt.config);
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "solve") {
      run_solve(opt, cfg, out);
    } else if (name == "simulate") {
      run_simulate(opt, cfg, out);
    } else if (name == "fv") {
      run_fv(opt, cfg, out);
    } else if (name == "qprocess") {
      run_qprocess(opt, cfg, out);
    } else if (name == "check") {
      run_check(opt, cfg, out);
    } else if (name == "converge") {
      run_converge(opt, cfg, out);
    } else {
      run_certify(opt, cfg, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace bdqsd
