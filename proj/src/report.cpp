#include "bdqsd/report.hpp"

#include <cmath>
#include <fstream>
#include <system_error>

#include <fmt/format.h>

#include "bdqsd/error.hpp"

namespace bdqsd {

namespace {

Json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

Json constants_json(const std::map<std::string, double>& constants) {
  Json out = Json::object();
  for (const auto& [k, v] : constants) out[k] = number_or_null(v);
  return out;
}

}  // namespace

Json to_json(StateView n) {
  Json out = Json::array();
  for (Count c : n) out.push_back(c);
  return out;
}

Json to_json(const AssumptionReport& report) {
  Json out;
  out["hypothesis"] = report.hypothesis;
  out["verdict"] = to_string(report.verdict);
  out["n_check"] = report.n_check;
  out["sweep"] = report.sweep;
  out["constants"] = constants_json(report.constants);
  out["witness"] = report.witness ? to_json(*report.witness) : Json(nullptr);
  out["worst_margin"] = report.worst_margin ? number_or_null(*report.worst_margin) : Json(nullptr);
  out["notes"] = report.notes;
  return out;
}

Json to_json(const DriftReport& report) {
  Json out;
  out["inequality"] = report.inequality;
  out["verdict"] = to_string(report.verdict);
  out["eps"] = report.eps;
  out["n_check"] = report.n_check;
  out["sweep"] = report.sweep;
  out["constants"] = constants_json(report.constants);
  out["witness"] = report.witness ? to_json(*report.witness) : Json(nullptr);
  out["worst_margin"] = report.worst_margin ? number_or_null(*report.worst_margin) : Json(nullptr);
  out["error_estimate"] =
      report.error_estimate ? number_or_null(*report.error_estimate) : Json(nullptr);
  Json residual = Json::array();
  for (const auto& p : report.residual) {
    residual.push_back(Json::array({p.size, number_or_null(p.value)}));
  }
  out["residual"] = std::move(residual);
  out["notes"] = report.notes;
  return out;
}

Json to_json(const RateFit& fit) {
  Json out;
  out["C"] = number_or_null(fit.prefactor);
  out["lambda"] = number_or_null(fit.rate);
  out["envelope_C"] = number_or_null(fit.envelope_prefactor);
  out["window"] = Json::array({fit.window_low, fit.window_high});
  out["t_first"] = fit.t_first;
  out["t_last"] = fit.t_last;
  out["points"] = fit.points;
  out["residual"] = number_or_null(fit.residual);
  out["degenerate"] = fit.degenerate;
  return out;
}

Json to_json(const MixingCertificate& cert) {
  Json out;
  out["nu"] = to_json(cert.nu);
  out["valid"] = cert.valid();
  if (cert.c1) {
    out["t0"] = cert.t0;
    out["c1"] = *cert.c1;
    out["c1_recomputed"] = cert.c1_recomputed ? Json(*cert.c1_recomputed) : Json(nullptr);
    out["c1_argmin"] = cert.c1_argmin ? to_json(*cert.c1_argmin) : Json(nullptr);
  }
  if (cert.c2) {
    out["c2"] = *cert.c2;
    out["c2_recomputed"] = cert.c2_recomputed ? Json(*cert.c2_recomputed) : Json(nullptr);
    out["c2_argmin"] = cert.c2_argmin ? to_json(*cert.c2_argmin) : Json(nullptr);
    out["c2_time"] = cert.c2_time ? Json(*cert.c2_time) : Json(nullptr);
  }
  out["notes"] = cert.notes;
  return out;
}

Json summary_json(const QsdResult& qsd) {
  Json out;
  out["lambda0"] = qsd.lambda0;
  out["alpha_residual"] = qsd.alpha_residual;
  out["eta_residual"] = qsd.eta_residual;
  out["alpha_iterations"] = qsd.alpha_iterations;
  out["eta_iterations"] = qsd.eta_iterations;
  return out;
}

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

namespace {

std::string state_header(std::size_t r) {
  std::string out;
  for (std::size_t i = 1; i <= r; ++i) out += fmt::format("n_{},", i);
  return out + "mass\n";
}

void append_row(std::string& out, StateView n, double mass) {
  for (Count c : n) {
    out += std::to_string(c);
    out += ',';
  }
  out += format_double(mass);
  out += '\n';
}

}  // namespace

std::string distribution_csv(const TruncatedSpace& space, std::span<const double> mass) {
  if (mass.size() != space.size()) throw DomainError("distribution size differs from the space");
  std::string out = state_header(space.dimension());
  for (std::size_t i = 0; i < space.size(); ++i) append_row(out, space.state(i), mass[i]);
  return out;
}

std::string distribution_csv(std::size_t dimension, const EmpiricalLaw& law) {
  std::string out = state_header(dimension);
  for (const auto& [state, mass] : law.normalized()) append_row(out, state, mass);
  return out;
}

std::string curve_csv(std::span<const CurveRow> rows, bool with_initial) {
  std::string out = with_initial ? "t,value,initial\n" : "t,value\n";
  for (const auto& row : rows) {
    out += format_double(row.t);
    out += ',';
    out += format_double(row.value);
    if (with_initial) {
      out += ",\"";
      out += row.initial;
      out += '"';
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) {
    throw IoError(fmt::format("cannot create directory {}: {}", path.parent_path().string(),
                              ec.message()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  out.flush();
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace bdqsd
