#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdqsd/convergence.hpp"
#include "bdqsd/lyapunov.hpp"
#include "bdqsd/simulation.hpp"
#include "bdqsd/truncation.hpp"

namespace bdqsd {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "bdqsd";
inline constexpr const char* kToolVersion = "1.0.0";

Json to_json(StateView n);
Json to_json(const AssumptionReport& report);
Json to_json(const DriftReport& report);
Json to_json(const RateFit& fit);
Json to_json(const MixingCertificate& cert);
/// lambda0, residuals and iteration counts (not the vectors).
Json summary_json(const QsdResult& qsd);

/// Shortest round-trip formatting used in every CSV file.
std::string format_double(double x);

/// Header n_1..n_r,mass; one row per state of the space, lexicographic.
std::string distribution_csv(const TruncatedSpace& space,
                             std::span<const double> mass);
/// Same layout for states held in an empirical law (already sorted).
std::string distribution_csv(std::size_t dimension, const EmpiricalLaw& law);

struct CurveRow {
  double t = 0.0;
  double value = 0.0;
  std::string initial;  // empty when the curve has no initial column
};
std::string curve_csv(std::span<const CurveRow> rows, bool with_initial);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& doc);

}  // namespace bdqsd
