#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bdqsd/convergence.hpp"
#include "bdqsd/model.hpp"
#include "bdqsd/report.hpp"

namespace bdqsd {

/// Validated contents of an INI config file, defaults filled in.
///
///   [model]       r, gamma, family, b, d, c, beta1, beta2, cross_decay, table
///   [extensions]  catastrophe, catastrophe_coef, catastrophe_power,
///                 litter_sizes, litter_probs
///   [truncation]  N
///   [solver]      tol, max_iter
///   [simulation]  seed, trajectories, particles, t_max, x0
///   [check]       n_check, eps, C_r
///   [converge]    initials, t_grid, t0
///
/// Vectors are comma separated; matrix rows are separated by ';'.
struct ConfigDocument {
  std::filesystem::path source;

  std::size_t r = 0;
  double gamma = 0.0;
  std::string family = "constant";
  std::vector<double> b;
  std::vector<double> d;
  std::vector<double> c;  // row-major r x r
  std::optional<double> beta1;
  std::optional<double> beta2;
  double cross_decay = 0.0;
  std::optional<std::filesystem::path> table;

  std::string catastrophe = "none";
  double catastrophe_coef = 0.0;
  double catastrophe_power = 1.0;
  std::vector<Count> litter_sizes;
  std::vector<double> litter_probs;

  std::optional<Count> n_trunc;

  double tol = 1e-12;
  std::size_t max_iter = 1'000'000;

  std::uint64_t seed = 42;
  std::size_t trajectories = 100'000;
  std::size_t particles = 10'000;
  double t_max = 3.0;
  std::optional<State> x0;

  Count n_check = 10'000;
  std::optional<double> eps;
  std::optional<double> c_r;

  std::vector<State> initials;
  TimeGrid t_grid;
  double t0 = 2.0;

  /// (1,...,1) unless x0 was given.
  State start() const;
  /// Every field with its effective value.
  Json echo() const;
};

/// Throws IoError when the file cannot be read and ValidationError on
/// parse errors (with line number) or invalid values (with key path).
ConfigDocument load_config(const std::filesystem::path& path);

/// `base` resolves relative paths such as model.table.
ConfigDocument parse_config(const std::string& text,
                            const std::filesystem::path& base = ".");

Model build_model(const ConfigDocument& config);

/// Rate table from CSV with header n_1..n_r,b_1..b_r,d_1..d_r,c_1_1..c_r_r
/// and one row per point of the box {1..B}^r.
RateTable load_rate_table(const std::filesystem::path& path, std::size_t r);

}  // namespace bdqsd
