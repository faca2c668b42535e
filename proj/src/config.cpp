#include "bdqsd/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "bdqsd/error.hpp"

namespace bdqsd {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model",
       {"r", "gamma", "family", "b", "d", "c", "beta1", "beta2", "cross_decay", "table"}},
      {"extensions",
       {"catastrophe", "catastrophe_coef", "catastrophe_power", "litter_sizes",
        "litter_probs"}},
      {"truncation", {"N"}},
      {"solver", {"tol", "max_iter"}},
      {"simulation", {"seed", "trajectories", "particles", "t_max", "x0"}},
      {"check", {"n_check", "eps", "C_r"}},
      {"converge", {"initials", "t_grid", "t0"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) out.push_back(trim(part));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!value) return std::nullopt;
    return trim(*value);
  }

  std::optional<double> number(const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    return parse_number(*text, section + "." + key);
  }

  std::optional<std::uint64_t> count(const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    return parse_count(*text, section + "." + key);
  }

  std::optional<std::vector<double>> numbers(const std::string& section,
                                             const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    std::vector<double> out;
    for (const auto& row : split(*text, ';')) {
      if (row.empty()) continue;
      for (const auto& item : split(row, ',')) {
        out.push_back(parse_number(item, section + "." + key));
      }
    }
    return out;
  }

  static double parse_number(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    const auto slash = t.find('/');
    if (slash != std::string::npos) {
      const double num = parse_number(t.substr(0, slash), key);
      const double den = parse_number(t.substr(slash + 1), key);
      if (den == 0.0) throw ValidationError(fmt::format("{}: division by zero in '{}'", key, t));
      return num / den;
    }
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
      throw ValidationError(fmt::format("{}: '{}' is not a number", key, t));
    }
    return v;
  }

  static std::uint64_t parse_count(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
      // Allow integral values written like 1e5.
      const double v = parse_number(t, key);
      if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
        throw ValidationError(fmt::format("{}: '{}' is not a non-negative integer", key, t));
      }
      return static_cast<std::uint64_t>(v);
    }
    const auto v = std::strtoull(t.c_str(), &end, 10);
    if (errno == ERANGE) throw ValidationError(fmt::format("{}: '{}' is out of range", key, t));
    return v;
  }

 private:
  const pt::ptree& tree_;
};

std::vector<State> parse_states(const std::string& text, std::size_t r,
                                const std::string& key) {
  std::vector<State> out;
  for (const auto& row : split(text, ';')) {
    if (row.empty()) continue;
    State s;
    for (const auto& item : split(row, ',')) s.push_back(Reader::parse_count(item, key));
    if (s.size() != r) {
      throw ValidationError(
          fmt::format("{}: state '{}' has {} coordinates, expected r = {}", key, row, s.size(), r));
    }
    if (!is_interior(s)) {
      throw ValidationError(fmt::format("{}: state '{}' is not interior (coordinates >= 1)", key, row));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

State ConfigDocument::start() const { return x0.value_or(State(r, 1)); }

Json ConfigDocument::echo() const {
  auto states = [](const std::vector<State>& v) {
    Json out = Json::array();
    for (const auto& s : v) out.push_back(to_json(s));
    return out;
  };
  auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
  Json doc;
  doc["source"] = source.string();
  doc["model"] = {{"r", r},
                  {"gamma", gamma},
                  {"family", family},
                  {"b", b},
                  {"d", d},
                  {"c", c},
                  {"beta1", opt(beta1)},
                  {"beta2", opt(beta2)},
                  {"cross_decay", cross_decay},
                  {"table", table ? Json(table->string()) : Json(nullptr)}};
  doc["extensions"] = {{"catastrophe", catastrophe},
                       {"catastrophe_coef", catastrophe_coef},
                       {"catastrophe_power", catastrophe_power},
                       {"litter_sizes", litter_sizes},
                       {"litter_probs", litter_probs}};
  doc["truncation"] = {{"N", n_trunc ? Json(*n_trunc) : Json(nullptr)}};
  doc["solver"] = {{"tol", tol}, {"max_iter", max_iter}};
  doc["simulation"] = {{"seed", seed},
                       {"trajectories", trajectories},
                       {"particles", particles},
                       {"t_max", t_max},
                       {"x0", to_json(start())}};
  doc["check"] = {{"n_check", n_check}, {"eps", opt(eps)}, {"C_r", opt(c_r)}};
  doc["converge"] = {{"initials", states(initials)},
                     {"t_grid", {t_grid.start, t_grid.stop, t_grid.step}},
                     {"t0", t0}};
  return doc;
}

ConfigDocument parse_config(const std::string& text, const std::filesystem::path& base) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(fmt::format("config parse error at line {}: {}", e.line(), e.message()));
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty() && !body.data().empty()) {
        throw ValidationError(fmt::format("{}: key outside any section", section));
      }
      throw ValidationError(fmt::format("{}: unknown section", section));
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) {
        throw ValidationError(fmt::format("{}.{}: unknown key", section, key));
      }
    }
  }

  Reader in(tree);
  ConfigDocument cfg;

  const auto r = in.count("model", "r");
  require(r.has_value(), "model.r: required");
  require(*r >= 1 && *r <= 16, fmt::format("model.r: must be in [1, 16] (got {})", *r));
  cfg.r = static_cast<std::size_t>(*r);

  const auto gamma = in.number("model", "gamma");
  require(gamma.has_value(), "model.gamma: required");
  require(*gamma > 0.0 && std::isfinite(*gamma),
          fmt::format("model.gamma: must be > 0 (got {})", *gamma));
  cfg.gamma = *gamma;

  cfg.family = in.raw("model", "family").value_or("constant");
  require(cfg.family == "constant" || cfg.family == "power-law" || cfg.family == "tabulated",
          fmt::format("model.family: '{}' is not one of constant, power-law, tabulated",
                      cfg.family));

  cfg.beta1 = in.number("model", "beta1");
  cfg.beta2 = in.number("model", "beta2");
  if (cfg.beta1) {
    require(*cfg.beta1 >= 0.0, fmt::format("model.beta1: must be >= 0 (got {})", *cfg.beta1));
  }
  if (cfg.beta2) {
    require(*cfg.beta2 < 1.0, fmt::format("model.beta2: must be < 1 (got {})", *cfg.beta2));
  }
  cfg.cross_decay = in.number("model", "cross_decay").value_or(0.0);

  if (cfg.family == "tabulated") {
    const auto path = in.raw("model", "table");
    require(path.has_value(), "model.table: required for family = tabulated");
    std::filesystem::path p(*path);
    cfg.table = p.is_absolute() ? p : base / p;
  } else {
    require(!in.raw("model", "table"), "model.table: only valid for family = tabulated");
    const auto b = in.numbers("model", "b");
    require(b.has_value(), "model.b: required");
    cfg.b = *b;
    cfg.d = in.numbers("model", "d").value_or(std::vector<double>(cfg.r, 0.0));
    const auto c = in.numbers("model", "c");
    require(c.has_value(), "model.c: required");
    cfg.c = *c;
    require(cfg.b.size() == cfg.r,
            fmt::format("model.b: expected {} values, got {}", cfg.r, cfg.b.size()));
    require(cfg.d.size() == cfg.r,
            fmt::format("model.d: expected {} values, got {}", cfg.r, cfg.d.size()));
    require(cfg.c.size() == cfg.r * cfg.r,
            fmt::format("model.c: expected {} values ({} rows of {}), got {}", cfg.r * cfg.r,
                        cfg.r, cfg.r, cfg.c.size()));
  }

  cfg.catastrophe = in.raw("extensions", "catastrophe").value_or("none");
  require(cfg.catastrophe == "none" || cfg.catastrophe == "power" || cfg.catastrophe == "log",
          fmt::format("extensions.catastrophe: '{}' is not one of none, power, log",
                      cfg.catastrophe));
  cfg.catastrophe_coef = in.number("extensions", "catastrophe_coef").value_or(0.0);
  cfg.catastrophe_power = in.number("extensions", "catastrophe_power").value_or(1.0);
  if (cfg.catastrophe != "none") {
    require(in.raw("extensions", "catastrophe_coef").has_value(),
            "extensions.catastrophe_coef: required when a catastrophe is enabled");
    require(cfg.catastrophe_coef >= 0.0 && std::isfinite(cfg.catastrophe_coef),
            fmt::format("extensions.catastrophe_coef: must be >= 0 (got {})",
                        cfg.catastrophe_coef));
    require(std::isfinite(cfg.catastrophe_power),
            "extensions.catastrophe_power: must be finite");
  }
  if (const auto sizes = in.raw("extensions", "litter_sizes")) {
    for (const auto& item : split(*sizes, ',')) {
      const auto k = Reader::parse_count(item, "extensions.litter_sizes");
      require(k >= 1, "extensions.litter_sizes: litter sizes must be >= 1");
      cfg.litter_sizes.push_back(k);
    }
    const auto probs = in.numbers("extensions", "litter_probs");
    require(probs.has_value(), "extensions.litter_probs: required with litter_sizes");
    cfg.litter_probs = *probs;
    require(cfg.litter_probs.size() == cfg.litter_sizes.size(),
            fmt::format("extensions.litter_probs: expected {} values, got {}",
                        cfg.litter_sizes.size(), cfg.litter_probs.size()));
  } else {
    require(!in.raw("extensions", "litter_probs"),
            "extensions.litter_probs: given without litter_sizes");
  }

  if (const auto n = in.count("truncation", "N")) {
    require(*n >= cfg.r, fmt::format("truncation.N: must be >= r = {} (got {})", cfg.r, *n));
    cfg.n_trunc = *n;
  }

  cfg.tol = in.number("solver", "tol").value_or(cfg.tol);
  require(cfg.tol > 0.0 && cfg.tol < 1.0, fmt::format("solver.tol: must be in (0, 1) (got {})", cfg.tol));
  cfg.max_iter = in.count("solver", "max_iter").value_or(cfg.max_iter);
  require(cfg.max_iter >= 1, "solver.max_iter: must be >= 1");

  cfg.seed = in.count("simulation", "seed").value_or(cfg.seed);
  cfg.trajectories = in.count("simulation", "trajectories").value_or(cfg.trajectories);
  require(cfg.trajectories >= 1, "simulation.trajectories: must be >= 1");
  cfg.particles = in.count("simulation", "particles").value_or(cfg.particles);
  require(cfg.particles >= 2, "simulation.particles: must be >= 2");
  cfg.t_max = in.number("simulation", "t_max").value_or(cfg.t_max);
  require(cfg.t_max >= 0.0 && std::isfinite(cfg.t_max),
          fmt::format("simulation.t_max: must be >= 0 (got {})", cfg.t_max));
  if (const auto x0 = in.raw("simulation", "x0")) {
    const auto states = parse_states(*x0, cfg.r, "simulation.x0");
    require(states.size() == 1, "simulation.x0: expected a single state");
    cfg.x0 = states.front();
  }

  cfg.n_check = in.count("check", "n_check").value_or(cfg.n_check);
  require(cfg.n_check >= cfg.r,
          fmt::format("check.n_check: must be >= r = {} (got {})", cfg.r, cfg.n_check));
  cfg.eps = in.number("check", "eps");
  if (cfg.eps) require(*cfg.eps > 0.0, fmt::format("check.eps: must be > 0 (got {})", *cfg.eps));
  cfg.c_r = in.number("check", "C_r");
  if (cfg.c_r) require(*cfg.c_r > 0.0, fmt::format("check.C_r: must be > 0 (got {})", *cfg.c_r));

  if (const auto initials = in.raw("converge", "initials")) {
    cfg.initials = parse_states(*initials, cfg.r, "converge.initials");
    require(!cfg.initials.empty(), "converge.initials: empty list");
  } else {
    cfg.initials = {State(cfg.r, 1)};
  }
  if (const auto grid = in.raw("converge", "t_grid")) {
    try {
      cfg.t_grid = TimeGrid::parse(*grid);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("converge.t_grid: ") + e.what());
    }
  }
  cfg.t0 = in.number("converge", "t0").value_or(cfg.t0);
  require(cfg.t0 > 0.0 && std::isfinite(cfg.t0),
          fmt::format("converge.t0: must be > 0 (got {})", cfg.t0));
  return cfg;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto cfg = parse_config(buffer.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

RateTable load_rate_table(const std::filesystem::path& path, std::size_t r) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("model.table: cannot read {}", path.string()));
  std::string line;
  std::size_t line_no = 0;
  const std::size_t width = r + 2 * r + r * r;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 || line.rfind("n_1", 0) == 0) continue;  // header
    const auto items = split(line, ',');
    if (items.size() != width) {
      throw ValidationError(fmt::format("model.table: line {} has {} columns, expected {}",
                                        line_no, items.size(), width));
    }
    std::vector<double> row;
    for (const auto& item : items) {
      row.push_back(Reader::parse_number(item, fmt::format("model.table line {}", line_no)));
    }
    rows.push_back(std::move(row));
  }
  RateTable table;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < r; ++i) {
      require(row[i] >= 1.0 && row[i] == std::floor(row[i]),
              "model.table: state coordinates must be integers >= 1");
      table.box = std::max<Count>(table.box, static_cast<Count>(row[i]));
    }
  }
  std::size_t points = 1;
  for (std::size_t i = 0; i < r; ++i) points *= table.box;
  require(rows.size() == points,
          fmt::format("model.table: {} rows, expected {} covering the box {{1..{}}}^{}",
                      rows.size(), points, table.box, r));
  table.birth.assign(points * r, std::nan(""));
  table.death.assign(points * r, std::nan(""));
  table.competition.assign(points * r * r, std::nan(""));
  std::vector<bool> seen(points, false);
  for (const auto& row : rows) {
    std::size_t point = 0;
    for (std::size_t i = 0; i < r; ++i) {
      point = point * table.box + static_cast<std::size_t>(row[i]) - 1;
    }
    require(!seen[point], "model.table: duplicate state row");
    seen[point] = true;
    for (std::size_t i = 0; i < r; ++i) {
      table.birth[point * r + i] = row[r + i];
      table.death[point * r + i] = row[2 * r + i];
    }
    for (std::size_t k = 0; k < r * r; ++k) table.competition[point * r * r + k] = row[3 * r + k];
  }
  return table;
}

Model build_model(const ConfigDocument& cfg) {
  RateSpec rates;
  if (cfg.family == "constant") {
    rates.family = RateFamily::kConstant;
  } else if (cfg.family == "power-law") {
    rates.family = RateFamily::kPowerLaw;
  } else {
    rates.family = RateFamily::kTabulated;
    rates.table = load_rate_table(*cfg.table, cfg.r);
  }
  rates.birth = cfg.b;
  rates.death = cfg.d;
  rates.competition = cfg.c;
  rates.cross_decay = cfg.cross_decay;
  rates.beta1 = cfg.beta1;
  rates.beta2 = cfg.beta2;

  ExtensionSpec ext;
  if (cfg.catastrophe == "power") {
    ext.catastrophe.kind = CatastropheKind::kPower;
  } else if (cfg.catastrophe == "log") {
    ext.catastrophe.kind = CatastropheKind::kLog;
  }
  ext.catastrophe.coef = cfg.catastrophe_coef;
  ext.catastrophe.power = cfg.catastrophe_power;
  if (!cfg.litter_sizes.empty()) {
    LitterLaw law;
    std::vector<std::vector<Litter>> per_type(cfg.r);
    for (std::size_t parent = 0; parent < cfg.r; ++parent) {
      for (std::size_t k = 0; k < cfg.litter_sizes.size(); ++k) {
        State inc(cfg.r, 0);
        inc[parent] = cfg.litter_sizes[k];
        per_type[parent].push_back({std::move(inc), cfg.litter_probs[k]});
      }
    }
    law.per_type = std::move(per_type);
    ext.multibirth = std::move(law);
  }
  return Model(cfg.r, cfg.gamma, std::move(rates), std::move(ext));
}

}  // namespace bdqsd
