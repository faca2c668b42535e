#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bdqsd/config.hpp"
#include "bdqsd/model.hpp"

namespace bdqsd::testing {

inline Model constant_model(std::size_t r, double gamma, std::vector<double> b,
                            std::vector<double> d, std::vector<double> c,
                            ExtensionSpec ext = {}) {
  RateSpec spec;
  spec.family = RateFamily::kConstant;
  spec.birth = std::move(b);
  spec.death = std::move(d);
  spec.competition = std::move(c);
  return Model(r, gamma, std::move(spec), std::move(ext));
}

/// b = 1, d = 0, c = 1, gamma = 1.
inline Model logistic_1d(ExtensionSpec ext = {}) {
  return constant_model(1, 1.0, {1.0}, {0.0}, {1.0}, std::move(ext));
}

inline std::string config_path(const std::string& name) {
  return std::string(BDQSD_CONFIG_DIR) + "/" + name;
}

inline Model config_model(const std::string& name) {
  return build_model(load_config(config_path(name)));
}

/// Small deterministic generator for hand-rolled property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  Count integer(Count lo, Count hi) {
    return std::uniform_int_distribution<Count>(lo, hi)(engine_);
  }
  std::vector<double> simplex(std::size_t size) {
    std::vector<double> out(size);
    double total = 0.0;
    for (auto& x : out) {
      x = -std::log(uniform(1e-12, 1.0));
      total += x;
    }
    for (auto& x : out) x /= total;
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bdqsd::testing
