#include "bdqsd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "bdqsd/error.hpp"

namespace bdqsd {

bool is_absorbed(StateView n) {
  return std::any_of(n.begin(), n.end(), [](Count c) { return c == 0; });
}

Count total_size(StateView n) {
  return std::accumulate(n.begin(), n.end(), Count{0});
}

std::string format_state(StateView n) {
  return fmt::format("({})", fmt::join(n.begin(), n.end(), ","));
}

std::string to_string(RateFamily family) {
  switch (family) {
    case RateFamily::kConstant: return "constant";
    case RateFamily::kPowerLaw: return "power-law";
    case RateFamily::kTabulated: return "tabulated";
    case RateFamily::kCallback: return "callback";
  }
  return "unknown";
}

namespace {

// Interior states with |n| <= max_size, visited in lexicographic order.
template <typename Fn>
void for_each_small_state(std::size_t r, Count max_size, Fn&& fn) {
  if (max_size < r) return;
  State n(r, 1);
  while (true) {
    fn(StateView(n));
    // advance lexicographically within the simplex
    std::size_t pos = r;
    while (pos > 0) {
      --pos;
      n[pos] += 1;
      if (total_size(n) <= max_size) break;
      n[pos] = 1;
      if (pos == 0) return;
    }
  }
}

}  // namespace

Model::Model(std::size_t dimension, double gamma, RateSpec rates,
             ExtensionSpec extensions)
    : Model(dimension, gamma, std::move(rates), std::move(extensions), true) {}

Model Model::unchecked(std::size_t dimension, double gamma, RateSpec rates,
                       ExtensionSpec extensions) {
  return Model(dimension, gamma, std::move(rates), std::move(extensions),
               false);
}

Model::Model(std::size_t dimension, double gamma, RateSpec rates,
             ExtensionSpec extensions, bool validating)
    : dimension_(dimension),
      gamma_(gamma),
      rates_(std::move(rates)),
      extensions_(std::move(extensions)),
      validating_(validating) {
  validate_structure();
  validate_samples();
}

void Model::validate_structure() const {
  const std::size_t r = dimension_;
  if (r < 1) throw ValidationError("model.r: dimension must be >= 1");
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) {
    throw ValidationError(
        fmt::format("model.gamma: must be > 0 (got {})", gamma_));
  }
  if (rates_.beta1 && !(*rates_.beta1 >= 0.0)) {
    throw ValidationError("model.beta1: must be >= 0");
  }
  if (rates_.beta2 && !(*rates_.beta2 < 1.0)) {
    throw ValidationError(
        fmt::format("model.beta2: must be < 1 (got {})", *rates_.beta2));
  }

  switch (rates_.family) {
    case RateFamily::kConstant:
    case RateFamily::kPowerLaw: {
      if (rates_.birth.size() != r) {
        throw ValidationError(fmt::format(
            "model.b: expected {} entries, got {}", r, rates_.birth.size()));
      }
      if (rates_.death.size() != r) {
        throw ValidationError(fmt::format(
            "model.d: expected {} entries, got {}", r, rates_.death.size()));
      }
      if (rates_.competition.size() != r * r) {
        throw ValidationError(
            fmt::format("model.c: expected {}x{} entries, got {}", r, r,
                        rates_.competition.size()));
      }
      for (std::size_t i = 0; i < r; ++i) {
        const double b = rates_.birth[i];
        const double d = rates_.death[i];
        if (!std::isfinite(b) || b < 0.0 || (validating_ && b == 0.0)) {
          throw ValidationError(
              fmt::format("model.b[{}]: must be > 0 (got {})", i + 1, b));
        }
        if (!std::isfinite(d) || d < 0.0) {
          throw ValidationError(
              fmt::format("model.d[{}]: must be >= 0 (got {})", i + 1, d));
        }
        for (std::size_t j = 0; j < r; ++j) {
          const double c = rates_.competition[i * r + j];
          if (!std::isfinite(c) || c < 0.0) {
            throw ValidationError(fmt::format(
                "model.c[{}][{}]: must be >= 0 (got {})", i + 1, j + 1, c));
          }
        }
        if (validating_ && rates_.competition[i * r + i] == 0.0) {
          throw ValidationError(fmt::format(
              "model.c[{0}][{0}]: intra-specific competition must be > 0",
              i + 1));
        }
      }
      if (!std::isfinite(rates_.cross_decay)) {
        throw ValidationError("model.cross_decay: must be finite");
      }
      break;
    }
    case RateFamily::kTabulated: {
      const auto& t = rates_.table;
      if (t.box < 1) throw ValidationError("model.table: empty box");
      std::size_t points = 1;
      for (std::size_t i = 0; i < r; ++i) points *= t.box;
      if (t.birth.size() != points * r || t.death.size() != points * r ||
          t.competition.size() != points * r * r) {
        throw ValidationError(fmt::format(
            "model.table: expected {} rows covering the box {{1..{}}}^{}",
            points, t.box, r));
      }
      break;
    }
    case RateFamily::kCallback: {
      const auto& cb = rates_.callbacks;
      if (!cb.birth || !cb.death || !cb.competition) {
        throw ValidationError("model: callback family needs b, d and c");
      }
      break;
    }
  }

  const auto& cat = extensions_.catastrophe;
  if (cat.kind == CatastropheKind::kPower ||
      cat.kind == CatastropheKind::kLog) {
    if (!std::isfinite(cat.coef) || cat.coef < 0.0) {
      throw ValidationError("extensions.catastrophe_coef: must be >= 0");
    }
    if (!std::isfinite(cat.power)) {
      throw ValidationError("extensions.catastrophe_power: must be finite");
    }
  }
  if (cat.kind == CatastropheKind::kCallback && !cat.callback) {
    throw ValidationError("extensions.catastrophe: missing callback");
  }

  if (extensions_.multibirth) {
    const auto& law = *extensions_.multibirth;
    if (!law.callback) {
      if (law.per_type.size() != 1 && law.per_type.size() != r) {
        throw ValidationError(
            "extensions.litter: need one shared law or one law per type");
      }
      for (const auto& list : law.per_type) {
        if (list.empty()) {
          throw ValidationError("extensions.litter: empty litter law");
        }
        double mass = 0.0;
        for (const auto& litter : list) {
          if (litter.increment.size() != r) {
            throw ValidationError(
                "extensions.litter: increment dimension mismatch");
          }
          if (total_size(litter.increment) == 0) {
            throw ValidationError(
                "extensions.litter: litters must add at least one individual");
          }
          if (!(litter.probability >= 0.0)) {
            throw ValidationError(
                "extensions.litter: probabilities must be >= 0");
          }
          mass += litter.probability;
        }
        if (std::abs(mass - 1.0) > kLitterMassTolerance) {
          throw ValidationError(fmt::format(
              "extensions.litter: probabilities sum to {} instead of 1",
              mass));
        }
      }
    }
  }
}

void Model::validate_samples() const {
  // Invariants of callback/tabulated families can only be probed pointwise.
  const Count max_size = static_cast<Count>(dimension_) + 8;
  for_each_small_state(dimension_, max_size, [&](StateView n) {
    for (std::size_t i = 0; i < dimension_; ++i) {
      const double b = birth(n, i);
      const double cii = competition(n, i, i);
      death(n, i);
      for (std::size_t j = 0; j < dimension_; ++j) competition(n, i, j);
      if (validating_ && !(b > 0.0)) {
        throw ValidationError(fmt::format(
            "model.b[{}]: birth rate must be > 0 at {}", i + 1,
            format_state(n)));
      }
      if (validating_ && !(cii > 0.0)) {
        throw ValidationError(fmt::format(
            "model.c[{0}][{0}]: must be > 0 at {1}", i + 1, format_state(n)));
      }
      if (extensions_.multibirth) litters(n, i);
    }
    catastrophe(n);
  });
}

double Model::checked(double rate, const char* what, StateView n) const {
  if (!std::isfinite(rate)) {
    throw OverflowError(
        fmt::format("{} is not finite at {}", what, format_state(n)));
  }
  if (rate < 0.0) {
    throw DomainError(fmt::format("{} is negative ({}) at {}", what, rate,
                                  format_state(n)));
  }
  return rate;
}

std::size_t Model::table_point(StateView n) const {
  const Count box = rates_.table.box;
  std::size_t point = 0;
  for (Count c : n) {
    const Count clamped = std::clamp<Count>(c, 1, box);
    point = point * box + static_cast<std::size_t>(clamped - 1);
  }
  return point;
}

double Model::birth(StateView n, std::size_t i) const {
  double value = 0.0;
  switch (rates_.family) {
    case RateFamily::kConstant:
      value = rates_.birth[i];
      break;
    case RateFamily::kPowerLaw:
      value = rates_.birth[i] *
              std::pow(static_cast<double>(total_size(n)),
                       rates_.beta1.value_or(0.0));
      break;
    case RateFamily::kTabulated:
      value = rates_.table.birth[table_point(n) * dimension_ + i];
      break;
    case RateFamily::kCallback:
      value = rates_.callbacks.birth(n, i);
      break;
  }
  return checked(value, "birth rate", n);
}

double Model::death(StateView n, std::size_t i) const {
  double value = 0.0;
  switch (rates_.family) {
    case RateFamily::kConstant:
      value = rates_.death[i];
      break;
    case RateFamily::kPowerLaw:
      value = rates_.death[i] *
              std::pow(static_cast<double>(total_size(n)),
                       rates_.beta1.value_or(0.0));
      break;
    case RateFamily::kTabulated:
      value = rates_.table.death[table_point(n) * dimension_ + i];
      break;
    case RateFamily::kCallback:
      value = rates_.callbacks.death(n, i);
      break;
  }
  return checked(value, "death rate", n);
}

double Model::competition(StateView n, std::size_t i, std::size_t j) const {
  const std::size_t r = dimension_;
  double value = 0.0;
  switch (rates_.family) {
    case RateFamily::kConstant:
      value = rates_.competition[i * r + j];
      break;
    case RateFamily::kPowerLaw: {
      const double size = static_cast<double>(total_size(n));
      if (i == j) {
        value = rates_.competition[i * r + j] *
                std::pow(size, -rates_.beta2.value_or(0.0));
      } else {
        value = rates_.competition[i * r + j] *
                std::pow(1.0 + size, -rates_.cross_decay);
      }
      break;
    }
    case RateFamily::kTabulated:
      value = rates_.table.competition[table_point(n) * r * r + i * r + j];
      break;
    case RateFamily::kCallback:
      value = rates_.callbacks.competition(n, i, j);
      break;
  }
  return checked(value, "competition coefficient", n);
}

double Model::catastrophe(StateView n) const {
  const auto& cat = extensions_.catastrophe;
  double value = 0.0;
  switch (cat.kind) {
    case CatastropheKind::kNone:
      return 0.0;
    case CatastropheKind::kPower:
      value = cat.coef *
              std::pow(static_cast<double>(total_size(n)), cat.power);
      break;
    case CatastropheKind::kLog:
      value = cat.coef * std::log1p(static_cast<double>(total_size(n)));
      break;
    case CatastropheKind::kCallback:
      value = cat.callback(n);
      break;
  }
  return checked(value, "catastrophe rate", n);
}

double Model::competition_pressure(StateView n, std::size_t i) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < dimension_; ++k) {
    sum += competition(n, i, k) * static_cast<double>(n[k]);
  }
  return sum;
}

double Model::per_capita_death(StateView n, std::size_t i) const {
  const double pressure = competition_pressure(n, i);
  const double crowding = pressure > 0.0 ? std::pow(pressure, gamma_) : 0.0;
  return death(n, i) + crowding;
}

std::vector<Litter> Model::litters(StateView n, std::size_t parent) const {
  if (!extensions_.multibirth) {
    State e(dimension_, 0);
    e[parent] = 1;
    return {Litter{std::move(e), 1.0}};
  }
  const auto& law = *extensions_.multibirth;
  if (!law.callback) {
    return law.per_type.size() == 1 ? law.per_type.front()
                                    : law.per_type[parent];
  }
  auto list = law.callback(n, parent);
  double mass = 0.0;
  for (const auto& litter : list) {
    if (litter.increment.size() != dimension_ ||
        total_size(litter.increment) == 0 || !(litter.probability >= 0.0)) {
      throw ValidationError(fmt::format("litter law invalid at {}",
                                        format_state(n)));
    }
    mass += litter.probability;
  }
  if (std::abs(mass - 1.0) > kLitterMassTolerance) {
    throw ValidationError(fmt::format(
        "litter law at {} sums to {} instead of 1", format_state(n), mass));
  }
  return list;
}

void Model::moves(StateView n, std::vector<Move>& out) const {
  if (n.size() != dimension_ || !is_interior(n)) {
    throw DomainError(fmt::format("transitions need an interior state of "
                                  "dimension {}, got {}",
                                  dimension_, format_state(n)));
  }
  for (std::size_t j = 0; j < dimension_; ++j) {
    const double b = birth(n, j);
    if (validating_ && !(b > 0.0)) {
      throw DomainError(fmt::format("birth rate of type {} vanishes at {}",
                                    j + 1, format_state(n)));
    }
    const double base = static_cast<double>(n[j]) * b;
    if (!extensions_.multibirth) {
      if (base > 0.0) out.push_back({MoveKind::kBirth, j, 0, base});
      continue;
    }
    const auto list = litters(n, j);
    for (std::size_t k = 0; k < list.size(); ++k) {
      const double rate = base * list[k].probability;
      if (rate > 0.0) out.push_back({MoveKind::kBirth, j, k, rate});
    }
  }
  for (std::size_t j = 0; j < dimension_; ++j) {
    const double rate = static_cast<double>(n[j]) * per_capita_death(n, j);
    if (!std::isfinite(rate)) {
      throw OverflowError(
          fmt::format("death rate overflow at {}", format_state(n)));
    }
    if (rate > 0.0) out.push_back({MoveKind::kDeath, j, 0, rate});
  }
  if (has_catastrophes()) {
    const double rate = catastrophe(n);
    if (rate > 0.0) out.push_back({MoveKind::kCatastrophe, 0, 0, rate});
  }
}

State Model::target(StateView n, const Move& move) const {
  State next(n.begin(), n.end());
  apply(next, move);
  return next;
}

void Model::apply(State& n, const Move& move) const {
  switch (move.kind) {
    case MoveKind::kBirth:
      if (!extensions_.multibirth) {
        n[move.type] += 1;
      } else {
        const auto list = litters(n, move.type);
        const auto& inc = list[move.litter].increment;
        for (std::size_t i = 0; i < dimension_; ++i) n[i] += inc[i];
      }
      break;
    case MoveKind::kDeath:
      n[move.type] -= 1;
      break;
    case MoveKind::kCatastrophe:
      std::fill(n.begin(), n.end(), Count{0});
      break;
  }
}

std::vector<Transition> transitions(const Model& model, StateView n) {
  std::vector<Move> moves;
  model.moves(n, moves);
  std::vector<Transition> out;
  out.reserve(moves.size());
  for (const auto& m : moves) {
    out.push_back({model.target(n, m), m.rate, m.kind});
  }
  return out;
}

double total_rate(const Model& model, StateView n) {
  double sum = 0.0;
  for (const auto& t : transitions(model, n)) sum += t.rate;
  return sum;
}

}  // namespace bdqsd
