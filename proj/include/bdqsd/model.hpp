#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bdqsd {

using Count = std::uint64_t;

/// Population vector in Z_+^r. Interior iff every coordinate is >= 1.
using State = std::vector<Count>;
using StateView = std::span<const Count>;

/// True iff some coordinate is zero, i.e. the state lies on the absorbing
/// boundary.
bool is_absorbed(StateView n);
inline bool is_interior(StateView n) { return !n.empty() && !is_absorbed(n); }
Count total_size(StateView n);
std::string format_state(StateView n);

enum class RateFamily { kConstant, kPowerLaw, kTabulated, kCallback };

std::string to_string(RateFamily family);

/// Rates tabulated on the box {1..box}^r. Points outside the box read the
/// nearest box point (coordinates clamped).
struct RateTable {
  Count box = 0;
  std::vector<double> birth;        // [point * r + i]
  std::vector<double> death;        // [point * r + i]
  std::vector<double> competition;  // [point * r * r + i * r + j]
};

struct RateCallbacks {
  std::function<double(StateView, std::size_t)> birth;
  std::function<double(StateView, std::size_t)> death;
  std::function<double(StateView, std::size_t, std::size_t)> competition;
};

/// Per-capita birth, death and competition functions.
///
/// Constant:  b_i(n) = b_i, d_i(n) = d_i, c_ij(n) = c_ij.
/// Power law: b_i(n) = b_i |n|^beta1, d_i(n) = d_i |n|^beta1,
///            c_ii(n) = c_ii |n|^-beta2, c_ij(n) = c_ij (1+|n|)^-cross_decay.
struct RateSpec {
  RateFamily family = RateFamily::kConstant;
  std::vector<double> birth;
  std::vector<double> death;
  std::vector<double> competition;  // row-major r x r
  double cross_decay = 0.0;
  std::optional<double> beta1;
  std::optional<double> beta2;
  RateTable table;
  RateCallbacks callbacks;
};

enum class CatastropheKind { kNone, kPower, kLog, kCallback };

/// a(n) = coef |n|^power (kPower) or coef log(1+|n|) (kLog).
struct CatastropheSpec {
  CatastropheKind kind = CatastropheKind::kNone;
  double coef = 0.0;
  double power = 1.0;
  std::function<double(StateView)> callback;
};

struct Litter {
  State increment;
  double probability = 0.0;
};

/// Law of the progeny vector added at a birth event. A fixed law holds one
/// litter list per parent type (or a single list shared by all types) and
/// does not depend on n. A callback law may depend on (n, parent) and must
/// declare its mean litter size for the sup-mean condition to be checkable.
struct LitterLaw {
  std::vector<std::vector<Litter>> per_type;
  std::function<std::vector<Litter>(StateView, std::size_t)> callback;
  std::optional<double> declared_mean;
};

struct ExtensionSpec {
  CatastropheSpec catastrophe;
  std::optional<LitterLaw> multibirth;
};

enum class MoveKind { kBirth, kDeath, kCatastrophe };

/// One nonzero-rate move out of a state, without its target materialized.
struct Move {
  MoveKind kind = MoveKind::kBirth;
  std::size_t type = 0;    // parent / dying type
  std::size_t litter = 0;  // index into the litter list for kBirth
  double rate = 0.0;
};

struct Transition {
  State target;
  double rate = 0.0;
  MoveKind kind = MoveKind::kBirth;
};

/// Immutable multi-type competitive birth-death model. All member functions
/// are const and safe for concurrent use.
class Model {
 public:
  Model(std::size_t dimension, double gamma, RateSpec rates,
        ExtensionSpec extensions = {});

  /// Builds a model without the positivity checks on b_i and c_ii, for test
  /// scaffolding that needs degenerate dynamics. Negative or non-finite
  /// rates are still rejected at evaluation time.
  static Model unchecked(std::size_t dimension, double gamma, RateSpec rates,
                         ExtensionSpec extensions = {});

  std::size_t dimension() const { return dimension_; }
  double gamma() const { return gamma_; }
  const RateSpec& rates() const { return rates_; }
  const ExtensionSpec& extensions() const { return extensions_; }
  bool validating() const { return validating_; }
  bool has_catastrophes() const {
    return extensions_.catastrophe.kind != CatastropheKind::kNone;
  }
  bool has_multibirth() const { return extensions_.multibirth.has_value(); }

  double birth(StateView n, std::size_t i) const;
  double death(StateView n, std::size_t i) const;
  double competition(StateView n, std::size_t i, std::size_t j) const;
  double catastrophe(StateView n) const;

  /// sum_k c_ik(n) n_k
  double competition_pressure(StateView n, std::size_t i) const;
  /// d_i(n) + (sum_k c_ik(n) n_k)^gamma, with 0^gamma = 0.
  double per_capita_death(StateView n, std::size_t i) const;

  /// Litter list used when an individual of type `parent` gives birth.
  /// Single births yield {e_parent: 1}.
  std::vector<Litter> litters(StateView n, std::size_t parent) const;

  /// Appends the nonzero-rate moves from interior n in the canonical order:
  /// births of every type (litters in declared order), then deaths of every
  /// type, then the catastrophe.
  void moves(StateView n, std::vector<Move>& out) const;

  /// Target of `move` from n. Catastrophes land on the all-zero marker.
  State target(StateView n, const Move& move) const;
  void apply(State& n, const Move& move) const;

 private:
  Model(std::size_t dimension, double gamma, RateSpec rates,
        ExtensionSpec extensions, bool validating);
  void validate_structure() const;
  void validate_samples() const;
  std::size_t table_point(StateView n) const;
  double checked(double rate, const char* what, StateView n) const;

  std::size_t dimension_;
  double gamma_;
  RateSpec rates_;
  ExtensionSpec extensions_;
  bool validating_;
};

/// Every nonzero-rate move of the generator from interior n, in canonical
/// order. Throws DomainError for non-interior n and OverflowError when a
/// rate is not finite.
std::vector<Transition> transitions(const Model& model, StateView n);

/// Sum of the rates returned by transitions(), in the same order.
double total_rate(const Model& model, StateView n);

/// Tolerance on the litter-law normalization.
inline constexpr double kLitterMassTolerance = 1e-12;

}  // namespace bdqsd
