#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "bdqsd/model.hpp"
#include "bdqsd/truncation.hpp"

namespace bdqsd {

/// One independent random stream. The engine is std::mt19937_64 seeded with
/// splitmix64(seed ^ splitmix64(stream)); uniforms use the top 53 bits.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  /// Exponential variate by inversion.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Master seed plus per-trajectory stream derivation. Results depend only on
/// (seed, stream index), never on thread scheduling.
struct RngPlan {
  std::uint64_t seed = 42;

  RandomStream stream(std::uint64_t index) const {
    return RandomStream(splitmix64(seed ^ splitmix64(index)));
  }
};

enum class PathStatus { kAbsorbed, kAlive };

struct Event {
  double time = 0.0;
  State state;
};

struct Trajectory {
  State initial;
  std::vector<Event> events;
  PathStatus status = PathStatus::kAlive;
  double end_time = 0.0;  // absorption time, or t_max when alive

  const State& final_state() const {
    return events.empty() ? initial : events.back().state;
  }
};

/// Throws std::logic_error when event times are not strictly increasing,
/// a step is not a legal move of the model, or events follow absorption.
void validate_trajectory(const Model& model, const Trajectory& path);

/// Weighted histogram over states.
struct EmpiricalLaw {
  std::map<State, double> weights;
  double total_weight = 0.0;
  double effective_sample_size = 0.0;
  /// Fraction of trajectories alive at the observation time (1 for
  /// particle systems).
  double survival = 1.0;

  void add(const State& n, double w);
  std::vector<std::pair<State, double>> normalized() const;
  /// Masses on the space; mass outside it is returned separately.
  std::vector<double> on_space(const TruncatedSpace& space,
                               double* outside = nullptr) const;
  /// TV distance to a law on the space, counting mass outside the space.
  double tv_to(const TruncatedSpace& space, std::span<const double> law) const;
};

/// Gillespie direct method from x0 until absorption or t_max.
Trajectory simulate_path(const Model& model, const State& x0, double t_max,
                         const RngPlan& rng, std::uint64_t stream = 0);

/// State at time t of n_traj independent paths, conditioned on survival.
/// Throws NoSurvivorError when no path survives.
EmpiricalLaw estimate_conditional(const Model& model, const State& x0,
                                  double t, std::size_t n_traj,
                                  const RngPlan& rng);

/// Fleming-Viot particle system: absorbed particles jump onto a uniformly
/// chosen other particle. Particle i uses stream i; resampling draws use
/// stream n_particles.
EmpiricalLaw fleming_viot(const Model& model, const State& x0,
                          std::size_t n_particles, double t,
                          const RngPlan& rng);

/// Off-diagonal Q(x,y) eta(y) / eta(x) with diagonal Q(x,x) + lambda0.
struct QProcessGenerator {
  SparseRows rows;
  std::vector<double> diagonal;

  std::vector<double> row_sums() const;
};

QProcessGenerator qprocess_generator(const SubGenerator& q,
                                     const QsdResult& qsd);

/// Doob h-transform of the truncated chain with h = eta. Never absorbs.
Trajectory simulate_qprocess(const Model& model, const SubGenerator& q,
                             const QsdResult& qsd,
                             const TruncatedSpace& space, const State& x0,
                             double t_max, const RngPlan& rng,
                             std::uint64_t stream = 0);

/// Fraction of [0, t_max] spent in each state of the space.
std::vector<double> occupation_measure(const Trajectory& path,
                                       const TruncatedSpace& space,
                                       double t_max);

}  // namespace bdqsd
