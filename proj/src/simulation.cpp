#include "bdqsd/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

#include <fmt/format.h>

#include "bdqsd/error.hpp"

namespace bdqsd {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// Gillespie kernel shared by every simulator. The exponential clock is drawn
// first, then one uniform selects the move against the cumulative rates in
// canonical enumeration order.
class Stepper {
 public:
  explicit Stepper(const Model& model) : model_(model) {}

  /// Total jump rate out of x; caches the move list for select().
  double prepare(const State& x) {
    moves_.clear();
    model_.moves(x, moves_);
    total_ = 0.0;
    for (const auto& m : moves_) total_ += m.rate;
    if (!std::isfinite(total_)) {
      throw OverflowError(
          fmt::format("total jump rate overflow at {}", format_state(x)));
    }
    return total_;
  }

  /// Applies the move picked by u in [0, 1) to x.
  void select(State& x, double u) const {
    const double target = u * total_;
    double cum = 0.0;
    std::size_t pick = moves_.size() - 1;
    for (std::size_t k = 0; k < moves_.size(); ++k) {
      cum += moves_[k].rate;
      if (target < cum) {
        pick = k;
        break;
      }
    }
    model_.apply(x, moves_[pick]);
  }

 private:
  const Model& model_;
  std::vector<Move> moves_;
  double total_ = 0.0;
};

void require_start(const Model& model, const State& x0, double t) {
  if (x0.size() != model.dimension() || !is_interior(x0)) {
    throw DomainError(fmt::format(
        "simulation.x0: {} is not an interior state of dimension {}",
        format_state(x0), model.dimension()));
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw DomainError(fmt::format("simulation time must be >= 0 (got {})", t));
  }
}

// Runs one path to time t_max; returns true if it is alive at t_max.
// `on_event` sees every (time, state) after a jump.
template <typename OnEvent>
bool run_path(Stepper& stepper, State& x, double t_max, RandomStream& rs,
              double& end_time, OnEvent&& on_event) {
  double t = 0.0;
  while (true) {
    const double total = stepper.prepare(x);
    if (total <= 0.0) break;
    const double dt = rs.exponential(total);
    if (t + dt > t_max) break;
    t += dt;
    stepper.select(x, rs.uniform());
    on_event(t, x);
    if (is_absorbed(x)) {
      end_time = t;
      return false;
    }
  }
  end_time = t_max;
  return true;
}

}  // namespace

void validate_trajectory(const Model& model, const Trajectory& path) {
  double last = 0.0;
  State current = path.initial;
  for (std::size_t k = 0; k < path.events.size(); ++k) {
    const auto& e = path.events[k];
    if (!(e.time > last)) {
      throw std::logic_error(
          fmt::format("trajectory: event {} time {} not after {}", k, e.time,
                      last));
    }
    if (is_absorbed(current)) {
      throw std::logic_error("trajectory: event after absorption");
    }
    const auto legal = transitions(model, current);
    const bool ok = std::any_of(legal.begin(), legal.end(), [&](const auto& t) {
      return t.target == e.state;
    });
    if (!ok) {
      throw std::logic_error(fmt::format("trajectory: {} -> {} is not a move",
                                         format_state(current),
                                         format_state(e.state)));
    }
    last = e.time;
    current = e.state;
  }
  const bool absorbed = is_absorbed(current);
  if (absorbed != (path.status == PathStatus::kAbsorbed)) {
    throw std::logic_error("trajectory: terminal status mismatch");
  }
  if (last > path.end_time) {
    throw std::logic_error("trajectory: event after the end time");
  }
}

void EmpiricalLaw::add(const State& n, double w) {
  weights[n] += w;
  total_weight += w;
}

std::vector<std::pair<State, double>> EmpiricalLaw::normalized() const {
  std::vector<std::pair<State, double>> out;
  out.reserve(weights.size());
  for (const auto& [n, w] : weights) {
    out.emplace_back(n, total_weight > 0.0 ? w / total_weight : 0.0);
  }
  return out;
}

std::vector<double> EmpiricalLaw::on_space(const TruncatedSpace& space,
                                           double* outside) const {
  std::vector<double> law(space.size(), 0.0);
  double rest = 0.0;
  for (const auto& [n, w] : weights) {
    const double p = total_weight > 0.0 ? w / total_weight : 0.0;
    if (auto idx = space.index_of(n)) {
      law[*idx] += p;
    } else {
      rest += p;
    }
  }
  if (outside) *outside = rest;
  return law;
}

double EmpiricalLaw::tv_to(const TruncatedSpace& space,
                           std::span<const double> law) const {
  double outside = 0.0;
  const auto mine = on_space(space, &outside);
  double sum = outside;
  for (std::size_t i = 0; i < mine.size(); ++i) sum += std::abs(mine[i] - law[i]);
  return 0.5 * sum;
}

Trajectory simulate_path(const Model& model, const State& x0, double t_max,
                         const RngPlan& rng, std::uint64_t stream) {
  require_start(model, x0, t_max);
  Trajectory path;
  path.initial = x0;
  Stepper stepper(model);
  RandomStream rs = rng.stream(stream);
  State x = x0;
  double end = t_max;
  const bool alive = run_path(stepper, x, t_max, rs, end,
                              [&](double t, const State& s) {
                                path.events.push_back({t, s});
                              });
  path.status = alive ? PathStatus::kAlive : PathStatus::kAbsorbed;
  path.end_time = end;
#ifndef NDEBUG
  validate_trajectory(model, path);
#endif
  return path;
}

EmpiricalLaw estimate_conditional(const Model& model, const State& x0,
                                  double t, std::size_t n_traj,
                                  const RngPlan& rng) {
  require_start(model, x0, t);
  if (n_traj < 1) throw DomainError("simulation.trajectories must be >= 1");

  std::map<State, std::uint64_t> counts;
  std::uint64_t survivors = 0;
  const auto total = static_cast<std::ptrdiff_t>(n_traj);
#pragma omp parallel
  {
    std::map<State, std::uint64_t> local;
    std::uint64_t local_survivors = 0;
    Stepper stepper(model);
    State x;
#pragma omp for schedule(dynamic, 256)
    for (std::ptrdiff_t i = 0; i < total; ++i) {
      RandomStream rs = rng.stream(static_cast<std::uint64_t>(i));
      x = x0;
      double end = t;
      if (run_path(stepper, x, t, rs, end, [](double, const State&) {})) {
        ++local[x];
        ++local_survivors;
      }
    }
    // Integer counts: the merge is exact in any order.
#pragma omp critical(bdqsd_estimate_merge)
    {
      for (const auto& [n, c] : local) counts[n] += c;
      survivors += local_survivors;
    }
  }

  if (survivors == 0) {
    throw NoSurvivorError(fmt::format(
        "no trajectory out of {} survived to t={} (survival estimate 0)",
        n_traj, t));
  }
  EmpiricalLaw law;
  for (const auto& [n, c] : counts) law.add(n, static_cast<double>(c));
  law.effective_sample_size = static_cast<double>(survivors);
  law.survival = static_cast<double>(survivors) / static_cast<double>(n_traj);
  return law;
}

EmpiricalLaw fleming_viot(const Model& model, const State& x0,
                          std::size_t n_particles, double t,
                          const RngPlan& rng) {
  require_start(model, x0, t);
  if (n_particles < 2) {
    throw DomainError("simulation.particles must be >= 2 for Fleming-Viot");
  }
  std::vector<State> particles(n_particles, x0);
  std::vector<RandomStream> streams;
  streams.reserve(n_particles);
  for (std::size_t i = 0; i < n_particles; ++i) streams.push_back(rng.stream(i));
  RandomStream resampler = rng.stream(n_particles);
  Stepper stepper(model);

  using Clock = std::pair<double, std::size_t>;
  std::priority_queue<Clock, std::vector<Clock>, std::greater<>> queue;
  constexpr double kNever = std::numeric_limits<double>::infinity();
  auto schedule = [&](std::size_t i, double now) {
    const double total = stepper.prepare(particles[i]);
    const double when = total > 0.0 ? now + streams[i].exponential(total) : kNever;
    queue.emplace(when, i);
  };
  for (std::size_t i = 0; i < n_particles; ++i) schedule(i, 0.0);

  // One event at a time: continuous-time clocks never tie almost surely.
  while (!queue.empty() && queue.top().first <= t) {
    const auto [now, i] = queue.top();
    queue.pop();
    stepper.prepare(particles[i]);
    stepper.select(particles[i], streams[i].uniform());
    if (is_absorbed(particles[i])) {
      auto partner = static_cast<std::size_t>(
          resampler.uniform() * static_cast<double>(n_particles - 1));
      partner = std::min(partner, n_particles - 2);
      if (partner >= i) ++partner;
      particles[i] = particles[partner];
    }
    schedule(i, now);
  }

  EmpiricalLaw law;
  for (const auto& p : particles) law.add(p, 1.0);
  law.effective_sample_size = static_cast<double>(n_particles);
  return law;
}

std::vector<double> QProcessGenerator::row_sums() const {
  std::vector<double> sums(diagonal.size());
  for (std::size_t i = 0; i < diagonal.size(); ++i) {
    double s = diagonal[i];
    for (std::size_t k = rows.offsets[i]; k < rows.offsets[i + 1]; ++k) {
      s += rows.values[k];
    }
    sums[i] = s;
  }
  return sums;
}

QProcessGenerator qprocess_generator(const SubGenerator& q,
                                     const QsdResult& qsd) {
  if (qsd.eta.size() != q.size()) {
    throw DomainError("Q-process: eigenfunction and generator sizes differ");
  }
  QProcessGenerator out;
  out.rows = q.rows();
  out.diagonal.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t k = out.rows.offsets[i]; k < out.rows.offsets[i + 1]; ++k) {
      out.rows.values[k] *= qsd.eta[out.rows.columns[k]] / qsd.eta[i];
    }
    out.diagonal[i] = q.diagonal()[i] + qsd.lambda0;
  }
  return out;
}

Trajectory simulate_qprocess(const Model& model, const SubGenerator& q,
                             const QsdResult& qsd,
                             const TruncatedSpace& space, const State& x0,
                             double t_max, const RngPlan& rng,
                             std::uint64_t stream) {
  if (model.dimension() != space.dimension() || q.size() != space.size()) {
    throw DomainError("Q-process: model, generator and space do not match");
  }
  const auto start = space.index_of(x0);
  if (!start) {
    throw DomainError(fmt::format("Q-process: x0 {} is not in the space",
                                  format_state(x0)));
  }
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
    throw DomainError("Q-process: t_max must be >= 0");
  }
  const auto gen = qprocess_generator(q, qsd);
  RandomStream rs = rng.stream(stream);
  Trajectory path;
  path.initial = x0;
  path.status = PathStatus::kAlive;
  path.end_time = t_max;

  std::size_t i = *start;
  double t = 0.0;
  while (true) {
    const std::size_t lo = gen.rows.offsets[i];
    const std::size_t hi = gen.rows.offsets[i + 1];
    double total = 0.0;
    for (std::size_t k = lo; k < hi; ++k) total += gen.rows.values[k];
    if (total <= 0.0) break;
    const double dt = rs.exponential(total);
    if (t + dt > t_max) break;
    t += dt;
    const double target = rs.uniform() * total;
    double cum = 0.0;
    std::size_t next = gen.rows.columns[hi - 1];
    for (std::size_t k = lo; k < hi; ++k) {
      cum += gen.rows.values[k];
      if (target < cum) {
        next = gen.rows.columns[k];
        break;
      }
    }
    i = next;
    const auto s = space.state(i);
    path.events.push_back({t, State(s.begin(), s.end())});
  }
  return path;
}

std::vector<double> occupation_measure(const Trajectory& path,
                                       const TruncatedSpace& space,
                                       double t_max) {
  if (!(t_max > 0.0)) throw DomainError("occupation measure needs t_max > 0");
  std::vector<double> occ(space.size(), 0.0);
  auto credit = [&](const State& s, double dt) {
    const auto idx = space.index_of(s);
    if (!idx) {
      throw DomainError(fmt::format("occupation: {} left the space",
                                    format_state(s)));
    }
    occ[*idx] += dt;
  };
  double last = 0.0;
  const State* current = &path.initial;
  for (const auto& e : path.events) {
    if (e.time > t_max) break;
    credit(*current, e.time - last);
    last = e.time;
    current = &e.state;
  }
  credit(*current, t_max - last);
  for (double& v : occ) v /= t_max;
  return occ;
}

}  // namespace bdqsd
