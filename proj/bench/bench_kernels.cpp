#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "bdqsd/kernels.hpp"
#include "bdqsd/model.hpp"
#include "bdqsd/simulation.hpp"
#include "bdqsd/truncation.hpp"

namespace {

using namespace bdqsd;

Model reference_model() {
  RateSpec rates;
  rates.family = RateFamily::kPowerLaw;
  rates.birth = {3.0, 3.0};
  rates.death = {0.05, 0.05};
  rates.competition = {2.0, 0.1, 0.1, 2.0};
  rates.cross_decay = 0.5;
  return Model(2, 1.0, rates);
}

const SubGenerator& generator(Count level) {
  static std::map<Count, SubGenerator> cache;
  auto it = cache.find(level);
  if (it == cache.end()) {
    TruncatedSpace space(2, level);
    it = cache.emplace(level, assemble(reference_model(), space)).first;
  }
  return it->second;
}

template <void (*Step)(const SubGenerator&, double, std::span<const double>,
                       std::span<double>)>
void run_step(benchmark::State& state) {
  const auto& q = generator(static_cast<Count>(state.range(0)));
  std::vector<double> x(q.size(), 1.0 / static_cast<double>(q.size()));
  std::vector<double> y(q.size());
  for (auto _ : state) {
    Step(q, q.uniformization_rate(), x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["states"] = static_cast<double>(q.size());
}

void BM_LeftStepSerial(benchmark::State& s) { run_step<kernels::serial::left_step>(s); }
void BM_LeftStepParallel(benchmark::State& s) { run_step<kernels::parallel::left_step>(s); }
void BM_RightStepSerial(benchmark::State& s) { run_step<kernels::serial::right_step>(s); }
void BM_RightStepParallel(benchmark::State& s) { run_step<kernels::parallel::right_step>(s); }

BENCHMARK(BM_LeftStepSerial)->Arg(60)->Arg(200)->Arg(600);
BENCHMARK(BM_LeftStepParallel)->Arg(60)->Arg(200)->Arg(600);
BENCHMARK(BM_RightStepSerial)->Arg(60)->Arg(200)->Arg(600);
BENCHMARK(BM_RightStepParallel)->Arg(60)->Arg(200)->Arg(600);

// Monte Carlo estimator with one thread against all available threads.
void BM_MonteCarlo(benchmark::State& state) {
  const Model model = reference_model();
  const int threads = state.range(0) == 0 ? omp_get_max_threads() : 1;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) {
    auto law = estimate_conditional(model, {1, 1}, 3.0, 2000, RngPlan{42});
    benchmark::DoNotOptimize(law.total_weight);
  }
  omp_set_num_threads(saved);
  state.counters["threads"] = threads;
}
BENCHMARK(BM_MonteCarlo)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
