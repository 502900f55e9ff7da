#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "pere/dpp.hpp"
#include "pere/engine.hpp"
#include "pere/geometry.hpp"
#include "scenarios.hpp"

namespace {

// Cuts from a consistent user: nearest `likes` of `items` random points liked, the rest disliked.
std::vector<pere::Cut> consistent_cuts(std::size_t dim, std::size_t items, std::size_t likes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto draw = [&] {
    return Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(dim), [&] { return unit(rng); }).eval();
  };
  const Eigen::VectorXd truth = draw();
  std::vector<Eigen::VectorXd> points(items);
  for (auto& p : points) p = draw();
  std::sort(points.begin(), points.end(),
            [&](const auto& a, const auto& b) { return (a - truth).norm() < (b - truth).norm(); });
  std::vector<pere::Cut> cuts;
  for (std::size_t l = 0; l < likes; ++l)
    for (std::size_t d = likes; d < items; ++d) cuts.push_back(pere::make_cut(points[l], points[d]));
  return cuts;
}

void BM_ChebyshevCenter(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto items = static_cast<std::size_t>(state.range(1));
  const auto cuts = consistent_cuts(dim, items, items / 5, 1);
  for (auto _ : state) benchmark::DoNotOptimize(pere::chebyshev_center(dim, cuts));
  state.counters["cuts"] = static_cast<double>(cuts.size());
}
BENCHMARK(BM_ChebyshevCenter)->Args({4, 20})->Args({16, 50})->Args({64, 125})->Unit(benchmark::kMillisecond);

void BM_TolerantExact(benchmark::State& state) {
  auto cuts = consistent_cuts(3, 9, 3, 2);
  cuts.resize(12);
  cuts.push_back({-cuts[0].normal, -cuts[0].offset - 0.05, cuts[0].norm});
  for (auto _ : state) benchmark::DoNotOptimize(pere::chebyshev_center_with_budget(3, cuts, 1));
}
BENCHMARK(BM_TolerantExact)->Unit(benchmark::kMicrosecond);

void BM_GreedyMap(benchmark::State& state) {
  const auto popular = static_cast<std::size_t>(state.range(0));
  const auto catalog = pere::synth_catalog(popular, 16, 10, 3);
  const auto ensemble = pere::build_ensemble(catalog, popular);
  for (auto _ : state) benchmark::DoNotOptimize(pere::greedy_map(ensemble, 50));
}
BENCHMARK(BM_GreedyMap)->Arg(500)->Arg(1000)->Arg(2500)->Unit(benchmark::kMillisecond);

void BM_LocalSearch(benchmark::State& state) {
  const auto catalog = pere::synth_catalog(1000, 16, 10, 3);
  const auto ensemble = pere::build_ensemble(catalog, 1000);
  const auto seed = pere::greedy_map(ensemble, 50);
  for (auto _ : state) benchmark::DoNotOptimize(pere::local_search_2swap(ensemble, seed));
}
BENCHMARK(BM_LocalSearch)->Unit(benchmark::kMillisecond);

void BM_AdaptiveRound(benchmark::State& state) {
  const auto s = pere::scenarios::round_scenario(10000, 64, 125, 25, 2500, 4);
  auto burned = s.elicitor->start(0);
  burned.submit(s.user.answer(*s.catalog, burned));
  state.counters["cuts"] = static_cast<double>(burned.region().cuts.size());
  for (auto _ : state) {
    state.PauseTiming();
    auto session = burned;
    const auto answers = s.user.answer(*s.catalog, session);
    state.ResumeTiming();
    session.submit(answers);
    benchmark::DoNotOptimize(session.region().radius);
  }
}
BENCHMARK(BM_AdaptiveRound)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_KMedoids(benchmark::State& state) {
  const auto catalog = pere::synth_catalog(1000, 16, 10, 5);
  for (auto _ : state) benchmark::DoNotOptimize(pere::kmedoids(catalog, 50, 1000));
}
BENCHMARK(BM_KMedoids)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
