#include <benchmark/benchmark.h>

#include "grl/evolution.hpp"
#include "grl/network.hpp"
#include "grl/ppo.hpp"
#include "grl/terrain.hpp"

namespace {

grl::AgentGenome bench_genome(int width) {
  return grl::make_genome(6, width, 2, grl::InitMethod::kOrthogonal, 7);
}

void BM_Forward(benchmark::State& state) {
  const grl::AgentGenome genome = bench_genome(static_cast<int>(state.range(0)));
  Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grl::forward(genome.actor, obs));
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(48);

void BM_Heightfield(benchmark::State& state) {
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grl::generate_heightfield(grl::ObstacleKind::kRubble, seed++));
  }
}
BENCHMARK(BM_Heightfield);

void BM_EnvEpisode(benchmark::State& state) {
  const grl::AgentGenome genome = bench_genome(16);
  grl::TerrainEnv env(grl::generate_heightfield(grl::ObstacleKind::kHill, 3),
                      grl::EnvParams{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(grl::evaluate_episode(genome, env));
  }
}
BENCHMARK(BM_EnvEpisode);

void BM_PpoUpdate(benchmark::State& state) {
  grl::AgentGenome genome = bench_genome(16);
  grl::TerrainEnv env(grl::generate_heightfield(grl::ObstacleKind::kStep, 5),
                      grl::EnvParams{});
  for (auto _ : state) {
    state.PauseTiming();
    grl::AgentGenome copy = genome;
    state.ResumeTiming();
    grl::TerrainEnv local = env;
    benchmark::DoNotOptimize(
        grl::train_lifetime(copy, local, 1, grl::PPOConfig{}, 11));
  }
}
BENCHMARK(BM_PpoUpdate);

void BM_ExtractAndReplace(benchmark::State& state) {
  const grl::NetworkArchitecture arch{6, 16, 5, 2};
  std::vector<grl::AgentGenome> genomes;
  for (int i = 0; i < 4; ++i) genomes.push_back(bench_genome(16));
  std::vector<grl::GenePool::WinnerView> winners;
  for (int i = 0; i < 4; ++i) {
    winners.push_back({i, &genomes[static_cast<std::size_t>(i)], 1000.0 + i, 0});
  }
  for (auto _ : state) {
    grl::GenePool pool(grl::NetworkTag::kActor, 2, 7, arch);
    grl::Rng rng = grl::make_rng(9);
    pool.bootstrap(winners, rng, nullptr);
    pool.extract_and_replace(winners, 1, 0.1, rng, nullptr);
    benchmark::DoNotOptimize(pool.total_score());
  }
}
BENCHMARK(BM_ExtractAndReplace);

}  // namespace

BENCHMARK_MAIN();
