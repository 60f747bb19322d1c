#include "frame/overlap_index.hpp"
#include "frame/registration.hpp"
#include "frame/sim.hpp"
#include "support.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace frame;

namespace {

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

const sim::Scenario& scenario() {
  static const sim::Scenario sc = sim::simulate_scenario(sim::fig3_scenario(0));
  return sc;
}

const PointCloud& submap() {
  static const PointCloud cloud = [] {
    const auto& run = scenario().runs[0].run;
    return voxel_downsample(sample_sphere(run.map, {run.records[10].position, 10.0}), 0.25);
  }();
  return cloud;
}

void BM_QueryBestPair(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<DescriptorRecord> own, incoming;
  for (std::uint32_t i = 0; i < 2000; ++i) own.push_back(frame::testing::random_record(rng, i));
  for (std::uint32_t i = 0; i < 2000; ++i) incoming.push_back(frame::testing::random_record(rng, i));
  const auto index = build_index(own);
  for (auto _ : state) benchmark::DoNotOptimize(query_best_pair(index, incoming, exec_of(state)));
}

void BM_EstimateCovariances(benchmark::State& state) {
  const auto& cloud = submap();
  for (auto _ : state) benchmark::DoNotOptimize(estimate_covariances(cloud, 20, 1e-3, exec_of(state)));
  state.counters["points"] = static_cast<double>(cloud.size());
}

void BM_GicpCost(benchmark::State& state) {
  const auto cov = estimate_covariances(submap(), 20, 1e-3);
  const auto pose = Transform::from_yaw_translation(0.01, {0.05, 0.0, 0.0});
  const auto corr = CorrespondenceSearch(cov).find(cov, pose, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(gicp_cost(cov, cov, corr, pose, exec_of(state)));
}

void BM_GicpRegister(benchmark::State& state) {
  const auto cov = estimate_covariances(submap(), 20, 1e-3);
  const auto tgt = estimate_covariances(apply(Transform::from_yaw_translation(0.05, {0.2, -0.1, 0.0}), submap()),
                                        20, 1e-3);
  RegistrationParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gicp_register(cov, tgt, Transform::identity(), params, exec_of(state)));
  }
}

void BM_SimulateScan(benchmark::State& state) {
  const auto& world = scenario().world;
  sim::ScanConfig cfg;
  const auto pose = Transform::from_yaw_translation(0.3, {60, 0, 1.5});
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_scan(world, pose, cfg, k++, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_QueryBestPair)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EstimateCovariances)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GicpCost)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GicpRegister)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateScan)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
