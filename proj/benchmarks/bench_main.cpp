#include <benchmark/benchmark.h>

#include <random>

#include "wallresp/assemble.hpp"
#include "wallresp/linalg.hpp"
#include "wallresp/pario.hpp"

using namespace wallresp;

namespace {

Dense random_dense(Index m, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dense a(m, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) a(i, j) = u(rng);
  }
  return a;
}

BlockCyclicMatrix scatter(comm::RankCtx& ctx, const Dense& full, Index nb) {
  auto a = create_block_cyclic(full.rows(), full.cols(), nb, nb, ctx.grid());
  a.for_each_owned([&](Index i, Index j, double& v) { v = full(i, j); });
  return a;
}

// Ranks are threads, so every benchmark reports wall time.

// args: ranks, mesh cells per direction
void BM_AssemblePairwise(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto mesh = generate_torus_mesh(state.range(1), state.range(1), 3, 1.2);
  const auto k = surrogate_kernel(0.1);
  for (auto _ : state) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      auto out = create_block_cyclic(mesh.npot, mesh.npot, 64, 64, ctx.grid());
      assemble_pairwise(mesh, mesh, k, true, out);
      benchmark::DoNotOptimize(out.local().data());
    });
  }
  state.counters["ntri"] = static_cast<double>(mesh.ntri());
}
BENCHMARK(BM_AssemblePairwise)->Args({1, 16})->Args({4, 16})->Args({1, 32})->Args({4, 32})
    ->UseRealTime()->Unit(benchmark::kMillisecond);

// args: ranks, n, NB
void BM_DistGemm(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const Index n = state.range(1);
  const Index nb = state.range(2);
  const Dense a = random_dense(n, n, 1);
  const Dense b = random_dense(n, n, 2);
  for (auto _ : state) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      auto da = scatter(ctx, a, nb);
      auto db = scatter(ctx, b, nb);
      auto dc = create_block_cyclic(n, n, nb, nb, ctx.grid());
      dist_gemm(ctx, 1.0, da, db, 0.0, dc, nb);
      benchmark::DoNotOptimize(dc.local().data());
    });
  }
}
BENCHMARK(BM_DistGemm)->Args({1, 256, 64})->Args({4, 256, 64})->Args({4, 256, 16})
    ->Args({4, 256, 2})->UseRealTime()->Unit(benchmark::kMillisecond);

// args: ranks, n, NB
void BM_Cholesky(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const Index n = state.range(1);
  const Index nb = state.range(2);
  const Dense g = random_dense(n, n, 3);
  const Dense spd = g * g.transpose() + static_cast<double>(n) * Dense::Identity(n, n);
  for (auto _ : state) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      auto a = scatter(ctx, spd, nb);
      cholesky_factor(ctx, a);
      benchmark::DoNotOptimize(a.local().data());
    });
  }
}
BENCHMARK(BM_Cholesky)->Args({1, 256, 64})->Args({4, 256, 64})->Args({4, 256, 8})
    ->UseRealTime()->Unit(benchmark::kMillisecond);

// args: ranks, chunk_limit
void BM_WriteDistributed(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto limit = static_cast<std::uint64_t>(state.range(1));
  const Dense a = random_dense(512, 512, 4);
  const std::string path = "/tmp/wallresp_bench_io.swrm";
  for (auto _ : state) {
    comm::run(p, [&](comm::RankCtx& ctx) {
      pario::write_distributed(ctx, path, scatter(ctx, a, 64), limit);
    });
  }
  state.SetBytesProcessed(state.iterations() * 512 * 512 * 8);
  std::remove(path.c_str());
}
BENCHMARK(BM_WriteDistributed)->Args({1, 1 << 28})->Args({4, 1 << 28})->Args({4, 4096})
    ->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
