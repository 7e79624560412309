// Serial reference vs OpenMP kernels on a K = 4, |V| = 1000 corpus.
#include <benchmark/benchmark.h>

#include "ldmm/gibbs.hpp"
#include "ldmm/kernels.hpp"
#include "ldmm/mixture.hpp"

using namespace ldmm;

namespace {

struct Fixture {
  MixtureParams params;
  Corpus corpus;
  Assignment z;
  HyperParams hyper;

  explicit Fixture(std::size_t n) {
    params.theta = Vector(4);
    params.theta << 0.25, 0.25, 0.3, 0.2;
    params.components = {LogNormalParams{6.0, 1.0}, LogNormalParams{7.5, 1.0}, LogNormalParams{9.0, 1.2},
                         ParetoParams{2.0, 2000.0}};
    params.psi = planted_topics(4, 1000, 50, 0.7);
    Rng rng(1);
    auto sim = simulate_dataset(params, synthetic_vocabulary(1000), n, uniform_length(3, 10), rng);
    corpus = std::move(sim.corpus);
    z = std::move(sim.z);
    hyper = HyperParams::defaults(params.families(), 1000);
    std::get<GammaShapePrior>(hyper.loss_priors[3]).scale_min = 2000.0;
  }
};

const Fixture& fixture(std::size_t n) {
  static const Fixture small(1'000), large(10'000);
  return n <= 1'000 ? small : large;
}

kernels::Backend backend_of(const benchmark::State& state) {
  return state.range(1) == 0 ? kernels::Backend::Serial : kernels::Backend::OpenMP;
}

void BM_LogJoint(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  RowMatrix u;
  for (auto _ : state) {
    kernels::log_joint(f.corpus, f.params, true, u, backend_of(state));
    benchmark::DoNotOptimize(u.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_NormalizeRows(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  RowMatrix u, w;
  Vector lse;
  kernels::log_joint(f.corpus, f.params, true, u, kernels::Backend::Serial);
  for (auto _ : state) {
    kernels::normalize_rows(u, w, lse, backend_of(state));
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_WeightedWordCounts(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  RowMatrix u, w;
  Vector lse;
  kernels::log_joint(f.corpus, f.params, true, u, kernels::Backend::Serial);
  kernels::normalize_rows(u, w, lse, kernels::Backend::Serial);
  for (auto _ : state) {
    auto counts = kernels::weighted_word_counts(f.corpus, w, backend_of(state));
    benchmark::DoNotOptimize(counts.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DrawRows(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  RowMatrix u, w;
  Vector lse;
  kernels::log_joint(f.corpus, f.params, true, u, kernels::Backend::Serial);
  kernels::normalize_rows(u, w, lse, kernels::Backend::Serial);
  Assignment z;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    kernels::draw_rows(w, ++seed, 4, z, backend_of(state));
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GibbsSweep(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  GibbsState s{f.params, f.z};
  GibbsConfig g;
  g.backend = backend_of(state);
  std::uint64_t sweep = 0;
  for (auto _ : state) gibbs_sweep(s, f.corpus, f.hyper, g, g.mh_step_scale, ++sweep);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

#define LDMM_BENCH(fn) BENCHMARK(fn)->ArgsProduct({{1'000, 10'000}, {0, 1}})->ArgNames({"n", "omp"})->Unit(benchmark::kMicrosecond)

LDMM_BENCH(BM_LogJoint);
LDMM_BENCH(BM_NormalizeRows);
LDMM_BENCH(BM_WeightedWordCounts);
LDMM_BENCH(BM_DrawRows);
LDMM_BENCH(BM_GibbsSweep);

}  // namespace

BENCHMARK_MAIN();
