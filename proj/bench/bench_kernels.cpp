// Serial vs OpenMP timings for the data-parallel kernels and the simulator.
#include <benchmark/benchmark.h>

#include "dikw/dataset/catalog.hpp"
#include "dikw/info/slice.hpp"
#include "dikw/kernels/kernels.hpp"
#include "dikw/sim/simulator.hpp"

using namespace dikw;

namespace {

const dataset::MessageCatalog& catalog() {
  static const auto c = dataset::load_catalog(DIKW_CATALOG_PATH);
  return c;
}

const dataset::EncounterTable& table(std::size_t rows) {
  static std::map<std::size_t, dataset::EncounterTable> cache;
  auto it = cache.find(rows);
  if (it == cache.end()) {
    sim::GroundTruthModel m;
    m.seed = 11;
    it = cache.emplace(rows, sim::generate(m, catalog(), rows, sim::DemographicsMix::defaults())).first;
  }
  return it->second;
}

kernels::Exec exec_of(const benchmark::State& s) { return s.range(1) ? kernels::Exec::Parallel : kernels::Exec::Serial; }

void BM_MaskCompare(benchmark::State& s) {
  const auto& t = table(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) {
    auto m = kernels::full_mask(t.row_count());
    kernels::mask_compare(t.column("age"), kernels::Cmp::Ge, 45.0, m, exec_of(s));
    benchmark::DoNotOptimize(kernels::count(m, exec_of(s)));
  }
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_TallyByGroup(benchmark::State& s) {
  const auto& t = table(static_cast<std::size_t>(s.range(0)));
  info::Evaluator ev(t, &catalog(), {}, exec_of(s));
  const auto g = ev.grouping("variant");
  const auto m = kernels::full_mask(t.row_count());
  for (auto _ : s) {
    benchmark::DoNotOptimize(kernels::tally_by_group(g.codes, static_cast<int>(g.labels.size()), t.column("clicked"),
                                                     m, exec_of(s)));
  }
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_Contingency(benchmark::State& s) {
  const auto& t = table(static_cast<std::size_t>(s.range(0)));
  info::Evaluator ev(t, &catalog(), {}, exec_of(s));
  const auto a = ev.grouping("variant");
  const auto b = ev.grouping("clicked");
  const auto m = kernels::full_mask(t.row_count());
  for (auto _ : s) {
    benchmark::DoNotOptimize(kernels::contingency(a.codes, static_cast<int>(a.labels.size()), b.codes,
                                                  static_cast<int>(b.labels.size()), m, exec_of(s)));
  }
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_PairedMoments(benchmark::State& s) {
  const auto& t = table(static_cast<std::size_t>(s.range(0)));
  const auto m = kernels::full_mask(t.row_count());
  for (auto _ : s) {
    benchmark::DoNotOptimize(kernels::paired_moments(t.column("age"), t.column("clicked"), m, exec_of(s)));
  }
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_Simulate(benchmark::State& s) {
  sim::GroundTruthModel m;
  m.seed = 5;
  const auto mix = sim::DemographicsMix::defaults();
  for (auto _ : s) {
    benchmark::DoNotOptimize(sim::generate(m, catalog(), static_cast<std::size_t>(s.range(0)), mix, exec_of(s)));
  }
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long rows : {50000L, 1000000L}) {
    for (long parallel : {0L, 1L}) b->Args({rows, parallel});
  }
  b->ArgNames({"rows", "parallel"});
}

}  // namespace

BENCHMARK(BM_MaskCompare)->Apply(sizes);
BENCHMARK(BM_TallyByGroup)->Apply(sizes);
BENCHMARK(BM_Contingency)->Apply(sizes);
BENCHMARK(BM_PairedMoments)->Apply(sizes);
BENCHMARK(BM_Simulate)->Apply(sizes)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
