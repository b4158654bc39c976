// OpenMP kernels against their serial references, plus the gateway's
// bounded fan-out against one-at-a-time completion.

#include <benchmark/benchmark.h>

#include <chrono>
#include <thread>

#include "liahr/gateway.hpp"
#include "liahr/metrics.hpp"
#include "liahr/prompt.hpp"
#include "liahr/sampler.hpp"

using namespace liahr;

namespace {

std::vector<metrics::LabelPair> random_pairs(std::size_t n) {
  SeededSampler s(7, "bench/pairs");
  std::vector<metrics::LabelPair> out(n);
  const std::uint64_t mask = (1u << 11) - 1;
  for (auto& p : out) {
    p.predicted = LabelSet::from_bits(s.next_u64() & mask);
    p.reference = LabelSet::from_bits(s.next_u64() & mask);
  }
  return out;
}

template <double (*Fn)(std::span<const metrics::LabelPair>, metrics::EmptyPairRule)>
void jaccard(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pairs, metrics::EmptyPairRule::count_as_one));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <double (*Fn)(std::span<const metrics::LabelPair>, std::size_t)>
void macro(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pairs, 11));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <double (*Fn)(std::span<const metrics::LabelPair>)>
void accuracy(benchmark::State& state) {
  const auto pairs = random_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pairs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

/// Backend with a fixed per-request latency.
class SlowBackend : public Backend {
 public:
  Completion complete(const CompletionRequest&) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    return Completion{"{\"label\": []}", {}, 2.0, 1, false};
  }
  std::string model_id() const override { return "slow"; }
};

std::vector<CompletionRequest> requests(std::size_t n) {
  std::vector<CompletionRequest> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].key = "bench/" + std::to_string(i);
    out[i].prompt.text = "prompt " + out[i].key;
    out[i].prompt.fingerprint = out[i].key;
  }
  return out;
}

void batch_parallel(benchmark::State& state) {
  BackendConfig cfg;
  cfg.concurrency = static_cast<int>(state.range(0));
  Gateway gw(std::make_unique<SlowBackend>(), cfg);
  const auto reqs = requests(64);
  for (auto _ : state) benchmark::DoNotOptimize(gw.complete_batch(reqs));
}

void batch_serial(benchmark::State& state) {
  BackendConfig cfg;
  Gateway gw(std::make_unique<SlowBackend>(), cfg);
  const auto reqs = requests(64);
  for (auto _ : state) benchmark::DoNotOptimize(gw.complete_batch_serial(reqs));
}

}  // namespace

BENCHMARK(jaccard<metrics::jaccard_samples>)->Name("jaccard/parallel")->Range(1 << 10, 1 << 20);
BENCHMARK(jaccard<metrics::serial::jaccard_samples>)->Name("jaccard/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(macro<metrics::macro_f1>)->Name("macro_f1/parallel")->Range(1 << 10, 1 << 20);
BENCHMARK(macro<metrics::serial::macro_f1>)->Name("macro_f1/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(accuracy<metrics::accuracy>)->Name("accuracy/parallel")->Range(1 << 10, 1 << 20);
BENCHMARK(accuracy<metrics::serial::accuracy>)->Name("accuracy/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(batch_parallel)->Name("complete_batch/parallel")->Arg(4)->Arg(16)->UseRealTime();
BENCHMARK(batch_serial)->Name("complete_batch/serial")->UseRealTime();

BENCHMARK_MAIN();
