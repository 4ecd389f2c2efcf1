#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "support.hpp"
#include "zsparse/mr.hpp"
#include "zsparse/pipeline.hpp"
#include "zsparse/slots.hpp"

namespace {

std::vector<std::string> sample_mrs() {
  zsp::Schema schema = zsptest::small_schema();
  std::mt19937_64 rng(42);
  std::vector<std::string> out;
  for (int i = 0; i < 64; ++i) {
    out.push_back(zsp::serialize_mr(zsptest::random_frame(rng, schema)));
  }
  return out;
}

void BM_ParseMr(benchmark::State& state) {
  auto mrs = sample_mrs();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(zsp::parse_mr(mrs[i++ % mrs.size()]));
  }
}
BENCHMARK(BM_ParseMr);

void BM_SerializeMr(benchmark::State& state) {
  zsp::Schema schema = zsptest::small_schema();
  std::mt19937_64 rng(42);
  std::vector<zsp::IntentFrame> frames;
  for (int i = 0; i < 64; ++i) frames.push_back(zsptest::random_frame(rng, schema));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(zsp::serialize_mr(frames[i++ % frames.size()]));
  }
}
BENCHMARK(BM_SerializeMr);

void BM_EnumerateCandidates(benchmark::State& state) {
  std::string context = "please remind me to water the plants every single day";
  auto phrases = zsp::AbstainConfig::default_abstain_phrases();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        zsp::enumerate_candidates(context, static_cast<int>(state.range(0)),
                                  phrases));
  }
}
BENCHMARK(BM_EnumerateCandidates)->Arg(4)->Arg(10);

void BM_GreedyParse(benchmark::State& state) {
  zsp::Schema schema = zsptest::small_schema();
  auto tables = zsptest::build_corpus_tables(schema);
  zsp::ScriptedBackend backend = zsptest::backend_from_tables(tables);
  zsp::HashedBowSimilarity sim;
  const auto& corpus = zsptest::scripted_corpus();
  std::size_t i = 0;
  for (auto _ : state) {
    // Fresh pipeline each round so the score cache does not absorb the work.
    zsp::Pipeline pipeline(schema, backend, sim, zsp::PipelineConfig{});
    benchmark::DoNotOptimize(
        pipeline.parse_greedy(corpus[i++ % corpus.size()].utterance));
  }
}
BENCHMARK(BM_GreedyParse);

void BM_HashedBowSimilarity(benchmark::State& state) {
  zsp::HashedBowSimilarity sim;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sim.similarity("set an alarm for tomorrow morning", "create alarm"));
  }
}
BENCHMARK(BM_HashedBowSimilarity);

}  // namespace

BENCHMARK_MAIN();
