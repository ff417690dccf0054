#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "tir/grpo.hpp"
#include "tir/retrieval.hpp"
#include "tir/trajectory.hpp"

namespace {

std::string long_trajectory(int rounds) {
  std::string s;
  for (int i = 0; i < rounds; ++i) {
    s += "<think>step " + std::to_string(i) + " needs a lookup</think>\n";
    s += R"(<tool_call>{"name": "web_search", "arguments": {"query": "item )" + std::to_string(i) + R"("}}</tool_call>)";
    s += "\n<tool_response>\n" + std::string(400, 'r') + "\n</tool_response>\n";
  }
  return s + "<think>done</think>\n<answer>final</answer>";
}

void BM_ParseAndValidate(benchmark::State& state) {
  const std::string text = long_trajectory(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto t = tir::parse_trajectory(text);
    benchmark::DoNotOptimize(tir::validate_schema(t));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseAndValidate)->Arg(1)->Arg(10)->Arg(50);

tir::grpo::GroupLossInputs make_group(std::size_t g, std::size_t segments, std::size_t tokens) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lp(-3.0, -0.1);
  tir::grpo::GroupLossInputs in;
  for (std::size_t i = 0; i < g; ++i) {
    tir::grpo::TrajectoryTokens t;
    for (std::size_t j = 0; j < segments; ++j) {
      tir::grpo::TokenSegment a;
      for (std::size_t k = 0; k < tokens; ++k) {
        a.logprob_old.push_back(lp(rng));
        a.logprob_new.push_back(a.logprob_old.back() + 0.05);
      }
      t.segments.push_back(a);
      tir::grpo::TokenSegment obs;
      obs.masked = true;
      obs.logprob_old.assign(tokens, 0.0);
      obs.logprob_new.assign(tokens, 0.0);
      t.segments.push_back(obs);
    }
    in.trajectories.push_back(std::move(t));
    in.rewards.push_back(static_cast<double>(i % 3));
  }
  return in;
}

void BM_ClippedObjective(benchmark::State& state) {
  const auto in = make_group(8, static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tir::grpo::clipped_objective(in, tir::grpo::Weighting::Stepwise));
  }
}
BENCHMARK(BM_ClippedObjective)->Arg(2)->Arg(8)->Arg(32);

void BM_IndexQuery(benchmark::State& state) {
  constexpr std::size_t dim = 256;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  auto vec = [&] {
    std::vector<float> v(dim);
    for (auto& x : v) x = n(rng);
    return tir::normalized(std::move(v));
  };
  std::vector<tir::EntityRecord> records;
  for (int64_t e = 0; e < state.range(0); ++e) {
    tir::EntityRecord r{"e" + std::to_string(e), "E", tir::Category::Animal, {}};
    for (int k = 0; k < 5; ++k) r.exemplars.push_back(vec());
    records.push_back(std::move(r));
  }
  const tir::Index index = tir::Index(dim, "bench").upsert(records);
  const auto q = vec();
  for (auto _ : state) benchmark::DoNotOptimize(index.query_top1(q, tir::Category::Animal));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 5);
}
BENCHMARK(BM_IndexQuery)->Arg(100)->Arg(1000)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
