#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "expect_error.hpp"
#include "oracles.hpp"
#include "tir/grpo.hpp"
#include "tir/loss_io.hpp"

using namespace tir;
using namespace tir::grpo;

namespace {

TokenSegment action(std::vector<double> old_lp, std::vector<double> new_lp) {
  return TokenSegment{false, std::move(old_lp), std::move(new_lp)};
}

TokenSegment action_ratio(std::size_t n, double ratio) {
  std::vector<double> o(n, -1.0), nw(n, -1.0 + std::log(ratio));
  return action(o, nw);
}

TokenSegment observation(std::size_t n) { return TokenSegment{true, std::vector<double>(n, -2.0), std::vector<double>(n, -3.0)}; }

double sum_weights(const std::vector<std::vector<double>>& w) {
  double s = 0.0;
  for (const auto& seg : w) {
    for (double x : seg) s += x;
  }
  return s;
}

}  // namespace

TEST(Advantages, Examples) {
  const std::vector<double> a = {1.0, 0.0};
  EXPECT_EQ(group_advantages(a), (std::vector<double>{1.0, -1.0}));
  const std::vector<double> c = {0.7, 0.7, 0.7};
  EXPECT_EQ(group_advantages(c), (std::vector<double>{0.0, 0.0, 0.0}));
  const std::vector<double> d = {2, 1, 0};
  const auto adv = group_advantages(d);
  EXPECT_NEAR(adv[0], 1.22474, 1e-5);
  EXPECT_NEAR(adv[1], 0.0, 1e-12);
  EXPECT_NEAR(adv[2], -1.22474, 1e-5);
}

TEST(Advantages, MixedVerdictGroup) {
  const std::vector<double> r = {1.05, 1.05, 0.05, 0.05};
  const auto adv = group_advantages(r);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(adv[i], i < 2 ? 1.0 : -1.0, 1e-12);
}

TEST(Advantages, SingleAndFloor) {
  const std::vector<double> one = {3.0};
  EXPECT_EQ(group_advantages(one), (std::vector<double>{0.0}));
  const std::vector<double> tiny = {0.0, 1e-9};
  EXPECT_EQ(group_advantages(tiny, 1e-6), (std::vector<double>{0.0, 0.0}));
}

TEST(Advantages, MatchOracleAndAreCentered) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> r(1 + rng() % 8);
    for (auto& x : r) x = u(rng);
    const auto a = group_advantages(r, 1e-6);
    const auto o = tir::testing::oracle_advantages(r, 1e-6);
    double sum = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      ASSERT_NEAR(a[k], o[k], 1e-12);
      sum += a[k];
    }
    ASSERT_NEAR(sum, 0.0, 1e-9);
  }
}

TEST(Weights, StepwiseExample) {
  TrajectoryTokens t{{action_ratio(2, 1.0), action_ratio(4, 1.0)}};
  const auto w = stepwise_token_weights(t, 2);
  for (double x : w[0]) EXPECT_DOUBLE_EQ(x, 0.125);
  for (double x : w[1]) EXPECT_DOUBLE_EQ(x, 0.0625);
  EXPECT_DOUBLE_EQ(sum_weights(w), 0.5);
}

TEST(Weights, SingleSegmentIsTokenMean) {
  TrajectoryTokens t{{action_ratio(5, 1.0)}};
  const auto w = stepwise_token_weights(t, 3);
  for (double x : w[0]) EXPECT_DOUBLE_EQ(x, 1.0 / 15.0);
}

TEST(Weights, ObservationsWeighZero) {
  TrajectoryTokens t{{action_ratio(2, 1.0), observation(7), action_ratio(3, 1.0)}};
  const auto step = stepwise_token_weights(t, 1);
  const auto standard = standard_token_weights(t, 1);
  for (double x : step[1]) EXPECT_EQ(x, 0.0);
  for (double x : standard[1]) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(t.n_actions(), 2u);
  EXPECT_EQ(t.action_tokens(), 5u);
}

TEST(Weights, StandardExample) {
  TrajectoryTokens t{{action_ratio(2, 1.0), action_ratio(4, 1.0)}};
  const auto w = standard_token_weights(t, 1);
  for (const auto& seg : w) {
    for (double x : seg) EXPECT_DOUBLE_EQ(x, 1.0 / 6.0);
  }
}

TEST(Weights, EqualLengthsCoincide) {
  TrajectoryTokens t{{action_ratio(3, 1.0), observation(2), action_ratio(3, 1.0), action_ratio(3, 1.0)}};
  EXPECT_EQ(stepwise_token_weights(t, 4), standard_token_weights(t, 4));
}

TEST(Objective, UnitRatiosGiveZero) {
  GroupLossInputs in;
  in.trajectories = {TrajectoryTokens{{action_ratio(3, 1.0)}}, TrajectoryTokens{{action_ratio(5, 1.0), action_ratio(1, 1.0)}},
                     TrajectoryTokens{{action_ratio(2, 1.0)}}};
  in.rewards = {1.0, 0.0, 0.5};
  const auto rep = clipped_objective(in, Weighting::Stepwise);
  EXPECT_NEAR(rep.objective_stepwise, 0.0, 1e-12);
  EXPECT_NEAR(rep.objective_standard, 0.0, 1e-12);
  EXPECT_EQ(rep.clip_fraction, 0.0);
}

TEST(Objective, ClippedHandExample) {
  GroupLossInputs in;
  in.trajectories = {TrajectoryTokens{{action_ratio(4, 1.5)}}, TrajectoryTokens{{action_ratio(3, 1.0)}}};
  in.rewards = {1.0, 0.0};
  in.clip_eps = 0.2;
  const auto rep = clipped_objective(in, Weighting::Stepwise);
  EXPECT_NEAR(rep.objective_stepwise, 0.1, 1e-12);
  EXPECT_NEAR(rep.clip_fraction, 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(brute_force_objective(in, Weighting::Stepwise), 0.1, 1e-12);
}

TEST(Objective, PenaltyHookIsAdditive) {
  GroupLossInputs in;
  in.trajectories = {TrajectoryTokens{{action_ratio(4, 1.5)}}, TrajectoryTokens{{action_ratio(3, 1.0)}}};
  in.rewards = {1.0, 0.0};
  ObjectiveOptions opt;
  opt.additive_penalty = [](const GroupLossInputs&) { return -0.25; };
  const auto rep = clipped_objective(in, Weighting::Stepwise, opt);
  EXPECT_EQ(rep.penalty, -0.25);
  EXPECT_NEAR(rep.objective_stepwise, 0.1 - 0.25, 1e-12);
}

TEST(Objective, ShapeErrors) {
  GroupLossInputs in;
  in.trajectories = {TrajectoryTokens{{action_ratio(2, 1.0)}}};
  in.rewards = {1.0, 0.0};
  EXPECT_TIR_ERROR(clipped_objective(in, Weighting::Stepwise), ErrorCode::ShapeMismatch);
  in.rewards = {1.0};
  in.trajectories = {TrajectoryTokens{{observation(3)}}};
  EXPECT_TIR_ERROR(clipped_objective(in, Weighting::Stepwise), ErrorCode::ShapeMismatch);
  in.trajectories = {TrajectoryTokens{{action({-1.0, -1.0}, {-1.0})}}};
  EXPECT_TIR_ERROR(clipped_objective(in, Weighting::Stepwise), ErrorCode::ShapeMismatch);
  in.trajectories = {TrajectoryTokens{{action({}, {})}}};
  EXPECT_TIR_ERROR(clipped_objective(in, Weighting::Stepwise), ErrorCode::ShapeMismatch);
  in.trajectories = {TrajectoryTokens{{action_ratio(2, 1.0)}}};
  in.clip_eps = 0.0;
  EXPECT_TIR_ERROR(clipped_objective(in, Weighting::Stepwise), ErrorCode::ArgValidation);
}

TEST(Objective, RandomizedAgainstOracle) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto in = tir::testing::random_group(rng, {});
    for (auto w : {Weighting::Stepwise, Weighting::Standard}) {
      const auto rep = clipped_objective(in, w);
      const double expected = tir::testing::oracle_objective(in, w);
      ASSERT_NEAR(w == Weighting::Stepwise ? rep.objective_stepwise : rep.objective_standard, expected, 1e-9);
      ASSERT_NEAR(brute_force_objective(in, w), expected, 1e-9);
    }
    const double g = static_cast<double>(in.trajectories.size());
    double group_sum = 0.0;
    for (const auto& t : in.trajectories) {
      const double s = sum_weights(stepwise_token_weights(t, in.trajectories.size()));
      ASSERT_NEAR(s, 1.0 / g, 1e-12);
      group_sum += s;
    }
    ASSERT_NEAR(group_sum, 1.0, 1e-12);
  }
}

TEST(Objective, MaskedPerturbationIsBitExact) {
  std::mt19937_64 rng(99);
  int perturbed = 0;
  for (int i = 0; i < 300; ++i) {
    auto in = tir::testing::random_group(rng, {});
    const auto before = clipped_objective(in, Weighting::Stepwise);
    for (auto& t : in.trajectories) {
      for (auto& s : t.segments) {
        if (!s.masked) continue;
        for (auto& x : s.logprob_new) x += 3.0;
        ++perturbed;
      }
    }
    const auto after = clipped_objective(in, Weighting::Stepwise);
    ASSERT_EQ(before.objective_stepwise, after.objective_stepwise);
    ASSERT_EQ(before.objective_standard, after.objective_standard);
  }
  EXPECT_GT(perturbed, 0);
}

TEST(Objective, DegeneracyOnUniformLengths) {
  std::mt19937_64 rng(5);
  tir::testing::GroupShape shape;
  shape.uniform_lengths = true;
  for (int i = 0; i < 200; ++i) {
    const auto in = tir::testing::random_group(rng, shape);
    const auto rep = clipped_objective(in, Weighting::Stepwise);
    ASSERT_NEAR(rep.objective_stepwise, rep.objective_standard, 1e-9);
  }
}

TEST(LossIo, RoundTripAndMaskedLength) {
  const std::string line =
      R"({"group_id":"g1","rewards":[1.0,0.0],"clip_eps":0.2,"std_floor":1e-6,"trajectories":[)"
      R"({"segments":[{"masked":false,"logprob_old":[-1.0,-1.0],"logprob_new":[-0.5,-1.0]},{"masked":true,"length":3}]},)"
      R"({"segments":[{"masked":false,"logprob_old":[-2.0],"logprob_new":[-2.0]}]}]})";
  const auto recs = read_group_records(line + "\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].group_id, "g1");
  EXPECT_EQ(recs[0].inputs.trajectories[0].segments[1].size(), 3u);
  const Json again = to_json(recs[0]);
  const auto back = group_record_from_json(again);
  EXPECT_EQ(to_json(back), again);
  const auto rep = clipped_objective(recs[0].inputs, Weighting::Stepwise);
  const Json out = to_json(rep, true);
  EXPECT_EQ(out["advantages"], (Json{1.0, -1.0}));
  EXPECT_TRUE(out.contains("per_token_weights"));
  EXPECT_FALSE(to_json(rep, false).contains("per_token_weights"));
}

TEST(LossIo, MalformedLine) {
  EXPECT_ANY_THROW(read_group_records("{\"group_id\":\"x\"}\n"));
  EXPECT_ANY_THROW(read_group_records("not json\n"));
}
