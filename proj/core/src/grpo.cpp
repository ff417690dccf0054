#include "tir/grpo.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tir/error.hpp"

namespace tir::grpo {

std::size_t TrajectoryTokens::n_actions() const {
  return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const TokenSegment& s) {
    return !s.masked;
  }));
}

std::size_t TrajectoryTokens::action_tokens() const {
  std::size_t n = 0;
  for (const auto& s : segments) {
    if (!s.masked) n += s.size();
  }
  return n;
}

std::vector<double> group_advantages(std::span<const double> rewards, double std_floor) {
  const std::size_t g = rewards.size();
  std::vector<double> adv(g, 0.0);
  if (g == 0) return adv;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  const double sd = std::sqrt(var);
  if (!(sd >= std_floor)) return adv;
  for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

std::vector<std::vector<double>> stepwise_token_weights(const TrajectoryTokens& t, std::size_t group_size) {
  const double n_i = static_cast<double>(t.n_actions());
  std::vector<std::vector<double>> w;
  w.reserve(t.segments.size());
  for (const auto& seg : t.segments) {
    const double value = (seg.masked || seg.size() == 0)
                             ? 0.0
                             : 1.0 / (static_cast<double>(group_size) * n_i * static_cast<double>(seg.size()));
    w.emplace_back(seg.size(), value);
  }
  return w;
}

std::vector<std::vector<double>> standard_token_weights(const TrajectoryTokens& t, std::size_t group_size) {
  const double total = static_cast<double>(t.action_tokens());
  std::vector<std::vector<double>> w;
  w.reserve(t.segments.size());
  for (const auto& seg : t.segments) {
    const double value = seg.masked ? 0.0 : 1.0 / (static_cast<double>(group_size) * total);
    w.emplace_back(seg.size(), value);
  }
  return w;
}

void validate_shapes(const GroupLossInputs& inputs) {
  if (inputs.trajectories.empty()) throw Error(ErrorCode::ShapeMismatch, "group is empty");
  if (inputs.trajectories.size() != inputs.rewards.size()) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{} trajectories but {} rewards", inputs.trajectories.size(),
                                                      inputs.rewards.size()));
  }
  for (std::size_t i = 0; i < inputs.trajectories.size(); ++i) {
    const auto& t = inputs.trajectories[i];
    if (t.n_actions() == 0) throw Error(ErrorCode::ShapeMismatch, fmt::format("trajectory {} has no action segment", i));
    for (std::size_t j = 0; j < t.segments.size(); ++j) {
      const auto& s = t.segments[j];
      if (s.masked) continue;
      if (s.logprob_old.empty()) {
        throw Error(ErrorCode::ShapeMismatch, fmt::format("trajectory {} segment {} is empty", i, j));
      }
      if (s.logprob_old.size() != s.logprob_new.size()) {
        throw Error(ErrorCode::ShapeMismatch,
                    fmt::format("trajectory {} segment {}: {} old vs {} new log-probs", i, j, s.logprob_old.size(),
                                s.logprob_new.size()));
      }
    }
  }
}

LossReport clipped_objective(const GroupLossInputs& inputs, Weighting weighting, const ObjectiveOptions& options) {
  if (!(inputs.clip_eps > 0.0)) throw Error(ErrorCode::ArgValidation, "clip_eps must be positive");
  validate_shapes(inputs);
  const std::size_t g = inputs.trajectories.size();
  const double lo = 1.0 - inputs.clip_eps;
  const double hi = 1.0 + inputs.clip_eps;

  LossReport report;
  report.advantages = group_advantages(inputs.rewards, inputs.std_floor);
  report.per_token_weights.reserve(g);

  std::size_t action_tokens = 0;
  std::size_t clipped_tokens = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const auto& traj = inputs.trajectories[i];
    const double adv = report.advantages[i];
    auto w_step = stepwise_token_weights(traj, g);
    auto w_std = standard_token_weights(traj, g);
    for (std::size_t j = 0; j < traj.segments.size(); ++j) {
      const auto& seg = traj.segments[j];
      if (seg.masked) continue;
      for (std::size_t t = 0; t < seg.size(); ++t) {
        const double ratio = std::exp(seg.logprob_new[t] - seg.logprob_old[t]);
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, lo, hi) * adv;
        const double term = std::min(unclipped, clipped);
        if (clipped < unclipped) ++clipped_tokens;
        ++action_tokens;
        report.objective_stepwise += w_step[j][t] * term;
        report.objective_standard += w_std[j][t] * term;
      }
    }
    report.per_token_weights.push_back(weighting == Weighting::Stepwise ? std::move(w_step) : std::move(w_std));
  }
  report.clip_fraction =
      action_tokens == 0 ? 0.0 : static_cast<double>(clipped_tokens) / static_cast<double>(action_tokens);
  if (options.additive_penalty) {
    report.penalty = options.additive_penalty(inputs);
    report.objective_stepwise += report.penalty;
    report.objective_standard += report.penalty;
  }
  return report;
}

}  // namespace tir::grpo
