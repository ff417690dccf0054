// Reference evaluation of the group objective by literal summation. Kept free
// of the weight tables and advantage helper in grpo.cpp so the two can check
// each other.
#include <algorithm>
#include <cmath>

#include "tir/grpo.hpp"

namespace tir::grpo {

double brute_force_objective(const GroupLossInputs& inputs, Weighting weighting) {
  validate_shapes(inputs);
  const std::size_t group_size = inputs.trajectories.size();

  double mean = 0.0;
  for (std::size_t i = 0; i < group_size; ++i) mean += inputs.rewards[i];
  mean /= static_cast<double>(group_size);
  double sq_dev = 0.0;
  for (std::size_t i = 0; i < group_size; ++i) sq_dev += (inputs.rewards[i] - mean) * (inputs.rewards[i] - mean);
  const double sd = std::sqrt(sq_dev / static_cast<double>(group_size));

  double outer = 0.0;
  for (std::size_t i = 0; i < group_size; ++i) {
    const double advantage = sd >= inputs.std_floor ? (inputs.rewards[i] - mean) / sd : 0.0;
    const auto& segs = inputs.trajectories[i].segments;

    double n_actions = 0.0;
    double total_len = 0.0;
    for (const auto& a : segs) {
      if (a.masked) continue;
      n_actions += 1.0;
      total_len += static_cast<double>(a.logprob_old.size());
    }

    double traj_sum = 0.0;
    for (const auto& a : segs) {
      if (a.masked) continue;
      double seg_sum = 0.0;
      for (std::size_t t = 0; t < a.logprob_old.size(); ++t) {
        const double ratio = std::exp(a.logprob_new[t] - a.logprob_old[t]);
        const double ratio_clipped = std::min(std::max(ratio, 1.0 - inputs.clip_eps), 1.0 + inputs.clip_eps);
        seg_sum += std::min(ratio * advantage, ratio_clipped * advantage);
      }
      traj_sum += weighting == Weighting::Stepwise ? seg_sum / static_cast<double>(a.logprob_old.size()) : seg_sum;
    }
    outer += weighting == Weighting::Stepwise ? traj_sum / n_actions : traj_sum / total_len;
  }
  return outer / static_cast<double>(group_size);
}

}  // namespace tir::grpo
