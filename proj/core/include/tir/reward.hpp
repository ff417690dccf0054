#pragma once

#include <cstddef>
#include <optional>

#include "tir/json_util.hpp"
#include "tir/trajectory.hpp"

namespace tir {

struct JudgeVerdict;

struct RewardWeights {
  double lambda_fmt = 0.1;
  double lambda_halluc = 0.05;
};

struct RewardBreakdown {
  double r_acc = 0.0;
  double r_fmt = 0.0;
  double r_halluc = 0.0;
  double r_total = 0.0;
};

/// 0.5 for a schema-valid trajectory without residue, otherwise
/// -0.5 - 0.01 * residue_len.
double format_reward(const FormatReport& report);

/// min(0, (n_resp - n_call) * 0.2)
double hallucination_penalty(std::size_t n_call, std::size_t n_resp);

/// 1.0 iff the judge said "1". Confidence is ignored.
double accuracy_reward(const JudgeVerdict& verdict);

double total_reward(double r_acc, double r_fmt, double r_halluc, const RewardWeights& w);

/// Combines the three components. A missing verdict (unanswered or
/// truncated trajectory) scores r_acc = 0.
RewardBreakdown score_trajectory(const FormatReport& report, const std::optional<JudgeVerdict>& verdict,
                                 const RewardWeights& w);

Json to_json(const RewardBreakdown& r);

}  // namespace tir
