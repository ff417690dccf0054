#include "tir/reward.hpp"

#include <algorithm>

#include "tir/judge.hpp"

namespace tir {

double format_reward(const FormatReport& report) {
  if (report.schema_valid && report.residue_len == 0) return 0.5;
  return -0.5 - 0.01 * static_cast<double>(report.residue_len);
}

double hallucination_penalty(std::size_t n_call, std::size_t n_resp) {
  const double diff = static_cast<double>(n_resp) - static_cast<double>(n_call);
  return std::min(0.0, diff * 0.2);
}

double accuracy_reward(const JudgeVerdict& verdict) { return verdict.result == "1" ? 1.0 : 0.0; }

double total_reward(double r_acc, double r_fmt, double r_halluc, const RewardWeights& w) {
  return r_acc + w.lambda_fmt * r_fmt + w.lambda_halluc * r_halluc;
}

RewardBreakdown score_trajectory(const FormatReport& report, const std::optional<JudgeVerdict>& verdict,
                                 const RewardWeights& w) {
  RewardBreakdown b;
  b.r_acc = verdict ? accuracy_reward(*verdict) : 0.0;
  b.r_fmt = format_reward(report);
  b.r_halluc = hallucination_penalty(report.n_call, report.n_resp);
  b.r_total = total_reward(b.r_acc, b.r_fmt, b.r_halluc, w);
  return b;
}

Json to_json(const RewardBreakdown& r) {
  return Json{{"r_acc", r.r_acc}, {"r_fmt", r.r_fmt}, {"r_halluc", r.r_halluc}, {"r_total", r.r_total}};
}

}  // namespace tir
