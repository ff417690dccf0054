#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tir::grpo {

/// One contiguous run of tokens. Action segments are policy-generated and
/// carry old/new log-probabilities; masked segments are environment
/// observations and never contribute to an objective.
struct TokenSegment {
  bool masked = false;
  std::vector<double> logprob_old;
  std::vector<double> logprob_new;

  [[nodiscard]] std::size_t size() const { return logprob_old.size(); }
};

struct TrajectoryTokens {
  std::vector<TokenSegment> segments;

  /// Number of action (unmasked) segments.
  [[nodiscard]] std::size_t n_actions() const;
  /// Total tokens across action segments.
  [[nodiscard]] std::size_t action_tokens() const;
};

struct GroupLossInputs {
  std::vector<TrajectoryTokens> trajectories;
  std::vector<double> rewards;
  double clip_eps = 0.2;
  double std_floor = 1e-6;
};

enum class Weighting { Stepwise, Standard };

/// weights[i][j][t] for trajectory i, segment j, token t.
using TokenWeights = std::vector<std::vector<std::vector<double>>>;

struct LossReport {
  std::vector<double> advantages;
  double objective_stepwise = 0.0;
  double objective_standard = 0.0;
  /// Weights of the weighting the report was requested for.
  TokenWeights per_token_weights;
  /// Fraction of action tokens whose clipped branch was selected by the min.
  double clip_fraction = 0.0;
  /// Value returned by ObjectiveOptions::additive_penalty (0 when unset).
  double penalty = 0.0;
};

struct ObjectiveOptions {
  /// Optional additive term (e.g. a KL regularizer) added to both objectives.
  std::function<double(const GroupLossInputs&)> additive_penalty;
};

/// (r_i - mean) / population-std; all zeros when the std is below `std_floor`.
std::vector<double> group_advantages(std::span<const double> rewards, double std_floor = 1e-6);

/// Every token of action segment j weighs 1 / (G * n_i * |a_j|); masked 0.
std::vector<std::vector<double>> stepwise_token_weights(const TrajectoryTokens& t, std::size_t group_size);

/// Every action token weighs 1 / (G * sum_j |a_j|); masked 0.
std::vector<std::vector<double>> standard_token_weights(const TrajectoryTokens& t, std::size_t group_size);

/// Clipped surrogate objective. Throws Error(ShapeMismatch) when reward and
/// trajectory counts disagree, a trajectory has no action segment, an action
/// segment is empty or its log-prob arrays differ in length, and
/// Error(ArgValidation) for clip_eps <= 0.
LossReport clipped_objective(const GroupLossInputs& inputs, Weighting weighting, const ObjectiveOptions& options = {});

/// Literal nested-loop evaluation of the objective, independent of the
/// weight tables above. Intended for small instances and verification.
double brute_force_objective(const GroupLossInputs& inputs, Weighting weighting);

void validate_shapes(const GroupLossInputs& inputs);

}  // namespace tir::grpo
