#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tir/concurrency.hpp"
#include "tir/dataset.hpp"
#include "tir/http.hpp"
#include "tir/judge.hpp"
#include "tir/policy.hpp"
#include "tir/reward.hpp"
#include "tir/tool_platform.hpp"
#include "tir/trajectory.hpp"

namespace tir {

enum class EpisodeStatus { Running, Answered, Truncated, Failed };

std::string_view to_string(EpisodeStatus s);
std::optional<EpisodeStatus> parse_episode_status(std::string_view text);

inline constexpr std::string_view kEndOfTurn = "<|im_end|>";

struct RolloutConfig {
  std::size_t max_rounds = 10;
  SamplingParams sampling;
  std::size_t group_size = 1;
  bool judge_on_completion = true;
  /// Observation budget in code points; longer observations are cut and
  /// marked.
  std::size_t observation_budget = 8192;
  std::size_t generate_parallelism = 8;
  std::size_t tool_parallelism = 16;
  std::size_t postprocess_workers = 2;
  std::size_t judge_inflight = 8;
  JudgeRetryPolicy judge_retry;
  RewardWeights weights;
  double std_floor = 1e-6;
  /// Emit wall-clock timings in the dump; off for byte-stable output.
  bool record_timing = true;
  /// Optional observer of wave/barrier/judge ordering.
  std::shared_ptr<EventLog> events;
};

struct EpisodeTiming {
  std::chrono::microseconds generate{0};
  std::chrono::microseconds tools{0};
  std::chrono::microseconds judge{0};
};

/// One finished episode, as written to the rollout dump.
struct EpisodeRecord {
  std::string item_id;
  std::string category;
  std::size_t sample_index = 0;
  EpisodeStatus status = EpisodeStatus::Running;
  std::size_t rounds_used = 0;
  std::string trajectory_source;
  ParsedTrajectory parsed;
  FormatReport format;
  std::optional<RewardBreakdown> reward;
  std::optional<JudgeVerdict> verdict;
  std::optional<double> advantage;
  std::optional<std::string> final_answer;
  std::string error;
  EpisodeTiming timing;

  /// Contributes to rewards, advantages and accuracy.
  [[nodiscard]] bool scored() const { return reward.has_value(); }
  [[nodiscard]] bool correct() const { return verdict && verdict->result == "1"; }
};

Json to_json(const EpisodeRecord& r, bool include_timing);
/// Reads back the fields needed for evaluation and advantage recomputation.
/// Throws Error(ParseError).
EpisodeRecord episode_record_from_json(const Json& j);
std::string dump_records(const std::vector<EpisodeRecord>& records, bool include_timing);
std::vector<EpisodeRecord> parse_records(std::string_view jsonl);

/// Hides the four tag markers inside observation text so injected content
/// cannot open or close segments.
std::string escape_tag_markers(std::string_view text);
/// Cuts to `budget` code points and appends a marker naming the omitted count.
std::string truncate_observation(std::string_view text, std::size_t budget);
/// "\n<tool_response>\n" + body + "\n</tool_response>\n"
std::string wrap_observation(std::string_view body);

/// Step-barrier batch driver. Each wave generates the next turn of every
/// live episode, resolves the wave's tool calls concurrently, serializes the
/// observations on a worker pool, then releases the barrier. Answered
/// episodes are sent to the judge as soon as their wave's generation ends.
class RolloutEngine {
 public:
  RolloutEngine(std::shared_ptr<PolicyBackend> policy, std::shared_ptr<ToolPlatform> tools,
                std::shared_ptr<JudgeBackend> judge, RolloutConfig config);

  /// Records are ordered by item, then sample index. Relative image paths
  /// resolve against `image_base`.
  std::vector<EpisodeRecord> run_batch(const std::vector<BenchItem>& items,
                                       const std::filesystem::path& image_base = {});
  std::vector<EpisodeRecord> run_group(const BenchItem& item, std::size_t group_size,
                                       const std::filesystem::path& image_base = {});
  EpisodeRecord run_episode(const BenchItem& item, const std::filesystem::path& image_base = {});

  [[nodiscard]] const RolloutConfig& config() const { return config_; }

 private:
  std::shared_ptr<PolicyBackend> policy_;
  std::shared_ptr<ToolPlatform> tools_;
  std::shared_ptr<JudgeBackend> judge_;
  RolloutConfig config_;
};

/// Fills `advantage` per item group, normalizing over scored episodes only.
void assign_group_advantages(std::vector<EpisodeRecord>& records, double std_floor);

}  // namespace tir
