#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tir/dataset.hpp"
#include "tir/json_util.hpp"
#include "tir/rollout.hpp"

namespace tir {

using RunRecord = EpisodeRecord;

struct CategoryScore {
  std::size_t correct = 0;
  std::size_t scored = 0;
  std::size_t unscored = 0;
  double accuracy = 0.0;  // percent over scored
};

struct RoundsAnalysis {
  /// rounds_used -> number of records (all records).
  std::map<std::size_t, std::size_t> histogram;
  /// rounds_used -> percent correct over scored records in the bucket.
  std::map<std::size_t, double> accuracy;
  /// rounds_used -> scored records in the bucket.
  std::map<std::size_t, std::size_t> scored;
};

struct EvalReport {
  std::map<std::string, CategoryScore> per_category;
  double micro = 0.0;
  double macro = 0.0;
  std::size_t total = 0;
  std::size_t scored = 0;
  std::size_t correct = 0;
  std::size_t answered = 0;
  std::size_t truncated = 0;
  std::size_t failed = 0;
  std::size_t unscored = 0;
  RoundsAnalysis rounds;
};

/// Percent correct per category over scored records; micro is
/// correct/scored overall, macro the unweighted mean over categories with at
/// least one scored record. Unscored records are counted, not averaged.
/// Throws Error(EmptyInput).
EvalReport aggregate(const std::vector<RunRecord>& records);

RoundsAnalysis rounds_analysis(const std::vector<RunRecord>& records);

struct WinTieLoss {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
};

struct Comparison {
  std::map<std::string, WinTieLoss> per_category;
  WinTieLoss overall;
};

/// Per item: A correct and B not is a win, equal correctness a tie, else a
/// loss. Unscored counts as incorrect. Both runs must cover the same ids.
/// Throws Error(IdMismatch).
Comparison compare_win_tie_loss(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b);

/// Runs every item once (pass@1) through the engine.
std::vector<RunRecord> run_benchmark(RolloutEngine& engine, const std::vector<BenchItem>& items,
                                     const std::filesystem::path& image_base = {});

Json to_json(const EvalReport& report);
Json to_json(const Comparison& c);
/// Fixed-width table: one column per category plus micro and macro.
std::string render_table(const EvalReport& report, const std::string& label);
std::string rounds_tsv(const RoundsAnalysis& r);
std::string comparison_tsv(const Comparison& c);

}  // namespace tir
