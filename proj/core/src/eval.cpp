#include "tir/eval.hpp"

#include <set>

#include <fmt/format.h>

#include "tir/error.hpp"

namespace tir {

namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

Json wtl_json(const WinTieLoss& w) { return Json{{"wins", w.wins}, {"ties", w.ties}, {"losses", w.losses}}; }

}  // namespace

RoundsAnalysis rounds_analysis(const std::vector<RunRecord>& records) {
  RoundsAnalysis r;
  std::map<std::size_t, std::size_t> correct;
  for (const auto& rec : records) {
    ++r.histogram[rec.rounds_used];
    if (!rec.scored()) continue;
    ++r.scored[rec.rounds_used];
    if (rec.correct()) ++correct[rec.rounds_used];
  }
  for (const auto& [rounds, n] : r.scored) r.accuracy[rounds] = percent(correct[rounds], n);
  return r;
}

EvalReport aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to aggregate");
  EvalReport rep;
  rep.total = records.size();
  for (const auto& rec : records) {
    CategoryScore& c = rep.per_category[rec.category];
    switch (rec.status) {
      case EpisodeStatus::Answered: ++rep.answered; break;
      case EpisodeStatus::Truncated: ++rep.truncated; break;
      case EpisodeStatus::Failed: ++rep.failed; break;
      case EpisodeStatus::Running: break;
    }
    if (!rec.scored()) {
      ++c.unscored;
      ++rep.unscored;
      continue;
    }
    ++c.scored;
    ++rep.scored;
    if (rec.correct()) {
      ++c.correct;
      ++rep.correct;
    }
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (auto& [name, c] : rep.per_category) {
    c.accuracy = percent(c.correct, c.scored);
    if (c.scored > 0) {
      sum += c.accuracy;
      ++n;
    }
  }
  rep.micro = percent(rep.correct, rep.scored);
  rep.macro = n == 0 ? 0.0 : sum / static_cast<double>(n);
  rep.rounds = rounds_analysis(records);
  return rep;
}

Comparison compare_win_tie_loss(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  std::map<std::string, const RunRecord*> by_id;
  for (const auto& r : b) {
    if (!by_id.emplace(r.item_id, &r).second) throw Error(ErrorCode::IdMismatch, "duplicate id in second run: " + r.item_id);
  }
  std::set<std::string> seen;
  Comparison cmp;
  for (const auto& ra : a) {
    if (!seen.insert(ra.item_id).second) throw Error(ErrorCode::IdMismatch, "duplicate id in first run: " + ra.item_id);
    const auto it = by_id.find(ra.item_id);
    if (it == by_id.end()) throw Error(ErrorCode::IdMismatch, "item only in first run: " + ra.item_id);
    const bool ca = ra.correct();
    const bool cb = it->second->correct();
    WinTieLoss& cat = cmp.per_category[ra.category];
    for (WinTieLoss* w : {&cat, &cmp.overall}) {
      if (ca == cb) ++w->ties;
      else if (ca) ++w->wins;
      else ++w->losses;
    }
  }
  if (seen.size() != by_id.size()) {
    for (const auto& [id, r] : by_id) {
      if (!seen.contains(id)) throw Error(ErrorCode::IdMismatch, "item only in second run: " + id);
    }
  }
  return cmp;
}

std::vector<RunRecord> run_benchmark(RolloutEngine& engine, const std::vector<BenchItem>& items,
                                     const std::filesystem::path& image_base) {
  if (engine.config().group_size == 1) return engine.run_batch(items, image_base);
  std::vector<RunRecord> out;
  for (const auto& item : items) out.push_back(engine.run_episode(item, image_base));
  return out;
}

Json to_json(const EvalReport& report) {
  Json cats = Json::object();
  for (const auto& [name, c] : report.per_category) {
    cats[name] = {{"correct", c.correct}, {"scored", c.scored}, {"unscored", c.unscored}, {"accuracy", c.accuracy}};
  }
  Json hist = Json::object();
  for (const auto& [k, v] : report.rounds.histogram) hist[std::to_string(k)] = v;
  Json acc = Json::object();
  for (const auto& [k, v] : report.rounds.accuracy) acc[std::to_string(k)] = v;
  return Json{{"per_category", cats},
              {"micro", report.micro},
              {"macro", report.macro},
              {"counts",
               {{"total", report.total},
                {"scored", report.scored},
                {"correct", report.correct},
                {"answered", report.answered},
                {"truncated", report.truncated},
                {"failed", report.failed},
                {"unscored", report.unscored}}},
              {"rounds", {{"histogram", hist}, {"accuracy", acc}}}};
}

Json to_json(const Comparison& c) {
  Json cats = Json::object();
  for (const auto& [name, w] : c.per_category) cats[name] = wtl_json(w);
  return Json{{"per_category", cats}, {"overall", wtl_json(c.overall)}};
}

std::string render_table(const EvalReport& report, const std::string& label) {
  std::string header = fmt::format("{:<20}", "Model");
  std::string row = fmt::format("{:<20}", label);
  for (const auto& [name, c] : report.per_category) {
    const std::size_t w = std::max<std::size_t>(10, name.size() + 2);
    header += fmt::format("{:>{}}", name, w);
    row += fmt::format("{:>{}.2f}", c.accuracy, w);
  }
  header += fmt::format("{:>10}{:>10}", "Micro", "Macro");
  row += fmt::format("{:>10.2f}{:>10.2f}", report.micro, report.macro);
  return header + "\n" + row + "\n";
}

std::string rounds_tsv(const RoundsAnalysis& r) {
  std::string out = "rounds\tcount\tscored\taccuracy\n";
  for (const auto& [k, n] : r.histogram) {
    const auto s = r.scored.find(k);
    const auto a = r.accuracy.find(k);
    out += fmt::format("{}\t{}\t{}\t{}\n", k, n, s == r.scored.end() ? 0 : s->second,
                       a == r.accuracy.end() ? std::string("") : fmt::format("{:.4f}", a->second));
  }
  return out;
}

std::string comparison_tsv(const Comparison& c) {
  std::string out = "category\twins\tties\tlosses\n";
  for (const auto& [name, w] : c.per_category) out += fmt::format("{}\t{}\t{}\t{}\n", name, w.wins, w.ties, w.losses);
  out += fmt::format("overall\t{}\t{}\t{}\n", c.overall.wins, c.overall.ties, c.overall.losses);
  return out;
}

}  // namespace tir
