#include "tir/loss_io.hpp"

#include <fmt/format.h>

#include "tir/error.hpp"

namespace tir::grpo {

namespace {

std::vector<double> number_array(const Json& j, std::string_view what) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, fmt::format("{} must be an array", what));
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::ParseError, fmt::format("{} must contain numbers", what));
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

GroupRecord group_record_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "group record must be an object");
  GroupRecord rec;
  try {
    rec.group_id = j.value("group_id", "");
    rec.inputs.rewards = number_array(j.at("rewards"), "rewards");
    rec.inputs.clip_eps = j.value("clip_eps", 0.2);
    rec.inputs.std_floor = j.value("std_floor", 1e-6);
    for (const Json& tj : j.at("trajectories")) {
      TrajectoryTokens traj;
      for (const Json& sj : tj.at("segments")) {
        TokenSegment seg;
        seg.masked = sj.value("masked", false);
        if (seg.masked && !sj.contains("logprob_old")) {
          const auto n = sj.value("length", std::size_t{0});
          seg.logprob_old.assign(n, 0.0);
          seg.logprob_new.assign(n, 0.0);
        } else {
          seg.logprob_old = number_array(sj.at("logprob_old"), "logprob_old");
          seg.logprob_new = number_array(sj.at("logprob_new"), "logprob_new");
        }
        traj.segments.push_back(std::move(seg));
      }
      rec.inputs.trajectories.push_back(std::move(traj));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return rec;
}

Json to_json(const GroupRecord& record) {
  Json trajs = Json::array();
  for (const auto& t : record.inputs.trajectories) {
    Json segs = Json::array();
    for (const auto& s : t.segments) {
      segs.push_back({{"masked", s.masked}, {"logprob_old", s.logprob_old}, {"logprob_new", s.logprob_new}});
    }
    trajs.push_back({{"segments", segs}});
  }
  return Json{{"group_id", record.group_id},
              {"rewards", record.inputs.rewards},
              {"clip_eps", record.inputs.clip_eps},
              {"std_floor", record.inputs.std_floor},
              {"trajectories", trajs}};
}

std::vector<GroupRecord> read_group_records(std::string_view jsonl) {
  std::vector<GroupRecord> out;
  for_each_jsonl(jsonl, [&](std::size_t line, const Json& j) {
    try {
      out.push_back(group_record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: {}", line, e.what()));
    }
  });
  return out;
}

Json to_json(const LossReport& report, bool include_weights) {
  Json j{{"advantages", report.advantages},
         {"objective_stepwise", report.objective_stepwise},
         {"objective_standard", report.objective_standard},
         {"clip_fraction", report.clip_fraction}};
  if (include_weights) j["per_token_weights"] = report.per_token_weights;
  return j;
}

}  // namespace tir::grpo
