#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tir/grpo.hpp"
#include "tir/json_util.hpp"

namespace tir::grpo {

/// Line-delimited group record:
///   {"group_id": str, "rewards": [r...], "clip_eps": e, "std_floor": f,
///    "trajectories": [{"segments": [{"masked": bool,
///                                    "logprob_old": [...], "logprob_new": [...]}]}]}
/// Masked segments may give {"masked": true, "length": n} instead of arrays.
/// Doubles are written in shortest round-trip form (exact, up to 17 digits).
struct GroupRecord {
  std::string group_id;
  GroupLossInputs inputs;
};

GroupRecord group_record_from_json(const Json& j);
Json to_json(const GroupRecord& record);
std::vector<GroupRecord> read_group_records(std::string_view jsonl);

Json to_json(const LossReport& report, bool include_weights);

}  // namespace tir::grpo
