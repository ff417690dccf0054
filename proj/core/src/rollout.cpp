#include "tir/rollout.hpp"

#include <array>
#include <map>
#include <variant>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tir/error.hpp"
#include "tir/grpo.hpp"
#include "tir/prompts.hpp"

namespace tir {

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::microseconds since(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t);
}

struct Episode {
  EpisodeRecord rec;
  const BenchItem* item = nullptr;
  Json messages = Json::array();
  ToolContext ctx;
  std::size_t turn = 0;
  std::optional<ToolInvocation> pending;
  std::optional<std::string> pending_error;
  std::optional<std::future<JudgeOutcome>> judge;
  Clock::time_point judge_start;
};

struct Observation {
  std::string body;
  Json message;
  std::optional<Image> image;
  std::optional<std::string> fatal;
};

using ToolOutcome = std::variant<ToolResult, Error>;

std::string png_data_url(const Image& img) {
  const auto png = encode_png(img);
  return "data:image/png;base64," + base64_encode(png);
}

Image load_item_image(const BenchItem& item, const std::filesystem::path& base) {
  if (item.image.rfind("http://", 0) == 0 || item.image.rfind("https://", 0) == 0) {
    const HttpResponse r = http_get(item.image, std::chrono::milliseconds(30000));
    if (r.status < 200 || r.status >= 300) {
      throw Error(ErrorCode::ImageDecode, fmt::format("image download returned HTTP {}", r.status));
    }
    return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()));
  }
  std::filesystem::path p = item.image;
  if (p.is_relative() && !base.empty()) p = base / p;
  return load_image(p);
}

Json initial_messages(const BenchItem& item, const std::optional<Image>& image, bool multimodal) {
  Json user;
  if (image && multimodal) {
    user = Json::array({{{"type", "image_url"}, {"image_url", {{"url", png_data_url(*image)}}}},
                        {{"type", "text"}, {"text", item.question}}});
  } else {
    user = image ? "<image>\n" + item.question : item.question;
  }
  return Json::array({{{"role", "system"}, {"content", std::string(prompts::policy_system_prompt())}},
                      {{"role", "user"}, {"content", std::move(user)}}});
}

std::optional<JudgeVerdict> verdict_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  auto v = parse_verdict(j.dump());
  if (!v) throw Error(ErrorCode::ParseError, "malformed verdict in record");
  return v;
}

}  // namespace

std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Running: return "running";
    case EpisodeStatus::Answered: return "answered";
    case EpisodeStatus::Truncated: return "truncated";
    case EpisodeStatus::Failed: return "failed";
  }
  return "running";
}

std::optional<EpisodeStatus> parse_episode_status(std::string_view text) {
  for (auto s : {EpisodeStatus::Running, EpisodeStatus::Answered, EpisodeStatus::Truncated, EpisodeStatus::Failed}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

Json to_json(const EpisodeRecord& r, bool include_timing) {
  Json j{{"item_id", r.item_id},
         {"category", r.category},
         {"sample_index", r.sample_index},
         {"status", to_string(r.status)},
         {"rounds_used", r.rounds_used},
         {"trajectory_source", r.trajectory_source},
         {"segments", segments_to_json(r.parsed)},
         {"format", to_json(r.format)},
         {"reward_breakdown", r.reward ? to_json(*r.reward) : Json(nullptr)},
         {"verdict", r.verdict ? to_json(*r.verdict) : Json(nullptr)},
         {"advantage", r.advantage ? Json(*r.advantage) : Json(nullptr)},
         {"final_answer", r.final_answer ? Json(*r.final_answer) : Json(nullptr)},
         {"error", r.error.empty() ? Json(nullptr) : Json(r.error)}};
  if (include_timing) {
    j["timing"] = {{"generate_us", r.timing.generate.count()},
                   {"tools_us", r.timing.tools.count()},
                   {"judge_us", r.timing.judge.count()}};
  } else {
    j["timing"] = nullptr;
  }
  return j;
}

EpisodeRecord episode_record_from_json(const Json& j) {
  EpisodeRecord r;
  try {
    r.item_id = j.at("item_id").is_string() ? j.at("item_id").get<std::string>() : j.at("item_id").dump();
    r.category = j.value("category", std::string{});
    r.sample_index = j.value("sample_index", std::size_t{0});
    const auto status = parse_episode_status(j.at("status").get<std::string>());
    if (!status) throw Error(ErrorCode::ParseError, "unknown status " + j.at("status").dump());
    r.status = *status;
    r.rounds_used = j.value("rounds_used", std::size_t{0});
    r.trajectory_source = j.value("trajectory_source", std::string{});
    r.parsed = parse_trajectory(r.trajectory_source);
    r.format = validate_schema(r.parsed);
    if (const auto& rb = j.value("reward_breakdown", Json(nullptr)); !rb.is_null()) {
      r.reward = RewardBreakdown{rb.at("r_acc").get<double>(), rb.at("r_fmt").get<double>(),
                                 rb.at("r_halluc").get<double>(), rb.at("r_total").get<double>()};
    }
    r.verdict = verdict_from_json(j.value("verdict", Json(nullptr)));
    if (const auto& a = j.value("advantage", Json(nullptr)); !a.is_null()) r.advantage = a.get<double>();
    if (const auto& a = j.value("final_answer", Json(nullptr)); !a.is_null()) r.final_answer = a.get<std::string>();
    if (const auto& e = j.value("error", Json(nullptr)); e.is_string()) r.error = e.get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed rollout record: ") + e.what());
  }
  return r;
}

std::string dump_records(const std::vector<EpisodeRecord>& records, bool include_timing) {
  std::string out;
  for (const auto& r : records) {
    out += canonical_dump(to_json(r, include_timing));
    out += '\n';
  }
  return out;
}

std::vector<EpisodeRecord> parse_records(std::string_view jsonl) {
  std::vector<EpisodeRecord> out;
  for_each_jsonl(jsonl, [&](std::size_t line, const Json& j) {
    try {
      out.push_back(episode_record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: {}", line, e.what()));
    }
  });
  return out;
}

std::string escape_tag_markers(std::string_view text) {
  static const std::array<std::string_view, 8> markers = {"<think>",       "</think>",        "<tool_call>",
                                                          "</tool_call>",  "<tool_response>", "</tool_response>",
                                                          "<answer>",      "</answer>"};
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool hit = false;
    if (text[i] == '<') {
      for (std::string_view m : markers) {
        if (text.substr(i, m.size()) == m) {
          out += "&lt;";
          out.append(m.substr(1));
          i += m.size();
          hit = true;
          break;
        }
      }
    }
    if (!hit) out += text[i++];
  }
  return out;
}

std::string truncate_observation(std::string_view text, std::size_t budget) {
  const std::size_t len = utf8::length(text);
  if (len <= budget) return std::string(text);
  return fmt::format("{}\n[truncated: {} characters omitted]", utf8::prefix(text, budget), len - budget);
}

std::string wrap_observation(std::string_view body) {
  return fmt::format("\n<tool_response>\n{}\n</tool_response>\n", body);
}

void assign_group_advantages(std::vector<EpisodeRecord>& records, double std_floor) {
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].advantage.reset();
    if (!records[i].scored()) continue;
    auto [it, inserted] = groups.try_emplace(records[i].item_id);
    if (inserted) order.push_back(records[i].item_id);
    it->second.push_back(i);
  }
  for (const auto& id : order) {
    const auto& idx = groups.at(id);
    std::vector<double> rewards;
    rewards.reserve(idx.size());
    for (std::size_t i : idx) rewards.push_back(records[i].reward->r_total);
    const auto adv = grpo::group_advantages(rewards, std_floor);
    for (std::size_t k = 0; k < idx.size(); ++k) records[idx[k]].advantage = adv[k];
  }
}

RolloutEngine::RolloutEngine(std::shared_ptr<PolicyBackend> policy, std::shared_ptr<ToolPlatform> tools,
                             std::shared_ptr<JudgeBackend> judge, RolloutConfig config)
    : policy_(std::move(policy)), tools_(std::move(tools)), judge_(std::move(judge)), config_(std::move(config)) {
  if (!policy_) throw Error(ErrorCode::ConfigError, "rollout needs a policy backend");
  if (!tools_) throw Error(ErrorCode::ConfigError, "rollout needs a tool platform");
  if (config_.group_size == 0) throw Error(ErrorCode::ConfigError, "group size must be at least 1");
}

std::vector<EpisodeRecord> RolloutEngine::run_batch(const std::vector<BenchItem>& items,
                                                    const std::filesystem::path& image_base) {
  auto log = [this](std::string e) {
    if (config_.events) config_.events->record(std::move(e));
  };
  ThreadPool gen_pool(std::max<std::size_t>(1, config_.generate_parallelism));
  ThreadPool tool_pool(std::max<std::size_t>(1, config_.tool_parallelism));
  ThreadPool post_pool(std::max<std::size_t>(1, config_.postprocess_workers));
  ThreadPool judge_pool(std::max<std::size_t>(1, config_.judge_inflight));
  std::optional<AsyncJudge> judge;
  if (judge_) judge.emplace(judge_, judge_pool, std::max<std::size_t>(1, config_.judge_inflight), config_.judge_retry);
  const bool multimodal = policy_->multimodal();
  const std::vector<std::string> stops = {std::string(kEndOfTurn), "</tool_call>"};

  std::vector<Episode> eps;
  eps.reserve(items.size() * config_.group_size);
  for (const BenchItem& item : items) {
    std::optional<Image> image;
    std::string image_error;
    if (!item.image.empty()) {
      try {
        image = load_item_image(item, image_base);
      } catch (const Error& e) {
        image_error = e.what();
      }
    }
    for (std::size_t s = 0; s < config_.group_size; ++s) {
      Episode ep;
      ep.item = &item;
      ep.rec.item_id = item.id;
      ep.rec.category = item.category;
      ep.rec.sample_index = s;
      ep.rec.status = EpisodeStatus::Running;
      if (!image_error.empty()) {
        ep.rec.status = EpisodeStatus::Failed;
        ep.rec.error = image_error;
      }
      if (image) ep.ctx.images.push_back(*image);
      ep.messages = initial_messages(item, image, multimodal);
      eps.push_back(std::move(ep));
    }
  }

  auto submit_judge = [&](Episode& ep, std::size_t wave) {
    if (!judge) return;
    const auto answer = final_answer(parse_trajectory(ep.rec.trajectory_source));
    ep.judge_start = Clock::now();
    ep.judge = judge->submit(JudgeRequest{ep.item->question, answer.value_or(""), ep.item->ground_truth});
    log(fmt::format("wave {} judge-submit {}#{}", wave, ep.rec.item_id, ep.rec.sample_index));
  };

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (eps[i].rec.status == EpisodeStatus::Running) live.push_back(i);
  }

  for (std::size_t wave = 0; !live.empty(); ++wave) {
    log(fmt::format("wave {} generate-begin", wave));
    std::vector<std::future<std::variant<GenerateResult, Error>>> gens;
    gens.reserve(live.size());
    for (std::size_t i : live) {
      Episode& ep = eps[i];
      GenerateRequest req{ep.messages, config_.sampling, stops, ep.rec.item_id, ep.rec.sample_index, ep.turn};
      if (req.sampling.seed) req.sampling.seed = *req.sampling.seed + ep.rec.sample_index;
      gens.push_back(gen_pool.submit([this, req = std::move(req)]() -> std::variant<GenerateResult, Error> {
        try {
          return policy_->generate(req);
        } catch (const Error& e) {
          return Error(ErrorCode::PolicyFailure, e.what());
        } catch (const std::exception& e) {
          return Error(ErrorCode::PolicyFailure, e.what());
        }
      }));
    }
    for (std::size_t k = 0; k < live.size(); ++k) {
      Episode& ep = eps[live[k]];
      const auto t0 = Clock::now();
      auto outcome = gens[k].get();
      ep.rec.timing.generate += since(t0);
      ++ep.turn;
      if (auto* err = std::get_if<Error>(&outcome)) {
        ep.rec.status = EpisodeStatus::Failed;
        ep.rec.error = err->what();
        continue;
      }
      const std::string& text = std::get<GenerateResult>(outcome).text;
      ep.rec.trajectory_source += text;
      ep.messages.push_back({{"role", "assistant"}, {"content", text}});
      const ParsedTrajectory turn = parse_trajectory(text);
      const Segment* call = nullptr;
      bool answered = false;
      for (const Segment& seg : turn.segments) {
        if (seg.kind == SegmentKind::ToolCall && call == nullptr) call = &seg;
        if (seg.kind == SegmentKind::Answer) answered = true;
      }
      if (call != nullptr) {
        if (ep.rec.rounds_used >= config_.max_rounds) {
          ep.rec.status = EpisodeStatus::Truncated;
          continue;
        }
        try {
          ep.pending = extract_tool_invocation(*call);
        } catch (const Error& e) {
          ep.pending_error = fmt::format("Error: {}", e.what());
        }
      } else if (answered) {
        ep.rec.status = EpisodeStatus::Answered;
        if (config_.judge_on_completion) submit_judge(ep, wave);
      } else {
        ep.rec.status = EpisodeStatus::Truncated;
      }
    }
    log(fmt::format("wave {} generate-end", wave));

    std::vector<std::size_t> calling;
    std::vector<std::future<ToolOutcome>> calls;
    for (std::size_t i : live) {
      Episode& ep = eps[i];
      if (!ep.pending) continue;
      calling.push_back(i);
      calls.push_back(tool_pool.submit([this, inv = *ep.pending, &ctx = ep.ctx]() -> ToolOutcome {
        try {
          return tools_->dispatch(inv, ctx);
        } catch (const Error& e) {
          return e;
        } catch (const std::exception& e) {
          return Error(ErrorCode::BackendFailure, e.what());
        }
      }));
    }
    std::vector<ToolOutcome> outcomes;
    outcomes.reserve(calls.size());
    for (std::size_t k = 0; k < calls.size(); ++k) {
      const auto t0 = Clock::now();
      outcomes.push_back(calls[k].get());
      eps[calling[k]].rec.timing.tools += since(t0);
    }
    log(fmt::format("wave {} tools-resolved", wave));

    // Serialize observations off the coordinator.
    std::vector<std::size_t> observing;
    std::vector<std::future<Observation>> posts;
    std::size_t call_k = 0;
    for (std::size_t i : live) {
      Episode& ep = eps[i];
      if (ep.pending) {
        observing.push_back(i);
        posts.push_back(post_pool.submit([this, multimodal, outcome = std::move(outcomes[call_k++])]() {
          Observation obs;
          if (const auto* err = std::get_if<Error>(&outcome)) {
            if (err->code() == ErrorCode::FixtureMiss) {
              obs.fatal = err->what();
              return obs;
            }
            obs.body = truncate_observation(escape_tag_markers(fmt::format("Error: {}", err->what())),
                                            config_.observation_budget);
          } else {
            const ToolResult& r = std::get<ToolResult>(outcome);
            obs.body = truncate_observation(escape_tag_markers(r.observation_text()), config_.observation_budget);
            if (r.kind == ToolResultKind::Image) obs.image = std::get<Image>(r.payload);
          }
          const std::string wrapped = wrap_observation(obs.body);
          if (obs.image && multimodal) {
            obs.message = {{"role", "user"},
                           {"content", Json::array({{{"type", "text"}, {"text", wrapped}},
                                                    {{"type", "image_url"},
                                                     {"image_url", {{"url", png_data_url(*obs.image)}}}}})}};
          } else {
            obs.message = {{"role", "user"}, {"content", wrapped}};
          }
          return obs;
        }));
      } else if (ep.pending_error) {
        observing.push_back(i);
        posts.push_back(post_pool.submit([this, text = *ep.pending_error]() {
          Observation obs;
          obs.body = truncate_observation(escape_tag_markers(text), config_.observation_budget);
          obs.message = {{"role", "user"}, {"content", wrap_observation(obs.body)}};
          return obs;
        }));
      }
    }
    for (std::size_t k = 0; k < posts.size(); ++k) {
      Episode& ep = eps[observing[k]];
      Observation obs = posts[k].get();
      ep.pending.reset();
      ep.pending_error.reset();
      if (obs.fatal) {
        ep.rec.status = EpisodeStatus::Failed;
        ep.rec.error = *obs.fatal;
        continue;
      }
      ep.rec.trajectory_source += wrap_observation(obs.body);
      ep.messages.push_back(std::move(obs.message));
      if (obs.image) ep.ctx.images.push_back(std::move(*obs.image));
      ++ep.rec.rounds_used;
    }
    log(fmt::format("wave {} barrier", wave));

    std::vector<std::size_t> next;
    for (std::size_t i : live) {
      if (eps[i].rec.status == EpisodeStatus::Running) next.push_back(i);
    }
    live = std::move(next);
  }

  if (!config_.judge_on_completion) {
    for (Episode& ep : eps) {
      if (ep.rec.status == EpisodeStatus::Answered) submit_judge(ep, 0);
    }
  }

  std::vector<EpisodeRecord> out;
  out.reserve(eps.size());
  for (Episode& ep : eps) {
    EpisodeRecord& r = ep.rec;
    r.parsed = parse_trajectory(r.trajectory_source);
    r.format = validate_schema(r.parsed);
    r.final_answer = final_answer(r.parsed);
    if (r.status == EpisodeStatus::Answered) {
      if (!ep.judge) {
        r.error = "no judge configured";
      } else {
        try {
          const JudgeOutcome outcome = ep.judge->get();
          r.verdict = outcome.verdict;
          r.reward = score_trajectory(r.format, r.verdict, config_.weights);
        } catch (const Error& e) {
          r.error = e.what();
          if (e.code() == ErrorCode::FixtureMiss) r.status = EpisodeStatus::Failed;
        }
        r.timing.judge = since(ep.judge_start);
      }
    } else if (r.status == EpisodeStatus::Truncated) {
      r.reward = score_trajectory(r.format, std::nullopt, config_.weights);
    }
    out.push_back(std::move(r));
  }
  assign_group_advantages(out, config_.std_floor);
  return out;
}

std::vector<EpisodeRecord> RolloutEngine::run_group(const BenchItem& item, std::size_t group_size,
                                                    const std::filesystem::path& image_base) {
  RolloutConfig cfg = config_;
  cfg.group_size = group_size;
  RolloutEngine engine(policy_, tools_, judge_, cfg);
  return engine.run_batch({item}, image_base);
}

EpisodeRecord RolloutEngine::run_episode(const BenchItem& item, const std::filesystem::path& image_base) {
  return run_group(item, 1, image_base).front();
}

}  // namespace tir
