#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tir/dataset.hpp"
#include "tir/eval.hpp"
#include "tir/grpo.hpp"
#include "tir/judge.hpp"
#include "tir/loss_io.hpp"
#include "tir/retrieval.hpp"
#include "tir/reward.hpp"
#include "tir/rollout.hpp"
#include "tir/trajectory.hpp"

namespace tirctl {

namespace {

namespace fs = std::filesystem;
using tir::Error;
using tir::ErrorCode;
using tir::Json;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::string fixture_dir;
  std::string fixture_mode;
  int tool_cap = 0;
  int group_size = 0;
  int max_rounds = -1;
  bool no_timing = false;
  std::string judge_backend;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "Override a configuration key, e.g. rollout.max_rounds=5");
  cmd->add_option("--fixture-dir", o.fixture_dir, "Fixture store directory");
  cmd->add_option("--fixture-mode", o.fixture_mode, "off | record | replay | replay-lenient");
  cmd->add_option("--tool-cap", o.tool_cap, "Per-tool in-flight cap");
  cmd->add_option("--group-size", o.group_size, "Samples per item");
  cmd->add_option("--max-rounds", o.max_rounds, "Tool-call budget per episode");
  cmd->add_flag("--no-timing", o.no_timing, "Omit wall-clock timings for byte-stable output");
  cmd->add_option("--judge", o.judge_backend, "Judge backend: http | exact");
}

tir::AppConfig resolve_config(const CommonOptions& o, const tir::EnvLookup& env) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value, got \"" + s + "\"");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.fixture_dir.empty()) overrides.emplace_back("fixtures.dir", o.fixture_dir);
  if (!o.fixture_mode.empty()) overrides.emplace_back("fixtures.mode", o.fixture_mode);
  if (o.tool_cap > 0) overrides.emplace_back("tools.max_inflight", std::to_string(o.tool_cap));
  if (o.group_size > 0) overrides.emplace_back("rollout.group_size", std::to_string(o.group_size));
  if (o.max_rounds >= 0) overrides.emplace_back("rollout.max_rounds", std::to_string(o.max_rounds));
  if (o.no_timing) overrides.emplace_back("rollout.record_timing", "false");
  if (!o.judge_backend.empty()) overrides.emplace_back("judge.backend", o.judge_backend);
  std::optional<fs::path> file;
  if (!o.config_file.empty()) file = o.config_file;
  return tir::load_config(file, env, overrides);
}

std::string read_input(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::IoError, "cannot read " + path);
  return tir::read_file(path);
}

void write_output(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  tir::write_file_atomic(path, data);
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string status_summary(const std::vector<tir::EpisodeRecord>& records) {
  std::map<std::string, std::size_t> counts;
  std::size_t scored = 0;
  for (const auto& r : records) {
    ++counts[std::string(tir::to_string(r.status))];
    scored += r.scored() ? 1 : 0;
  }
  return fmt::format("{} records: answered {}, truncated {}, failed {}; scored {}", records.size(), counts["answered"],
                     counts["truncated"], counts["failed"], scored);
}

struct Runtime {
  tir::AppConfig config;
  std::shared_ptr<tir::FixtureStore> store;
  std::unique_ptr<tir::RolloutEngine> engine;
};

Runtime make_runtime(const CommonOptions& o, const std::string& script, const tir::EnvLookup& env,
                     std::optional<tir::FixtureMode> force_mode = std::nullopt) {
  Runtime rt;
  rt.config = resolve_config(o, env);
  if (force_mode) rt.config.fixture_mode = *force_mode;
  rt.store = tir::make_fixture_store(rt.config);
  auto tools = tir::make_tool_platform(rt.config, rt.store);
  auto judge = tir::make_judge(rt.config, rt.store);
  std::optional<fs::path> script_path;
  if (!script.empty()) script_path = script;
  auto policy = tir::make_policy(rt.config, script_path);
  rt.engine = std::make_unique<tir::RolloutEngine>(policy, tools, judge, tir::make_rollout_config(rt.config));
  return rt;
}

int cmd_parse(const std::string& file, std::ostream& out) {
  const auto parsed = tir::parse_trajectory(read_input(file));
  const auto report = tir::validate_schema(parsed);
  out << Json{{"trajectory", tir::to_json(parsed)}, {"format", tir::to_json(report)}}.dump(2) << "\n";
  return 0;
}

struct ScoreOptions {
  std::string file;
  std::string verdict_file;
  std::string verdict;
  std::string question;
  std::string ground_truth;
  double lambda_fmt = 0.1;
  double lambda_halluc = 0.05;
};

int cmd_score(const ScoreOptions& s, const CommonOptions& common, const tir::EnvLookup& env, std::ostream& out) {
  const auto parsed = tir::parse_trajectory(read_input(s.file));
  const auto report = tir::validate_schema(parsed);
  std::optional<tir::JudgeVerdict> verdict;
  int attempts = 0;
  if (!s.verdict_file.empty()) {
    verdict = tir::parse_verdict(read_input(s.verdict_file));
    if (!verdict) throw Error(ErrorCode::VerdictUnparsable, s.verdict_file + " does not hold a valid verdict");
  } else if (!s.verdict.empty()) {
    if (s.verdict != "0" && s.verdict != "1") throw Error(ErrorCode::ArgValidation, "--verdict must be 0 or 1");
    verdict = tir::JudgeVerdict{"", "given on the command line", s.verdict, 100, true};
  } else if (!s.ground_truth.empty()) {
    tir::AppConfig cfg = resolve_config(common, env);
    auto judge = tir::make_judge(cfg, tir::make_fixture_store(cfg));
    const auto answer = tir::final_answer(parsed);
    const auto outcome = tir::judge_answer(tir::JudgeRequest{s.question, answer.value_or(""), s.ground_truth}, *judge,
                                           tir::JudgeRetryPolicy{cfg.judge_max_attempts,
                                                                 std::chrono::milliseconds(cfg.judge_initial_backoff_ms)});
    verdict = outcome.verdict;
    attempts = outcome.attempts;
  }
  if (!report.has_answer) verdict.reset();
  const auto reward = tir::score_trajectory(report, verdict, tir::RewardWeights{s.lambda_fmt, s.lambda_halluc});
  Json j{{"segments", tir::segments_to_json(parsed)},
         {"format", tir::to_json(report)},
         {"verdict", verdict ? tir::to_json(*verdict) : Json(nullptr)},
         {"reward", tir::to_json(reward)}};
  if (attempts > 0) j["judge_attempts"] = attempts;
  out << j.dump(2) << "\n";
  return 0;
}

struct AdvantageOptions {
  std::string file;
  bool weights = false;
  std::optional<double> clip_eps;
  std::optional<double> std_floor;
};

int cmd_advantages(const AdvantageOptions& a, std::ostream& out) {
  const std::string text = read_input(a.file);
  bool is_dump = false;
  bool first = true;
  tir::for_each_jsonl(text, [&](std::size_t, const Json& j) {
    if (first) is_dump = j.contains("item_id");
    first = false;
  });
  if (first) throw Error(ErrorCode::EmptyInput, a.file + " has no records");
  const double floor = a.std_floor.value_or(1e-6);
  if (is_dump) {
    auto records = tir::parse_records(text);
    tir::assign_group_advantages(records, floor);
    std::vector<std::string> order;
    std::map<std::string, std::pair<Json, Json>> groups;
    for (const auto& r : records) {
      if (!r.scored()) continue;
      auto [it, inserted] = groups.try_emplace(r.item_id, Json::array(), Json::array());
      if (inserted) order.push_back(r.item_id);
      it->second.first.push_back(r.reward->r_total);
      it->second.second.push_back(*r.advantage);
    }
    for (const auto& id : order) {
      out << Json{{"item_id", id}, {"rewards", groups[id].first}, {"advantages", groups[id].second}}.dump() << "\n";
    }
    return 0;
  }
  for (auto& rec : tir::grpo::read_group_records(text)) {
    if (a.clip_eps) rec.inputs.clip_eps = *a.clip_eps;
    if (a.std_floor) rec.inputs.std_floor = *a.std_floor;
    const auto report = tir::grpo::clipped_objective(rec.inputs, tir::grpo::Weighting::Stepwise);
    Json j = tir::grpo::to_json(report, a.weights);
    j["group_id"] = rec.group_id;
    out << j.dump() << "\n";
  }
  return 0;
}

struct RolloutOptions {
  std::string dataset;
  std::string script;
  std::string out;
};

int cmd_rollout(const RolloutOptions& r, const CommonOptions& common, const tir::EnvLookup& env, std::ostream& out,
                std::ostream& err, std::optional<tir::FixtureMode> force_mode = std::nullopt) {
  Runtime rt = make_runtime(common, r.script, env, force_mode);
  const auto items = tir::load_dataset(r.dataset);
  const auto records = rt.engine->run_batch(items, fs::path(r.dataset).parent_path());
  const std::string dump = tir::dump_records(records, rt.config.record_timing);
  if (r.out.empty() || r.out == "-") {
    out << dump;
  } else {
    write_output(r.out, dump);
  }
  err << "rollout: " << status_summary(records) << "\n";
  if (rt.store && rt.store->miss_count() > 0) err << "rollout: fixture misses " << rt.store->miss_count() << "\n";
  return 0;
}

struct EvalOptions {
  std::string dataset;
  std::string records;
  std::string script;
  std::string compare;
  std::string out_dir;
  std::string label = "agent";
};

int cmd_eval(const EvalOptions& e, const CommonOptions& common, const tir::EnvLookup& env, std::ostream& out,
             std::ostream& err) {
  if (e.dataset.empty() == e.records.empty()) {
    throw Error(ErrorCode::ArgValidation, "eval needs exactly one of --dataset or --records");
  }
  std::vector<tir::RunRecord> records;
  Json run{{"label", e.label}};
  bool timing = true;
  if (!e.dataset.empty()) {
    Runtime rt = make_runtime(common, e.script, env);
    const auto items = tir::load_dataset(e.dataset);
    const std::string started = now_iso8601();
    timing = rt.config.record_timing;
    records = tir::run_benchmark(*rt.engine, items, fs::path(e.dataset).parent_path());
    run["config_hash"] = tir::config_hash(rt.config);
    run["dataset"] = fs::path(e.dataset).filename().string();
    if (timing) {
      run["started_at"] = started;
      run["finished_at"] = now_iso8601();
    }
    err << "eval: " << status_summary(records) << "\n";
  } else {
    records = tir::parse_records(read_input(e.records));
    run["records"] = fs::path(e.records).filename().string();
  }
  const auto report = tir::aggregate(records);
  Json doc = tir::to_json(report);
  doc["run"] = run;
  std::optional<tir::Comparison> cmp;
  if (!e.compare.empty()) {
    cmp = tir::compare_win_tie_loss(records, tir::parse_records(read_input(e.compare)));
    doc["comparison"] = tir::to_json(*cmp);
  }
  const std::string table = tir::render_table(report, e.label);
  if (!e.out_dir.empty()) {
    const fs::path dir = e.out_dir;
    if (!e.dataset.empty()) write_output(dir / "records.jsonl", tir::dump_records(records, timing));
    write_output(dir / "report.json", doc.dump(2) + "\n");
    write_output(dir / "report.txt", table);
    write_output(dir / "rounds.tsv", tir::rounds_tsv(report.rounds));
    if (cmp) write_output(dir / "win_tie_loss.tsv", tir::comparison_tsv(*cmp));
  }
  out << table;
  out << fmt::format("micro {:.2f}  macro {:.2f}  scored {}/{}\n", report.micro, report.macro, report.scored,
                     report.total);
  return 0;
}

struct IndexOptions {
  std::string manifest;
  std::string out;
  std::size_t dim = 0;
  std::string version;
};

int cmd_index_build(const IndexOptions& o, const CommonOptions& common, const tir::EnvLookup& env, std::ostream& out) {
  tir::AppConfig cfg = resolve_config(common, env);
  auto manifest = tir::load_manifest(o.manifest);
  if (o.dim != 0) manifest.embedding_dim = o.dim;
  if (!o.version.empty()) manifest.version = o.version;
  std::unique_ptr<tir::EmbedBackend> embedder;
  if (!cfg.embed.url.empty()) {
    embedder = std::make_unique<tir::HttpEmbedBackend>(cfg.embed.endpoint(), cfg.embed_dim);
  } else {
    embedder = std::make_unique<tir::HashProjectionEmbedder>(cfg.embed_dim);
  }
  const auto result = tir::build_index(manifest, *embedder);
  result.index.save(o.out);
  for (const auto& w : result.warnings) out << "warning: " << w.entity_id << ": " << w.message << "\n";
  out << fmt::format("index: {} entities, {} vectors, dim {} -> {}\n", result.index.entity_count(),
                     result.index.vector_count(), result.index.dim(), o.out);
  return 0;
}

int cmd_replay_check(const RolloutOptions& r, const CommonOptions& common, const tir::EnvLookup& env,
                     std::ostream& out) {
  Runtime rt = make_runtime(common, r.script, env, tir::FixtureMode::Replay);
  const auto items = tir::load_dataset(r.dataset);
  if (!rt.store) throw Error(ErrorCode::ConfigError, "replay-check needs a fixture directory");
  const auto verify = rt.store->verify();
  const auto records = rt.engine->run_batch(items, fs::path(r.dataset).parent_path());
  out << fmt::format("fixtures: {} records, {} corrupt\n", verify.records, verify.corrupt.size());
  for (const auto& c : verify.corrupt) out << "corrupt: " << c << "\n";
  out << "replay: " << status_summary(records) << "\n";
  for (const auto& key : rt.store->missed_keys()) out << "miss: " << key << "\n";
  return verify.corrupt.empty() && rt.store->miss_count() == 0 ? 0 : 3;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const tir::EnvLookup& env) {
  CLI::App app{"Tool-integrated reasoning runtime: parse, score, roll out and evaluate agent trajectories", "tirctl"};
  app.require_subcommand(1);
  CommonOptions common;
  std::string parse_file;
  ScoreOptions score;
  AdvantageOptions adv;
  RolloutOptions rollout;
  EvalOptions eval;
  IndexOptions index;
  RolloutOptions fixtures;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log debug output");

  auto* parse = app.add_subcommand("parse", "Parse a trajectory and report its format");
  parse->add_option("file", parse_file, "Trajectory text file")->required();

  auto* sc = app.add_subcommand("score", "Score a trajectory with the hybrid reward");
  sc->add_option("file", score.file, "Trajectory text file")->required();
  sc->add_option("--verdict-file", score.verdict_file, "Judge output to use as the verdict");
  sc->add_option("--verdict", score.verdict, "Shortcut verdict: 1 or 0");
  sc->add_option("--question", score.question, "Question text for the judge");
  sc->add_option("--ground-truth", score.ground_truth, "Ground truth; runs the configured judge");
  sc->add_option("--lambda-fmt", score.lambda_fmt, "Format reward weight");
  sc->add_option("--lambda-halluc", score.lambda_halluc, "Hallucination penalty weight");
  add_common(sc, common);

  auto* ad = app.add_subcommand("advantages", "Group advantages and objectives from group records or a rollout dump");
  ad->add_option("file", adv.file, "JSONL group records or rollout dump")->required();
  ad->add_flag("--weights", adv.weights, "Include per-token weights");
  ad->add_option("--clip-eps", adv.clip_eps, "Clip range epsilon");
  ad->add_option("--std-floor", adv.std_floor, "Minimum reward std before advantages are zeroed");

  auto* ro = app.add_subcommand("rollout", "Run episodes over a dataset and write a rollout dump");
  ro->add_option("--dataset", rollout.dataset, "Dataset JSONL")->required();
  ro->add_option("--script", rollout.script, "Scripted policy JSONL instead of the policy endpoint");
  ro->add_option("--out", rollout.out, "Dump path (stdout when omitted)");
  add_common(ro, common);

  auto* ev = app.add_subcommand("eval", "Run or aggregate a benchmark evaluation");
  ev->add_option("--dataset", eval.dataset, "Dataset JSONL to run");
  ev->add_option("--records", eval.records, "Existing rollout dump to aggregate");
  ev->add_option("--script", eval.script, "Scripted policy JSONL");
  ev->add_option("--compare", eval.compare, "Second run's dump for win-tie-loss");
  ev->add_option("--out-dir", eval.out_dir, "Directory for report.json, report.txt and plot data");
  ev->add_option("--label", eval.label, "Row label in the table");
  add_common(ev, common);

  auto* ix = app.add_subcommand("index", "Retrieval index management");
  ix->require_subcommand(1);
  auto* ib = ix->add_subcommand("build", "Build an index from a manifest");
  ib->add_option("--manifest", index.manifest, "Manifest JSONL")->required();
  ib->add_option("--out", index.out, "Index file")->required();
  ib->add_option("--dim", index.dim, "Embedding dimension");
  ib->add_option("--version-tag", index.version, "Version tag stored in the index");
  add_common(ib, common);

  auto* fx = app.add_subcommand("fixtures", "Record or check tool and judge fixtures");
  fx->require_subcommand(1);
  auto* fr = fx->add_subcommand("record", "Run a dataset against live backends and persist responses");
  fr->add_option("--dataset", fixtures.dataset, "Dataset JSONL")->required();
  fr->add_option("--script", fixtures.script, "Scripted policy JSONL");
  fr->add_option("--out", fixtures.out, "Optional rollout dump");
  add_common(fr, common);
  auto* fc = fx->add_subcommand("replay-check", "Verify the store and replay a dataset strictly");
  fc->add_option("--dataset", fixtures.dataset, "Dataset JSONL")->required();
  fc->add_option("--script", fixtures.script, "Scripted policy JSONL");
  add_common(fc, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*parse) return cmd_parse(parse_file, out);
    if (*sc) return cmd_score(score, common, env, out);
    if (*ad) return cmd_advantages(adv, out);
    if (*ro) return cmd_rollout(rollout, common, env, out, err);
    if (*ev) return cmd_eval(eval, common, env, out, err);
    if (*ib) return cmd_index_build(index, common, env, out);
    if (*fr) {
      if (fixtures.out.empty()) fixtures.out = "-";
      std::ostringstream sink;
      return cmd_rollout(fixtures, common, env, fixtures.out == "-" ? sink : out, err, tir::FixtureMode::Record);
    }
    if (*fc) return cmd_replay_check(fixtures, common, env, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return tir::exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace tirctl
