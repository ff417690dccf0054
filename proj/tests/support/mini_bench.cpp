#include "mini_bench.hpp"

#include <unistd.h>

#include <atomic>

#include "tir/config.hpp"
#include "tir/dataset.hpp"
#include "tir/judge.hpp"
#include "tir/retrieval.hpp"
#include "tir/rollout.hpp"

namespace tir::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() / ("tir-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Image pattern_image(int width, int height, unsigned seed) {
  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint8_t* p = img.pixel(x, y);
      p[0] = static_cast<std::uint8_t>((x * (seed % 7 + 1) + y * 3 + seed * 37) & 0xFF);
      p[1] = static_cast<std::uint8_t>((y * (seed % 5 + 2) + seed * 91) & 0xFF);
      p[2] = static_cast<std::uint8_t>(((x ^ y) + seed * 13) & 0xFF);
    }
  }
  return img;
}

namespace {

void write_image(const fs::path& p, const Image& img) {
  const auto bytes = encode_ppm(img);
  write_file_atomic(p, std::string(bytes.begin(), bytes.end()));
}

std::string call(const std::string& name, const Json& args) {
  return "<tool_call>" + Json{{"name", name}, {"arguments", args}}.dump() + "</tool_call>";
}

std::string think(const std::string& s) { return "<think>" + s + "</think>"; }
std::string answer(const std::string& s) { return "<answer>" + s + "</answer>"; }

struct ItemSpec {
  std::string id;
  std::string category;
  std::string question;
  std::string ground_truth;
  unsigned image_seed;
  std::vector<std::string> turns;
};

std::vector<ItemSpec> item_specs() {
  const std::string bbox_all = "[0, 0, 48, 48]";
  return {
      {"q01", "car", "Which company makes the car in the picture?", "Ford", 101,
       {think("Identify the car first.") + "\n" +
            call("zoom_v_search", Json{{"bbox_2d", {0, 0, 48, 48}}, {"category", "car"}}),
        think("The retrieval matched a Ford Model T.") + "\n" + answer("Ford")}},
      {"q02", "animal", "What animal is shown?", "tiger", 102,
       {think("Orange fur with black stripes.") + "\n" + answer("It is a tiger.")}},
      {"q03", "landmark", "How tall is the tower in the image, in metres?", "330", 103,
       {think("Look up the height.") + "\n" + call("web_search", Json{{"query", "Eiffel Tower height"}}),
        think("The search says 330 metres.") + "\n" + answer("330 metres")}},
      {"q04", "person", "Who is the player in the picture?", "Cade Cunningham", 104,
       {think("Search twice at once.") + "\n" + call("web_search", Json{{"query", "Detroit Pistons guard"}}) +
            call("web_search", Json{{"query", "Pistons number 2"}}),
        think("The first search names him.") + "\n" + answer("Cade Cunningham")}},
      {"q05", "plant", "Which flower is this?", "sunflower", 105,
       {think("Zoom on the centre.") + "\n" + call("im_zoom_in", Json{{"bbox_2d", {8, 8, 40, 40}}}),
        think("Large yellow petals around a brown disc.") + "\n" + answer("sunflower")}},
      {"q06", "logo", "Which brand uses this logo?", "Nike", 106,
       {think("Read the brand page.") + "\n" + call("url_visit", Json{{"url", "https://example.org/swoosh"}}),
        think("The page describes the Nike swoosh.") + "\n" + answer("Nike")}},
      {"q07", "landmark", "In which year was the monument completed?", "1889", 107,
       {think("Summarize the history page.") + "\n" +
            call("url_visit", Json{{"url", "https://example.org/eiffel"}, {"goal", "when was the tower completed"}}),
        think("Completed in 1889.") + "\n" + answer("1889")}},
      {"q08", "car", "Which manufacturer builds the Civic?", "Honda", 108,
       {think("Read the start of the page.") + "\n" +
            call("url_visit", Json{{"url", "https://example.org/civic"}, {"window", {0, 40}}}),
        think("Not enough information, guessing.") + "\n" + answer("Toyota")}},
      {"q09", "animal", "How many legs do five ten-legged crabs have?", "50", 109,
       {think("Compute it.") + "\n" +
            call("code_interpreter", Json{{"code", "a = 5\nb = 10\nresult = a * b\nprint(result)"}}),
        think("The interpreter printed 50.") + "\n" + answer("50")}},
      {"q10", "plant", "Which flower is the national flower of England?", "rose", 110,
       {think("Search it.") + "\n" + call("web_search", Json{{"query", "national flower of England"}}) +
            " I will now execute the search.",
        think("It is the rose.") + "\n" + answer("rose")}},
      {"q11", "person", "Who painted the portrait?", "Leonardo da Vinci", 111,
       {think("Search.") + call("web_search", Json{{"query", "portrait painter 1"}}),
        think("Search again.") + call("web_search", Json{{"query", "portrait painter 2"}}),
        think("And again.") + call("web_search", Json{{"query", "portrait painter 3"}}),
        think("Once more.") + call("web_search", Json{{"query", "portrait painter 4"}})}},
      {"q12", "logo", "Which company owns the brand in the picture?", "Nike", 112,
       {think("Search first.") + "\n" + call("web_search", Json{{"query", "swoosh logo company"}}),
        think("Confirm on the page.") + "\n" + call("url_visit", Json{{"url", "https://example.org/swoosh"}}),
        think("Nike, Inc.") + "\n" + answer("Nike")}},
  };
}

SearchResultItem result(int id, std::string title, std::string content, std::string url) {
  return SearchResultItem{id, std::move(title), std::move(content), std::move(url), std::string("2025-11-18")};
}

}  // namespace

std::shared_ptr<StaticSearchBackend> mini_bench_search() {
  std::map<std::string, std::vector<SearchResultItem>> t;
  t["Eiffel Tower height"] = {result(1, "Eiffel Tower", "The tower is 330 metres tall.", "https://example.org/eiffel"),
                              result(2, "Paris landmarks", "A list of landmarks.", "https://example.org/paris")};
  t["Detroit Pistons guard"] = {
      result(1, "Cade Cunningham", "Cade Cunningham is a guard for the Detroit Pistons.", "https://example.org/cade")};
  t["national flower of England"] = {result(1, "Tudor rose", "The rose is the national flower of England.",
                                            "https://example.org/rose")};
  t["swoosh logo company"] = {result(1, "Swoosh", "The swoosh is the logo of Nike, Inc.", "https://example.org/swoosh")};
  for (int i = 1; i <= 4; ++i) {
    t["portrait painter " + std::to_string(i)] = {
        result(1, "Portrait", "A famous portrait, attribution debated.", "https://example.org/portrait")};
  }
  std::vector<SearchResultItem> many;
  for (int i = 1; i <= 14; ++i) {
    many.push_back(result(i, "Result " + std::to_string(i), "Snippet " + std::to_string(i),
                          "https://example.org/r" + std::to_string(i)));
  }
  t["many results"] = many;
  return std::make_shared<StaticSearchBackend>(std::move(t));
}

std::shared_ptr<StaticFetchBackend> mini_bench_pages() {
  std::map<std::string, std::string> p;
  p["https://example.org/swoosh"] =
      "<html><head><title>Swoosh</title><style>p{color:red}</style></head><body><h1>The Swoosh</h1>"
      "<p>The swoosh is the logo of Nike, Inc. It was designed in 1971.</p><script>var x = 1;</script></body></html>";
  p["https://example.org/eiffel"] =
      "<html><body><p>The Eiffel Tower is a wrought-iron lattice tower in Paris.</p>"
      "<p>Construction began in 1887. The tower was completed in 1889 for the World's Fair.</p>"
      "<p>It is 330 metres tall.</p></body></html>";
  p["https://example.org/civic"] =
      "<html><body><p>The Civic is a line of compact cars. It is built by Honda since 1972.</p></body></html>";
  return std::make_shared<StaticFetchBackend>(std::move(p));
}

MiniBench build_mini_bench(const fs::path& root) {
  MiniBench mb;
  mb.root = root;
  mb.dataset = root / "dataset.jsonl";
  mb.script = root / "script.jsonl";
  mb.manifest = root / "manifest.jsonl";
  mb.index = root / "index.bin";
  mb.fixtures = root / "fixtures";
  mb.config = root / "config.json";
  fs::create_directories(root / "images");
  fs::create_directories(root / "exemplars");

  const auto specs = item_specs();
  std::string dataset;
  std::string script;
  for (const auto& s : specs) {
    const std::string rel = "images/" + s.id + ".ppm";
    write_image(root / rel, pattern_image(48, 48, s.image_seed));
    dataset += Json{{"id", s.id}, {"category", s.category}, {"question", s.question}, {"image", rel},
                    {"ground_truth", s.ground_truth}}
                   .dump() +
               "\n";
    script += Json{{"item_id", s.id}, {"turns", s.turns}}.dump() + "\n";
  }
  mb.items = specs.size();
  write_file_atomic(mb.dataset, dataset);
  write_file_atomic(mb.script, script);

  // q01's picture is itself an exemplar of the Ford entity.
  struct EntitySpec {
    std::string id, name, category;
    std::vector<unsigned> seeds;
  };
  const std::vector<EntitySpec> entities = {
      {"car-ford-t", "Ford Model T", "car", {101, 201, 202}},
      {"car-civic", "Honda Civic", "car", {203, 204, 205}},
      {"animal-tiger", "Tiger", "animal", {206, 207, 208}},
      {"landmark-eiffel", "Eiffel Tower", "landmark", {209, 210, 211}},
      {"logo-swoosh", "Nike Swoosh", "logo", {212, 213, 214}},
  };
  std::string manifest;
  for (const auto& e : entities) {
    Json ex = Json::array();
    for (unsigned seed : e.seeds) {
      const std::string rel = seed == 101 ? "images/q01.ppm" : "exemplars/" + std::to_string(seed) + ".ppm";
      if (seed != 101) write_image(root / rel, pattern_image(48, 48, seed));
      ex.push_back(rel);
    }
    manifest += Json{{"id", e.id}, {"name", e.name}, {"category", e.category}, {"exemplars", ex}}.dump() + "\n";
  }
  write_file_atomic(mb.manifest, manifest);
  HashProjectionEmbedder embedder(64);
  const auto built = build_index(load_manifest(mb.manifest), embedder);
  built.index.save(mb.index);

  Json cfg = {{"judge", {{"backend", "exact"}, {"initial_backoff_ms", 1}}},
              {"rollout", {{"max_rounds", mb.max_rounds}, {"record_timing", false}}},
              {"tools", {{"index", mb.index.string()}, {"sandbox_timeout_ms", 10000}}},
              {"fixtures", {{"dir", mb.fixtures.string()}, {"mode", "replay"}}}};
  write_file_atomic(mb.config, cfg.dump(2));

  auto store = std::make_shared<FixtureStore>(mb.fixtures);
  ToolBackends b;
  b.search = mini_bench_search();
  b.fetch = mini_bench_pages();
  b.assistant = std::make_shared<ExtractiveAssistantBackend>();
  b.embedder = std::make_shared<HashProjectionEmbedder>(64);
  b.index = std::make_shared<const Index>(Index::load(mb.index));
  b.fixtures = store;
  b.fixture_mode = FixtureMode::Record;
  auto tools = std::make_shared<ToolPlatform>(std::move(b));
  auto judge = std::make_shared<FixtureJudgeBackend>(std::make_shared<ExactMatchJudgeBackend>(), store,
                                                     FixtureMode::Record);
  RolloutConfig rc;
  rc.max_rounds = mb.max_rounds;
  rc.record_timing = false;
  rc.judge_retry.initial_backoff = std::chrono::milliseconds(1);
  RolloutEngine engine(std::make_shared<ScriptedPolicy>(ScriptedPolicy::load(mb.script)), tools, judge, rc);
  engine.run_batch(load_dataset(mb.dataset), root);
  return mb;
}

}  // namespace tir::testing
