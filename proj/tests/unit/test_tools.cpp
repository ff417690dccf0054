#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "expect_error.hpp"
#include "mini_bench.hpp"
#include "tir/retrieval.hpp"
#include "tir/tool_platform.hpp"

using namespace tir;
using tir::testing::pattern_image;
using tir::testing::TempDir;

namespace {

ToolInvocation call(std::string name, Json args) { return ToolInvocation{std::move(name), std::move(args)}; }

std::shared_ptr<const Index> animal_index(HashProjectionEmbedder& embedder, const Image& exemplar) {
  std::vector<EntityRecord> records = {
      {"tiger", "Tiger", Category::Animal, {embedder.embed(exemplar), embedder.embed(pattern_image(16, 16, 2))}},
      {"wolf", "Wolf", Category::Animal, {embedder.embed(pattern_image(16, 16, 3))}}};
  return std::make_shared<const Index>(Index(embedder.dim(), "1").upsert(records));
}

ToolBackends static_backends() {
  ToolBackends b;
  b.search = tir::testing::mini_bench_search();
  b.fetch = tir::testing::mini_bench_pages();
  b.assistant = std::make_shared<ExtractiveAssistantBackend>();
  b.embedder = std::make_shared<HashProjectionEmbedder>(64);
  return b;
}

class SlowSearch final : public SearchBackend {
 public:
  std::vector<SearchResultItem> search(const std::string& q) override {
    const int now = ++inflight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(15));
    --inflight;
    return {SearchResultItem{1, q, "c", "https://example.org", std::nullopt}};
  }
  std::atomic<int> inflight{0};
  std::atomic<int> peak{0};
};

class ThrowingFetch final : public FetchBackend {
 public:
  std::string fetch_text(const std::string&) override { throw std::runtime_error("boom"); }
};

}  // namespace

TEST(Specs, FiveCards) {
  const auto& specs = builtin_tool_specs();
  ASSERT_EQ(specs.size(), 5u);
  for (const auto& s : specs) {
    const Json card = s.to_json();
    EXPECT_EQ(card["function"]["name"], s.name);
    EXPECT_TRUE(card["function"].contains("parameters"));
  }
}

TEST(Validate, AliasesUnknownKeysAndRounding) {
  const ToolSpec& zoom = builtin_tool_specs()[0];
  ASSERT_EQ(zoom.name, "im_zoom_in");
  const Json v = validate_arguments(zoom, Json{{"bbox", {1.4, 2.6, 10, 20}}, {"junk", 1}});
  EXPECT_EQ(v, (Json{{"bbox_2d", {1, 3, 10, 20}}}));
  EXPECT_TIR_ERROR(validate_arguments(zoom, Json::object()), ErrorCode::ArgValidation);
  EXPECT_TIR_ERROR(validate_arguments(zoom, Json{{"bbox_2d", {1, 2, 3}}}), ErrorCode::ArgValidation);
  EXPECT_TIR_ERROR(validate_arguments(zoom, Json{{"bbox_2d", "0,0,1,1"}}), ErrorCode::ArgValidation);
}

TEST(Validate, UrlVisitWindowAndGoal) {
  const ToolSpec* spec = nullptr;
  for (const auto& s : builtin_tool_specs()) {
    if (s.name == "url_visit") spec = &s;
  }
  ASSERT_NE(spec, nullptr);
  EXPECT_EQ(validate_arguments(*spec, Json{{"url", "https://a.b"}, {"goal", ""}}), (Json{{"url", "https://a.b"}}));
  EXPECT_TIR_ERROR(validate_arguments(*spec, Json{{"url", "https://a.b"}, {"window", {5, 2}}}), ErrorCode::ArgValidation);
  EXPECT_TIR_ERROR(validate_arguments(*spec, Json{{"url", "https://a.b"}, {"window", {-1, 2}}}), ErrorCode::ArgValidation);
}

TEST(Crop, IdentityAndRegion) {
  const Image img = pattern_image(300, 300, 9);
  EXPECT_EQ(std::get<Image>(crop_zoom(img, {0, 0, 300, 300}).payload), img);
  const Image c = std::get<Image>(crop_zoom(img, {100, 100, 200, 200}).payload);
  ASSERT_EQ(c.width, 100);
  ASSERT_EQ(c.height, 100);
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      for (int k = 0; k < 3; ++k) ASSERT_EQ(c.pixel(x, y)[k], img.pixel(x + 100, y + 100)[k]);
    }
  }
  EXPECT_TIR_ERROR(crop_zoom(img, {200, 50, 100, 80}), ErrorCode::InvalidBBox);
  EXPECT_TIR_ERROR(crop_zoom(img, {400, 400, 500, 500}), ErrorCode::InvalidBBox);
  EXPECT_EQ(std::get<Image>(crop_zoom(img, {250, 250, 900, 900}).payload).width, 50);
}

TEST(Crop, Composition) {
  std::mt19937_64 rng(1);
  const Image img = pattern_image(64, 48, 4);
  for (int i = 0; i < 500; ++i) {
    const int x1 = static_cast<int>(rng() % 60), y1 = static_cast<int>(rng() % 44);
    const int x2 = x1 + 1 + static_cast<int>(rng() % (64 - x1)), y2 = y1 + 1 + static_cast<int>(rng() % (48 - y1));
    const Image first = crop(img, {x1, y1, x2, y2});
    const int w = first.width, h = first.height;
    const int u1 = static_cast<int>(rng() % w), v1 = static_cast<int>(rng() % h);
    const int u2 = u1 + 1 + static_cast<int>(rng() % (w - u1)), v2 = v1 + 1 + static_cast<int>(rng() % (h - v1));
    ASSERT_EQ(crop(first, {u1, v1, u2, v2}), crop(img, {x1 + u1, y1 + v1, x1 + u2, y1 + v2}));
  }
}

TEST(VisualSearch, SelfQueryAndFormat) {
  HashProjectionEmbedder embedder(64);
  const Image exemplar = pattern_image(16, 16, 1);
  const auto index = animal_index(embedder, exemplar);
  const auto r = visual_search(exemplar, {0, 0, 16, 16}, Category::Animal, embedder, *index);
  EXPECT_EQ(r.observation_text(), "名称：Tiger, 检索置信度：1.00");
  EXPECT_EQ(render_visual_search("凯德·坎宁安", 0.81), "名称：凯德·坎宁安, 检索置信度：0.81");
  EXPECT_TIR_ERROR(visual_search(exemplar, {0, 0, 16, 16}, Category::Car, embedder, *index),
                   ErrorCode::EmptyIndexForCategory);
}

TEST(WebSearch, CapAndRenumber) {
  auto search = tir::testing::mini_bench_search();
  const auto items = web_search("many results", *search);
  ASSERT_EQ(items.size(), 10u);
  for (std::size_t i = 0; i < items.size(); ++i) EXPECT_EQ(items[i].id, static_cast<int>(i + 1));
  const Json obs = web_search_observation("q", items);
  EXPECT_EQ(obs["search_query"], "q");
  EXPECT_EQ(obs["search_result"].size(), 10u);
  EXPECT_TRUE(web_search("unknown", *search).empty());
}

TEST(UrlVisit, Modes) {
  auto pages = tir::testing::mini_bench_pages();
  ExtractiveAssistantBackend assistant;
  const std::string url = "https://example.org/eiffel";
  const Json full = std::get<Json>(url_visit(url, std::nullopt, std::nullopt, *pages, &assistant).payload);
  EXPECT_EQ(full["visited_url"], url);
  EXPECT_EQ(full["mode"], "full");
  const std::string text = full["result"].get<std::string>();
  EXPECT_EQ(text.find('<'), std::string::npos);
  const std::size_t len = utf8::length(text);
  const Json win = std::get<Json>(url_visit(url, Window{0, len}, std::nullopt, *pages, &assistant).payload);
  EXPECT_EQ(win["result"], text);
  const Json part = std::get<Json>(url_visit(url, Window{4, 10}, std::nullopt, *pages, &assistant).payload);
  EXPECT_EQ(part["result"], std::string(utf8::substr(text, 4, 10)));
  const Json sum = std::get<Json>(url_visit(url, std::nullopt, std::string("when was the tower completed"), *pages, &assistant).payload);
  EXPECT_EQ(sum["mode"], "summarize");
  for (const char* k : {"rational", "evidence", "summary"}) EXPECT_TRUE(sum["result"].contains(k)) << k;
  EXPECT_NE(sum["result"].dump().find("1889"), std::string::npos);
  EXPECT_TIR_ERROR(url_visit(url, Window{len + 1, len + 5}, std::nullopt, *pages, &assistant), ErrorCode::WindowOutOfRange);
  EXPECT_TIR_ERROR(url_visit("not a url", std::nullopt, std::nullopt, *pages, &assistant), ErrorCode::ArgValidation);
  EXPECT_TIR_ERROR(url_visit("https://example.org/missing", std::nullopt, std::nullopt, *pages, &assistant),
                   ErrorCode::FetchFailure);
}

TEST(ToolResultJson, RoundTrip) {
  for (const auto& r : {ToolResult::text("hi"), ToolResult::structured(Json{{"a", 1}}), ToolResult::image(pattern_image(5, 4, 3))}) {
    EXPECT_EQ(ToolResult::from_json(r.to_json()).to_json(), r.to_json());
  }
  EXPECT_EQ(ToolResult::image(pattern_image(2, 2, 1)).observation_text(), "<image>");
  EXPECT_TIR_ERROR(ToolResult::from_json(Json{{"kind", "bogus"}}), ErrorCode::StoreCorrupt);
}

TEST(Dispatch, RoutingAndErrors) {
  ToolPlatform tools(static_backends());
  ToolContext ctx{{pattern_image(32, 32, 5)}};
  const auto r = tools.dispatch(call("web_search", Json{{"query", "Eiffel Tower height"}}), ctx);
  EXPECT_EQ(r.kind, ToolResultKind::Structured);
  EXPECT_EQ(std::get<Json>(r.payload)["search_result"].size(), 2u);
  EXPECT_TIR_ERROR(tools.dispatch(call("fly", Json::object()), ctx), ErrorCode::ToolNotFound);
  EXPECT_TIR_ERROR(tools.dispatch(call("im_zoom_in", Json::object()), ctx), ErrorCode::ArgValidation);
  EXPECT_TIR_ERROR(tools.dispatch(call("zoom_v_search", Json{{"bbox_2d", {0, 0, 4, 4}}, {"category", "car"}}), ctx),
                   ErrorCode::BackendFailure);
  EXPECT_TIR_ERROR(tools.dispatch(call("im_zoom_in", Json{{"bbox_2d", {0, 0, 4, 4}}, {"image_index", 3}}), ctx),
                   ErrorCode::ArgValidation);
}

TEST(Dispatch, ChainedCropUsesImageIndex) {
  ToolPlatform tools(static_backends());
  const Image a = pattern_image(32, 32, 5);
  const Image b = pattern_image(8, 8, 6);
  ToolContext ctx{{a, b}};
  const auto r = tools.dispatch(call("im_zoom_in", Json{{"bbox_2d", {0, 0, 4, 4}}, {"image_index", 1}}), ctx);
  EXPECT_EQ(std::get<Image>(r.payload), crop(b, {0, 0, 4, 4}));
}

TEST(Dispatch, UntypedBackendExceptionBecomesBackendFailure) {
  auto b = static_backends();
  b.fetch = std::make_shared<ThrowingFetch>();
  ToolPlatform tools(b);
  EXPECT_TIR_ERROR(tools.dispatch(call("url_visit", Json{{"url", "https://example.org/x"}}), {}), ErrorCode::BackendFailure);
}

TEST(Dispatch, AdversarialArgumentsAreTyped) {
  ToolPlatform tools(static_backends());
  ToolContext ctx{{pattern_image(16, 16, 1)}};
  const std::vector<Json> garbage = {nullptr, 1, "x", Json::array(), Json{{"bbox_2d", nullptr}}, Json{{"query", 5}},
                                     Json{{"url", Json::array()}}, Json{{"code", false}}, Json{{"category", "spaceship"}}};
  for (const auto& tool : {"im_zoom_in", "zoom_v_search", "web_search", "url_visit", "code_interpreter", "??"}) {
    for (const auto& g : garbage) {
      try {
        tools.dispatch(call(tool, g), ctx);
      } catch (const Error&) {
      } catch (...) {
        FAIL() << "untyped exception from " << tool << " with " << g.dump();
      }
    }
  }
}

TEST(Dispatch, PerToolCap) {
  auto b = static_backends();
  auto slow = std::make_shared<SlowSearch>();
  b.search = slow;
  ToolPlatform tools(b, RateLimit{16, {}}, {{"web_search", RateLimit{2, {}}}});
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { tools.dispatch(call("web_search", Json{{"query", std::to_string(i)}}), {}); });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(slow->peak.load(), 2);
  EXPECT_LE(tools.peak_inflight("web_search"), 2u);
}

TEST(Fixtures, RecordThenReplayIsIdentical) {
  TempDir dir;
  auto store = std::make_shared<FixtureStore>(dir.path());
  auto rec = static_backends();
  rec.fixtures = store;
  rec.fixture_mode = FixtureMode::Record;
  ToolPlatform recorder(rec);
  const auto inv = call("web_search", Json{{"query", "Eiffel Tower height"}});
  const auto visit = call("url_visit", Json{{"url", "https://example.org/civic"}, {"window", {0, 20}}});
  const Json live_search = recorder.dispatch(inv, {}).to_json();
  const Json live_visit = recorder.dispatch(visit, {}).to_json();

  ToolBackends rep;
  rep.fixtures = store;
  rep.fixture_mode = FixtureMode::Replay;
  ToolPlatform replayer(rep);
  EXPECT_EQ(replayer.dispatch(inv, {}).to_json().dump(), live_search.dump());
  EXPECT_EQ(replayer.dispatch(visit, {}).to_json().dump(), live_visit.dump());
  // Same arguments in another key order hit the same record.
  const auto reordered = call("url_visit", Json::parse(R"({"window":[0,20],"url":"https://example.org/civic"})"));
  EXPECT_EQ(replayer.dispatch(reordered, {}).to_json().dump(), live_visit.dump());
  EXPECT_TIR_ERROR(replayer.dispatch(call("web_search", Json{{"query", "unseen"}}), {}), ErrorCode::FixtureMiss);

  rep.fixture_mode = FixtureMode::ReplayLenient;
  ToolPlatform lenient(rep);
  const auto miss = lenient.dispatch(call("web_search", Json{{"query", "unseen"}}), {});
  EXPECT_TRUE(std::get<Json>(miss.payload)["search_result"].empty());
  EXPECT_EQ(store->verify().records, 2u);
  EXPECT_TRUE(store->verify().corrupt.empty());
}

TEST(Fixtures, CorruptRecordDetected) {
  TempDir dir;
  FixtureStore store(dir.path());
  const Json args{{"query", "x"}};
  store.put("web_search", args, Json{{"kind", "text"}, {"text", "t"}});
  write_file_atomic(store.path_for("web_search", args), "{not json");
  EXPECT_TIR_ERROR((void)store.lookup("web_search", args), ErrorCode::StoreCorrupt);
  EXPECT_EQ(store.verify().corrupt.size(), 1u);
}

TEST(CodeTool, DispatchThroughSandbox) {
  ToolPlatform tools(static_backends());
  const auto r = tools.dispatch(call("code_interpreter", Json{{"code", "print(6*7)"}}), {});
  const Json j = std::get<Json>(r.payload);
  EXPECT_EQ(j["stdout"], "42\n");
}
