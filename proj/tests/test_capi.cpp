#include <sketchrod/sketchrod.h>

#include "golden.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>

namespace {

using Json = nlohmann::json;

std::string fixture(const std::string& rel) { return std::string(FIXTURE_DIR) + "/" + rel; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sketchrod_capi" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json take_json(char* s) {
  Json j = Json::parse(s);
  sr_string_free(s);
  return j;
}

int cli(const std::string& args) { return golden::run(std::string(CLI_PATH) + " " + args + " >/dev/null 2>&1"); }

struct SessionGuard {
  sr_session* s = nullptr;
  SessionGuard() { EXPECT_EQ(sr_session_create(&s), SR_OK); }
  ~SessionGuard() { sr_session_destroy(s); }
};

}  // namespace

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STRNE(sr_version(), "");
  EXPECT_EQ(sr_protocol_version(), 1);
  EXPECT_STREQ(sr_status_string(SR_OK), "ok");
  EXPECT_STREQ(sr_status_string(SR_ERR_STROKE_INVALID), "stroke_invalid");
  EXPECT_STREQ(sr_status_string(SR_ERR_PARTIAL_EXTRACTION), "partial_extraction");
  EXPECT_STREQ(sr_status_string(SR_ERR_DIVERGED), "diverged");
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(sr_session_create(nullptr), SR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(sr_session_load_scene(nullptr, "x", nullptr), SR_ERR_INVALID_ARGUMENT);
  SessionGuard g;
  EXPECT_EQ(sr_session_load_scene(g.s, nullptr, nullptr), SR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(sr_session_tick(g.s, nullptr), SR_ERR_INVALID_ARGUMENT);
  EXPECT_STRNE(sr_last_error(), "");
  sr_session_destroy(nullptr);
}

TEST(CApi, ErrorCodesPropagate) {
  SessionGuard g;
  EXPECT_EQ(sr_session_load_scene(g.s, "/no/such/scene.ply", nullptr), SR_ERR_IO);
  EXPECT_NE(std::string(sr_last_error()).find("scene.ply"), std::string::npos);
  EXPECT_EQ(sr_session_set_camera_json(g.s, "{not json"), SR_ERR_FORMAT);
  int rod = 0;
  EXPECT_EQ(sr_session_submit_stroke_file(g.s, fixture("straight/stroke.json").c_str(), &rod), SR_ERR_NOT_READY);
  EXPECT_EQ(sr_session_delete_rod(g.s, 4), SR_ERR_BOUNDS);
  EXPECT_EQ(sr_session_set_params_json(g.s, R"({"radius": -1})"), SR_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ExtractTickDragExport) {
  SessionGuard g;
  size_t count = 0;
  ASSERT_EQ(sr_session_load_scene(g.s, fixture("straight/scene.ply").c_str(), &count), SR_OK);
  EXPECT_EQ(count, 120u);
  int rod = -1;
  // The stroke file names its camera; it is applied before extraction.
  ASSERT_EQ(sr_session_submit_stroke_file(g.s, fixture("straight/stroke.json").c_str(), &rod), SR_OK) << sr_last_error();
  EXPECT_EQ(rod, 1);
  char* text = nullptr;
  ASSERT_EQ(sr_session_last_result_json(g.s, &text), SR_OK);
  const Json result = take_json(text);
  EXPECT_EQ(result.at("type"), "extraction_result");
  EXPECT_EQ(result.at("gap_count"), 0);

  size_t rods = 0;
  EXPECT_EQ(sr_session_rod_count(g.s, &rods), SR_OK);
  EXPECT_EQ(rods, 1u);

  const double target[3] = {0.0, 0.05, 0.0};
  EXPECT_EQ(sr_session_begin_drag(g.s, rod, 2, target), SR_OK);
  EXPECT_EQ(sr_session_update_drag(g.s, rod, target), SR_OK);
  EXPECT_EQ(sr_session_begin_drag(g.s, rod, 999, target), SR_ERR_BOUNDS);
  ASSERT_EQ(sr_session_tick(g.s, &text), SR_OK);
  const Json ticks = take_json(text);
  ASSERT_EQ(ticks.size(), 1u);
  EXPECT_EQ(ticks[0].at("type"), "tick_update");
  EXPECT_EQ(sr_session_end_drag(g.s, rod), SR_OK);

  const auto dir = scratch("export_last");
  ASSERT_EQ(sr_session_export_last(g.s, dir.c_str()), SR_OK);
  for (const char* f : {"path.json", "polyline.obj", "polyline.json", "segmentation.json", "binding.json", "timing.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const Json timing = Json::parse(slurp(dir / "timing.json"));
  EXPECT_TRUE(timing.contains("total"));
  EXPECT_EQ(sr_session_delete_rod(g.s, rod), SR_OK);
  EXPECT_EQ(sr_session_rod_count(g.s, &rods), SR_OK);
  EXPECT_EQ(rods, 0u);
}

TEST(CApi, BackgroundAndPartialStrokes) {
  SessionGuard g;
  ASSERT_EQ(sr_session_load_scene(g.s, fixture("straight/scene.ply").c_str(), nullptr), SR_OK);
  int rod = 0;
  EXPECT_EQ(sr_session_submit_stroke_file(g.s, fixture("straight/stroke_background.json").c_str(), &rod),
            SR_ERR_STROKE_INVALID);

  ASSERT_EQ(sr_session_load_scene(g.s, fixture("occluded/scene.ply").c_str(), nullptr), SR_OK);
  EXPECT_EQ(sr_session_submit_stroke_file(g.s, fixture("occluded/stroke.json").c_str(), &rod),
            SR_ERR_PARTIAL_EXTRACTION);
  char* text = nullptr;
  ASSERT_EQ(sr_session_last_result_json(g.s, &text), SR_OK);
  EXPECT_TRUE(take_json(text).at("partial").get<bool>());
}

TEST(CApi, HandleMessage) {
  SessionGuard g;
  char* text = nullptr;
  const std::string msg = R"({"v":1,"type":"tick"})";
  ASSERT_EQ(sr_session_handle_message(g.s, msg.data(), msg.size(), &text), SR_OK);
  const Json r = take_json(text);
  EXPECT_EQ(r.at("type"), "tick_batch");
  EXPECT_EQ(r.at("v"), 1);
  ASSERT_EQ(sr_session_handle_message(g.s, "xx", 2, &text), SR_OK);
  EXPECT_EQ(take_json(text).at("type"), "error");
}

TEST(CApi, SimulateFileIsDeterministic) {
  const auto dir = scratch("simulate");
  int64_t diverged = 7;
  ASSERT_EQ(sr_simulate_file(fixture("sim/swing.json").c_str(), nullptr, (dir / "a.json").c_str(), &diverged), SR_OK);
  EXPECT_EQ(diverged, -1);
  ASSERT_EQ(sr_simulate_file(fixture("sim/swing.json").c_str(), nullptr, (dir / "b.json").c_str(), &diverged), SR_OK);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(sr_simulate_file(fixture("sim/diverge.json").c_str(), nullptr, (dir / "c.json").c_str(), &diverged),
            SR_ERR_DIVERGED);
  EXPECT_EQ(diverged, 5);
  // A parameter override changes the outcome.
  ASSERT_EQ(sr_simulate_file(fixture("sim/swing.json").c_str(), R"({"gravity":[0,0,0]})", (dir / "d.json").c_str(),
                             &diverged),
            SR_OK);
  const Json d = Json::parse(slurp(dir / "d.json"));
  EXPECT_EQ(d.at("frames").back().at("positions"), d.at("frames").front().at("positions"));
}

TEST(CApi, RasterizeDebug) {
  const auto dir = scratch("raster");
  ASSERT_EQ(sr_rasterize_debug(fixture("straight/scene.ply").c_str(), fixture("straight/camera.json").c_str(),
                               (dir / "index").c_str()),
            SR_OK);
  EXPECT_TRUE(std::filesystem::exists(dir / "index.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "index.raw"));
}

TEST(CApi, ServerStartsOnEphemeralPort) {
  sr_server* server = nullptr;
  ASSERT_EQ(sr_server_start("127.0.0.1", 0, 30.0, &server), SR_OK);
  EXPECT_NE(sr_server_port(server), 0);
  sr_server_stop(server);
  sr_server_destroy(server);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("bogus"), 2);
  EXPECT_EQ(cli("extract --scene " + fixture("straight/scene.ply")), 2);
  EXPECT_EQ(cli("extract --scene /missing.ply --camera " + fixture("straight/camera.json") + " --stroke " +
                fixture("straight/stroke.json") + " --out " + scratch("usage").string()),
            2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, ParameterFlagsOverrideStroke) {
  const auto a = scratch("flags_a"), b = scratch("flags_b");
  const std::string base = "extract --scene " + fixture("straight/scene.ply") + " --camera " +
                           fixture("straight/camera.json") + " --stroke " + fixture("straight/stroke.json");
  ASSERT_EQ(cli(base + " --out " + a.string()), 0);
  ASSERT_EQ(cli(base + " --edge-length 0.05 --smooth-iterations 0 --out " + b.string()), 0);
  const Json pa = Json::parse(slurp(a / "polyline.json")), pb = Json::parse(slurp(b / "polyline.json"));
  EXPECT_NE(pa.at("vertices").size(), pb.at("vertices").size());
}

TEST(Cli, SceneDirectoryOption) {
  const auto out = scratch("scene_dir");
  EXPECT_EQ(cli("--scene-dir " + std::string(FIXTURE_DIR) + " extract --scene straight/scene.ply --camera " +
                fixture("straight/camera.json") + " --stroke " + fixture("straight/stroke.json") + " --out " +
                out.string()),
            0);
}

TEST(Cli, SimulateTwiceIsIdentical) {
  const auto dir = scratch("sim_twice");
  for (const char* name : {"a.json", "b.json"})
    ASSERT_EQ(cli("simulate --scenario " + fixture("sim/drag.json") + " --out " + (dir / name).string()), 0);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
}

TEST(Cli, GoldenSuite) {
  const auto outcomes = golden::run_suite(CLI_PATH, FIXTURE_DIR, scratch("golden"));
  ASSERT_EQ(outcomes.size(), golden::cases().size());
  for (const auto& o : outcomes) EXPECT_TRUE(o.passed) << o.name << ": " << o.detail;
}
