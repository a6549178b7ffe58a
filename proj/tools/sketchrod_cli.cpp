// Command-line front end. Talks to the library only through the C API.
#include <sketchrod/sketchrod.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using Json = nlohmann::json;

// Process exit codes.
enum Exit : int {
  kOk = 0,
  kFailure = 1,  // anything not listed below
  kUsage = 2,    // bad arguments, unreadable or malformed input files
  kStrokeInvalid = 3,
  kPartialExtraction = 4,
  kDiverged = 5,
};

int exit_code(sr_status s) {
  switch (s) {
    case SR_OK: return kOk;
    case SR_ERR_STROKE_INVALID: return kStrokeInvalid;
    case SR_ERR_PARTIAL_EXTRACTION: return kPartialExtraction;
    case SR_ERR_DIVERGED: return kDiverged;
    case SR_ERR_INVALID_ARGUMENT:
    case SR_ERR_IO:
    case SR_ERR_FORMAT:
    case SR_ERR_VALIDATION: return kUsage;
    default: return kFailure;
  }
}

int report(sr_status s, const char* what) {
  if (s != SR_OK) std::cerr << "sketchrod " << what << ": " << sr_status_string(s) << ": " << sr_last_error() << "\n";
  return exit_code(s);
}

struct ParamFlags {
  std::optional<double> radius, alpha, band, cover_threshold, smooth_lambda, edge_length;
  std::optional<int> smooth_iterations, substeps;
  std::optional<double> stretch_stiffness, bend_stiffness, damping, dt, density;
  std::vector<double> gravity;
  std::string config_file;

  void add_to(CLI::App* app, bool pipeline) {
    app->add_option("--config", config_file, "JSON file of pipeline parameters (flags override it)")
        ->check(CLI::ExistingFile);
    if (pipeline) {
      app->add_option("-R,--radius", radius, "slender-object radius R, world units");
      app->add_option("--alpha", alpha, "stroke-deviation weight");
      app->add_option("--band", band, "search band width around the stroke, pixels");
      app->add_option("--cover-threshold", cover_threshold, "covered-vertex distance, pixels");
      app->add_option("--smooth-iterations", smooth_iterations, "Laplacian smoothing iterations");
      app->add_option("--smooth-lambda", smooth_lambda, "Laplacian smoothing step in (0, 1]");
      app->add_option("--edge-length", edge_length, "resample edge length (default 4R)");
    }
    app->add_option("--stretch-stiffness", stretch_stiffness, "rod stretch stiffness");
    app->add_option("--bend-stiffness", bend_stiffness, "rod bend stiffness (default 5e-3 k_s R^2)");
    app->add_option("--damping", damping, "velocity damping, 1/s");
    app->add_option("--gravity", gravity, "gravity vector")->expected(3);
    app->add_option("--dt", dt, "substep length, seconds");
    app->add_option("--substeps", substeps, "substeps per tick");
    app->add_option("--density", density, "rod density");
  }

  Json to_json() const {
    Json j = Json::object();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      j = Json::parse(in);
    }
    auto put = [&](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    put("radius", radius);
    put("alpha", alpha);
    put("band", band);
    put("cover_threshold", cover_threshold);
    put("smooth_iterations", smooth_iterations);
    put("smooth_lambda", smooth_lambda);
    put("edge_length", edge_length);
    put("stretch_stiffness", stretch_stiffness);
    put("bend_stiffness", bend_stiffness);
    put("damping", damping);
    put("dt", dt);
    put("substeps", substeps);
    put("density", density);
    if (!gravity.empty()) j["gravity"] = gravity;
    return j;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SessionHandle {
  sr_session* s = nullptr;
  ~SessionHandle() { sr_session_destroy(s); }
};

int run_extract(const std::string& scene, const std::string& camera, const std::string& stroke_path,
                const std::string& out_dir, const ParamFlags& flags) {
  SessionHandle h;
  if (auto s = sr_session_create(&h.s)) return report(s, "extract");
  Json params, stroke;
  try {
    params = flags.to_json();
    stroke = Json::parse(read_file(stroke_path));
  } catch (const std::exception& e) {
    std::cerr << "sketchrod extract: " << e.what() << "\n";
    return kUsage;
  }
  // Explicit flags take precedence over the stroke file's own radius/alpha.
  if (stroke.is_object()) {
    if (flags.radius) stroke["radius"] = *flags.radius;
    if (flags.alpha) stroke["alpha"] = *flags.alpha;
  }
  if (auto s = sr_session_set_params_json(h.s, params.dump().c_str())) return report(s, "extract");
  if (auto s = sr_session_load_scene(h.s, scene.c_str(), nullptr)) return report(s, "extract");
  if (!camera.empty())
    if (auto s = sr_session_set_camera_file(h.s, camera.c_str())) return report(s, "extract");

  const std::string base = std::filesystem::path(stroke_path).parent_path().string();
  int rod = -1;
  const sr_status status = sr_session_submit_stroke_json(h.s, stroke.dump().c_str(), base.c_str(), &rod);
  const std::string message = sr_last_error();
  if (status == SR_OK || status == SR_ERR_PARTIAL_EXTRACTION)
    if (auto s = sr_session_export_last(h.s, out_dir.c_str())) return report(s, "extract");
  if (status != SR_OK) {
    std::cerr << "sketchrod extract: " << sr_status_string(status) << ": " << message << "\n";
    return exit_code(status);
  }
  char* result = nullptr;
  if (sr_session_last_result_json(h.s, &result) == SR_OK) {
    const Json r = Json::parse(result);
    std::cout << "rod " << rod << ": " << r["polyline"]["vertices"].size() << " vertices, " << r["gap_count"]
              << " gaps, " << r["bound_count"] << " bound primitives, " << r["timing_ms"]["total"] << " ms\n";
  }
  sr_string_free(result);
  return kOk;
}

int run_simulate(const std::string& scenario, const std::string& out, const ParamFlags& flags) {
  Json params;
  try {
    params = flags.to_json();
  } catch (const std::exception& e) {
    std::cerr << "sketchrod simulate: " << e.what() << "\n";
    return kUsage;
  }
  const std::string text = params.dump();
  std::int64_t diverged = -1;
  const sr_status s = sr_simulate_file(scenario.c_str(), params.empty() ? nullptr : text.c_str(), out.c_str(), &diverged);
  if (s == SR_ERR_DIVERGED) {
    std::cerr << "sketchrod simulate: diverged at step " << diverged << "\n";
    return kDiverged;
  }
  return report(s, "simulate");
}

int run_serve(const std::string& host, int port, double tick_hz) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  sr_server* server = nullptr;
  if (auto s = sr_server_start(host.c_str(), static_cast<uint16_t>(port), tick_hz, &server)) return report(s, "serve");
  std::cout << "listening on " << host << ":" << sr_server_port(server) << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    sr_server_stop(server);
  });
  sr_server_wait(server);
  waiter.join();
  sr_server_destroy(server);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch-guided rod extraction and simulation for Gaussian splatting scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sr_version());
  std::string scene_dir;
  app.add_option("--scene-dir", scene_dir, "directory relative scene paths resolve against (overrides SKETCHROD_SCENE_DIR)");

  std::string scene, camera, stroke, out_dir = "out";
  ParamFlags extract_flags;
  auto* extract = app.add_subcommand("extract", "extract a rod polyline from a stroke");
  extract->add_option("--scene", scene, "3DGS binary PLY")->required();
  extract->add_option("--camera", camera, "camera JSON (optional if the stroke names one)");
  extract->add_option("--stroke", stroke, "stroke JSON")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--out", out_dir, "output directory");
  extract_flags.add_to(extract, true);

  std::string scenario, trajectory = "trajectory.json";
  ParamFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "run a headless rod scenario");
  simulate->add_option("--scenario", scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--out", trajectory, "trajectory JSON output");
  sim_flags.add_to(simulate, false);

  std::string raster_scene, raster_camera, prefix = "index";
  auto* raster = app.add_subcommand("rasterize-debug", "write the primitive-index image as PNG + raw sidecar");
  raster->add_option("--scene", raster_scene, "3DGS binary PLY")->required();
  raster->add_option("--camera", raster_camera, "camera JSON")->required()->check(CLI::ExistingFile);
  raster->add_option("-o,--out", prefix, "output prefix");

  std::string host = "127.0.0.1";
  int port = 7800;
  double tick_hz = 60.0;
  auto* serve = app.add_subcommand("serve", "serve the wire protocol over TCP");
  serve->add_option("--host", host, "listen address");
  serve->add_option("-p,--port", port, "listen port (0 = ephemeral)")->check(CLI::Range(0, 65535));
  serve->add_option("--tick-hz", tick_hz, "tick_update rate; 0 disables pushed ticks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (!scene_dir.empty()) setenv("SKETCHROD_SCENE_DIR", scene_dir.c_str(), 1);

  if (*extract) return run_extract(scene, camera, stroke, out_dir, extract_flags);
  if (*simulate) return run_simulate(scenario, trajectory, sim_flags);
  if (*raster) return report(sr_rasterize_debug(raster_scene.c_str(), raster_camera.c_str(), prefix.c_str()), "rasterize-debug");
  if (*serve) return run_serve(host, port, tick_hz);
  return kUsage;
}
