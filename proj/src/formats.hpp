#pragma once

#include "path_extract.hpp"
#include "polyline_post.hpp"
#include "rod_sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sketchrod {

using Json = nlohmann::json;

// Pipeline parameters shared by the CLI, the C API and the wire protocol.
struct PipelineConfig {
  double radius = 0.01;
  double alpha = 1.0;
  double band = 40.0;
  double cover_threshold = 10.0;
  int smooth_iterations = 10;
  double smooth_lambda = 0.5;
  double edge_length = 0.0;  // <= 0: 4 * radius
  // Rod parameters; stiffness defaults scale with the radius unless set.
  std::optional<double> stretch_stiffness;
  std::optional<double> bend_stiffness;
  double damping = 0.5;
  Vec3 gravity = Vec3(0.0, -9.81, 0.0);
  double dt = 1.0 / 480.0;
  int substeps = 8;
  double density = 1000.0;

  double effective_edge_length() const { return edge_length > 0.0 ? edge_length : 4.0 * radius; }
  RodParams rod_params() const;
  PathOptions path_options() const { return PathOptions{band, cover_threshold}; }
  void validate() const;
};

// Applies the keys present in `j` on top of `config`. Unknown keys are rejected.
void apply_config_json(PipelineConfig& config, const Json& j);
Json config_to_json(const PipelineConfig& config);

// {"points": [[x, y], ...], "radius"?, "alpha"?, "camera"?: path or object}.
// Missing radius/alpha fall back to `defaults`.
struct StrokeDocument {
  Stroke stroke;
  std::optional<Json> camera;  // inline camera document
  std::optional<std::filesystem::path> camera_path;
};
StrokeDocument stroke_from_json(const Json& j, const PipelineConfig& defaults,
                                const std::filesystem::path& base_dir = {});
StrokeDocument load_stroke(const std::filesystem::path& path, const PipelineConfig& defaults);

Json path_result_to_json(const PathResult& result);
Json vec3_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);

// Headless simulation scenario.
struct ScenarioEvent {
  std::uint64_t step = 0;  // applied before this step runs
  enum class Action { Pin, Drag, Release } action = Action::Pin;
  std::size_t vertex = 0;
  std::optional<Vec3> target;  // pin defaults to the vertex's current position
};

struct Scenario {
  Polyline3D polyline;
  PipelineConfig config;
  std::uint64_t steps = 0;
  std::vector<ScenarioEvent> events;
};

Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct Trajectory {
  std::vector<std::vector<Vec3>> frames;  // frames[k] = positions after k steps
  std::optional<std::uint64_t> diverged_at;
};

void apply_event(RodState& state, const ScenarioEvent& event);

// Runs the scenario; on divergence the trajectory holds the frames up to the
// failure and `diverged_at` is set.
Trajectory simulate_scenario(const Scenario& scenario);
Json trajectory_to_json(const Trajectory& trajectory);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace sketchrod
