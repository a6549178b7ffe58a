#include "formats.hpp"

#include "error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sketchrod {

namespace {

template <typename Fn>
auto json_guard(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string(what) + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RodParams PipelineConfig::rod_params() const {
  RodParams p = RodParams::defaults_for_radius(radius);
  if (stretch_stiffness) p.stretch_stiffness = *stretch_stiffness;
  p.bend_stiffness = bend_stiffness ? *bend_stiffness : 5e-3 * p.stretch_stiffness * radius * radius;
  p.damping = damping;
  p.gravity = gravity;
  p.dt = dt;
  p.substeps = substeps;
  p.density = density;
  return p;
}

void PipelineConfig::validate() const {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  if (!(band > 0.0)) throw Error(ErrorCode::InvalidArgument, "band must be positive");
  if (!(cover_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "cover threshold must be positive");
  if (smooth_iterations < 0) throw Error(ErrorCode::InvalidArgument, "smoothing iterations must be >= 0");
  if (!(smooth_lambda > 0.0 && smooth_lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "smoothing lambda must be in (0, 1]");
  if (!std::isfinite(edge_length)) throw Error(ErrorCode::InvalidArgument, "edge length must be finite");
  rod_params().validate();
}

void apply_config_json(PipelineConfig& c, const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Format, "params must be a JSON object");
  static const std::set<std::string> keys = {"radius",        "alpha",      "band",     "cover_threshold",
                                             "smooth_iterations", "smooth_lambda", "edge_length", "stretch_stiffness",
                                             "bend_stiffness", "damping",   "gravity",  "dt",
                                             "substeps",      "density"};
  for (const auto& [key, value] : j.items())
    if (!keys.count(key)) throw Error(ErrorCode::Format, "unknown parameter '" + key + "'");
  PipelineConfig next = c;
  json_guard("params", [&] {
    if (j.contains("radius")) next.radius = j["radius"].get<double>();
    if (j.contains("alpha")) next.alpha = j["alpha"].get<double>();
    if (j.contains("band")) next.band = j["band"].get<double>();
    if (j.contains("cover_threshold")) next.cover_threshold = j["cover_threshold"].get<double>();
    if (j.contains("smooth_iterations")) next.smooth_iterations = j["smooth_iterations"].get<int>();
    if (j.contains("smooth_lambda")) next.smooth_lambda = j["smooth_lambda"].get<double>();
    if (j.contains("edge_length")) next.edge_length = j["edge_length"].get<double>();
    if (j.contains("stretch_stiffness")) next.stretch_stiffness = j["stretch_stiffness"].get<double>();
    if (j.contains("bend_stiffness")) next.bend_stiffness = j["bend_stiffness"].get<double>();
    if (j.contains("damping")) next.damping = j["damping"].get<double>();
    if (j.contains("gravity")) next.gravity = vec3_from_json(j["gravity"]);
    if (j.contains("dt")) next.dt = j["dt"].get<double>();
    if (j.contains("substeps")) next.substeps = j["substeps"].get<int>();
    if (j.contains("density")) next.density = j["density"].get<double>();
    return 0;
  });
  next.validate();
  c = next;
}

Json config_to_json(const PipelineConfig& c) {
  const RodParams rod = c.rod_params();
  return Json{{"radius", c.radius},
              {"alpha", c.alpha},
              {"band", c.band},
              {"cover_threshold", c.cover_threshold},
              {"smooth_iterations", c.smooth_iterations},
              {"smooth_lambda", c.smooth_lambda},
              {"edge_length", c.effective_edge_length()},
              {"stretch_stiffness", rod.stretch_stiffness},
              {"bend_stiffness", rod.bend_stiffness},
              {"damping", c.damping},
              {"gravity", vec3_json(c.gravity)},
              {"dt", c.dt},
              {"substeps", c.substeps},
              {"density", c.density}};
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  return json_guard("vector", [&] {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Format, "expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  });
}

StrokeDocument stroke_from_json(const Json& j, const PipelineConfig& defaults, const std::filesystem::path& base_dir) {
  return json_guard("stroke", [&] {
    StrokeDocument doc;
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::Format, "stroke points must be [x, y] pairs");
      doc.stroke.points.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    doc.stroke.radius = j.contains("radius") ? j["radius"].get<double>() : defaults.radius;
    doc.stroke.alpha = j.contains("alpha") ? j["alpha"].get<double>() : defaults.alpha;
    if (j.contains("camera")) {
      if (j["camera"].is_string()) doc.camera_path = resolve(base_dir, j["camera"].get<std::string>());
      else doc.camera = j["camera"];
    }
    doc.stroke.validate();
    return doc;
  });
}

StrokeDocument load_stroke(const std::filesystem::path& path, const PipelineConfig& defaults) {
  return stroke_from_json(read_json_file(path), defaults, path.parent_path());
}

Json path_result_to_json(const PathResult& r) {
  return Json{{"pixels", r.pixels},
              {"segment_starts", r.segment_starts},
              {"primitives", r.primitives},
              {"gaps", r.gaps},
              {"cost", r.cost}};
}

Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir) {
  return json_guard("scenario", [&] {
    Scenario s;
    const Json& poly = j.at("polyline");
    if (poly.is_string()) {
      std::ifstream in(resolve(base_dir, poly.get<std::string>()));
      if (!in) throw Error(ErrorCode::Io, "cannot open scenario polyline: " + poly.get<std::string>());
      std::stringstream ss;
      ss << in.rdbuf();
      s.polyline = polyline_from_json(ss.str());
    } else {
      s.polyline = polyline_from_json(poly.dump());
    }
    if (j.contains("params")) apply_config_json(s.config, j["params"]);
    const auto steps = j.at("steps").get<std::int64_t>();
    if (steps < 0) throw Error(ErrorCode::Format, "scenario steps must be >= 0");
    s.steps = static_cast<std::uint64_t>(steps);
    if (j.contains("events"))
      for (const auto& e : j["events"]) {
        ScenarioEvent ev;
        ev.step = e.at("step").get<std::uint64_t>();
        const auto action = e.at("action").get<std::string>();
        if (action == "pin") ev.action = ScenarioEvent::Action::Pin;
        else if (action == "drag") ev.action = ScenarioEvent::Action::Drag;
        else if (action == "release") ev.action = ScenarioEvent::Action::Release;
        else throw Error(ErrorCode::Format, "unknown scenario action '" + action + "'");
        ev.vertex = e.at("vertex").get<std::size_t>();
        if (e.contains("target")) ev.target = vec3_from_json(e["target"]);
        if (ev.action == ScenarioEvent::Action::Drag && !ev.target)
          throw Error(ErrorCode::Format, "drag events need a target");
        s.events.push_back(ev);
      }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.step < b.step; });
    return s;
  });
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path());
}

void apply_event(RodState& state, const ScenarioEvent& ev) {
  switch (ev.action) {
    case ScenarioEvent::Action::Pin:
      if (ev.vertex >= state.size()) throw Error(ErrorCode::Bounds, "event vertex out of range");
      set_handle(state, Handle{HandleKind::Pin, ev.vertex, ev.target.value_or(state.positions[ev.vertex])});
      break;
    case ScenarioEvent::Action::Drag:
      set_handle(state, Handle{HandleKind::Drag, ev.vertex, *ev.target});
      break;
    case ScenarioEvent::Action::Release:
      release_handle(state, ev.vertex);
      break;
  }
}

Trajectory simulate_scenario(const Scenario& scenario) {
  const RodParams params = scenario.config.rod_params();
  RodState state = init_rod(scenario.polyline, params);
  Trajectory traj;
  traj.frames.push_back(state.positions);
  auto next_event = scenario.events.begin();
  for (std::uint64_t k = 0; k < scenario.steps; ++k) {
    for (; next_event != scenario.events.end() && next_event->step <= k; ++next_event) apply_event(state, *next_event);
    try {
      step(state, params);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Diverged) throw;
      traj.diverged_at = k;
      return traj;
    }
    traj.frames.push_back(state.positions);
  }
  return traj;
}

Json trajectory_to_json(const Trajectory& t) {
  Json frames = Json::array();
  for (std::size_t k = 0; k < t.frames.size(); ++k) {
    Json pos = Json::array();
    for (const auto& p : t.frames[k]) pos.push_back(vec3_json(p));
    frames.push_back({{"step", k}, {"positions", pos}});
  }
  Json j{{"frames", frames}};
  j["diverged_at"] = t.diverged_at ? Json(*t.diverged_at) : Json(nullptr);
  return j;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace sketchrod
