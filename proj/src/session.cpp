#include "session.hpp"

#include "error.hpp"

#include <chrono>

namespace sketchrod {

namespace {

class StageClock {
 public:
  explicit StageClock(StageTimings& out) : out_(out), last_(std::chrono::steady_clock::now()) {}
  void mark(const char* stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.emplace_back(stage, std::chrono::duration<double, std::milli>(now - last_).count());
    last_ = now;
  }

 private:
  StageTimings& out_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace

void Session::load_scene(const std::filesystem::path& path) {
  auto scene = std::make_shared<GaussianScene>(load_ply(path));
  set_scene(std::move(scene));
}

void Session::set_scene(std::shared_ptr<const GaussianScene> scene) {
  if (!scene || scene->empty()) throw Error(ErrorCode::Validation, "scene has no primitives");
  scene_ = std::move(scene);
  index_cache_.reset();
  rods_.clear();
}

void Session::set_camera(const Camera& camera) {
  camera.validate();
  camera_ = camera;
  index_cache_.reset();
}

void Session::set_config(const PipelineConfig& config) {
  config.validate();
  config_ = config;
}

const GaussianScene& Session::scene() const {
  if (!scene_) throw Error(ErrorCode::NotReady, "no scene loaded");
  return *scene_;
}

const IndexImage& Session::index_image() {
  if (!scene_) throw Error(ErrorCode::NotReady, "no scene loaded");
  if (!camera_) throw Error(ErrorCode::NotReady, "no camera set");
  if (!index_cache_) index_cache_ = rasterize_index_image(*scene_, *camera_);
  return *index_cache_;
}

ExtractionResult Session::submit_stroke(const Stroke& stroke) {
  stroke.validate();
  const GaussianScene& sc = scene();
  ExtractionResult result;
  StageClock clock(result.timings);
  const IndexImage& image = index_image();
  clock.mark("rasterize");

  try {
    result.path = extract_path(image, sc, stroke, config_.path_options());
  } catch (const PartialExtractionError& e) {
    clock.mark("extract_path");
    result.partial = true;
    result.path = e.partial();
    try {
      result.polyline = chain_to_polyline(sc, result.path.primitives);
    } catch (const Error&) {
      // fewer than two distinct centers; nothing to draw
    }
    throw PartialStrokeError(e.what(), std::move(result));
  }
  clock.mark("extract_path");

  const Polyline3D raw = chain_to_polyline(sc, result.path.primitives);
  clock.mark("chain_to_polyline");
  const Polyline3D smoothed = laplacian_smooth(raw, config_.smooth_iterations, config_.smooth_lambda);
  clock.mark("laplacian_smooth");
  const double edge = config_.edge_length > 0.0 ? config_.edge_length : 4.0 * stroke.radius;
  Polyline3D rest = resample_uniform(smoothed, edge);
  clock.mark("resample_uniform");

  PipelineConfig rod_config = config_;
  rod_config.radius = stroke.radius;
  const RodParams params = rod_config.rod_params();
  RodState state = init_rod(rest, params);
  rest.frames = vertex_frames(state);
  clock.mark("init_rod");

  result.segmentation = segment_primitives(sc, rest, stroke.radius);
  clock.mark("segment_primitives");
  result.binding = bind_skin(sc, rest, result.segmentation);
  clock.mark("bind_skin");

  Rod rod;
  rod.id = next_rod_id_++;
  rod.rest = rest;
  rod.segmentation = result.segmentation;
  rod.binding = result.binding;
  rod.params = params;
  rod.state = std::move(state);
  result.rod_id = rod.id;
  result.polyline = std::move(rest);
  rods_.emplace(rod.id, std::move(rod));
  return result;
}

std::vector<TickUpdate> Session::tick() {
  ++ticks_;
  std::vector<TickUpdate> updates;
  updates.reserve(rods_.size());
  for (auto& [id, rod] : rods_) {
    TickUpdate u;
    u.rod_id = id;
    u.tick = ticks_;
    try {
      step(rod.state, rod.params);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Diverged) throw;
      u.error = e.what();
      reset_to_rest(rod.state);
      rod.drag_vertex.reset();
    }
    u.positions = rod.state.positions;
    for (const auto& f : vertex_frames(rod.state)) u.frames.push_back(Quat(f).normalized());
    updates.push_back(std::move(u));
  }
  return updates;
}

Rod& Session::rod(int rod_id) {
  auto it = rods_.find(rod_id);
  if (it == rods_.end()) throw Error(ErrorCode::Bounds, "no rod with id " + std::to_string(rod_id));
  return it->second;
}

void Session::begin_drag(int rod_id, std::size_t vertex, const Vec3& target) {
  Rod& r = rod(rod_id);
  if (r.drag_vertex && *r.drag_vertex != vertex) release_handle(r.state, *r.drag_vertex);
  set_handle(r.state, Handle{HandleKind::Drag, vertex, target});
  r.drag_vertex = vertex;
}

void Session::update_drag(int rod_id, const Vec3& target) {
  Rod& r = rod(rod_id);
  if (!r.drag_vertex) throw Error(ErrorCode::NotReady, "rod " + std::to_string(rod_id) + " is not being dragged");
  set_handle(r.state, Handle{HandleKind::Drag, *r.drag_vertex, target});
}

void Session::end_drag(int rod_id) {
  Rod& r = rod(rod_id);
  if (!r.drag_vertex) return;
  release_handle(r.state, *r.drag_vertex);
  r.drag_vertex.reset();
}

void Session::pin(int rod_id, std::size_t vertex) {
  Rod& r = rod(rod_id);
  if (vertex >= r.state.size()) throw Error(ErrorCode::Bounds, "pin vertex out of range");
  set_handle(r.state, Handle{HandleKind::Pin, vertex, r.state.positions[vertex]});
}

void Session::delete_rod(int rod_id) {
  if (rods_.erase(rod_id) == 0) throw Error(ErrorCode::Bounds, "no rod with id " + std::to_string(rod_id));
}

std::vector<std::filesystem::path> Session::export_result(const ExtractionResult& result,
                                                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const char* name, const std::string& text) {
    write_text_file(dir / name, text);
    written.push_back(dir / name);
  };
  put("path.json", path_result_to_json(result.path).dump(1));
  if (result.polyline.size() >= 2) {
    write_polyline_obj(result.polyline, dir / "polyline.obj");
    written.push_back(dir / "polyline.obj");
    put("polyline.json", polyline_to_json(result.polyline));
  }
  if (!result.partial) {
    put("segmentation.json", segmentation_to_json(result.segmentation));
    put("binding.json", binding_to_json(result.binding));
  }
  return written;
}

void Session::export_rod(int rod_id, const std::filesystem::path& dir) const {
  auto it = rods_.find(rod_id);
  if (it == rods_.end()) throw Error(ErrorCode::Bounds, "no rod with id " + std::to_string(rod_id));
  const Rod& r = it->second;
  std::filesystem::create_directories(dir);
  write_polyline_obj(r.rest, dir / "polyline.obj");
  write_text_file(dir / "polyline.json", polyline_to_json(r.rest));
  write_text_file(dir / "segmentation.json", segmentation_to_json(r.segmentation));
  write_text_file(dir / "binding.json", binding_to_json(r.binding));
  // Current deformed state and the skinned primitives.
  const Polyline3D current = rod_polyline(r.state);
  write_text_file(dir / "current.json", polyline_to_json(current));
  Json skinned = Json::array();
  for (const auto& s : apply_skinning(r.binding, current))
    skinned.push_back({{"primitive", s.primitive},
                       {"center", vec3_json(s.center)},
                       {"rotation_delta", {s.rotation_delta.w(), s.rotation_delta.x(), s.rotation_delta.y(),
                                           s.rotation_delta.z()}}});
  write_text_file(dir / "skinned.json", skinned.dump(1));
}

}  // namespace sketchrod
