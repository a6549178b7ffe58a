#pragma once

#include "formats.hpp"
#include "index_raster.hpp"
#include "path_extract.hpp"
#include "polyline_post.hpp"
#include "rod_sim.hpp"
#include "scene_io.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sketchrod {

// Wall-clock milliseconds per pipeline stage, in execution order.
using StageTimings = std::vector<std::pair<std::string, double>>;

struct ExtractionResult {
  int rod_id = -1;  // -1 for a partial extraction
  PathResult path;
  Polyline3D polyline;  // resampled rest polyline with vertex frames
  std::vector<std::uint32_t> segmentation;
  SkinBinding binding;
  StageTimings timings;
  bool partial = false;
};

struct Rod {
  int id = 0;
  Polyline3D rest;
  std::vector<std::uint32_t> segmentation;
  SkinBinding binding;
  RodParams params;
  RodState state;
  std::optional<std::size_t> drag_vertex;
};

struct TickUpdate {
  int rod_id = 0;
  std::uint64_t tick = 0;
  std::vector<Vec3> positions;
  std::vector<Quat> frames;
  std::optional<std::string> error;  // set when the rod diverged and was reset
};

// Raised by submit_stroke when the search could not be resumed; carries the
// partial polyline for display.
class PartialStrokeError : public Error {
 public:
  PartialStrokeError(const std::string& message, ExtractionResult partial)
      : Error(ErrorCode::PartialExtraction, message), partial_(std::move(partial)) {}
  const ExtractionResult& partial() const noexcept { return partial_; }

 private:
  ExtractionResult partial_;
};

// One user's pipeline state. Not thread-safe; callers serialize access.
class Session {
 public:
  Session() = default;

  void load_scene(const std::filesystem::path& path);
  void set_scene(std::shared_ptr<const GaussianScene> scene);
  void set_camera(const Camera& camera);
  void set_config(const PipelineConfig& config);

  bool has_scene() const { return scene_ != nullptr; }
  const GaussianScene& scene() const;
  const PipelineConfig& config() const { return config_; }
  const std::optional<Camera>& camera() const { return camera_; }

  // Rasterizes on first use after each camera change.
  const IndexImage& index_image();

  // Full pipeline: rasterize (cached), extract, build polyline, smooth,
  // resample, segment, bind, init rod.
  ExtractionResult submit_stroke(const Stroke& stroke);

  std::vector<TickUpdate> tick();

  void begin_drag(int rod_id, std::size_t vertex, const Vec3& target);
  void update_drag(int rod_id, const Vec3& target);
  void end_drag(int rod_id);
  void pin(int rod_id, std::size_t vertex);
  void delete_rod(int rod_id);

  const std::map<int, Rod>& rods() const { return rods_; }
  Rod& rod(int rod_id);

  // Writes path.json, polyline.obj, polyline.json, segmentation.json,
  // binding.json into `dir`.
  static std::vector<std::filesystem::path> export_result(const ExtractionResult& result,
                                                         const std::filesystem::path& dir);
  void export_rod(int rod_id, const std::filesystem::path& dir) const;

 private:
  std::shared_ptr<const GaussianScene> scene_;
  std::optional<Camera> camera_;
  std::optional<IndexImage> index_cache_;
  PipelineConfig config_;
  std::map<int, Rod> rods_;
  int next_rod_id_ = 1;
  std::uint64_t ticks_ = 0;
};

}  // namespace sketchrod
