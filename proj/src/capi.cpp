#include <sketchrod/sketchrod.h>

#include "error.hpp"
#include "formats.hpp"
#include "index_raster.hpp"
#include "protocol.hpp"
#include "scene_io.hpp"
#include "server.hpp"
#include "session.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

struct sr_session {
  sketchrod::Session session;
  sketchrod::ProtocolHandler handler{session};
  std::optional<sketchrod::ExtractionResult> last;
};

struct sr_server {
  std::unique_ptr<sketchrod::Server> server;
};

namespace {

using namespace sketchrod;

thread_local std::string g_last_error;

sr_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return SR_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return SR_ERR_IO;
    case ErrorCode::Format: return SR_ERR_FORMAT;
    case ErrorCode::Validation: return SR_ERR_VALIDATION;
    case ErrorCode::Bounds: return SR_ERR_BOUNDS;
    case ErrorCode::StrokeInvalid: return SR_ERR_STROKE_INVALID;
    case ErrorCode::PartialExtraction: return SR_ERR_PARTIAL_EXTRACTION;
    case ErrorCode::Degenerate: return SR_ERR_DEGENERATE;
    case ErrorCode::BindingInvalid: return SR_ERR_BINDING_INVALID;
    case ErrorCode::Diverged: return SR_ERR_DIVERGED;
    case ErrorCode::NotReady: return SR_ERR_NOT_READY;
    case ErrorCode::Protocol: return SR_ERR_PROTOCOL;
  }
  return SR_ERR_INTERNAL;
}

sr_status fail(sr_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
sr_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SR_OK;
  } catch (const Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(SR_ERR_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SR_ERR_INTERNAL, "unknown exception");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

Vec3 vec3(const double* v) { return Vec3(v[0], v[1], v[2]); }

Json timing_json(const StageTimings& timings) {
  Json j = Json::object();
  double total = 0.0;
  for (const auto& [stage, ms] : timings) {
    j[stage] = ms;
    total += ms;
  }
  j["total"] = total;
  return j;
}

sr_status submit(sr_session* s, const Json& doc_json, const std::filesystem::path& base_dir, int* rod_id) {
  return guarded([&] {
    require(s, "session");
    const StrokeDocument doc = stroke_from_json(doc_json, s->session.config(), base_dir);
    if (doc.camera_path) s->session.set_camera(load_camera(*doc.camera_path));
    if (doc.camera) s->session.set_camera(camera_from_json_text(doc.camera->dump()));
    try {
      s->last = s->session.submit_stroke(doc.stroke);
    } catch (const PartialStrokeError& e) {
      s->last = e.partial();
      throw;
    } catch (const Error&) {
      s->last.reset();
      throw;
    }
    if (rod_id) *rod_id = s->last->rod_id;
  });
}

}  // namespace

extern "C" {

const char* sr_version(void) { return "0.1.0"; }

int sr_protocol_version(void) { return kProtocolVersion; }

const char* sr_status_string(sr_status status) {
  switch (status) {
    case SR_OK: return "ok";
    case SR_ERR_INTERNAL: return "internal";
    default: return to_string(static_cast<ErrorCode>(static_cast<int>(status) - 1));
  }
}

const char* sr_last_error(void) { return g_last_error.c_str(); }

void sr_string_free(char* str) { std::free(str); }

sr_status sr_session_create(sr_session** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sr_session();
  });
}

void sr_session_destroy(sr_session* session) { delete session; }

sr_status sr_session_load_scene(sr_session* s, const char* ply_path, size_t* primitive_count) {
  return guarded([&] {
    require(s, "session");
    require(ply_path, "ply_path");
    s->session.load_scene(resolve_scene_path(ply_path));
    if (primitive_count) *primitive_count = s->session.scene().size();
  });
}

sr_status sr_session_set_camera_json(sr_session* s, const char* camera_json) {
  return guarded([&] {
    require(s, "session");
    require(camera_json, "camera_json");
    s->session.set_camera(camera_from_json_text(camera_json));
  });
}

sr_status sr_session_set_camera_file(sr_session* s, const char* camera_path) {
  return guarded([&] {
    require(s, "session");
    require(camera_path, "camera_path");
    s->session.set_camera(load_camera(camera_path));
  });
}

sr_status sr_session_set_params_json(sr_session* s, const char* params_json) {
  return guarded([&] {
    require(s, "session");
    require(params_json, "params_json");
    PipelineConfig config = s->session.config();
    apply_config_json(config, Json::parse(params_json));
    s->session.set_config(config);
  });
}

sr_status sr_session_submit_stroke_json(sr_session* s, const char* stroke_json, const char* base_dir, int* rod_id) {
  Json doc;
  const sr_status parsed = guarded([&] {
    require(stroke_json, "stroke_json");
    doc = Json::parse(stroke_json);
  });
  if (parsed != SR_OK) return parsed;
  return submit(s, doc, base_dir ? std::filesystem::path(base_dir) : std::filesystem::path(), rod_id);
}

sr_status sr_session_submit_stroke_file(sr_session* s, const char* stroke_path, int* rod_id) {
  Json doc;
  const sr_status parsed = guarded([&] {
    require(stroke_path, "stroke_path");
    doc = read_json_file(stroke_path);
  });
  if (parsed != SR_OK) return parsed;
  return submit(s, doc, std::filesystem::path(stroke_path).parent_path(), rod_id);
}

sr_status sr_session_last_result_json(sr_session* s, char** out_json) {
  return guarded([&] {
    require(s, "session");
    require(out_json, "out_json");
    if (!s->last) throw Error(ErrorCode::NotReady, "no extraction has been run");
    *out_json = dup_string(ProtocolHandler::extraction_json(*s->last).dump());
  });
}

sr_status sr_session_export_last(sr_session* s, const char* out_dir) {
  return guarded([&] {
    require(s, "session");
    require(out_dir, "out_dir");
    if (!s->last) throw Error(ErrorCode::NotReady, "no extraction has been run");
    Session::export_result(*s->last, out_dir);
    write_text_file(std::filesystem::path(out_dir) / "timing.json", timing_json(s->last->timings).dump(1));
  });
}

sr_status sr_session_export_rod(sr_session* s, int rod_id, const char* out_dir) {
  return guarded([&] {
    require(s, "session");
    require(out_dir, "out_dir");
    s->session.export_rod(rod_id, out_dir);
  });
}

sr_status sr_session_rod_count(sr_session* s, size_t* count) {
  return guarded([&] {
    require(s, "session");
    require(count, "count");
    *count = s->session.rods().size();
  });
}

sr_status sr_session_begin_drag(sr_session* s, int rod_id, size_t vertex, const double target[3]) {
  return guarded([&] {
    require(s, "session");
    require(target, "target");
    s->session.begin_drag(rod_id, vertex, vec3(target));
  });
}

sr_status sr_session_update_drag(sr_session* s, int rod_id, const double target[3]) {
  return guarded([&] {
    require(s, "session");
    require(target, "target");
    s->session.update_drag(rod_id, vec3(target));
  });
}

sr_status sr_session_end_drag(sr_session* s, int rod_id) {
  return guarded([&] {
    require(s, "session");
    s->session.end_drag(rod_id);
  });
}

sr_status sr_session_delete_rod(sr_session* s, int rod_id) {
  return guarded([&] {
    require(s, "session");
    s->session.delete_rod(rod_id);
  });
}

sr_status sr_session_tick(sr_session* s, char** out_json) {
  return guarded([&] {
    require(s, "session");
    require(out_json, "out_json");
    Json updates = Json::array();
    for (auto& u : s->handler.tick()) updates.push_back(std::move(u));
    *out_json = dup_string(updates.dump());
  });
}

sr_status sr_session_handle_message(sr_session* s, const char* message, size_t length, char** out_json) {
  return guarded([&] {
    require(s, "session");
    require(message, "message");
    require(out_json, "out_json");
    *out_json = dup_string(s->handler.handle(std::string_view(message, length)).dump());
  });
}

sr_status sr_simulate_file(const char* scenario_path, const char* params_json, const char* trajectory_path,
                           int64_t* diverged_step) {
  std::optional<std::uint64_t> diverged;
  const sr_status status = guarded([&] {
    require(scenario_path, "scenario_path");
    require(trajectory_path, "trajectory_path");
    Scenario scenario = load_scenario(scenario_path);
    if (params_json) apply_config_json(scenario.config, Json::parse(params_json));
    const Trajectory traj = simulate_scenario(scenario);
    write_text_file(trajectory_path, trajectory_to_json(traj).dump(1));
    diverged = traj.diverged_at;
  });
  if (diverged_step) *diverged_step = diverged ? static_cast<int64_t>(*diverged) : -1;
  if (status == SR_OK && diverged)
    return fail(SR_ERR_DIVERGED, "simulation diverged at step " + std::to_string(*diverged));
  return status;
}

sr_status sr_rasterize_debug(const char* ply_path, const char* camera_path, const char* out_prefix) {
  return guarded([&] {
    require(ply_path, "ply_path");
    require(camera_path, "camera_path");
    require(out_prefix, "out_prefix");
    const GaussianScene scene = load_ply(resolve_scene_path(ply_path));
    const Camera camera = load_camera(camera_path);
    write_index_debug(rasterize_index_image(scene, camera), out_prefix);
  });
}

sr_status sr_server_start(const char* host, uint16_t port, double tick_hz, sr_server** out) {
  return guarded([&] {
    require(out, "out");
    ServeOptions options;
    if (host) options.host = host;
    options.port = port;
    options.tick_hz = tick_hz;
    auto server = std::make_unique<Server>(options);
    server->start();
    *out = new sr_server{std::move(server)};
  });
}

uint16_t sr_server_port(const sr_server* server) { return server ? server->server->port() : 0; }

void sr_server_wait(sr_server* server) {
  if (server) server->server->wait();
}

void sr_server_stop(sr_server* server) {
  if (server) server->server->stop();
}

void sr_server_destroy(sr_server* server) { delete server; }

}  // extern "C"
