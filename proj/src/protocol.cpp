#include "protocol.hpp"

#include "error.hpp"

#include <array>
#include <cstdlib>
#include <cstring>

namespace sketchrod {

std::filesystem::path resolve_scene_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv(kSceneDirEnv); dir && *dir) return std::filesystem::path(dir) / p;
  return p;
}

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

void append_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  char bytes[4];
  std::memcpy(bytes, &f, 4);
  out.append(bytes, 4);
}

}  // namespace

std::string base64_encode(std::string_view in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const auto n = (std::uint32_t(std::uint8_t(in[i])) << 16) | (std::uint32_t(std::uint8_t(in[i + 1])) << 8) |
                   std::uint8_t(in[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < in.size()) {
    std::uint32_t n = std::uint32_t(std::uint8_t(in[i])) << 16;
    if (i + 1 < in.size()) n |= std::uint32_t(std::uint8_t(in[i + 1])) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += i + 1 < in.size() ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view in) {
  std::array<int, 256> table;
  table.fill(-1);
  for (int k = 0; k < 64; ++k) table[static_cast<unsigned char>(kAlphabet[k])] = k;
  if (in.size() % 4 != 0) throw Error(ErrorCode::Format, "base64 length is not a multiple of 4");
  std::string out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    std::uint32_t n = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = in[i + k];
      if (c == '=' && i + 4 == in.size() && k >= 2) {
        ++pad;
        n <<= 6;
        continue;
      }
      const int v = table[static_cast<unsigned char>(c)];
      if (v < 0 || pad) throw Error(ErrorCode::Format, "invalid base64 character");
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out += static_cast<char>((n >> 16) & 0xFF);
    if (pad < 2) out += static_cast<char>((n >> 8) & 0xFF);
    if (pad < 1) out += static_cast<char>(n & 0xFF);
  }
  return out;
}

std::string pack_f32(const std::vector<Vec3>& points) {
  std::string out;
  out.reserve(points.size() * 12);
  for (const auto& p : points)
    for (int a = 0; a < 3; ++a) append_f32(out, p[a]);
  return out;
}

std::string pack_f32(const std::vector<Quat>& quats) {
  std::string out;
  out.reserve(quats.size() * 16);
  for (const auto& q : quats) {
    append_f32(out, q.w());
    append_f32(out, q.x());
    append_f32(out, q.y());
    append_f32(out, q.z());
  }
  return out;
}

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw Error(ErrorCode::Protocol, "message exceeds the frame size limit");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  for (int k = 0; k < 4; ++k) out += static_cast<char>((n >> (8 * k)) & 0xFF);
  out.append(payload);
  return out;
}

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int k = 0; k < 4; ++k) n |= std::uint32_t(std::uint8_t(buffer_[k])) << (8 * k);
  if (n > kMaxFrameBytes) throw Error(ErrorCode::Protocol, "incoming frame of " + std::to_string(n) + " bytes is too large");
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

Json ProtocolHandler::error_response(ErrorCode code, const std::string& message, const Json& id) {
  Json j{{"v", kProtocolVersion}, {"type", "error"}, {"code", to_string(code)}, {"message", message}};
  if (!id.is_null()) j["id"] = id;
  return j;
}

Json ProtocolHandler::tick_update_json(const TickUpdate& u) {
  Json j{{"v", kProtocolVersion},
         {"type", "tick_update"},
         {"rod", u.rod_id},
         {"tick", u.tick},
         {"count", u.positions.size()},
         {"positions", base64_encode(pack_f32(u.positions))},
         {"frames", base64_encode(pack_f32(u.frames))}};
  if (u.error) j["error"] = *u.error;
  return j;
}

Json ProtocolHandler::extraction_json(const ExtractionResult& r) {
  Json vertices = Json::array();
  for (const auto& v : r.polyline.vertices) vertices.push_back(vec3_json(v));
  Json frames = Json::array();
  for (const auto& f : r.polyline.frames) {
    const Quat q = Quat(f).normalized();
    frames.push_back({q.w(), q.x(), q.y(), q.z()});
  }
  Json binding = Json::array();
  for (const auto& e : r.binding.entries)
    binding.push_back({{"primitive", e.primitive},
                       {"segment", e.segment},
                       {"t", e.t},
                       {"offset", vec3_json(e.offset)},
                       {"rest_frame", {e.rest_frame.w(), e.rest_frame.x(), e.rest_frame.y(), e.rest_frame.z()}}});
  Json timing = Json::object();
  double total = 0.0;
  for (const auto& [stage, ms] : r.timings) {
    timing[stage] = ms;
    total += ms;
  }
  timing["total"] = total;
  Json j{{"v", kProtocolVersion},
         {"type", "extraction_result"},
         {"rod", r.rod_id},
         {"partial", r.partial},
         {"polyline", {{"vertices", vertices}, {"frames", frames}}},
         {"gaps", r.path.gaps},
         {"gap_count", r.path.gaps.size()},
         {"primitives", r.path.primitives},
         {"bound_count", r.segmentation.size()},
         {"bound_ids", r.segmentation},
         {"binding", binding},
         {"timing_ms", timing}};
  return j;
}

Json ProtocolHandler::handle(std::string_view message) {
  Json request;
  try {
    request = Json::parse(message);
  } catch (const nlohmann::json::exception& e) {
    return error_response(ErrorCode::Protocol, std::string("malformed JSON: ") + e.what());
  }
  const Json id = request.is_object() && request.contains("id") ? request["id"] : Json(nullptr);
  try {
    if (!request.is_object()) throw Error(ErrorCode::Protocol, "message must be a JSON object");
    if (!request.contains("v") || !request["v"].is_number_integer())
      throw Error(ErrorCode::Protocol, "message lacks an integer protocol version field 'v'");
    if (request["v"].get<int>() != kProtocolVersion)
      throw Error(ErrorCode::Protocol, "unsupported protocol version " + request["v"].dump());
    if (!request.contains("type") || !request["type"].is_string())
      throw Error(ErrorCode::Protocol, "message lacks a string 'type'");
    Json response = dispatch(request);
    response["v"] = kProtocolVersion;
    if (!id.is_null()) response["id"] = id;
    return response;
  } catch (const PartialStrokeError& e) {
    Json j = error_response(e.code(), e.what(), id);
    j["partial"] = extraction_json(e.partial());
    return j;
  } catch (const Error& e) {
    return error_response(e.code(), e.what(), id);
  } catch (const nlohmann::json::exception& e) {
    return error_response(ErrorCode::Protocol, std::string("bad field: ") + e.what(), id);
  } catch (const std::exception& e) {
    return error_response(ErrorCode::Protocol, std::string("internal error: ") + e.what(), id);
  }
}

Json ProtocolHandler::dispatch(const Json& req) {
  const std::string type = req["type"].get<std::string>();
  const Json ack{{"type", "ack"}, {"request", type}};

  if (type == "load_scene") {
    session_.load_scene(resolve_scene_path(req.at("path").get<std::string>()));
    const auto box = session_.scene().bounds();
    return Json{{"type", "scene_meta"},
                {"primitive_count", session_.scene().size()},
                {"bounds", {{"min", vec3_json(box.min())}, {"max", vec3_json(box.max())}}}};
  }
  if (type == "set_camera") {
    session_.set_camera(camera_from_json_text(req.at("camera").dump()));
    return ack;
  }
  if (type == "set_params") {
    PipelineConfig config = session_.config();
    apply_config_json(config, req.at("params"));
    session_.set_config(config);
    Json r = ack;
    r["params"] = config_to_json(config);
    return r;
  }
  if (type == "submit_stroke") {
    const StrokeDocument doc = stroke_from_json(req.at("stroke"), session_.config());
    if (doc.camera) session_.set_camera(camera_from_json_text(doc.camera->dump()));
    return extraction_json(session_.submit_stroke(doc.stroke));
  }
  if (type == "begin_drag") {
    session_.begin_drag(req.at("rod").get<int>(), req.at("vertex").get<std::size_t>(), vec3_from_json(req.at("target")));
    return ack;
  }
  if (type == "update_drag") {
    session_.update_drag(req.at("rod").get<int>(), vec3_from_json(req.at("target")));
    return ack;
  }
  if (type == "end_drag") {
    session_.end_drag(req.at("rod").get<int>());
    return ack;
  }
  if (type == "pin") {
    session_.pin(req.at("rod").get<int>(), req.at("vertex").get<std::size_t>());
    return ack;
  }
  if (type == "delete_rod") {
    session_.delete_rod(req.at("rod").get<int>());
    return ack;
  }
  if (type == "export") {
    const auto dir = std::filesystem::path(req.at("dir").get<std::string>());
    session_.export_rod(req.at("rod").get<int>(), dir);
    Json r = ack;
    r["dir"] = dir.string();
    return r;
  }
  if (type == "tick") {
    Json updates = Json::array();
    for (auto& u : tick()) updates.push_back(std::move(u));
    return Json{{"type", "tick_batch"}, {"updates", updates}};
  }
  throw Error(ErrorCode::Protocol, "unknown message type '" + type + "'");
}

std::vector<Json> ProtocolHandler::tick() {
  std::vector<Json> out;
  if (session_.rods().empty()) return out;
  for (const auto& u : session_.tick()) out.push_back(tick_update_json(u));
  return out;
}

}  // namespace sketchrod
