#pragma once

#include "formats.hpp"
#include "session.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sketchrod {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;
// Environment variable naming the directory relative scene paths resolve against.
inline constexpr const char* kSceneDirEnv = "SKETCHROD_SCENE_DIR";

std::filesystem::path resolve_scene_path(const std::string& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

// Little-endian f32 packing used for tick_update payloads.
std::string pack_f32(const std::vector<Vec3>& points);
std::string pack_f32(const std::vector<Quat>& quats);  // w, x, y, z

// Length-prefixed framing: u32 little-endian byte count, then the payload.
std::string encode_frame(std::string_view payload);

class FrameDecoder {
 public:
  void feed(const char* data, std::size_t size) { buffer_.append(data, size); }
  // Next complete payload, if any. Throws Protocol on an oversized frame.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

// Translates wire messages into Session calls. Every request yields exactly
// one response object, an error response when the request is malformed.
class ProtocolHandler {
 public:
  explicit ProtocolHandler(Session& session) : session_(session) {}

  Json handle(std::string_view message);
  // One tick_update per rod; empty when the session has no rods.
  std::vector<Json> tick();

  static Json error_response(ErrorCode code, const std::string& message, const Json& id = nullptr);
  static Json tick_update_json(const TickUpdate& update);
  static Json extraction_json(const ExtractionResult& result);

 private:
  Json dispatch(const Json& request);

  Session& session_;
};

}  // namespace sketchrod
