#include "scene_io.hpp"

#include "error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace sketchrod {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Bounds: return "bounds";
    case ErrorCode::StrokeInvalid: return "stroke_invalid";
    case ErrorCode::PartialExtraction: return "partial_extraction";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::BindingInvalid: return "binding_invalid";
    case ErrorCode::Diverged: return "diverged";
    case ErrorCode::NotReady: return "not_ready";
    case ErrorCode::Protocol: return "protocol";
  }
  return "unknown";
}

Eigen::AlignedBox3d GaussianScene::bounds() const {
  Eigen::AlignedBox3d box;
  for (const auto& g : primitives) box.extend(g.center);
  return box;
}

std::optional<Projection> Camera::project(const Vec3& world) const {
  const Vec3 p = to_camera(world);
  if (!(p.z() > 0.0)) return std::nullopt;
  return Projection{Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy), p.z()};
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::Validation, "camera: width and height must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::Validation, "camera: focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy) || !translation.allFinite() || !rotation.allFinite())
    throw Error(ErrorCode::Validation, "camera: non-finite parameter");
  if (!(rotation * rotation.transpose()).isIdentity(1e-6) || rotation.determinant() < 0.0)
    throw Error(ErrorCode::Validation, "camera: world_to_camera rotation is not a proper rotation");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double focal) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  return cam;
}

// --- PLY -------------------------------------------------------------------

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> parse_ply_type(const std::string& name) {
  static const std::map<std::string, PlyType> types = {
      {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
      {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
      {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
      {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
      {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
      {"float64", PlyType::Float64}};
  auto it = types.find(name);
  if (it == types.end()) return std::nullopt;
  return it->second;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

template <typename T>
T read_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_ply_value(PlyType t, const char* p) {
  switch (t) {
    case PlyType::Int8: return read_le<std::int8_t>(p);
    case PlyType::UInt8: return read_le<std::uint8_t>(p);
    case PlyType::Int16: return read_le<std::int16_t>(p);
    case PlyType::UInt16: return read_le<std::uint16_t>(p);
    case PlyType::Int32: return read_le<std::int32_t>(p);
    case PlyType::UInt32: return read_le<std::uint32_t>(p);
    case PlyType::Float32: return read_le<float>(p);
    case PlyType::Float64: return read_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  PlyType type;
  std::size_t offset;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

GaussianScene load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open PLY file: " + path.string());

  std::string line;
  std::getline(in, line);
  if (line != "ply" && line != "ply\r") throw Error(ErrorCode::Format, "not a PLY file: " + path.string());

  bool in_vertex = false;
  bool seen_vertex = false;
  bool binary_le = false;
  std::size_t vertex_count = 0;
  std::size_t stride = 0;
  std::map<std::string, PlyProperty> props;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") throw Error(ErrorCode::Format, "ASCII PLY is not supported; export as binary_little_endian");
      if (fmt != "binary_little_endian") throw Error(ErrorCode::Format, "unsupported PLY format: " + fmt);
      binary_le = true;
    } else if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (seen_vertex && !in_vertex) continue;
      in_vertex = (name == "vertex");
      if (in_vertex) {
        seen_vertex = true;
        vertex_count = count;
      } else if (!seen_vertex && count > 0) {
        throw Error(ErrorCode::Format, "PLY element '" + name + "' precedes the vertex element");
      }
    } else if (keyword == "property" && in_vertex) {
      std::string type_name, name;
      ls >> type_name;
      if (type_name == "list") throw Error(ErrorCode::Format, "list properties are not supported on vertices");
      ls >> name;
      auto type = parse_ply_type(type_name);
      if (!type) throw Error(ErrorCode::Format, "unknown PLY property type: " + type_name);
      props[name] = PlyProperty{*type, stride};
      stride += ply_type_size(*type);
    } else if (keyword == "property") {
      // properties of later elements are ignored
    }
  }
  if (!binary_le) throw Error(ErrorCode::Format, "PLY header lacks a binary_little_endian format line");
  if (!seen_vertex) throw Error(ErrorCode::Format, "PLY has no vertex element");

  static const std::array<const char*, 14> required = {
      "x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0",
      "rot_1", "rot_2", "rot_3", "opacity", "f_dc_0", "f_dc_1", "f_dc_2"};
  std::array<PlyProperty, required.size()> slots{};
  for (std::size_t i = 0; i < required.size(); ++i) {
    auto it = props.find(required[i]);
    if (it == props.end())
      throw Error(ErrorCode::Format, std::string("PLY is missing required vertex property '") + required[i] + "'");
    slots[i] = it->second;
  }

  std::vector<char> data(vertex_count * stride);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size())
    throw Error(ErrorCode::Format, "PLY vertex data is truncated");

  GaussianScene scene;
  scene.primitives.resize(vertex_count);
  std::array<double, required.size()> v{};
  for (std::size_t k = 0; k < vertex_count; ++k) {
    const char* row = data.data() + k * stride;
    for (std::size_t i = 0; i < required.size(); ++i) {
      v[i] = read_ply_value(slots[i].type, row + slots[i].offset);
      if (!std::isfinite(v[i]))
        throw Error(ErrorCode::Validation, "primitive " + std::to_string(k) + ": non-finite value in '" +
                                               required[i] + "'");
    }
    GaussianPrimitive& g = scene.primitives[k];
    g.center = Vec3(v[0], v[1], v[2]);
    g.scales = Vec3(std::exp(v[3]), std::exp(v[4]), std::exp(v[5]));
    Quat q(v[6], v[7], v[8], v[9]);  // stored w, x, y, z
    if (q.norm() == 0.0)
      throw Error(ErrorCode::Validation, "primitive " + std::to_string(k) + ": zero-length rotation quaternion");
    g.rotation = q.normalized();
    g.opacity = sigmoid(v[10]);
    g.color = (Vec3(v[11], v[12], v[13]) * kShC0).array() + 0.5;
    if (!g.scales.allFinite() || (g.scales.array() <= 0.0).any())
      throw Error(ErrorCode::Validation, "primitive " + std::to_string(k) + ": scale out of range");
  }
  return scene;
}

void save_ply(const GaussianScene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write PLY file: " + path.string());
  static const char* names[] = {"x",      "y",      "z",       "nx",      "ny",      "nz",
                                "f_dc_0", "f_dc_1", "f_dc_2",  "opacity", "scale_0", "scale_1",
                                "scale_2", "rot_0", "rot_1",   "rot_2",   "rot_3"};
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
  for (const char* n : names) out << "property float " << n << "\n";
  out << "end_header\n";

  constexpr double kMaxLogit = 30.0;
  std::vector<float> row(std::size(names));
  for (const auto& g : scene.primitives) {
    const double o = std::clamp(g.opacity, 0.0, 1.0);
    const double logit = std::clamp(std::log(o) - std::log1p(-o), -kMaxLogit, kMaxLogit);
    const Vec3 dc = (g.color.array() - 0.5) / kShC0;
    const double vals[] = {g.center.x(), g.center.y(), g.center.z(), 0, 0, 0, dc.x(), dc.y(), dc.z(), logit,
                           std::log(g.scales.x()), std::log(g.scales.y()), std::log(g.scales.z()),
                           g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()};
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(vals[i]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing PLY file: " + path.string());
}

// --- camera JSON -----------------------------------------------------------

Camera camera_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("camera JSON: ") + e.what());
  }
  try {
    Camera cam;
    const auto& m = j.at("world_to_camera");
    if (!m.is_array() || m.size() != 16) throw Error(ErrorCode::Format, "camera JSON: world_to_camera needs 16 numbers");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cam.rotation(r, c) = m[r * 4 + c].get<double>();
      cam.translation[r] = m[r * 4 + 3].get<double>();
    }
    const auto& in = j.at("intrinsics");
    cam.fx = in.at("fx").get<double>();
    cam.fy = in.at("fy").get<double>();
    cam.cx = in.at("cx").get<double>();
    cam.cy = in.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.validate();
    return cam;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("camera JSON: ") + e.what());
  }
}

Camera load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open camera file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return camera_from_json_text(ss.str());
}

std::string camera_to_json_text(const Camera& camera) {
  nlohmann::json m = nlohmann::json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if (r == 3) m.push_back(c == 3 ? 1.0 : 0.0);
      else if (c == 3) m.push_back(camera.translation[r]);
      else m.push_back(camera.rotation(r, c));
    }
  nlohmann::json j = {{"world_to_camera", m},
                      {"intrinsics", {{"fx", camera.fx}, {"fy", camera.fy}, {"cx", camera.cx}, {"cy", camera.cy}}},
                      {"width", camera.width},
                      {"height", camera.height}};
  return j.dump(2);
}

}  // namespace sketchrod
