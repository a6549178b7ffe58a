#include "polyline_post.hpp"

#include "error.hpp"

#include <Eigen/LU>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace sketchrod {

namespace {

Quat blend_quats(Quat a, Quat b, double t) {
  if (a.dot(b) < 0.0) b.coeffs() = -b.coeffs();
  Quat q;
  q.coeffs() = (1.0 - t) * a.coeffs() + t * b.coeffs();
  return q.normalized();
}

Quat frame_quat(const Mat3& m) { return Quat(m).normalized(); }

// Position and parameter of the next point along `poly`, after (segment, u),
// at Euclidean distance h from `from`. Returns false when the polyline ends
// before reaching that distance.
bool step_along(const Polyline3D& poly, const Vec3& from, double h, std::size_t& segment, double& u, Vec3& out) {
  for (; segment + 1 < poly.size(); ++segment, u = 0.0) {
    const Vec3 d = poly.vertices[segment + 1] - poly.vertices[segment];
    const double a = d.squaredNorm();
    if (a == 0.0) continue;
    const Vec3 start = poly.vertices[segment] + u * d;
    const Vec3 rel = start - from;
    const double b = 2.0 * d.dot(rel);
    const double c = rel.squaredNorm() - h * h;
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    // Larger root of a s^2 + b s + c = 0, s measured from `start`; c <= 0.
    const double s = b >= 0.0 ? (c == 0.0 ? 0.0 : (2.0 * c) / (-b - std::sqrt(disc)))
                              : (-b + std::sqrt(disc)) / (2.0 * a);
    if (u + s <= 1.0) {
      u += s;
      out = poly.vertices[segment] + u * d;
      return true;
    }
  }
  return false;
}

// Arc-length parameterization of a polyline.
class ArcLength {
 public:
  explicit ArcLength(const Polyline3D& poly) : poly_(poly), cum_(poly.size(), 0.0) {
    for (std::size_t i = 1; i < poly.size(); ++i) cum_[i] = cum_[i - 1] + (poly.vertices[i] - poly.vertices[i - 1]).norm();
  }
  double total() const { return cum_.back(); }
  // Point and unit tangent at arc length s.
  void at(double s, Vec3& point, Vec3& tangent) const {
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin());
    i = std::clamp<std::size_t>(i, 1, cum_.size() - 1);
    while (i > 1 && cum_[i] == cum_[i - 1]) --i;
    const double len = cum_[i] - cum_[i - 1];
    const Vec3 d = poly_.vertices[i] - poly_.vertices[i - 1];
    tangent = len > 0.0 ? Vec3(d / len) : Vec3::Zero();
    point = poly_.vertices[i - 1] + std::clamp(s - cum_[i - 1], 0.0, len) * tangent;
  }

 private:
  const Polyline3D& poly_;
  std::vector<double> cum_;
};

// Newton solve for count equal chords with vertices on the polyline, starting
// from the arc-length positions `s` of the count - 1 interior vertices.
// Returns false when it does not converge.
bool equal_chords_newton(const Polyline3D& poly, std::size_t count, Eigen::VectorXd s, std::vector<Vec3>& out) {
  const ArcLength arc(poly);
  const double total = arc.total();
  const std::size_t m = count - 1;  // free vertices

  std::vector<Vec3> p(count + 1), t(count + 1), u(count + 1);
  std::vector<double> c(count + 1);
  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    p[0] = poly.vertices.front();
    p[count] = poly.vertices.back();
    t[0] = t[count] = Vec3::Zero();
    for (std::size_t k = 0; k < m; ++k) arc.at(x[k], p[k + 1], t[k + 1]);
    for (std::size_t k = 1; k <= count; ++k) {
      const Vec3 d = p[k] - p[k - 1];
      c[k] = d.norm();
      u[k] = c[k] > 0.0 ? Vec3(d / c[k]) : Vec3::Zero();
    }
    r.resize(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) r[k] = c[k + 1] - c[k + 2];
  };
  auto ordered = [&](const Eigen::VectorXd& x) {
    if (!(x[0] > 0.0) || !(x[static_cast<Eigen::Index>(m) - 1] < total)) return false;
    for (std::size_t k = 1; k < m; ++k)
      if (!(x[k] > x[k - 1])) return false;
    return true;
  };

  const double scale = total / static_cast<double>(count);
  Eigen::VectorXd r;
  evaluate(s, r);
  for (int it = 0; it < 100 && r.cwiseAbs().maxCoeff() > 1e-14 * scale; ++it) {
    // r_k = c_{k+1} - c_{k+2}; c_j depends on s_{j-2} (its start) and s_{j-1} (its end).
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) {
      const Vec3& tk = t[k + 1];
      jac(k, k) = u[k + 1].dot(tk) + u[k + 2].dot(tk);
      if (k > 0) jac(k, k - 1) = -u[k + 1].dot(t[k]);
      if (k + 1 < m) jac(k, k + 1) = -u[k + 2].dot(t[k + 2]);
    }
    const Eigen::VectorXd delta = Eigen::PartialPivLU<Eigen::MatrixXd>(jac).solve(-r);
    if (!delta.allFinite()) break;
    const double norm = r.norm();
    bool moved = false;
    for (double step = 1.0; step > 1e-9 && !moved; step *= 0.5) {
      const Eigen::VectorXd trial = s + step * delta;
      if (!ordered(trial)) continue;
      Eigen::VectorXd rt;
      evaluate(trial, rt);
      if (rt.norm() < norm) {
        s = trial;
        r = rt;
        moved = true;
      }
    }
    if (!moved) break;
  }
  evaluate(s, r);
  if (!(r.cwiseAbs().maxCoeff() <= 1e-10 * scale)) return false;
  out.assign(p.begin(), p.end());
  return true;
}

// Walks `count` chords of length h from the first vertex. Returns false if the
// polyline ends first. `arcs` receives the arc-length position of each point
// after the first.
bool walk_fits(const Polyline3D& poly, double h, std::size_t count, std::vector<Vec3>* points,
               std::vector<double>* arcs = nullptr) {
  std::size_t segment = 0;
  double u = 0.0;
  Vec3 current = poly.vertices.front();
  if (points) points->assign(1, current);
  if (arcs) arcs->clear();
  double before = 0.0;  // arc length of the segments before `segment`
  std::size_t counted = 0;
  for (std::size_t k = 0; k < count; ++k) {
    Vec3 next;
    if (!step_along(poly, current, h, segment, u, next)) return false;
    current = next;
    if (points) points->push_back(current);
    if (arcs) {
      for (; counted < segment; ++counted) before += (poly.vertices[counted + 1] - poly.vertices[counted]).norm();
      arcs->push_back(before + u * (poly.vertices[segment + 1] - poly.vertices[segment]).norm());
    }
  }
  return true;
}

}  // namespace

double Polyline3D::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < vertices.size(); ++i) total += (vertices[i] - vertices[i - 1]).norm();
  return total;
}

PolylinePoint nearest_on_polyline(const Polyline3D& poly, const Vec3& q) {
  if (poly.size() < 2) throw Error(ErrorCode::Degenerate, "polyline needs at least 2 vertices");
  PolylinePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const Vec3& a = poly.vertices[i];
    const Vec3 ab = poly.vertices[i + 1] - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec3 p = a + t * ab;
    const double d = (q - p).norm();
    if (d < best.distance) best = PolylinePoint{i, t, p, d};
  }
  return best;
}

Polyline3D chain_to_polyline(const GaussianScene& scene, const std::vector<std::uint32_t>& chain) {
  Polyline3D poly;
  for (std::uint32_t k : chain) {
    if (k >= scene.size()) throw Error(ErrorCode::Bounds, "chain references primitive " + std::to_string(k));
    const Vec3& c = scene.primitives[k].center;
    if (poly.vertices.empty() || poly.vertices.back() != c) poly.vertices.push_back(c);
  }
  if (poly.size() < 2) throw Error(ErrorCode::Degenerate, "chain has fewer than 2 distinct primitive centers");
  return poly;
}

Polyline3D laplacian_smooth(const Polyline3D& poly, int iterations, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "smoothing lambda must be in (0, 1]");
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "smoothing iterations must be >= 0");
  Polyline3D out = poly;
  out.frames.clear();
  std::vector<Vec3> next = out.vertices;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 1; i + 1 < out.size(); ++i) {
      const Vec3& v = out.vertices[i];
      next[i] = v + lambda * (0.5 * (out.vertices[i - 1] + out.vertices[i + 1]) - v);
    }
    std::swap(out.vertices, next);
    next.front() = out.vertices.front();
    next.back() = out.vertices.back();
  }
  return out;
}

Polyline3D resample_uniform(const Polyline3D& poly, double edge_len) {
  if (!(edge_len > 0.0)) throw Error(ErrorCode::InvalidArgument, "edge length must be positive");
  if (poly.size() < 2) throw Error(ErrorCode::Degenerate, "polyline needs at least 2 vertices");
  const double total = poly.length();
  if (total < edge_len) throw Error(ErrorCode::Degenerate, "polyline is shorter than one edge");

  const auto count = static_cast<std::size_t>(std::max(1.0, std::round(total / edge_len)));
  Polyline3D out;
  out.target_edge = edge_len;
  if (count == 1) {
    out.vertices = {poly.vertices.front(), poly.vertices.back()};
    return out;
  }

  const std::size_t m = count - 1;
  Eigen::VectorXd start(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) start[k] = total * static_cast<double>(k + 1) / static_cast<double>(count);
  if (equal_chords_newton(poly, count, start, out.vertices)) return out;

  // Fallback for coarse edges on wiggly input: seed Newton from greedy chord
  // walks, best closing first. closing(h) = |p_{count-1}(h) - end| - h.
  const double h_max = total / static_cast<double>(m);
  constexpr int kGrid = 512;
  std::vector<std::pair<double, int>> seeds;
  for (int i = 1; i <= kGrid; ++i) {
    std::vector<Vec3> pts;
    if (!walk_fits(poly, h_max * i / kGrid, m, &pts)) continue;
    const double h = h_max * i / kGrid;
    seeds.emplace_back(std::abs((pts.back() - poly.vertices.back()).norm() - h) / h, i);
  }
  std::sort(seeds.begin(), seeds.end());
  for (std::size_t n = 0; n < seeds.size() && n < 64; ++n) {
    std::vector<double> arcs;
    walk_fits(poly, h_max * seeds[n].second / kGrid, m, nullptr, &arcs);
    for (std::size_t k = 0; k < m; ++k) start[k] = arcs[k];
    if (equal_chords_newton(poly, count, start, out.vertices)) return out;
  }
  // No exact solution found: the closest greedy walk.
  const double lo = seeds.empty() ? total / static_cast<double>(count) : h_max * seeds.front().second / kGrid;
  walk_fits(poly, lo, count - 1, &out.vertices);
  out.vertices.push_back(poly.vertices.back());
  return out;
}

std::vector<std::uint32_t> segment_primitives(const GaussianScene& scene, const Polyline3D& poly, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "segmentation radius must be positive");
  // Cull by the polyline bounds before the exact test.
  Eigen::AlignedBox3d box;
  for (const auto& v : poly.vertices) box.extend(v);
  box.min().array() -= radius;
  box.max().array() += radius;
  std::vector<std::uint32_t> ids;
  for (std::uint32_t k = 0; k < scene.size(); ++k) {
    const Vec3& c = scene.primitives[k].center;
    if (!box.contains(c)) continue;
    if (nearest_on_polyline(poly, c).distance < radius) ids.push_back(k);
  }
  return ids;
}

Mat3 blend_frames(const Mat3& a, const Mat3& b, double t) {
  return blend_quats(frame_quat(a), frame_quat(b), t).toRotationMatrix();
}

SkinBinding bind_skin(const GaussianScene& scene, const Polyline3D& rest, const std::vector<std::uint32_t>& ids) {
  if (rest.frames.size() != rest.size()) throw Error(ErrorCode::BindingInvalid, "rest polyline has no vertex frames");
  SkinBinding binding;
  binding.vertex_count = rest.size();
  binding.entries.reserve(ids.size());
  for (std::uint32_t k : ids) {
    if (k >= scene.size()) throw Error(ErrorCode::Bounds, "binding references primitive " + std::to_string(k));
    const Vec3& c = scene.primitives[k].center;
    const PolylinePoint near = nearest_on_polyline(rest, c);
    SkinBinding::Entry e;
    e.primitive = k;
    e.segment = near.segment;
    e.t = near.t;
    e.rest_frame = blend_quats(frame_quat(rest.frames[near.segment]), frame_quat(rest.frames[near.segment + 1]), near.t);
    e.offset = e.rest_frame.toRotationMatrix().transpose() * (c - near.point);
    binding.entries.push_back(e);
  }
  return binding;
}

std::vector<SkinnedPrimitive> apply_skinning(const SkinBinding& binding, const Polyline3D& current) {
  if (current.size() != binding.vertex_count)
    throw Error(ErrorCode::BindingInvalid, "polyline has " + std::to_string(current.size()) +
                                               " vertices; binding expects " + std::to_string(binding.vertex_count));
  if (current.frames.size() != current.size())
    throw Error(ErrorCode::BindingInvalid, "current polyline has no vertex frames");
  std::vector<SkinnedPrimitive> out(binding.entries.size());
  for (std::size_t n = 0; n < binding.entries.size(); ++n) {
    const auto& e = binding.entries[n];
    const Vec3& a = current.vertices[e.segment];
    const Vec3& b = current.vertices[e.segment + 1];
    const Vec3 p = a + e.t * (b - a);
    const Quat frame = blend_quats(frame_quat(current.frames[e.segment]), frame_quat(current.frames[e.segment + 1]), e.t);
    out[n].primitive = e.primitive;
    out[n].center = p + frame.toRotationMatrix() * e.offset;
    out[n].rotation_delta = (frame * e.rest_frame.conjugate()).normalized();
  }
  return out;
}

void write_polyline_obj(const Polyline3D& poly, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write OBJ: " + path.string());
  out.precision(17);
  for (const auto& v : poly.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  if (poly.size() >= 2) {
    out << 'l';
    for (std::size_t i = 1; i <= poly.size(); ++i) out << ' ' << i;
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing OBJ: " + path.string());
}

std::string polyline_to_json(const Polyline3D& poly) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : poly.vertices) j["vertices"].push_back({v.x(), v.y(), v.z()});
  j["frames"] = nlohmann::json::array();
  for (const auto& f : poly.frames) {
    const Quat q = frame_quat(f);
    j["frames"].push_back({q.w(), q.x(), q.y(), q.z()});
  }
  j["edge_length"] = poly.target_edge;
  return j.dump(1);
}

Polyline3D polyline_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Polyline3D poly;
    for (const auto& v : j.at("vertices")) poly.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    if (j.contains("frames"))
      for (const auto& q : j.at("frames"))
        poly.frames.push_back(
            Quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>())
                .normalized()
                .toRotationMatrix());
    poly.target_edge = j.value("edge_length", 0.0);
    if (!poly.frames.empty() && poly.frames.size() != poly.size())
      throw Error(ErrorCode::Format, "polyline JSON: frame count does not match vertex count");
    return poly;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("polyline JSON: ") + e.what());
  }
}

std::string segmentation_to_json(const std::vector<std::uint32_t>& ids) {
  return nlohmann::json{{"primitives", ids}}.dump();
}

std::string binding_to_json(const SkinBinding& binding) {
  nlohmann::json j;
  j["vertex_count"] = binding.vertex_count;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : binding.entries)
    j["entries"].push_back({{"primitive", e.primitive},
                            {"segment", e.segment},
                            {"t", e.t},
                            {"offset", {e.offset.x(), e.offset.y(), e.offset.z()}},
                            {"rest_frame", {e.rest_frame.w(), e.rest_frame.x(), e.rest_frame.y(), e.rest_frame.z()}}});
  return j.dump(1);
}

}  // namespace sketchrod
