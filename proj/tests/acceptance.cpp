// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "golden.hpp"
#include "synth.hpp"

#include "formats.hpp"
#include "index_raster.hpp"
#include "path_extract.hpp"
#include "polyline_post.hpp"
#include "rod_sim.hpp"
#include "session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

using namespace sketchrod;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double primitive_distance(const GaussianScene& scene, const IndexImage& img, std::uint32_t a, std::uint32_t b) {
  return (scene.primitives[img.index[a]].center - scene.primitives[img.index[b]].center).norm();
}

Verdict shortest_path_optimality() {
  synth::Rng rng(20240601);
  int compared = 0, reached = 0, mismatches = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const synth::GridInstance g = synth::random_grid(rng);
    const PixelPath p = shortest_pixel_path(g.image, g.scene, g.stroke, g.src, g.dst, {g.band, 10.0});
    const double oracle = synth::bellman_ford_cost(g);
    ++compared;
    if (std::isinf(oracle)) {
      mismatches += p.reached;
      continue;
    }
    ++reached;
    if (!p.reached || p.cost != oracle) ++mismatches;
  }
  return {mismatches == 0 && reached >= 100,
          fmt("%d instances, %d with a path, %d cost mismatches", compared, reached, mismatches)};
}

Verdict rasterizer_oracle() {
  synth::Rng rng(7);
  const Camera cam = synth::small_camera(64);
  std::size_t pixels = 0, differing = 0;
  for (int scene = 0; scene < 20; ++scene) {
    const GaussianScene s = synth::random_scene(rng, static_cast<std::size_t>(rng.integer(1, 100)), cam);
    const IndexImage fast = rasterize_index_image(s, cam);
    const IndexImage slow = synth::brute_force_index(s, cam);
    for (std::size_t p = 0; p < fast.grid.size(); ++p) {
      ++pixels;
      differing += fast.index[p] != slow.index[p];
    }
  }
  return {differing == 0, fmt("%zu of %zu pixels differ over 20 scenes", differing, pixels)};
}

Session session_for(const synth::Fixture& f) {
  Session s;
  s.set_scene(std::make_shared<GaussianScene>(f.scene));
  s.set_camera(f.camera);
  PipelineConfig c;
  c.radius = f.radius;
  s.set_config(c);
  return s;
}

Verdict helix_fidelity() {
  const synth::Fixture f = synth::helix_fixture();
  Session s = session_for(f);
  const ExtractionResult r = s.submit_stroke(f.stroke);
  const double h = synth::hausdorff(r.polyline.vertices, f.curve);
  const double truth = f.curve.length(), got = r.polyline.length();
  const double rel = std::abs(got - truth) / truth;
  return {h <= 2 * f.radius && rel <= 0.1,
          fmt("Hausdorff %.4f (limit %.4f), length %.4f vs %.4f (%.1f%%), %zu primitives", h, 2 * f.radius, got,
              truth, 100 * rel, f.scene.size())};
}

Verdict occlusion() {
  std::string detail;
  bool pass = true;
  {
    const synth::Fixture f = synth::crossing_fixture();
    const IndexImage img = rasterize_index_image(f.scene, f.camera);
    const PathResult r = extract_path(img, f.scene, f.stroke);
    int jumps = 0;
    for (std::size_t k = 1; k < r.pixels.size(); ++k)
      jumps += primitive_distance(f.scene, img, r.pixels[k - 1], r.pixels[k]) > 3 * f.radius;
    double len = 0.0;
    for (std::size_t k = 1; k < r.primitives.size(); ++k)
      len += (f.scene.primitives[r.primitives[k]].center - f.scene.primitives[r.primitives[k - 1]].center).norm();
    const double truth = f.curve.length(), rel = std::abs(len - truth) / truth;
    pass = pass && jumps == 0 && rel <= 0.1;
    detail += fmt("crossing: %d jumps over 3R, length %.3f vs %.3f (%.1f%%); ", jumps, len, truth, 100 * rel);
  }
  {
    const synth::Fixture f = synth::occluder_fixture();
    const IndexImage img = rasterize_index_image(f.scene, f.camera);
    const PathResult r = extract_path(img, f.scene, f.stroke);
    double dz = std::numeric_limits<double>::infinity();
    if (r.segment_starts.size() == 2) {
      const std::size_t k = r.segment_starts[1];
      auto depth = [&](std::uint32_t p) { return f.camera.to_camera(f.scene.primitives[img.index[p]].center).z(); };
      dz = std::abs(depth(r.pixels[k]) - depth(r.pixels[k - 1]));
    }
    pass = pass && r.gaps.size() == 1 && dz <= 3 * f.radius;
    detail += fmt("occluder: %zu gap records, resume depth difference %.4f (limit %.4f)", r.gaps.size(), dz,
                  3 * f.radius);
  }
  return {pass, detail};
}

Verdict baseline_failure() {
  int reproduced = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const synth::Fixture f = synth::noisy_needle_fixture(seed);
    const IndexImage img = rasterize_index_image(f.scene, f.camera);
    bool screen = true;
    PathResult r;
    try {
      r = extract_path(img, f.scene, f.stroke);
    } catch (const PartialExtractionError&) {
      screen = false;
    }
    bool knn = false;
    if (screen) knn = naive_knn_path(f.scene, r.primitives.front(), r.primitives.back(), f.stroke, f.camera).complete;
    reproduced += screen && !knn;
    detail += fmt("seed %d: screen %s, knn %s; ", static_cast<int>(seed), screen ? "complete" : "partial",
                  knn ? "complete" : "partial");
  }
  return {reproduced >= 1, detail + fmt("%d of 5 reproduce", reproduced)};
}

Verdict timing() {
  const synth::Fixture f = synth::large_fixture(100000);
  Session s = session_for(f);
  const auto t0 = Clock::now();
  const ExtractionResult r = s.submit_stroke(f.stroke);
  const double extract_ms = ms_since(t0);

  Polyline3D poly;
  for (int k = 0; k < 200; ++k) poly.vertices.emplace_back(0.01 * k, 0.002 * std::sin(0.3 * k), 0.0);
  RodParams params = RodParams::defaults_for_radius(0.01);
  RodState st = init_rod(poly, params);
  set_handle(st, {HandleKind::Pin, 0, st.positions[0]});
  set_handle(st, {HandleKind::Drag, 199, st.positions[199] + Vec3(0.0, 0.3, 0.1)});
  std::vector<double> ticks;
  for (int k = 0; k < 100; ++k) {
    const auto t1 = Clock::now();
    step(st, params);
    vertex_frames(st);
    ticks.push_back(ms_since(t1));
  }
  std::sort(ticks.begin(), ticks.end());
  double mean = 0.0;
  for (double t : ticks) mean += t;
  mean /= ticks.size();
  return {extract_ms <= 1000.0 && mean <= 10.0,
          fmt("submit_stroke %.0f ms at %dx%d on %zu primitives (%zu path primitives); tick mean %.2f ms, "
              "median %.2f, max %.2f (200 vertices, %d substeps)",
              extract_ms, f.camera.width, f.camera.height, f.scene.size(), r.path.primitives.size(), mean,
              ticks[ticks.size() / 2], ticks.back(), params.substeps)};
}

Verdict rod_physics() {
  synth::Rng rng(99);
  std::string detail;
  bool pass = true;

  double worst_fd = 0.0;
  {
    RodParams params;
    params.bend_stiffness = 1e-2;
    for (int trial = 0; trial < 100; ++trial) {
      const Polyline3D rest = synth::random_polyline(rng, static_cast<std::size_t>(rng.integer(3, 12)), 0.05);
      const RodState s = init_rod(rest, params);
      std::vector<Vec3> x = rest.vertices;
      for (Vec3& v : x) v += rng.in_box(0.01);
      const auto g = bending_gradient(s, x, params);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        for (int c = 0; c < 3; ++c) {
          auto xp = x, xm = x;
          xp[i][c] += 1e-6;
          xm[i][c] -= 1e-6;
          const double fd = (bending_energy(s, xp, params) - bending_energy(s, xm, params)) / 2e-6;
          num += (fd - g[i][c]) * (fd - g[i][c]);
          den += g[i][c] * g[i][c];
        }
      worst_fd = std::max(worst_fd, std::sqrt(num / den));
    }
    pass = pass && worst_fd <= 1e-4;
    detail += fmt("FD rel err %.2e; ", worst_fd);
  }
  {
    RodParams params;
    params.gravity = Vec3::Zero();
    RodState s = init_rod(synth::random_polyline(rng, 30, 0.03), params);
    const auto start = s.positions;
    for (int k = 0; k < 100; ++k) step(s, params);
    double drift = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) drift = std::max(drift, (s.positions[i] - start[i]).norm());
    pass = pass && drift <= 1e-9;
    detail += fmt("rest drift %.1e; ", drift);
  }
  {
    RodParams params;
    params.gravity = Vec3::Zero();
    params.bend_stiffness = 1e-2;
    RodState s = init_rod(synth::random_polyline(rng, 20, 0.03), params);
    for (auto& p : s.positions) p += rng.in_box(0.01);
    set_handle(s, {HandleKind::Pin, 0, s.positions[0]});
    double prev = total_energy(s, params), worst_rise = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 200; ++k) {
      step(s, params);
      const double e = total_energy(s, params);
      worst_rise = std::max(worst_rise, e - prev);
      prev = e;
    }
    pass = pass && worst_rise <= 1e-9;
    detail += fmt("max energy rise %.1e; ", worst_rise);
  }
  {
    RodParams params;
    Polyline3D p;
    for (int k = 0; k < 13; ++k) p.vertices.emplace_back(0.03 * k, 0, 0);
    auto run = [&] {
      RodState s = init_rod(p, params);
      const Vec3 pin = s.positions[0];
      set_handle(s, {HandleKind::Pin, 0, pin});
      double drift = 0.0;
      std::vector<std::vector<Vec3>> traj;
      for (int k = 0; k < 240; ++k) {
        if (k == 40) set_handle(s, {HandleKind::Drag, 12, Vec3(0.2, 0.2, 0.1)});
        if (k == 120) release_handle(s, 12);
        step(s, params);
        drift = std::max(drift, (s.positions[0] - pin).norm());
        traj.push_back(s.positions);
      }
      return std::make_pair(drift, traj);
    };
    const auto a = run(), b = run();
    pass = pass && a.first == 0.0 && a.second == b.second;
    detail += fmt("pinned drift %.1e; repeat runs %s", a.first, a.second == b.second ? "bit-identical" : "DIFFER");
  }
  return {pass, detail};
}

double point_polyline(const Vec3& q, const Polyline3D& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const Vec3 a = p.vertices[i], ab = p.vertices[i + 1] - a;
    const double t = std::clamp((q - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (q - (a + t * ab)).norm());
  }
  return best;
}

Verdict post_process() {
  synth::Rng rng(123);
  std::string detail;
  bool pass = true;
  {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Polyline3D p = synth::random_polyline(rng, static_cast<std::size_t>(rng.integer(2, 60)));
      const Polyline3D r = resample_uniform(p, p.length() / rng.uniform(1.0, 50.0));
      const double e0 = (r.vertices[1] - r.vertices[0]).norm();
      for (std::size_t k = 1; k < r.size(); ++k)
        worst = std::max(worst, std::abs((r.vertices[k] - r.vertices[k - 1]).norm() - e0) / e0);
    }
    pass = pass && worst <= 1e-6;
    detail += fmt("resample edge spread %.1e; ", worst);
  }
  {
    double moved = 0.0;
    int grew = 0, endpoints = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Polyline3D line;
      const Vec3 a = rng.in_box(1.0), d = rng.unit() * rng.uniform(0.01, 0.2);
      const int n = rng.integer(3, 40);
      for (int k = 0; k < n; ++k) line.vertices.push_back(a + k * d);
      const Polyline3D s = laplacian_smooth(line, rng.integer(1, 20), rng.uniform(0.01, 1.0));
      for (int k = 0; k < n; ++k) moved = std::max(moved, (s.vertices[k] - line.vertices[k]).norm());
      const Polyline3D p = synth::random_polyline(rng, static_cast<std::size_t>(rng.integer(2, 40)));
      const Polyline3D q = laplacian_smooth(p, rng.integer(1, 20), rng.uniform(0.01, 1.0));
      grew += q.length() > p.length() * (1 + 1e-12);
      endpoints += q.vertices.front() != p.vertices.front() || q.vertices.back() != p.vertices.back();
    }
    pass = pass && moved <= 1e-12 && grew == 0 && endpoints == 0;
    detail += fmt("collinear move %.1e, length increases %d, endpoint moves %d; ", moved, grew, endpoints);
  }
  {
    const Polyline3D p = synth::random_polyline(rng, 25);
    GaussianScene scene;
    for (int k = 0; k < 10000; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.integer(0, static_cast<int>(p.size()) - 2));
      scene.primitives.push_back(
          synth::blob(p.vertices[i] + rng.uniform() * (p.vertices[i + 1] - p.vertices[i]) + rng.in_box(0.15), 0.01));
    }
    std::vector<std::uint32_t> oracle;
    for (std::uint32_t k = 0; k < scene.size(); ++k)
      if (point_polyline(scene.primitives[k].center, p) < 0.05) oracle.push_back(k);
    const auto got = segment_primitives(scene, p, 0.05);
    pass = pass && got == oracle;
    detail += fmt("segmentation %zu vs oracle %zu %s; ", got.size(), oracle.size(), got == oracle ? "equal" : "DIFFER");
  }
  {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Polyline3D rest = synth::random_polyline(rng, 15);
      rest.frames = vertex_frames(init_rod(rest, RodParams{}));
      GaussianScene scene;
      std::vector<std::uint32_t> ids;
      for (int k = 0; k < 100; ++k) {
        const std::size_t i = static_cast<std::size_t>(rng.integer(0, 13));
        scene.primitives.push_back(synth::blob(
            rest.vertices[i] + rng.uniform() * (rest.vertices[i + 1] - rest.vertices[i]) + rng.in_box(0.04), 0.01));
        ids.push_back(static_cast<std::uint32_t>(k));
      }
      const SkinBinding b = bind_skin(scene, rest, ids);
      const Mat3 Q = rng.rotation().toRotationMatrix();
      const Vec3 pivot = rng.in_box(1.0), shift = rng.in_box(1.0);
      Polyline3D moved = rest;
      for (auto& v : moved.vertices) v = Q * (v - pivot) + pivot + shift;
      for (auto& f : moved.frames) f = Q * f;
      for (const auto& s : apply_skinning(b, moved))
        worst = std::max(worst, (s.center - (Q * (scene.primitives[s.primitive].center - pivot) + pivot + shift)).norm());
    }
    pass = pass && worst <= 1e-9;
    detail += fmt("skinning rigid error %.1e", worst);
  }
  return {pass, detail};
}

Verdict cli_golden() {
  const auto scratch = std::filesystem::temp_directory_path() / "sketchrod_acceptance";
  const auto outcomes = golden::run_suite(CLI_PATH, FIXTURE_DIR, scratch, 1e-9, false);
  int failed = 0;
  std::string detail;
  for (const auto& o : outcomes)
    if (!o.passed) {
      ++failed;
      detail += o.name + ": " + o.detail + "; ";
    }
  return {failed == 0 && !outcomes.empty(), fmt("%zu cases, %d failed", outcomes.size(), failed) +
                                                (detail.empty() ? "" : " (" + detail + ")")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"shortest-path optimality", shortest_path_optimality},
      {"rasterizer oracle equivalence", rasterizer_oracle},
      {"end-to-end extraction fidelity", helix_fidelity},
      {"occlusion handling", occlusion},
      {"baseline failure reproduction", baseline_failure},
      {"timing", timing},
      {"rod physics properties", rod_physics},
      {"post-process properties", post_process},
      {"CLI golden tests", cli_golden},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
