#include "index_raster.hpp"

#include "error.hpp"

#include <png.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

namespace sketchrod {

Mat3 world_covariance(const GaussianPrimitive& g) {
  const Mat3 r = g.rotation.toRotationMatrix();
  return r * g.scales.array().square().matrix().asDiagonal() * r.transpose();
}

std::vector<Splat2D> project_splats(const GaussianScene& scene, const Camera& camera) {
  std::vector<Splat2D> splats;
  splats.reserve(scene.size());
  for (std::size_t k = 0; k < scene.size(); ++k) {
    const GaussianPrimitive& g = scene.primitives[k];
    const Vec3 t = camera.to_camera(g.center);
    if (t.z() <= kNearPlane) continue;

    Eigen::Matrix<double, 2, 3> jac;
    const double iz = 1.0 / t.z();
    jac << camera.fx * iz, 0.0, -camera.fx * t.x() * iz * iz,
           0.0, camera.fy * iz, -camera.fy * t.y() * iz * iz;
    const Eigen::Matrix<double, 2, 3> m = jac * camera.rotation;
    Eigen::Matrix2d cov = m * world_covariance(g) * m.transpose();
    cov(0, 0) += kCovarianceDilation;
    cov(1, 1) += kCovarianceDilation;
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0)) continue;

    Splat2D s;
    s.id = static_cast<std::uint32_t>(k);
    s.mean = Vec2(camera.fx * t.x() * iz + camera.cx, camera.fy * t.y() * iz + camera.cy);
    s.cov = cov;
    s.conic_a = cov(1, 1) / det;
    s.conic_b = -cov(0, 1) / det;
    s.conic_c = cov(0, 0) / det;
    s.opacity = g.opacity;
    s.depth = t.z();

    // opacity * exp(-m2 / 2) >= 1/255 needs m2 <= 2 ln(255 opacity).
    if (!(g.opacity >= kMinAlpha)) continue;
    s.reach2 = std::min(9.0, 2.0 * std::log(g.opacity / kMinAlpha) * (1.0 + 1e-9) + 1e-9);
    // The ellipse m2 <= reach2 spans |dx| <= sqrt(reach2 cov_xx), |dy| <= sqrt(reach2 cov_yy).
    // Pixel c has its center at c + 0.5; one pixel of slack absorbs rounding.
    const double hx = std::sqrt(s.reach2 * cov(0, 0));
    const double hy = std::sqrt(s.reach2 * cov(1, 1));
    s.min_col = std::max(0, static_cast<int>(std::floor(s.mean.x() - hx - 0.5)));
    s.max_col = std::min(camera.width - 1, static_cast<int>(std::ceil(s.mean.x() + hx - 0.5)));
    s.min_row = std::max(0, static_cast<int>(std::floor(s.mean.y() - hy - 0.5)));
    s.max_row = std::min(camera.height - 1, static_cast<int>(std::ceil(s.mean.y() + hy - 0.5)));
    if (s.min_col > s.max_col || s.min_row > s.max_row) continue;
    splats.push_back(s);
  }
  return splats;
}

double splat_alpha(const Splat2D& s, double x, double y) {
  const double dx = x - s.mean.x();
  const double dy = y - s.mean.y();
  const double mahalanobis2 = s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy + s.conic_c * dy * dy;
  if (!(mahalanobis2 <= s.reach2)) return 0.0;
  const double alpha = std::min(kMaxAlpha, s.opacity * std::exp(-0.5 * mahalanobis2));
  return alpha < kMinAlpha ? 0.0 : alpha;
}

IndexImage rasterize_index_image(const GaussianScene& scene, const Camera& camera, const RasterOptions& options) {
  camera.validate();
  if (options.tile_size <= 0) throw Error(ErrorCode::InvalidArgument, "tile size must be positive");

  IndexImage image;
  image.grid = PixelGrid{camera.width, camera.height};
  image.index.assign(image.grid.size(), kEmpty);
  image.depth.assign(image.grid.size(), 0.0);
  image.contribution.assign(image.grid.size(), 0.0);

  std::vector<Splat2D> splats = project_splats(scene, camera);
  std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.id < b.id;
  });

  const int ts = options.tile_size;
  const int tiles_x = (camera.width + ts - 1) / ts;
  const int tiles_y = (camera.height + ts - 1) / ts;
  // Per-tile lists of splat positions, front to back.
  std::vector<std::vector<std::uint32_t>> tiles(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::uint32_t i = 0; i < splats.size(); ++i) {
    const Splat2D& s = splats[i];
    for (int ty = s.min_row / ts; ty <= s.max_row / ts; ++ty)
      for (int tx = s.min_col / ts; tx <= s.max_col / ts; ++tx) tiles[ty * tiles_x + tx].push_back(i);
  }

  // Within a tile, splats are visited front to back and each one only touches
  // the pixels of its footprint; per-pixel state carries the blend.
  auto render_tile = [&](int tile) {
    const int tx = tile % tiles_x;
    const int ty = tile / tiles_x;
    const auto& list = tiles[tile];
    if (list.empty()) return;
    const int row0 = ty * ts, col0 = tx * ts;
    const int row_end = std::min(camera.height, row0 + ts);
    const int col_end = std::min(camera.width, col0 + ts);
    const int tw = col_end - col0;
    const int th = row_end - row0;
    std::vector<double> transmittance(static_cast<std::size_t>(tw) * th, 1.0);
    std::vector<double> best(transmittance.size(), -1.0);
    std::vector<const Splat2D*> winner(transmittance.size(), nullptr);
    int open_pixels = tw * th;
    for (std::uint32_t i : list) {
      const Splat2D& s = splats[i];
      const int r0 = std::max(row0, s.min_row), r1 = std::min(row_end - 1, s.max_row);
      const int c0 = std::max(col0, s.min_col), c1 = std::min(col_end - 1, s.max_col);
      for (int row = r0; row <= r1; ++row) {
        for (int col = c0; col <= c1; ++col) {
          const std::size_t k = static_cast<std::size_t>(row - row0) * tw + (col - col0);
          double& t = transmittance[k];
          if (t < kMinTransmittance) continue;
          const double alpha = splat_alpha(s, col + 0.5, row + 0.5);
          if (alpha == 0.0) continue;
          const double w = alpha * t;
          if (w > best[k]) {
            best[k] = w;
            winner[k] = &s;
          }
          t *= 1.0 - alpha;
          if (t < kMinTransmittance) --open_pixels;
        }
      }
      if (open_pixels == 0) break;
    }
    for (int row = row0; row < row_end; ++row)
      for (int col = col0; col < col_end; ++col) {
        const std::size_t k = static_cast<std::size_t>(row - row0) * tw + (col - col0);
        if (!winner[k]) continue;
        const std::size_t p = static_cast<std::size_t>(row) * camera.width + col;
        image.index[p] = winner[k]->id;
        image.depth[p] = winner[k]->depth;
        image.contribution[p] = best[k];
      }
  };

  const int tile_count = tiles_x * tiles_y;
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(tile_count));
  if (threads <= 1) {
    for (int t = 0; t < tile_count; ++t) render_tile(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int t = next++; t < tile_count; t = next++) render_tile(t);
      });
  }
  return image;
}

std::uint32_t lookup(const IndexImage& image, const Vec2& p) {
  if (!image.grid.contains(p))
    throw Error(ErrorCode::Bounds, "screen point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                                       ") is outside the image");
  return image.index[image.grid.index_of(p)];
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error(ErrorCode::Io, "cannot write PNG: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(r) * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

void write_index_debug(const IndexImage& image, const std::filesystem::path& prefix) {
  const std::size_t n = image.grid.size();
  std::vector<std::uint8_t> rgb(n * 3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (image.index[i] == kEmpty) continue;
    const std::uint64_t h = mix64(image.index[i]);
    // Keep colors away from the black background.
    rgb[3 * i + 0] = static_cast<std::uint8_t>(64 + (h & 0xBF));
    rgb[3 * i + 1] = static_cast<std::uint8_t>(64 + ((h >> 8) & 0xBF));
    rgb[3 * i + 2] = static_cast<std::uint8_t>(64 + ((h >> 16) & 0xBF));
  }
  auto png_path = prefix;
  png_path += ".png";
  write_png(png_path, image.width(), image.height(), rgb);

  auto raw_path = prefix;
  raw_path += ".raw";
  std::ofstream out(raw_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write sidecar: " + raw_path.string());
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(image.width()), static_cast<std::uint32_t>(image.height())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(image.index.data()), static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
  std::vector<float> depth(image.depth.begin(), image.depth.end());
  out.write(reinterpret_cast<const char*>(depth.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!out) throw Error(ErrorCode::Io, "failed writing sidecar: " + raw_path.string());
}

IndexImage read_index_sidecar(const std::filesystem::path& raw_path) {
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open sidecar: " + raw_path.string());
  std::uint32_t dims[2] = {0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[0] == 0 || dims[1] == 0) throw Error(ErrorCode::Format, "sidecar header is invalid");
  IndexImage image;
  image.grid = PixelGrid{static_cast<int>(dims[0]), static_cast<int>(dims[1])};
  const std::size_t n = image.grid.size();
  image.index.resize(n);
  in.read(reinterpret_cast<char*>(image.index.data()), static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
  std::vector<float> depth(n);
  in.read(reinterpret_cast<char*>(depth.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw Error(ErrorCode::Format, "sidecar is truncated");
  image.depth.assign(depth.begin(), depth.end());
  image.contribution.assign(n, 0.0);
  return image;
}

}  // namespace sketchrod
