#include "tdet/turbulence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tdet/rng.hpp"

namespace tdet::turbulence {

namespace {

enum Stream : std::uint64_t { kPsfStream = 1, kWarpStream = 2, kTileStream = 3, kNoiseStream = 4 };

constexpr double kTinyScale = 1e-6;
constexpr int kDiskSupersample = 8;

int kernel_side_for(double extent) {
  const int half = static_cast<int>(std::ceil(extent));
  return std::clamp(2 * half + 1, kMinKernelSide, kMaxKernelSide);
}

PsfKernel normalised(int side, const std::vector<double>& raw) {
  double total = 0.0;
  for (double v : raw) total += v;
  if (!(total > 0.0)) return delta_kernel();
  PsfKernel k;
  k.side = side;
  k.weights.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) k.weights[i] = static_cast<float>(raw[i] / total);
  return k;
}

int clamp_index(int v, int size) { return std::clamp(v, 0, size - 1); }

// Edge-clamped bilinear read of one channel at a continuous position.
double sample_clamped(const FloatImage& img, int c, double x, double y) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double ax = x - fx0;
  const double ay = y - fy0;
  // Clamp before the int conversion so far-away positions stay defined.
  const double lim_x = static_cast<double>(img.width);
  const double lim_y = static_cast<double>(img.height);
  const int x0 = static_cast<int>(std::clamp(fx0, -1.0, lim_x));
  const int y0 = static_cast<int>(std::clamp(fy0, -1.0, lim_y));
  const int xa = clamp_index(x0, img.width);
  const int xb = clamp_index(x0 + 1, img.width);
  const int ya = clamp_index(y0, img.height);
  const int yb = clamp_index(y0 + 1, img.height);
  const double v00 = img.at(xa, ya, c);
  const double v01 = img.at(xb, ya, c);
  const double v10 = img.at(xa, yb, c);
  const double v11 = img.at(xb, yb, c);
  return (1.0 - ay) * ((1.0 - ax) * v00 + ax * v01) + ay * ((1.0 - ax) * v10 + ax * v11);
}

// Tile pair and blend weight along one axis for pixel index `p`.
struct AxisBlend {
  int first;
  int second;
  float weight;  // contribution of `second`
};

AxisBlend axis_blend(int p, int tile_size, int tiles) {
  const int t = p / tile_size;
  const double centre = p + 0.5;
  const double half_band = kBlendBand / 2.0;
  const double from_left = centre - static_cast<double>(t) * tile_size;
  const double to_right = static_cast<double>(t + 1) * tile_size - centre;
  if (t > 0 && from_left < half_band) {
    return {t, t - 1, static_cast<float>((half_band - from_left) / kBlendBand)};
  }
  if (t + 1 < tiles && to_right < half_band) {
    return {t, t + 1, static_cast<float>((half_band - to_right) / kBlendBand)};
  }
  return {t, t, 0.0f};
}

float lerp_exact(float a, float b, float t) { return a + t * (b - a); }

}  // namespace

void DegradeConfig::validate() const {
  const auto fail = [](const std::string& what) {
    throw std::invalid_argument("degrade config: " + what);
  };
  if (!(max_displacement >= 0.0) || !std::isfinite(max_displacement)) {
    fail("max_displacement must be >= 0");
  }
  if (cell_size < 1) fail("cell_size must be >= 1");
  if (!(psf_sigma_min >= 0.0 && psf_sigma_min <= psf_sigma_max) || !std::isfinite(psf_sigma_max)) {
    fail("psf sigma range must satisfy 0 <= min <= max");
  }
  if (!(psf_radius_min >= 0.0 && psf_radius_min <= psf_radius_max) ||
      !std::isfinite(psf_radius_max)) {
    fail("psf radius range must satisfy 0 <= min <= max");
  }
  if (!(noise_sigma >= 0.0 && noise_sigma <= 0.1)) fail("noise_sigma must lie in [0, 0.1]");
  if (tile_size < 8) fail("tile_size must be >= 8");
}

DegradeConfig DegradeConfig::identity(std::uint64_t seed) {
  DegradeConfig c;
  c.seed = seed;
  c.max_displacement = 0.0;
  c.psf_sigma_min = c.psf_sigma_max = 0.0;
  c.psf_radius_min = c.psf_radius_max = 0.0;
  c.noise_sigma = 0.0;
  return c;
}

PsfKernel delta_kernel() {
  PsfKernel k;
  k.side = kMinKernelSide;
  k.weights.assign(kMinKernelSide * kMinKernelSide, 0.0f);
  k.weights[k.weights.size() / 2] = 1.0f;
  return k;
}

PsfKernel gaussian_kernel(double sigma) {
  if (sigma <= kTinyScale) return delta_kernel();
  const int side = kernel_side_for(3.0 * sigma);
  const int r = side / 2;
  std::vector<double> raw(static_cast<std::size_t>(side) * side);
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      raw[static_cast<std::size_t>(y + r) * side + (x + r)] =
          std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
    }
  }
  return normalised(side, raw);
}

PsfKernel disk_kernel(double radius) {
  if (radius <= kTinyScale) return delta_kernel();
  const int side = kernel_side_for(radius);
  const int r = side / 2;
  std::vector<double> raw(static_cast<std::size_t>(side) * side);
  const double r2 = radius * radius;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      int inside = 0;
      for (int sy = 0; sy < kDiskSupersample; ++sy) {
        for (int sx = 0; sx < kDiskSupersample; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) / kDiskSupersample;
          const double py = y - 0.5 + (sy + 0.5) / kDiskSupersample;
          if (px * px + py * py <= r2) ++inside;
        }
      }
      raw[static_cast<std::size_t>(y + r) * side + (x + r)] = inside;
    }
  }
  return normalised(side, raw);
}

PsfBank make_psf_bank(const DegradeConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, kPsfStream));
  PsfBank bank;
  for (int i = 0; i < kBankSize; ++i) {
    if (i < kGaussianKernels) {
      bank.kernels[i] = gaussian_kernel(rng.uniform(config.psf_sigma_min, config.psf_sigma_max));
    } else {
      bank.kernels[i] = disk_kernel(rng.uniform(config.psf_radius_min, config.psf_radius_max));
    }
  }
  return bank;
}

WarpField WarpField::constant(int width, int height, double dx, double dy) {
  WarpField f;
  f.width = width;
  f.height = height;
  f.max_displacement = std::max(std::abs(dx), std::abs(dy));
  f.dx.assign(static_cast<std::size_t>(width) * height, dx);
  f.dy.assign(static_cast<std::size_t>(width) * height, dy);
  return f;
}

WarpField WarpField::negated() const {
  WarpField f = *this;
  for (double& v : f.dx) v = -v;
  for (double& v : f.dy) v = -v;
  return f;
}

std::array<double, 2> WarpField::sample(double x, double y) const {
  const double cx = std::clamp(x, 0.0, static_cast<double>(width - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double ax = cx - x0;
  const double ay = cy - y0;
  const auto interp = [&](const std::vector<double>& v) {
    const auto at = [&](int xx, int yy) { return v[static_cast<std::size_t>(yy) * width + xx]; };
    return (1.0 - ay) * ((1.0 - ax) * at(x0, y0) + ax * at(x1, y0)) +
           ay * ((1.0 - ax) * at(x0, y1) + ax * at(x1, y1));
  };
  return {interp(dx), interp(dy)};
}

WarpField gen_warp_field(int width, int height, const DegradeConfig& config) {
  config.validate();
  if (width < config.cell_size || height < config.cell_size) {
    throw std::invalid_argument("gen_warp_field: image smaller than one warp cell");
  }
  const int cell = config.cell_size;
  const int nodes_x = (width + cell - 1) / cell + 1;
  const int nodes_y = (height + cell - 1) / cell + 1;
  const double d = config.max_displacement;
  std::vector<double> node_dx(static_cast<std::size_t>(nodes_x) * nodes_y);
  std::vector<double> node_dy(node_dx.size());
  Rng rng(derive_seed(config.seed, kWarpStream));
  for (std::size_t i = 0; i < node_dx.size(); ++i) {
    node_dx[i] = d * (2.0 * rng.uniform() - 1.0);
    node_dy[i] = d * (2.0 * rng.uniform() - 1.0);
  }

  WarpField f;
  f.width = width;
  f.height = height;
  f.max_displacement = d;
  f.dx.resize(static_cast<std::size_t>(width) * height);
  f.dy.resize(f.dx.size());
  for (int y = 0; y < height; ++y) {
    const int j = y / cell;
    const double ay = static_cast<double>(y - j * cell) / cell;
    for (int x = 0; x < width; ++x) {
      const int i = x / cell;
      const double ax = static_cast<double>(x - i * cell) / cell;
      const auto node = [&](const std::vector<double>& v, int ii, int jj) {
        return v[static_cast<std::size_t>(jj) * nodes_x + ii];
      };
      const auto up = [&](const std::vector<double>& v) {
        const double value = (1.0 - ay) * ((1.0 - ax) * node(v, i, j) + ax * node(v, i + 1, j)) +
                             ay * ((1.0 - ax) * node(v, i, j + 1) + ax * node(v, i + 1, j + 1));
        return std::clamp(value, -d, d);
      };
      f.dx[static_cast<std::size_t>(y) * width + x] = up(node_dx);
      f.dy[static_cast<std::size_t>(y) * width + x] = up(node_dy);
    }
  }
  return f;
}

TileAssignment assign_tiles(int width, int height, const DegradeConfig& config) {
  config.validate();
  TileAssignment t;
  t.tile_size = config.tile_size;
  t.tiles_x = (width + config.tile_size - 1) / config.tile_size;
  t.tiles_y = (height + config.tile_size - 1) / config.tile_size;
  t.kernel.resize(static_cast<std::size_t>(t.tiles_x) * t.tiles_y);
  Rng rng(derive_seed(config.seed, kTileStream));
  for (int& k : t.kernel) {
    const double u = rng.uniform();
    k = u < kIdentityTileProbability ? -1 : static_cast<int>(rng.below(kBankSize));
  }
  return t;
}

FloatImage convolve_clamped(const FloatImage& img, const PsfKernel& kernel) {
  FloatImage out(img.width, img.height, img.channels);
  const int r = kernel.side / 2;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        float acc = 0.0f;
        for (int ky = 0; ky < kernel.side; ++ky) {
          const int sy = clamp_index(y + ky - r, img.height);
          for (int kx = 0; kx < kernel.side; ++kx) {
            const int sx = clamp_index(x + kx - r, img.width);
            acc += kernel.at(ky, kx) * img.at(sx, sy, c);
          }
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

FloatImage blur_tiles(const FloatImage& img, const PsfBank& bank, const TileAssignment& tiles) {
  if (tiles.tiles_x * tiles.tile_size < img.width || tiles.tiles_y * tiles.tile_size < img.height ||
      tiles.kernel.size() != static_cast<std::size_t>(tiles.tiles_x) * tiles.tiles_y) {
    throw std::invalid_argument("blur_tiles: tile assignment does not cover the image");
  }
  // Filtered copies per kernel actually referenced; slot kBankSize = unblurred.
  std::array<FloatImage, kBankSize + 1> filtered;
  std::array<bool, kBankSize + 1> ready{};
  const auto slot = [](int k) { return k < 0 ? kBankSize : k; };
  for (int k : tiles.kernel) {
    const int s = slot(k);
    if (ready[s]) continue;
    filtered[s] = k < 0 ? img : convolve_clamped(img, bank.kernels[k]);
    ready[s] = true;
  }

  FloatImage out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    const AxisBlend by = axis_blend(y, tiles.tile_size, tiles.tiles_y);
    for (int x = 0; x < img.width; ++x) {
      const AxisBlend bx = axis_blend(x, tiles.tile_size, tiles.tiles_x);
      const FloatImage& f00 = filtered[slot(tiles.at(bx.first, by.first))];
      const FloatImage& f01 = filtered[slot(tiles.at(bx.second, by.first))];
      const FloatImage& f10 = filtered[slot(tiles.at(bx.first, by.second))];
      const FloatImage& f11 = filtered[slot(tiles.at(bx.second, by.second))];
      for (int c = 0; c < img.channels; ++c) {
        const float top = lerp_exact(f00.at(x, y, c), f01.at(x, y, c), bx.weight);
        const float bottom = lerp_exact(f10.at(x, y, c), f11.at(x, y, c), bx.weight);
        out.at(x, y, c) = lerp_exact(top, bottom, by.weight);
      }
    }
  }
  return out;
}

FloatImage apply_spatially_variant_blur(const FloatImage& img, const PsfBank& bank,
                                        const DegradeConfig& config) {
  if (img.width < config.tile_size || img.height < config.tile_size) {
    throw std::invalid_argument("apply_spatially_variant_blur: image smaller than one tile");
  }
  return blur_tiles(img, bank, assign_tiles(img.width, img.height, config));
}

FloatImage warp_image(const FloatImage& img, const WarpField& field) {
  if (field.width != img.width || field.height != img.height) {
    throw std::invalid_argument("warp_image: field " + std::to_string(field.width) + "x" +
                                std::to_string(field.height) + " does not match image " +
                                std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  FloatImage out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double sx = x + field.dx_at(x, y);
      const double sy = y + field.dy_at(x, y);
      for (int c = 0; c < img.channels; ++c) {
        out.at(x, y, c) = static_cast<float>(sample_clamped(img, c, sx, sy));
      }
    }
  }
  return out;
}

std::vector<BoxAnnotation> transform_boxes(const std::vector<BoxAnnotation>& boxes,
                                           const WarpField& field) {
  constexpr int kPerSide = kBoundarySamples / 4;
  std::vector<BoxAnnotation> out;
  out.reserve(boxes.size());
  for (const BoxAnnotation& ann : boxes) {
    const double x0 = ann.box.xmin;
    const double y0 = ann.box.ymin;
    const double x1 = ann.box.xmax;
    const double y1 = ann.box.ymax;
    double lo_x = INFINITY, lo_y = INFINITY, hi_x = -INFINITY, hi_y = -INFINITY;
    const auto visit = [&](double qx, double qy) {
      // Box coordinates are continuous; field samples sit at pixel centres.
      const auto d = field.sample(qx - 0.5, qy - 0.5);
      const double mx = qx + d[0];
      const double my = qy + d[1];
      lo_x = std::min(lo_x, mx);
      hi_x = std::max(hi_x, mx);
      lo_y = std::min(lo_y, my);
      hi_y = std::max(hi_y, my);
    };
    for (int i = 0; i < kPerSide; ++i) {
      const double t = static_cast<double>(i) / kPerSide;
      visit(x0 + (x1 - x0) * t, y0);
      visit(x1, y0 + (y1 - y0) * t);
      visit(x1 - (x1 - x0) * t, y1);
      visit(x0, y1 - (y1 - y0) * t);
    }
    Box hull{static_cast<float>(lo_x), static_cast<float>(lo_y), static_cast<float>(hi_x),
             static_cast<float>(hi_y)};
    hull = clip_box(hull, static_cast<float>(field.width), static_cast<float>(field.height));
    if (!hull.valid() || static_cast<double>(hull.width()) * hull.height() < kMinBoxArea) continue;
    out.push_back({ann.class_id, hull});
  }
  return out;
}

Degraded degrade_with_field(const Image& img, const std::vector<BoxAnnotation>& boxes,
                            const WarpField& field, const DegradeConfig& config) {
  config.validate();
  img.validate();
  const FloatImage warped = warp_image(to_float(img), field);
  FloatImage blurred = apply_spatially_variant_blur(warped, make_psf_bank(config), config);
  if (config.noise_sigma > 0.0) {
    Rng rng(derive_seed(config.seed, kNoiseStream));
    for (float& v : blurred.data) {
      v = static_cast<float>(v + config.noise_sigma * rng.normal());
    }
  }
  // Content moves by -field under backward warping, so annotations follow it.
  return {quantize(blurred), transform_boxes(boxes, field.negated())};
}

Degraded degrade(const Image& img, const std::vector<BoxAnnotation>& boxes,
                 const DegradeConfig& config) {
  return degrade_with_field(img, boxes, gen_warp_field(img.width, img.height, config), config);
}

}  // namespace tdet::turbulence
