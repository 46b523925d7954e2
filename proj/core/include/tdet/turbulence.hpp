#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tdet/boxes.hpp"
#include "tdet/image.hpp"

namespace tdet::turbulence {

inline constexpr int kBankSize = 9;
inline constexpr int kGaussianKernels = 5;  // followed by 4 defocus disks
inline constexpr int kMinKernelSide = 3;
inline constexpr int kMaxKernelSide = 15;
inline constexpr double kIdentityTileProbability = 0.2;
inline constexpr int kBlendBand = 4;
inline constexpr int kBoundarySamples = 64;
inline constexpr double kMinBoxArea = 4.0;

struct DegradeConfig {
  std::uint64_t seed = 0;
  double max_displacement = 1.5;  // D, pixels
  int cell_size = 16;             // coarse warp grid spacing, pixels
  double psf_sigma_min = 0.4;     // Gaussian strength range
  double psf_sigma_max = 1.2;
  double psf_radius_min = 0.5;  // defocus disk size range
  double psf_radius_max = 1.5;
  double noise_sigma = 0.02;
  int tile_size = 16;

  // Throws std::invalid_argument on empty/negative ranges or out-of-range values.
  void validate() const;

  // D = 0, delta PSFs, no noise: degrade() becomes a bit-exact passthrough.
  static DegradeConfig identity(std::uint64_t seed = 0);
};

// Odd-sided, non-negative kernel normalised to unit sum.
struct PsfKernel {
  int side = 1;
  std::vector<float> weights;  // side * side, row-major

  float at(int dy, int dx) const {
    return weights[static_cast<std::size_t>(dy) * side + dx];
  }
};

struct PsfBank {
  std::array<PsfKernel, kBankSize> kernels;
};

PsfKernel gaussian_kernel(double sigma);
PsfKernel disk_kernel(double radius);
PsfKernel delta_kernel();

// 5 Gaussians (sigma ~ U[psf_sigma_min, psf_sigma_max]) then 4 disks
// (radius ~ U[psf_radius_min, psf_radius_max]); deterministic per seed.
PsfBank make_psf_bank(const DegradeConfig& config);

// Per-pixel displacement (dx, dy), the bilinear upsampling of a coarse grid
// of i.i.d. U[-D, D]^2 nodes placed every cell_size pixels.
struct WarpField {
  int width = 0;
  int height = 0;
  double max_displacement = 0.0;
  std::vector<double> dx;
  std::vector<double> dy;

  double dx_at(int x, int y) const { return dx[static_cast<std::size_t>(y) * width + x]; }
  double dy_at(int x, int y) const { return dy[static_cast<std::size_t>(y) * width + x]; }

  static WarpField constant(int width, int height, double dx, double dy);
  WarpField negated() const;
  // Bilinear, edge-clamped evaluation at a continuous pixel-index position.
  std::array<double, 2> sample(double x, double y) const;
};

WarpField gen_warp_field(int width, int height, const DegradeConfig& config);

// Kernel index per tile, row-major; -1 means the tile is left unblurred.
struct TileAssignment {
  int tile_size = 0;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<int> kernel;

  int at(int tx, int ty) const { return kernel[static_cast<std::size_t>(ty) * tiles_x + tx]; }
};

TileAssignment assign_tiles(int width, int height, const DegradeConfig& config);

// Edge-clamped 2-D filtering of every channel with one kernel.
FloatImage convolve_clamped(const FloatImage& img, const PsfKernel& kernel);

// Tile-local PSFs blended linearly across a 4-px band around tile borders.
FloatImage blur_tiles(const FloatImage& img, const PsfBank& bank, const TileAssignment& tiles);
FloatImage apply_spatially_variant_blur(const FloatImage& img, const PsfBank& bank,
                                        const DegradeConfig& config);

// Backward warp: out(p) = in(p + field(p)), bilinear with edge clamp.
FloatImage warp_image(const FloatImage& img, const WarpField& field);

// Maps 64 boundary samples of each box through q -> q + field(q) and returns
// the clipped axis-aligned hull; hulls under 4 px^2 are dropped.
std::vector<BoxAnnotation> transform_boxes(const std::vector<BoxAnnotation>& boxes,
                                           const WarpField& field);

struct Degraded {
  Image image;
  std::vector<BoxAnnotation> boxes;
};

// warp -> spatially variant blur -> additive Gaussian noise -> clamp/quantise.
Degraded degrade(const Image& img, const std::vector<BoxAnnotation>& boxes,
                 const DegradeConfig& config);

// Same pipeline with an explicit warp field (used for controlled experiments).
Degraded degrade_with_field(const Image& img, const std::vector<BoxAnnotation>& boxes,
                            const WarpField& field, const DegradeConfig& config);

}  // namespace tdet::turbulence
