#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "occkit/errors.hpp"
#include "occkit/math.hpp"

namespace occkit {

using VoxelIndex = std::array<int, 3>;
using BevIndex = std::array<int, 2>;
using Vec2 = std::array<double, 2>;

namespace detail {

// Fractional grid coordinate (p - lo) / step, snapped to the nearest integer
// when the quotient sits within kGridSnapTol of one. Plain floor would push
// points that lie mathematically on a cell boundary into the wrong cell
// whenever the division rounds down (e.g. (0-(-40))/0.4 evaluates just below
// 100). The snap keeps the lower-inclusive / upper-exclusive convention
// consistent at boundaries.
inline constexpr double kGridSnapTol = 1e-6;

inline double grid_coord(double v, double lo, double step) {
  const double q = (v - lo) / step;
  const double r = std::round(q);
  return (std::abs(q - r) <= kGridSnapTol) ? r : q;
}

}  // namespace detail

// Axis-aligned voxel lattice over an ego-centred box. dims is derived from
// the ranges and voxel size; construction rejects ranges that are not an
// integer number of voxels (within 1e-9 m).
struct GridGeometry {
  std::array<double, 2> x_range{0.0, 1.0};
  std::array<double, 2> y_range{0.0, 1.0};
  std::array<double, 2> z_range{0.0, 1.0};
  Vec3 voxel_size{1.0, 1.0, 1.0};
  std::array<int, 3> dims{1, 1, 1};

  static GridGeometry create(std::array<double, 2> xr, std::array<double, 2> yr,
                             std::array<double, 2> zr, Vec3 voxel) {
    GridGeometry g;
    g.x_range = xr;
    g.y_range = yr;
    g.z_range = zr;
    g.voxel_size = voxel;
    const std::array<std::array<double, 2>, 3> ranges{xr, yr, zr};
    for (int a = 0; a < 3; ++a) {
      const double size = voxel[a];
      if (!(size > 0.0)) throw std::invalid_argument("voxel_size must be strictly positive");
      const double span = ranges[a][1] - ranges[a][0];
      if (!(span > 0.0)) throw std::invalid_argument("grid range must be non-empty");
      const double n = std::round(span / size);
      if (n < 1.0 || std::abs(n * size - span) > 1e-9) {
        throw std::invalid_argument("grid range is not an integer number of voxels");
      }
      g.dims[a] = static_cast<int>(n);
    }
    return g;
  }

  double range_min(int axis) const {
    return axis == 0 ? x_range[0] : axis == 1 ? y_range[0] : z_range[0];
  }
  double range_max(int axis) const {
    return axis == 0 ? x_range[1] : axis == 1 ? y_range[1] : z_range[1];
  }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t bev_cell_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  }

  // Voxel order is x-major: flat = (x * dims_y + y) * dims_z + z.
  std::size_t flat_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(iy)) * static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(iz);
  }
  std::size_t flat_index(const VoxelIndex& v) const { return flat_index(v[0], v[1], v[2]); }

  std::size_t bev_index(int ix, int iy) const {
    return static_cast<std::size_t>(ix) * static_cast<std::size_t>(dims[1]) +
           static_cast<std::size_t>(iy);
  }

  bool contains_index(const VoxelIndex& v) const {
    return v[0] >= 0 && v[0] < dims[0] && v[1] >= 0 && v[1] < dims[1] && v[2] >= 0 &&
           v[2] < dims[2];
  }

  Vec3 voxel_center(int ix, int iy, int iz) const {
    return {x_range[0] + (ix + 0.5) * voxel_size.x,
            y_range[0] + (iy + 0.5) * voxel_size.y,
            z_range[0] + (iz + 0.5) * voxel_size.z};
  }
  Vec3 voxel_center(const VoxelIndex& v) const { return voxel_center(v[0], v[1], v[2]); }

  Vec2 bev_cell_center(int ix, int iy) const {
    return {x_range[0] + (ix + 0.5) * voxel_size.x, y_range[0] + (iy + 0.5) * voxel_size.y};
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

// Lower bounds inclusive, upper bounds exclusive.
inline std::optional<VoxelIndex> world_to_voxel(const Vec3& p, const GridGeometry& g) {
  VoxelIndex idx{};
  for (int a = 0; a < 3; ++a) {
    const double q = detail::grid_coord(p[a], g.range_min(a), g.voxel_size[a]);
    const int i = static_cast<int>(std::floor(q));
    if (i < 0 || i >= g.dims[a]) return std::nullopt;
    idx[static_cast<std::size_t>(a)] = i;
  }
  return idx;
}

inline std::optional<BevIndex> world_to_bev_cell(double x, double y, const GridGeometry& g) {
  const int ix = static_cast<int>(std::floor(detail::grid_coord(x, g.x_range[0], g.voxel_size.x)));
  const int iy = static_cast<int>(std::floor(detail::grid_coord(y, g.y_range[0], g.voxel_size.y)));
  if (ix < 0 || ix >= g.dims[0] || iy < 0 || iy >= g.dims[1]) return std::nullopt;
  return BevIndex{ix, iy};
}

// Occ3D-nuScenes protocol grid: x,y in [-40,40] m, z in [-1,5.4] m, cubic
// 0.4 m voxels, i.e. 200 x 200 x 16 cells.
inline GridGeometry official_geometry() {
  return GridGeometry::create({-40.0, 40.0}, {-40.0, 40.0}, {-1.0, 5.4}, {0.4, 0.4, 0.4});
}

// Uniform depth bins over [d_min, d_max): bin i starts at
// d_min + i * (d_max - d_min) / B.
struct DepthBinning {
  double d_min = 1.0;
  double d_max = 45.0;
  int bin_count = 44;

  void validate() const {
    if (!(d_min < d_max)) throw std::invalid_argument("DepthBinning requires d_min < d_max");
    if (bin_count < 1) throw std::invalid_argument("DepthBinning requires at least one bin");
  }

  double bin_width() const { return (d_max - d_min) / bin_count; }
  double bin_value(int i) const { return d_min + i * (d_max - d_min) / bin_count; }
  double bin_center(int i) const { return bin_value(i) + 0.5 * bin_width(); }

  std::optional<int> containing_bin(double depth) const {
    const double q = detail::grid_coord(depth, d_min, bin_width());
    const int i = static_cast<int>(std::floor(q));
    if (i < 0 || i >= bin_count) return std::nullopt;
    return i;
  }
};

// Pinhole camera with a rigid camera-to-ego transform. Camera frame is
// x right, y down, z forward (depth).
struct CameraModel {
  Mat3 intrinsics = Mat3::identity();
  Mat4 extrinsic = Mat4::identity();
  int width = 0;
  int height = 0;

  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("image_size must be positive");
    if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
      throw std::invalid_argument("intrinsics focal entries must be positive");
    }
    if (intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0) {
      throw std::invalid_argument("intrinsics must have zero lower-triangular entries");
    }
    const Mat3 r = extrinsic.rotation();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double dot_ij = 0.0;
        for (int k = 0; k < 3; ++k) dot_ij += r(k, i) * r(k, j);
        const double expected = (i == j) ? 1.0 : 0.0;
        if (std::abs(dot_ij - expected) > 1e-6) {
          throw std::invalid_argument("extrinsic rotation block is not orthonormal");
        }
      }
    }
  }

  // Pixel (u,v) at depth d unprojects to camera coordinates
  // (d*(u-cx)/fx, d*(v-cy)/fy, d), then extrinsic maps camera to ego.
  Vec3 unproject(double u, double v, double depth) const {
    const double fx = intrinsics(0, 0), fy = intrinsics(1, 1);
    const double cx = intrinsics(0, 2), cy = intrinsics(1, 2);
    const Vec3 cam{depth * (u - cx) / fx, depth * (v - cy) / fy, depth};
    return extrinsic.apply_point(cam);
  }

  Vec3 center() const { return extrinsic.translation(); }

  Vec3 ray_direction(double u, double v) const {
    const double fx = intrinsics(0, 0), fy = intrinsics(1, 1);
    const double cx = intrinsics(0, 2), cy = intrinsics(1, 2);
    return normalized(extrinsic.apply_direction({(u - cx) / fx, (v - cy) / fy, 1.0}));
  }
};

// Dense semantic + instance label volume. Instance id 0 means "no instance";
// any voxel carrying a nonzero instance id must hold a non-free class.
struct VoxelGrid {
  GridGeometry geometry;
  int class_count = 1;
  int free_class = 0;
  std::vector<std::uint8_t> semantics;
  std::vector<std::uint16_t> instances;

  // free_class < 0 selects the convention default C-1 (free space last).
  static VoxelGrid filled_free(const GridGeometry& g, int class_count, int free_class = -1) {
    if (class_count < 1 || class_count > 256) {
      throw std::invalid_argument("class_count must be in [1, 256]");
    }
    VoxelGrid grid;
    grid.geometry = g;
    grid.class_count = class_count;
    grid.free_class = free_class < 0 ? class_count - 1 : free_class;
    if (grid.free_class >= class_count) throw std::invalid_argument("free_class out of range");
    grid.semantics.assign(g.cell_count(), static_cast<std::uint8_t>(grid.free_class));
    grid.instances.assign(g.cell_count(), 0);
    return grid;
  }

  std::uint8_t semantic_at(int ix, int iy, int iz) const {
    return semantics[geometry.flat_index(ix, iy, iz)];
  }
  std::uint16_t instance_at(int ix, int iy, int iz) const {
    return instances[geometry.flat_index(ix, iy, iz)];
  }

  void set(int ix, int iy, int iz, std::uint8_t cls, std::uint16_t inst = 0) {
    const std::size_t f = geometry.flat_index(ix, iy, iz);
    semantics[f] = cls;
    instances[f] = inst;
  }

  bool is_free(std::size_t flat) const { return semantics[flat] == free_class; }

  void validate() const {
    const std::size_t n = geometry.cell_count();
    if (semantics.size() != n || instances.size() != n) {
      throw shape_error("VoxelGrid payload size does not match geometry");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (semantics[i] >= class_count) {
        throw shape_error("VoxelGrid semantic id exceeds class_count");
      }
      if (instances[i] != 0 && semantics[i] == free_class) {
        throw shape_error("VoxelGrid instance id on a free voxel");
      }
    }
  }
};

// 2D feature map over the ground plane, x-major: (x * dims_y + y) * channels + c.
struct BEVGrid {
  GridGeometry geometry;
  int channels = 0;
  std::vector<double> data;

  static BEVGrid zeros(const GridGeometry& g, int channels) {
    if (channels < 1) throw std::invalid_argument("BEVGrid needs at least one channel");
    BEVGrid b;
    b.geometry = g;
    b.channels = channels;
    b.data.assign(g.bev_cell_count() * static_cast<std::size_t>(channels), 0.0);
    return b;
  }

  double at(int ix, int iy, int c) const {
    return data[(geometry.bev_index(ix, iy)) * static_cast<std::size_t>(channels) +
                static_cast<std::size_t>(c)];
  }
  double& at(int ix, int iy, int c) {
    return data[(geometry.bev_index(ix, iy)) * static_cast<std::size_t>(channels) +
                static_cast<std::size_t>(c)];
  }

  bool same_shape(const BEVGrid& o) const {
    return geometry == o.geometry && channels == o.channels;
  }

  void validate() const {
    if (data.size() != geometry.bev_cell_count() * static_cast<std::size_t>(channels)) {
      throw shape_error("BEVGrid payload size does not match geometry");
    }
    for (double v : data) {
      if (!std::isfinite(v)) throw shape_error("BEVGrid entry is not finite");
    }
  }
};

// Per-pixel context feature plus a depth distribution on the B-simplex.
struct PixelLift {
  std::vector<double> feature;
  std::vector<double> depth_probs;
  double u = 0.0;
  double v = 0.0;
  int camera_index = 0;

  void validate() const {
    double sum = 0.0;
    for (double p : depth_probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("depth_probs entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("depth_probs must sum to 1 within 1e-9");
    }
  }

  void normalize() {
    double sum = 0.0;
    for (double p : depth_probs) sum += p;
    if (sum > 0.0) {
      for (double& p : depth_probs) p /= sum;
    }
  }
};

// Anisotropic 3D Gaussian with diagonal covariance diag(sigma^2) and a
// per-channel feature weight.
struct GaussianPrimitive {
  Vec3 mean{};
  Vec3 sigma{1.0, 1.0, 1.0};
  double opacity = 1.0;
  std::vector<double> weight;

  void validate() const {
    if (!(sigma.x > 0.0 && sigma.y > 0.0 && sigma.z > 0.0)) {
      throw std::invalid_argument("GaussianPrimitive sigma must be positive");
    }
    if (!(opacity >= 0.0 && opacity <= 1.0)) {
      throw std::invalid_argument("GaussianPrimitive opacity must be in [0,1]");
    }
    if (!all_finite(mean) || !all_finite(sigma) || !std::isfinite(opacity)) {
      throw std::invalid_argument("GaussianPrimitive fields must be finite");
    }
    for (double w : weight) {
      if (!std::isfinite(w)) throw std::invalid_argument("GaussianPrimitive weight not finite");
    }
  }
};

// A loss value together with its analytic gradient. The gradient layout
// mirrors whatever the loss differentiates with respect to (documented per
// operation).
struct ScalarWithGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Every loss coefficient in one place. Defaults follow the reference
// configuration: Gaussian branch 5 / 10 / 0.5, occupancy head uniformly 100,
// top-level LSS and Gaussian weights 1 with edge weight 4, focal loss at
// alpha_t 0.25 / gamma 2, and a 3-sigma splat support window.
struct LossWeights {
  double lambda1 = 5.0;
  double lambda2 = 10.0;
  double lambda3 = 0.5;
  double lambda_sem = 100.0;
  double lambda_center = 100.0;
  double lambda_offset = 100.0;
  double lambda_lss = 1.0;
  double lambda_g = 1.0;
  double lambda_edge = 4.0;
  double focal_alpha_t = 0.25;
  double focal_gamma = 2.0;
  double tolerance_k = 3.0;

  void validate() const {
    const double weights[] = {lambda1,      lambda2,       lambda3,  lambda_sem,
                              lambda_center, lambda_offset, lambda_lss, lambda_g,
                              lambda_edge,  focal_alpha_t};
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
    }
    if (!(focal_gamma >= 0.0)) throw std::invalid_argument("focal_gamma must be >= 0");
    if (!(tolerance_k > 0.0)) throw std::invalid_argument("tolerance_k must be > 0");
  }
};

}  // namespace occkit
