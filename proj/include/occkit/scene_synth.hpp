#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/errors.hpp"
#include "occkit/ray_metrics.hpp"
#include "occkit/rng.hpp"
#include "occkit/view_transform.hpp"

namespace occkit {

// Six-camera surround rig: 704x256 images, cameras on a 0.5 m ring at
// z = 1.6 m, yawed 60 degrees apart, optical axis horizontal. The base
// rotation maps camera axes (x right, y down, z forward) onto ego axes
// (forward, left... camera 0 looks along +x ego).
inline std::vector<CameraModel> default_rig() {
  std::vector<CameraModel> rig;
  const Mat3 base{{0, 0, 1, -1, 0, 0, 0, -1, 0}};
  for (int k = 0; k < 6; ++k) {
    const double yaw = k * (3.14159265358979323846 / 3.0);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const Mat3 rz{{cy, -sy, 0, sy, cy, 0, 0, 0, 1}};
    Mat3 rot;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += rz(r, j) * base(j, c);
        rot(r, c) = acc;
      }
    }
    CameraModel cam;
    cam.width = 704;
    cam.height = 256;
    cam.intrinsics = Mat3{{352, 0, 352, 0, 352, 128, 0, 0, 1}};
    cam.extrinsic = Mat4::from_rotation_translation(rot, {0.5 * cy, 0.5 * sy, 1.6});
    cam.validate();
    rig.push_back(cam);
  }
  return rig;
}

// Recipe for a procedural scene: a flat ground slab plus axis-aligned boxes
// with voxel-snapped corners, one instance each. Everything downstream of the
// seed is deterministic.
struct SceneSpec {
  std::uint64_t seed = 1;
  int object_count = 0;
  std::vector<int> class_palette = {2, 4, 9};
  GridGeometry extent = official_geometry();
  std::vector<CameraModel> rig = default_rig();
  int class_count = 17;
  int free_class = 16;
  int ground_class = 11;
  int ground_layers = 1;
  int min_size_cells = 2;
  int max_size_cells = 8;
  int max_attempts = 100;

  void validate() const {
    if (object_count < 0) throw std::invalid_argument("SceneSpec object_count must be >= 0");
    if (object_count > 0 && class_palette.empty()) {
      throw std::invalid_argument("SceneSpec needs a class palette when placing objects");
    }
    if (class_count < 2 || class_count > 256) {
      throw std::invalid_argument("SceneSpec class_count out of range");
    }
    if (free_class < 0 || free_class >= class_count) {
      throw std::invalid_argument("SceneSpec free_class out of range");
    }
    if (ground_class == free_class || ground_class < 0 || ground_class >= class_count) {
      throw std::invalid_argument("SceneSpec ground_class invalid");
    }
    for (int c : class_palette) {
      if (c < 0 || c >= class_count || c == free_class) {
        throw std::invalid_argument("SceneSpec palette class invalid");
      }
    }
    if (ground_layers < 0 || ground_layers >= extent.dims[2]) {
      throw std::invalid_argument("SceneSpec ground_layers out of range");
    }
    if (min_size_cells < 1 || max_size_cells < min_size_cells) {
      throw std::invalid_argument("SceneSpec size range invalid");
    }
  }
};

// Ground slab labeled ground_class, then object_count boxes with instance ids
// 1..object_count. Placement draws class, size, then corner; a draw that
// collides with an existing instance is rerolled up to max_attempts times
// before generation fails.
inline VoxelGrid synth_scene(const SceneSpec& spec) {
  spec.validate();
  const GridGeometry& g = spec.extent;
  VoxelGrid grid = VoxelGrid::filled_free(g, spec.class_count, spec.free_class);

  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      for (int iz = 0; iz < spec.ground_layers; ++iz) {
        grid.set(ix, iy, iz, static_cast<std::uint8_t>(spec.ground_class), 0);
      }
    }
  }

  SplitMix64 rng(spec.seed);
  for (int obj = 1; obj <= spec.object_count; ++obj) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const int cls = spec.class_palette[rng.below(spec.class_palette.size())];
      int size[3];
      for (int a = 0; a < 3; ++a) {
        const int room = (a == 2) ? g.dims[2] - spec.ground_layers : g.dims[a];
        const int hi = std::min(spec.max_size_cells, room);
        if (hi < spec.min_size_cells) {
          throw generation_error("synth_scene: extent too small for any object");
        }
        size[a] = rng.range_int(spec.min_size_cells, hi);
      }
      const int x0 = rng.range_int(0, g.dims[0] - size[0]);
      const int y0 = rng.range_int(0, g.dims[1] - size[1]);
      const int z0 = rng.range_int(spec.ground_layers, g.dims[2] - size[2]);

      bool collides = false;
      for (int ix = x0; ix < x0 + size[0] && !collides; ++ix) {
        for (int iy = y0; iy < y0 + size[1] && !collides; ++iy) {
          for (int iz = z0; iz < z0 + size[2] && !collides; ++iz) {
            collides = grid.instance_at(ix, iy, iz) != 0;
          }
        }
      }
      if (collides) continue;

      for (int ix = x0; ix < x0 + size[0]; ++ix) {
        for (int iy = y0; iy < y0 + size[1]; ++iy) {
          for (int iz = z0; iz < z0 + size[2]; ++iz) {
            grid.set(ix, iy, iz, static_cast<std::uint8_t>(cls),
                     static_cast<std::uint16_t>(obj));
          }
        }
      }
      placed = true;
    }
    if (!placed) {
      throw generation_error("synth_scene: could not place object " + std::to_string(obj) +
                             " after " + std::to_string(spec.max_attempts) + " attempts");
    }
  }
  return grid;
}

// Translates every instance voxel by a voxel-aligned shift (clipping at the
// bounds), optionally dropping one instance. Ground and other stuff voxels
// stay put; a shifted voxel overwrites whatever occupied its target cell.
inline VoxelGrid perturb_scene(const VoxelGrid& grid, const Vec3& shift,
                               int drop_instance = 0) {
  const GridGeometry& g = grid.geometry;
  int cells[3];
  for (int a = 0; a < 3; ++a) {
    const double q = shift[a] / g.voxel_size[a];
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9) {
      throw std::invalid_argument("perturb_scene: shift must be a voxel-size multiple");
    }
    cells[a] = static_cast<int>(r);
  }

  VoxelGrid out = grid;
  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    if (out.instances[i] != 0) {
      out.semantics[i] = static_cast<std::uint8_t>(grid.free_class);
      out.instances[i] = 0;
    }
  }
  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      for (int iz = 0; iz < g.dims[2]; ++iz) {
        const std::size_t f = g.flat_index(ix, iy, iz);
        const std::uint16_t id = grid.instances[f];
        if (id == 0 || static_cast<int>(id) == drop_instance) continue;
        const int tx = ix + cells[0], ty = iy + cells[1], tz = iz + cells[2];
        if (tx < 0 || tx >= g.dims[0] || ty < 0 || ty >= g.dims[1] || tz < 0 ||
            tz >= g.dims[2]) {
          continue;
        }
        out.set(tx, ty, tz, grid.semantics[f], id);
      }
    }
  }
  return out;
}

// Manufactures the per-pixel inputs a backbone would predict: for each
// stride-sampled pixel with a scene hit, a PixelLift whose depth distribution
// is a discretized Gaussian around the true depth and a GaussianPrimitive
// sitting on the ray at that depth. Features are one-hot in the hit class, so
// splatted BEV mass is directly attributable to instances.
inline std::pair<std::vector<PixelLift>, std::vector<GaussianPrimitive>> synth_pixel_lifts(
    const VoxelGrid& grid, const CameraModel& cam, const DepthBinning& binning,
    double noise_sigma, int stride = 8, int camera_index = 0) {
  cam.validate();
  binning.validate();
  if (stride < 1) throw std::invalid_argument("synth_pixel_lifts: stride must be >= 1");
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("synth_pixel_lifts: noise_sigma must be >= 0");
  }

  std::vector<PixelLift> lifts;
  std::vector<GaussianPrimitive> prims;
  for (int v = 0; v < cam.height; v += stride) {
    for (int u = 0; u < cam.width; u += stride) {
      Ray ray;
      ray.origin = cam.center();
      ray.direction = cam.ray_direction(u, v);
      ray.camera_index = camera_index;
      ray.u = u;
      ray.v = v;
      const std::optional<RayHit> hit = traverse(grid, ray);
      if (!hit) continue;

      PixelLift lift;
      lift.u = u;
      lift.v = v;
      lift.camera_index = camera_index;
      lift.feature.assign(static_cast<std::size_t>(grid.class_count), 0.0);
      lift.feature[static_cast<std::size_t>(hit->cls)] = 1.0;
      lift.depth_probs = gaussian_bin_probs(hit->depth, noise_sigma, binning);
      lifts.push_back(std::move(lift));

      GaussianPrimitive prim;
      prim.mean = ray.origin + hit->depth * ray.direction;
      const double s = std::max(noise_sigma, 1e-6);
      prim.sigma = {s, s, s};
      prim.opacity = 1.0;
      prim.weight.assign(static_cast<std::size_t>(grid.class_count), 0.0);
      prim.weight[static_cast<std::size_t>(hit->cls)] = 1.0;
      prims.push_back(std::move(prim));
    }
  }
  return {std::move(lifts), std::move(prims)};
}

}  // namespace occkit
