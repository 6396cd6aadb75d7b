// Brute-force reference implementations, written independently of the library
// kernels they validate. Everything here trades speed for obviousness.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/edge_prior.hpp"
#include "occkit/ray_metrics.hpp"

namespace oracle {

// Dense 2D cross-correlation with replicate padding: materialize the padded
// image first, then run the taps over it.
inline std::vector<double> dense_convolve(const occkit::LabelMap& labels,
                                          const std::vector<double>& taps, int size) {
  const int h = size / 2;
  const int pw = labels.width + 2 * h;
  const int ph = labels.height + 2 * h;
  std::vector<double> padded(static_cast<std::size_t>(pw) * static_cast<std::size_t>(ph));
  for (int r = 0; r < ph; ++r) {
    for (int c = 0; c < pw; ++c) {
      const int rr = std::clamp(r - h, 0, labels.height - 1);
      const int cc = std::clamp(c - h, 0, labels.width - 1);
      padded[static_cast<std::size_t>(r) * pw + c] = labels.at(rr, cc);
    }
  }
  std::vector<double> out(static_cast<std::size_t>(labels.width) *
                          static_cast<std::size_t>(labels.height));
  for (int r = 0; r < labels.height; ++r) {
    for (int c = 0; c < labels.width; ++c) {
      double acc = 0.0;
      for (int tr = 0; tr < size; ++tr) {
        for (int tc = 0; tc < size; ++tc) {
          acc += taps[static_cast<std::size_t>(tr) * size + tc] *
                 padded[static_cast<std::size_t>(r + tr) * pw + (c + tc)];
        }
      }
      out[static_cast<std::size_t>(r) * labels.width + c] = acc;
    }
  }
  return out;
}

inline occkit::EdgeMap dense_pseudo_edges(const occkit::LabelMap& labels,
                                          const occkit::EdgeKernel& kernel) {
  const std::vector<double> gx = dense_convolve(labels, kernel.taps_x, kernel.size);
  const std::vector<double> gy = dense_convolve(labels, kernel.taps_y, kernel.size);
  occkit::EdgeMap out = occkit::EdgeMap::zeros(labels.width, labels.height);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double mag = kernel.kind == occkit::EdgeKernelKind::Laplacian
                           ? std::abs(gx[i])
                           : std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
    out.values[i] = mag > 0.0 ? 1.0 : 0.0;
  }
  return out;
}

struct OracleHit {
  occkit::VoxelIndex voxel{};
  occkit::RayHit hit;
  double t_exit = 0.0;  // far end of the ray's chord through the voxel
};

struct OccupiedVoxel {
  occkit::VoxelIndex index{};
  occkit::Vec3 lo;
  int cls = 0;
  int instance = 0;
};

inline std::vector<OccupiedVoxel> collect_occupied(const occkit::VoxelGrid& grid) {
  const occkit::GridGeometry& g = grid.geometry;
  std::vector<OccupiedVoxel> out;
  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      for (int iz = 0; iz < g.dims[2]; ++iz) {
        const std::size_t f = g.flat_index(ix, iy, iz);
        if (grid.semantics[f] == grid.free_class) continue;
        out.push_back({{ix, iy, iz},
                       {g.x_range[0] + ix * g.voxel_size.x, g.y_range[0] + iy * g.voxel_size.y,
                        g.z_range[0] + iz * g.voxel_size.z},
                       grid.semantics[f],
                       grid.instances[f]});
      }
    }
  }
  return out;
}

// Exhaustive first-hit search: slab-test the ray against every occupied voxel
// and keep the smallest entry distance. The entry expression mirrors the
// library's definition of depth (it is the definition), while the search
// itself shares nothing with the DDA stepping.
inline std::optional<OracleHit> first_hit_exhaustive(const std::vector<OccupiedVoxel>& occupied,
                                                     const occkit::Vec3& voxel_size,
                                                     const occkit::Ray& ray) {
  std::optional<OracleHit> best;
  for (const OccupiedVoxel& vox : occupied) {
    double t_in = 0.0;
    double t_out = std::numeric_limits<double>::infinity();
    bool outside = false;
    for (int a = 0; a < 3; ++a) {
      const double hi_a = vox.lo[a] + voxel_size[a];
      if (ray.direction[a] == 0.0) {
        if (ray.origin[a] < vox.lo[a] || ray.origin[a] >= hi_a) outside = true;
        continue;
      }
      const double ta = (vox.lo[a] - ray.origin[a]) / ray.direction[a];
      const double tb = (hi_a - ray.origin[a]) / ray.direction[a];
      t_in = std::max(t_in, std::min(ta, tb));
      t_out = std::min(t_out, std::max(ta, tb));
    }
    if (outside || t_out < t_in) continue;
    if (!best || t_in < best->hit.depth) {
      best = OracleHit{vox.index, occkit::RayHit{vox.cls, vox.instance, t_in}, t_out};
    }
  }
  return best;
}

inline std::optional<OracleHit> first_hit_exhaustive(const occkit::VoxelGrid& grid,
                                                     const occkit::Ray& ray) {
  return first_hit_exhaustive(collect_occupied(grid), grid.geometry.voxel_size, ray);
}

// Sampling-march oracle: walk the ray in fixed small steps and report the
// voxel of the first sample with a non-free label.
struct MarchHit {
  occkit::VoxelIndex voxel;
  occkit::RayHit hit;
};

inline std::optional<MarchHit> first_hit_march(const occkit::VoxelGrid& grid,
                                               const occkit::Ray& ray, double step = 0.004) {
  const occkit::GridGeometry& g = grid.geometry;
  double t_exit = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (ray.direction[a] == 0.0) continue;
    const double ta = (g.range_min(a) - ray.origin[a]) / ray.direction[a];
    const double tb = (g.range_max(a) - ray.origin[a]) / ray.direction[a];
    t_exit = std::max(t_exit, std::max(ta, tb));
  }
  const long long steps = static_cast<long long>(std::ceil(t_exit / step)) + 1;
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * step;
    const occkit::Vec3 p = ray.origin + t * ray.direction;
    const auto idx = occkit::world_to_voxel(p, g);
    if (!idx) continue;
    const std::size_t f = g.flat_index(*idx);
    if (grid.semantics[f] != grid.free_class) {
      return MarchHit{*idx, occkit::RayHit{grid.semantics[f], grid.instances[f], t}};
    }
  }
  return std::nullopt;
}

inline std::vector<occkit::RayRecord> records_exhaustive(const occkit::VoxelGrid& pred,
                                                         const occkit::VoxelGrid& gt,
                                                         const std::vector<occkit::Ray>& rays) {
  const std::vector<OccupiedVoxel> gt_occ = collect_occupied(gt);
  const std::vector<OccupiedVoxel> pred_occ = collect_occupied(pred);
  const occkit::Vec3 vs = gt.geometry.voxel_size;
  std::vector<occkit::RayRecord> records(rays.size());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    if (const auto g = first_hit_exhaustive(gt_occ, vs, rays[i])) records[i].gt_hit = g->hit;
    if (const auto p = first_hit_exhaustive(pred_occ, vs, rays[i])) records[i].pred_hit = p->hit;
  }
  return records;
}

// Independent tally code: iterates classes on the outside and rays on the
// inside, the transpose of the library's loop structure.
struct ClassTally {
  long long tp = 0, fp = 0, fn = 0;
};

inline std::vector<ClassTally> tally_by_class(const std::vector<occkit::RayRecord>& records,
                                              int class_count, double threshold) {
  std::vector<ClassTally> tallies(static_cast<std::size_t>(class_count));
  for (int c = 0; c < class_count; ++c) {
    ClassTally& t = tallies[static_cast<std::size_t>(c)];
    for (const occkit::RayRecord& r : records) {
      const bool matched = r.pred_hit && r.gt_hit && r.pred_hit->cls == r.gt_hit->cls &&
                           std::abs(r.pred_hit->depth - r.gt_hit->depth) <= threshold;
      if (matched && r.pred_hit->cls == c) {
        t.tp += 1;
      } else {
        if (r.pred_hit && r.pred_hit->cls == c) t.fp += 1;
        if (r.gt_hit && r.gt_hit->cls == c) t.fn += 1;
      }
    }
  }
  return tallies;
}

}  // namespace oracle
