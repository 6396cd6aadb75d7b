#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/errors.hpp"
#include "occkit/losses.hpp"

namespace occkit {

// Raw head outputs: per-voxel class distributions, a BEV center heatmap, and
// BEV offsets in meters.
struct PanopticPrediction {
  GridGeometry geometry;
  int class_count = 1;
  std::vector<double> sem_probs;       // voxel-major, class_count per voxel
  std::vector<double> center_heatmap;  // one per BEV cell
  std::vector<double> offsets;         // two per BEV cell, meters

  void validate() const {
    const std::size_t voxels = geometry.cell_count();
    const std::size_t cells = geometry.bev_cell_count();
    if (sem_probs.size() != voxels * static_cast<std::size_t>(class_count)) {
      throw shape_error("PanopticPrediction sem_probs size mismatch");
    }
    if (center_heatmap.size() != cells) {
      throw shape_error("PanopticPrediction center_heatmap size mismatch");
    }
    if (offsets.size() != cells * 2) {
      throw shape_error("PanopticPrediction offsets size mismatch");
    }
    detail::check_simplex_rows(sem_probs, class_count, "PanopticPrediction");
    for (double v : center_heatmap) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("PanopticPrediction heatmap value outside [0,1]");
      }
    }
  }
};

struct PanopticFuseConfig {
  double center_threshold = 0.3;
  int top_k = 100;
  int nms_radius = 2;
  std::vector<int> thing_classes;
  int free_class = -1;  // < 0 selects class_count - 1

  void validate() const {
    if (top_k <= 0) throw std::invalid_argument("PanopticFuseConfig top_k must be > 0");
    if (nms_radius < 0) throw std::invalid_argument("PanopticFuseConfig nms_radius must be >= 0");
  }
};

// Argmax class per voxel, ties toward the smaller class id.
inline std::vector<std::uint8_t> semantic_argmax(const PanopticPrediction& pred) {
  pred.validate();
  const std::size_t voxels = pred.geometry.cell_count();
  std::vector<std::uint8_t> out(voxels, 0);
  for (std::size_t i = 0; i < voxels; ++i) {
    const std::size_t base = i * static_cast<std::size_t>(pred.class_count);
    int best = 0;
    double best_p = pred.sem_probs[base];
    for (int c = 1; c < pred.class_count; ++c) {
      const double p = pred.sem_probs[base + static_cast<std::size_t>(c)];
      if (p > best_p) {
        best_p = p;
        best = c;
      }
    }
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

namespace detail {

struct Center {
  double score;
  int row;
  int col;
};

// Candidate centers: local maxima (>= all in-bounds 8-neighbors) above the
// threshold, ordered by (score desc, row, col), thinned by greedy Chebyshev
// NMS, truncated to top_k. The ordering makes every step deterministic.
inline std::vector<Center> extract_centers(const std::vector<double>& heatmap,
                                           const GridGeometry& g,
                                           const PanopticFuseConfig& cfg) {
  std::vector<Center> candidates;
  for (int r = 0; r < g.dims[0]; ++r) {
    for (int c = 0; c < g.dims[1]; ++c) {
      const double v = heatmap[g.bev_index(r, c)];
      if (!(v > cfg.center_threshold)) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= g.dims[0] || cc < 0 || cc >= g.dims[1]) continue;
          if (heatmap[g.bev_index(rr, cc)] > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({v, r, c});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Center& a, const Center& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<Center> kept;
  for (const Center& c : candidates) {
    if (static_cast<int>(kept.size()) >= cfg.top_k) break;
    bool suppressed = false;
    for (const Center& k : kept) {
      if (std::max(std::abs(c.row - k.row), std::abs(c.col - k.col)) <= cfg.nms_radius) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

}  // namespace detail

// Decode head outputs into a panoptic VoxelGrid. Thing voxels (argmax class
// in cfg.thing_classes) take the instance of the center nearest to
// cell_center + offset, ties toward the earlier center in the kept ordering;
// stuff and free voxels keep instance 0. Instance ids are densely relabeled
// 1..K over centers that received at least one voxel.
inline VoxelGrid panoptic_fuse(const PanopticPrediction& pred, const PanopticFuseConfig& cfg) {
  cfg.validate();
  pred.validate();
  const GridGeometry& g = pred.geometry;
  const int free_class = cfg.free_class < 0 ? pred.class_count - 1 : cfg.free_class;
  if (free_class >= pred.class_count) {
    throw std::invalid_argument("panoptic_fuse: free_class out of range");
  }

  VoxelGrid out = VoxelGrid::filled_free(g, pred.class_count, free_class);
  out.semantics = semantic_argmax(pred);

  std::vector<std::uint8_t> is_thing(static_cast<std::size_t>(pred.class_count), 0);
  for (int c : cfg.thing_classes) {
    if (c >= 0 && c < pred.class_count) is_thing[static_cast<std::size_t>(c)] = 1;
  }

  const std::vector<detail::Center> centers = detail::extract_centers(pred.center_heatmap, g, cfg);

  std::vector<std::uint16_t> assigned(centers.size() + 1, 0);
  if (!centers.empty()) {
    for (int ix = 0; ix < g.dims[0]; ++ix) {
      for (int iy = 0; iy < g.dims[1]; ++iy) {
        const std::size_t cell = g.bev_index(ix, iy);
        bool any_thing = false;
        for (int iz = 0; iz < g.dims[2] && !any_thing; ++iz) {
          any_thing = is_thing[out.semantics[g.flat_index(ix, iy, iz)]] != 0;
        }
        if (!any_thing) continue;

        const Vec2 cc = g.bev_cell_center(ix, iy);
        const double px = cc[0] + pred.offsets[cell * 2];
        const double py = cc[1] + pred.offsets[cell * 2 + 1];
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < centers.size(); ++k) {
          const Vec2 kc = g.bev_cell_center(centers[k].row, centers[k].col);
          const double dx = px - kc[0], dy = py - kc[1];
          const double d2 = dx * dx + dy * dy;
          if (d2 < best_d2) {
            best_d2 = d2;
            best = k;
          }
        }
        assigned[best + 1] = 1;
        for (int iz = 0; iz < g.dims[2]; ++iz) {
          const std::size_t f = g.flat_index(ix, iy, iz);
          if (is_thing[out.semantics[f]]) {
            out.instances[f] = static_cast<std::uint16_t>(best + 1);
          }
        }
      }
    }
  }

  // Dense relabel 1..K preserving center order.
  std::vector<std::uint16_t> relabel(centers.size() + 1, 0);
  std::uint16_t next = 1;
  for (std::size_t k = 1; k < relabel.size(); ++k) {
    if (assigned[k]) relabel[k] = next++;
  }
  for (std::uint16_t& id : out.instances) id = relabel[id];
  return out;
}

}  // namespace occkit
