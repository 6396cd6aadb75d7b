#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/edge_prior.hpp"
#include "occkit/errors.hpp"

namespace occkit {

// Per-voxel occupancy probability field (O_gt / O_lss).
struct OccupancyVolume {
  GridGeometry geometry;
  std::vector<double> values;

  static OccupancyVolume zeros(const GridGeometry& g) {
    OccupancyVolume v;
    v.geometry = g;
    v.values.assign(g.cell_count(), 0.0);
    return v;
  }

  void validate() const {
    if (values.size() != geometry.cell_count()) {
      throw shape_error("OccupancyVolume payload size does not match geometry");
    }
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) throw shape_error("OccupancyVolume value outside [0,1]");
    }
  }
};

// Binary occupancy target: 1 at non-free voxels.
inline OccupancyVolume occupancy_from(const VoxelGrid& grid) {
  OccupancyVolume v = OccupancyVolume::zeros(grid.geometry);
  for (std::size_t i = 0; i < grid.semantics.size(); ++i) {
    v.values[i] = grid.semantics[i] == grid.free_class ? 0.0 : 1.0;
  }
  return v;
}

// Predicted and target vector fields over a common cell set. Layout is
// cell-major: field[cell * components + k]. mask has one flag per cell;
// masked-out cells are ignored by every reduction.
struct FieldPair {
  int components = 1;
  std::vector<double> predicted;
  std::vector<double> target;
  std::vector<std::uint8_t> mask;

  std::size_t cell_count() const { return mask.size(); }

  void validate() const {
    if (components < 1) throw shape_error("FieldPair components must be >= 1");
    const std::size_t expect = mask.size() * static_cast<std::size_t>(components);
    if (predicted.size() != expect || target.size() != expect) {
      throw shape_error("FieldPair field sizes do not match mask");
    }
  }
};

// Mean voxelwise binary cross-entropy; gradient w.r.t. pred at the clamped
// probabilities.
inline ScalarWithGrad bce_occupancy(const OccupancyVolume& pred, const OccupancyVolume& gt) {
  if (!(pred.geometry == gt.geometry)) throw shape_error("bce_occupancy: geometry mismatch");
  pred.validate();
  gt.validate();
  for (double g : gt.values) {
    if (g != 0.0 && g != 1.0) throw std::invalid_argument("bce_occupancy: gt must be binary");
  }
  const std::size_t n = pred.values.size();
  ScalarWithGrad out;
  out.grad.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pred.values[i], kLogClampEps, 1.0 - kLogClampEps);
    const double g = gt.values[i];
    total += -(g * std::log(p) + (1.0 - g) * std::log(1.0 - p));
    out.grad[i] = (p - g) / (p * (1.0 - p)) / static_cast<double>(n);
  }
  out.value = total / static_cast<double>(n);
  return out;
}

namespace detail {

inline void check_simplex_rows(const std::vector<double>& probs, int class_count,
                               const char* who) {
  if (class_count < 1 || probs.size() % static_cast<std::size_t>(class_count) != 0) {
    throw shape_error(std::string(who) + ": probs length not a multiple of class count");
  }
  const std::size_t rows = probs.size() / static_cast<std::size_t>(class_count);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < class_count; ++c) {
      const double p = probs[r * static_cast<std::size_t>(class_count) +
                             static_cast<std::size_t>(c)];
      if (!(p >= 0.0)) throw std::invalid_argument(std::string(who) + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(who) + ": row not on the simplex within 1e-6");
    }
  }
}

}  // namespace detail

// Focal loss, mean over cells of -alpha_t (1 - p_t)^gamma ln p_t with p_t the
// probability of the true class (clamped below at eps). Gradient is taken
// w.r.t. p_t, one entry per cell. With alpha_t = 1, gamma = 0 this is plain
// cross-entropy.
inline ScalarWithGrad focal_seg(const std::vector<double>& pred_probs,
                                const std::vector<int>& gt, int class_count,
                                const LossWeights& w) {
  w.validate();
  detail::check_simplex_rows(pred_probs, class_count, "focal_seg");
  const std::size_t n = gt.size();
  if (pred_probs.size() != n * static_cast<std::size_t>(class_count)) {
    throw shape_error("focal_seg: probs rows do not match gt length");
  }
  ScalarWithGrad out;
  out.grad.assign(n, 0.0);
  if (n == 0) return out;
  const double a = w.focal_alpha_t, g = w.focal_gamma;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt[i] < 0 || gt[i] >= class_count) {
      throw std::invalid_argument("focal_seg: class id out of range");
    }
    const double raw = pred_probs[i * static_cast<std::size_t>(class_count) +
                                  static_cast<std::size_t>(gt[i])];
    const double p = std::max(raw, kLogClampEps);
    const double q = 1.0 - p;
    total += -a * std::pow(q, g) * std::log(p);
    double grad;
    if (g == 0.0) {
      grad = -a / p;
    } else if (q <= 0.0) {
      // Limit of a*g*q^(g-1)*ln p - a*q^g/p as p -> 1 is 0 for gamma > 0.
      grad = 0.0;
    } else {
      grad = a * g * std::pow(q, g - 1.0) * std::log(p) - a * std::pow(q, g) / p;
    }
    out.grad[i] = grad / static_cast<double>(n);
  }
  out.value = total / static_cast<double>(n);
  return out;
}

// Masked mean absolute error; per-cell contribution is the sum of component
// absolute differences. Subgradient 0 at exact ties. Gradient layout matches
// predicted; zero at masked-out cells.
inline ScalarWithGrad l1_field(const FieldPair& fp) {
  fp.validate();
  ScalarWithGrad out;
  out.grad.assign(fp.predicted.size(), 0.0);
  std::size_t valid = 0;
  for (std::uint8_t m : fp.mask) valid += m ? 1 : 0;
  if (valid == 0) return out;
  double total = 0.0;
  for (std::size_t cell = 0; cell < fp.mask.size(); ++cell) {
    if (!fp.mask[cell]) continue;
    for (int k = 0; k < fp.components; ++k) {
      const std::size_t i = cell * static_cast<std::size_t>(fp.components) +
                            static_cast<std::size_t>(k);
      const double d = fp.predicted[i] - fp.target[i];
      total += std::abs(d);
      out.grad[i] = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / static_cast<double>(valid);
    }
  }
  out.value = total / static_cast<double>(valid);
  return out;
}

// Masked mean squared error; gradient 2(pred - target)/N.
inline ScalarWithGrad l2_field(const FieldPair& fp) {
  fp.validate();
  ScalarWithGrad out;
  out.grad.assign(fp.predicted.size(), 0.0);
  std::size_t valid = 0;
  for (std::uint8_t m : fp.mask) valid += m ? 1 : 0;
  if (valid == 0) return out;
  double total = 0.0;
  for (std::size_t cell = 0; cell < fp.mask.size(); ++cell) {
    if (!fp.mask[cell]) continue;
    for (int k = 0; k < fp.components; ++k) {
      const std::size_t i = cell * static_cast<std::size_t>(fp.components) +
                            static_cast<std::size_t>(k);
      const double d = fp.predicted[i] - fp.target[i];
      total += d * d;
      out.grad[i] = 2.0 * d / static_cast<double>(valid);
    }
  }
  out.value = total / static_cast<double>(valid);
  return out;
}

// Mean over voxels of -ln S(c_gt) with the same clamp as the focal loss, so
// focal_seg(alpha_t = 1, gamma = 0) agrees with this bit-for-bit in value.
// Gradient layout matches pred_probs; nonzero only on true-class entries.
inline ScalarWithGrad semantic_ce(const std::vector<double>& pred_probs, const VoxelGrid& gt) {
  const int c = gt.class_count;
  detail::check_simplex_rows(pred_probs, c, "semantic_ce");
  const std::size_t n = gt.semantics.size();
  if (pred_probs.size() != n * static_cast<std::size_t>(c)) {
    throw shape_error("semantic_ce: probs rows do not match voxel count");
  }
  ScalarWithGrad out;
  out.grad.assign(pred_probs.size(), 0.0);
  if (n == 0) return out;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t slot = i * static_cast<std::size_t>(c) + gt.semantics[i];
    const double p = std::max(pred_probs[slot], kLogClampEps);
    total += -std::log(p);
    out.grad[slot] = -1.0 / p / static_cast<double>(n);
  }
  out.value = total / static_cast<double>(n);
  return out;
}

// Gaussian-branch composite: lambda1 L_seg + lambda2 L_center + lambda3 L_offset.
inline double gaussian_branch_loss(double seg, double center, double offset,
                                   const LossWeights& w) {
  w.validate();
  return w.lambda1 * seg + w.lambda2 * center + w.lambda3 * offset;
}

// Occupancy-head composite: lambda_sem L_sem + lambda_center L_center +
// lambda_offset L_offset.
inline double occ_head_loss(double sem, double center, double offset, const LossWeights& w) {
  w.validate();
  return w.lambda_sem * sem + w.lambda_center * center + w.lambda_offset * offset;
}

// Total objective. The occupancy-head term enters with implicit weight 1.
inline double total_loss(double l_lss, double l_g, double l_edge, double l_occ,
                         const LossWeights& w) {
  w.validate();
  const double terms[] = {l_lss, l_g, l_edge, l_occ};
  for (double t : terms) {
    if (!std::isfinite(t)) throw std::invalid_argument("total_loss: non-finite component");
  }
  return w.lambda_lss * l_lss + w.lambda_g * l_g + w.lambda_edge * l_edge + l_occ;
}

struct CenterOffsetTargets {
  FieldPair center;  // 1 component, Gaussian heatmap target
  FieldPair offset;  // 2 components, meters toward the owning centroid
};

// Supervision targets from instance annotations. Each instance's BEV centroid
// is the mean (x,y) of its voxel centers. The center heatmap is the max over
// instances of exp(-d^2 / (2 sigma_c^2)) with d measured in cells. Offsets
// point from the cell center to the owning instance centroid and are defined
// on thing cells only; a cell stacking several instances takes the one of its
// lowest thing voxel. Centerness is masked to thing cells unless
// center_mask_all is set (then every cell is supervised).
inline CenterOffsetTargets make_center_offset_targets(const VoxelGrid& grid,
                                                      double sigma_c = 1.5,
                                                      bool center_mask_all = false) {
  if (!(sigma_c > 0.0)) throw std::invalid_argument("sigma_c must be > 0");
  const GridGeometry& g = grid.geometry;
  const std::size_t cells = g.bev_cell_count();

  CenterOffsetTargets out;
  out.center.components = 1;
  out.center.predicted.assign(cells, 0.0);
  out.center.target.assign(cells, 0.0);
  out.center.mask.assign(cells, center_mask_all ? 1 : 0);
  out.offset.components = 2;
  out.offset.predicted.assign(cells * 2, 0.0);
  out.offset.target.assign(cells * 2, 0.0);
  out.offset.mask.assign(cells, 0);

  // Instance centroids; ids are sparse, gather sums first.
  struct Accum {
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
  };
  std::vector<Accum> acc(65536);
  std::vector<std::uint16_t> seen;
  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      for (int iz = 0; iz < g.dims[2]; ++iz) {
        const std::uint16_t id = grid.instances[g.flat_index(ix, iy, iz)];
        if (id == 0) continue;
        Accum& a = acc[id];
        if (a.count == 0) seen.push_back(id);
        const Vec3 c = g.voxel_center(ix, iy, iz);
        a.sx += c.x;
        a.sy += c.y;
        a.count += 1;
      }
    }
  }
  std::sort(seen.begin(), seen.end());

  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      const std::size_t cell = g.bev_index(ix, iy);
      const Vec2 cc = g.bev_cell_center(ix, iy);
      double peak = 0.0;
      for (std::uint16_t id : seen) {
        const Accum& a = acc[id];
        const double gx = a.sx / static_cast<double>(a.count);
        const double gy = a.sy / static_cast<double>(a.count);
        const double dx = (cc[0] - gx) / g.voxel_size.x;
        const double dy = (cc[1] - gy) / g.voxel_size.y;
        peak = std::max(peak, std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_c * sigma_c)));
      }
      out.center.target[cell] = peak;

      for (int iz = 0; iz < g.dims[2]; ++iz) {
        const std::uint16_t id = grid.instances[g.flat_index(ix, iy, iz)];
        if (id == 0) continue;
        const Accum& a = acc[id];
        out.offset.target[cell * 2] = a.sx / static_cast<double>(a.count) - cc[0];
        out.offset.target[cell * 2 + 1] = a.sy / static_cast<double>(a.count) - cc[1];
        out.offset.mask[cell] = 1;
        if (!center_mask_all) out.center.mask[cell] = 1;
        break;
      }
    }
  }
  return out;
}

}  // namespace occkit
