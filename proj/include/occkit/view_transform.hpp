#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/errors.hpp"

namespace occkit {

// A pixel feature placed at one candidate depth along its viewing ray.
struct FrustumPoint {
  Vec3 position{};
  std::vector<double> feature;
};

struct BlendConfig {
  double alpha = 0.6;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw std::invalid_argument("BlendConfig alpha must be in [0,1]");
    }
  }
};

inline std::vector<double> make_depth_bins(const DepthBinning& binning) {
  binning.validate();
  std::vector<double> bins(static_cast<std::size_t>(binning.bin_count));
  for (int i = 0; i < binning.bin_count; ++i) {
    bins[static_cast<std::size_t>(i)] = binning.bin_value(i);
  }
  return bins;
}

// Probability mass of N(mu, sigma^2) restricted to each depth bin and
// renormalized over [d_min, d_max]. Bin mass is the integrated density
// (erf difference over the bin edges), not a point sample: integration makes
// refinement monotone, since splitting a bin splits its mass. sigma = 0
// degenerates to a one-hot at the containing bin (clamped into range).
inline std::vector<double> gaussian_bin_probs(double mu, double sigma,
                                              const DepthBinning& binning) {
  binning.validate();
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_bin_probs sigma must be >= 0");
  const std::size_t b = static_cast<std::size_t>(binning.bin_count);
  std::vector<double> probs(b, 0.0);

  const auto clamped_bin = [&](double depth) {
    const auto hit = binning.containing_bin(depth);
    if (hit) return *hit;
    return depth < binning.d_min ? 0 : binning.bin_count - 1;
  };

  if (sigma == 0.0) {
    probs[static_cast<std::size_t>(clamped_bin(mu))] = 1.0;
    return probs;
  }

  const double inv = 1.0 / (sigma * std::sqrt(2.0));
  const auto cdf = [&](double x) { return 0.5 * std::erf((x - mu) * inv); };
  double total = 0.0;
  for (int i = 0; i < binning.bin_count; ++i) {
    const double lo = binning.bin_value(i);
    const double hi = (i + 1 == binning.bin_count) ? binning.d_max : binning.bin_value(i + 1);
    const double mass = std::max(0.0, cdf(hi) - cdf(lo));
    probs[static_cast<std::size_t>(i)] = mass;
    total += mass;
  }
  if (total <= 0.0) {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[static_cast<std::size_t>(clamped_bin(mu))] = 1.0;
    return probs;
  }
  for (double& p : probs) p /= total;
  return probs;
}

// One FrustumPoint per (pixel, bin): position is the pinhole unprojection of
// (u, v, d_i) mapped to ego, feature is depth_probs[i] * feature.
inline std::vector<FrustumPoint> lift_frustum(const std::vector<PixelLift>& lifts,
                                              const CameraModel& cam,
                                              const DepthBinning& binning) {
  cam.validate();
  binning.validate();
  const std::size_t b = static_cast<std::size_t>(binning.bin_count);
  std::vector<FrustumPoint> points;
  points.reserve(lifts.size() * b);
  for (const PixelLift& lift : lifts) {
    if (lift.depth_probs.size() != b) {
      throw std::invalid_argument("lift_frustum: depth_probs length must equal bin_count");
    }
    if (lift.u < 0.0 || lift.u >= cam.width || lift.v < 0.0 || lift.v >= cam.height) {
      throw std::invalid_argument("lift_frustum: pixel outside image bounds");
    }
    for (std::size_t i = 0; i < b; ++i) {
      FrustumPoint fp;
      fp.position = cam.unproject(lift.u, lift.v, binning.bin_value(static_cast<int>(i)));
      fp.feature.resize(lift.feature.size());
      const double p = lift.depth_probs[i];
      for (std::size_t c = 0; c < lift.feature.size(); ++c) {
        fp.feature[c] = p * lift.feature[c];
      }
      points.push_back(std::move(fp));
    }
  }
  return points;
}

// Sum-pooling splat: each point adds its feature to the BEV cell containing
// its (x,y); out-of-range points are dropped. Accumulation runs in list
// order, so total in-range mass regroups but never changes when addition is
// exact. Returns B^d.
inline BEVGrid splat_lss_to_bev(const std::vector<FrustumPoint>& points, const GridGeometry& g,
                                int channels) {
  BEVGrid grid = BEVGrid::zeros(g, channels);
  for (const FrustumPoint& p : points) {
    if (p.feature.size() != static_cast<std::size_t>(channels)) {
      throw shape_error("splat_lss_to_bev: feature length must equal channels");
    }
    const auto cell = world_to_bev_cell(p.position.x, p.position.y, g);
    if (!cell) continue;
    const std::size_t base =
        g.bev_index((*cell)[0], (*cell)[1]) * static_cast<std::size_t>(channels);
    for (int c = 0; c < channels; ++c) {
      grid.data[base + static_cast<std::size_t>(c)] += p.feature[static_cast<std::size_t>(c)];
    }
  }
  return grid;
}

inline double eval_gaussian(const GaussianPrimitive& gp, const Vec3& x) {
  gp.validate();
  const double dx = (x.x - gp.mean.x) / gp.sigma.x;
  const double dy = (x.y - gp.mean.y) / gp.sigma.y;
  const double dz = (x.z - gp.mean.z) / gp.sigma.z;
  return gp.opacity * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
}

namespace detail {

// Lexicographic order on Gaussian content. Sorting contributions by
// (cell, content) makes the accumulation order a function of the multiset of
// Gaussians alone: any permutation of the input list accumulates bit-identical
// sums, because entries comparing equal are bitwise-identical addends.
inline bool gaussian_content_less(const GaussianPrimitive& a, const GaussianPrimitive& b) {
  const double ka[] = {a.mean.x, a.mean.y, a.mean.z, a.sigma.x, a.sigma.y, a.sigma.z, a.opacity};
  const double kb[] = {b.mean.x, b.mean.y, b.mean.z, b.sigma.x, b.sigma.y, b.sigma.z, b.opacity};
  for (int i = 0; i < 7; ++i) {
    if (ka[i] != kb[i]) return ka[i] < kb[i];
  }
  return std::lexicographical_compare(a.weight.begin(), a.weight.end(), b.weight.begin(),
                                      b.weight.end());
}

}  // namespace detail

// Splats each Gaussian onto the BEV cells whose centers lie within
// tolerance_k * sigma of the mean in both x and y. The z factor is
// marginalized analytically; its constant is folded into opacity, so the cell
// value is weight[c] * opacity * exp(-(dx^2/sx^2 + dy^2/sy^2)/2) evaluated at
// the cell center. Returns B^g.
inline BEVGrid splat_gaussians_to_bev(const std::vector<GaussianPrimitive>& gaussians,
                                      const GridGeometry& g, int channels,
                                      const LossWeights& weights) {
  weights.validate();
  BEVGrid grid = BEVGrid::zeros(g, channels);
  const double k = weights.tolerance_k;

  struct Contribution {
    std::size_t cell;
    const GaussianPrimitive* gp;
    double kernel;
  };
  std::vector<Contribution> contribs;

  for (const GaussianPrimitive& gp : gaussians) {
    gp.validate();
    if (gp.weight.size() != static_cast<std::size_t>(channels)) {
      throw shape_error("splat_gaussians_to_bev: weight length must equal channels");
    }
    const double rx = k * gp.sigma.x, ry = k * gp.sigma.y;
    // Candidate cell range widened by one; the exact center-distance predicate
    // below decides membership, independent of this bound.
    int x0 = static_cast<int>(std::floor((gp.mean.x - rx - g.x_range[0]) / g.voxel_size.x)) - 1;
    int x1 = static_cast<int>(std::floor((gp.mean.x + rx - g.x_range[0]) / g.voxel_size.x)) + 1;
    int y0 = static_cast<int>(std::floor((gp.mean.y - ry - g.y_range[0]) / g.voxel_size.y)) - 1;
    int y1 = static_cast<int>(std::floor((gp.mean.y + ry - g.y_range[0]) / g.voxel_size.y)) + 1;
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, g.dims[0] - 1);
    y1 = std::min(y1, g.dims[1] - 1);
    for (int ix = x0; ix <= x1; ++ix) {
      for (int iy = y0; iy <= y1; ++iy) {
        const Vec2 c = g.bev_cell_center(ix, iy);
        const double dx = c[0] - gp.mean.x;
        const double dy = c[1] - gp.mean.y;
        if (std::abs(dx) > rx || std::abs(dy) > ry) continue;
        const double ex = dx / gp.sigma.x, ey = dy / gp.sigma.y;
        contribs.push_back(
            {g.bev_index(ix, iy), &gp, gp.opacity * std::exp(-0.5 * (ex * ex + ey * ey))});
      }
    }
  }

  std::sort(contribs.begin(), contribs.end(), [](const Contribution& a, const Contribution& b) {
    if (a.cell != b.cell) return a.cell < b.cell;
    return detail::gaussian_content_less(*a.gp, *b.gp);
  });

  for (const Contribution& c : contribs) {
    const std::size_t base = c.cell * static_cast<std::size_t>(channels);
    for (int ch = 0; ch < channels; ++ch) {
      grid.data[base + static_cast<std::size_t>(ch)] +=
          c.gp->weight[static_cast<std::size_t>(ch)] * c.kernel;
    }
  }
  return grid;
}

// B^h = alpha * B^g + B^d. Not a convex combination: B^d enters with
// weight 1. alpha = 0 returns B^d bit-for-bit.
inline BEVGrid blend_hybrid(const BEVGrid& bev_g, const BEVGrid& bev_d, const BlendConfig& cfg) {
  cfg.validate();
  if (!bev_g.same_shape(bev_d)) {
    throw shape_error("blend_hybrid: geometry or channel mismatch");
  }
  BEVGrid out = bev_d;
  if (cfg.alpha == 0.0) return out;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = cfg.alpha * bev_g.data[i] + bev_d.data[i];
  }
  return out;
}

// Elementwise sum over views, in list order. Returns B_agg.
inline BEVGrid fuse_views(const std::vector<BEVGrid>& grids) {
  if (grids.empty()) throw std::invalid_argument("fuse_views: need at least one grid");
  BEVGrid out = grids.front();
  for (std::size_t v = 1; v < grids.size(); ++v) {
    if (!out.same_shape(grids[v])) throw shape_error("fuse_views: shape mismatch");
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += grids[v].data[i];
  }
  return out;
}

}  // namespace occkit
