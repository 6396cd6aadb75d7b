#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/edge_prior.hpp"
#include "occkit/losses.hpp"
#include "occkit/rng.hpp"

namespace occkit {

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t points = 0;
  bool pass = false;
};

namespace detail {

inline double rel_err(double analytic, double fd) {
  const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
  return std::abs(analytic - fd) / scale;
}

// Central difference of f along coordinate i of x.
template <typename Fn>
double central_diff(Fn&& f, std::vector<double>& x, std::size_t i, double h) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f(x);
  x[i] = saved - h;
  const double down = f(x);
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace detail

// Finite-difference validation of every analytic loss gradient. Each check
// runs several seeded random instances on small fields (small cell counts
// keep the 1/N gradient scale well above finite-difference noise) and
// reports the worst relative error across at least 100 probed coordinates.
// Simplex-constrained losses use a step below the 1e-6 membership tolerance
// so the perturbed input stays valid.
inline std::vector<GradCheckRow> run_grad_checks(double tolerance = 1e-5) {
  std::vector<GradCheckRow> rows;
  const GridGeometry tiny = GridGeometry::create({0, 4}, {0, 2}, {0, 2}, {1, 1, 1});

  {  // occupancy BCE, gradient per voxel
    GradCheckRow row{"bce_occupancy", 0.0, 0, false};
    SplitMix64 rng(101);
    for (int rep = 0; rep < 8; ++rep) {
      OccupancyVolume pred = OccupancyVolume::zeros(tiny);
      OccupancyVolume gt = OccupancyVolume::zeros(tiny);
      for (double& v : pred.values) v = rng.uniform(0.02, 0.98);
      for (double& v : gt.values) v = rng.below(2) ? 1.0 : 0.0;
      const ScalarWithGrad out = bce_occupancy(pred, gt);
      for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const double fd = detail::central_diff(
            [&](const std::vector<double>& x) {
              OccupancyVolume p = pred;
              p.values = x;
              return bce_occupancy(p, gt).value;
            },
            pred.values, i, 1e-6);
        row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(out.grad[i], fd));
        row.points += 1;
      }
    }
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(row);
  }

  {  // edge BCE, gradient per cell
    GradCheckRow row{"edge_bce", 0.0, 0, false};
    SplitMix64 rng(202);
    for (int rep = 0; rep < 8; ++rep) {
      EdgeMap pred = EdgeMap::zeros(4, 4);
      EdgeMap gt = EdgeMap::zeros(4, 4);
      for (double& v : pred.values) v = rng.uniform(0.02, 0.98);
      for (double& v : gt.values) v = rng.below(2) ? 1.0 : 0.0;
      const ScalarWithGrad out = edge_bce_loss(pred, gt);
      for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const double fd = detail::central_diff(
            [&](const std::vector<double>& x) {
              EdgeMap p = pred;
              p.values = x;
              return edge_bce_loss(p, gt).value;
            },
            pred.values, i, 1e-6);
        row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(out.grad[i], fd));
        row.points += 1;
      }
    }
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(row);
  }

  {  // focal, gradient w.r.t. the true-class probability per cell
    GradCheckRow row{"focal_seg", 0.0, 0, false};
    SplitMix64 rng(303);
    const int classes = 5;
    const std::size_t cells = 16;
    LossWeights w;
    for (int rep = 0; rep < 8; ++rep) {
      std::vector<double> probs(cells * classes);
      std::vector<int> gt(cells);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
          const double v = rng.uniform(0.05, 1.0);
          probs[cell * classes + static_cast<std::size_t>(c)] = v;
          sum += v;
        }
        for (int c = 0; c < classes; ++c) probs[cell * classes + static_cast<std::size_t>(c)] /= sum;
        gt[cell] = static_cast<int>(rng.below(classes));
      }
      const ScalarWithGrad out = focal_seg(probs, gt, classes, w);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const std::size_t slot = cell * classes + static_cast<std::size_t>(gt[cell]);
        const double fd = detail::central_diff(
            [&](const std::vector<double>& x) { return focal_seg(x, gt, classes, w).value; },
            probs, slot, 2e-7);
        row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(out.grad[cell], fd));
        row.points += 1;
      }
    }
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(row);
  }

  {  // L1 away from ties
    GradCheckRow row{"l1_field", 0.0, 0, false};
    SplitMix64 rng(404);
    for (int rep = 0; rep < 8; ++rep) {
      FieldPair fp;
      fp.components = 2;
      fp.mask.assign(8, 1);
      fp.mask[3] = 0;
      fp.predicted.resize(16);
      fp.target.resize(16);
      for (std::size_t i = 0; i < 16; ++i) {
        fp.target[i] = rng.uniform(-1.0, 1.0);
        const double offset = rng.uniform(0.01, 0.5) * (rng.below(2) ? 1.0 : -1.0);
        fp.predicted[i] = fp.target[i] + offset;
      }
      const ScalarWithGrad out = l1_field(fp);
      for (std::size_t i = 0; i < fp.predicted.size(); ++i) {
        const double fd = detail::central_diff(
            [&](const std::vector<double>& x) {
              FieldPair p = fp;
              p.predicted = x;
              return l1_field(p).value;
            },
            fp.predicted, i, 1e-6);
        row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(out.grad[i], fd));
        row.points += 1;
      }
    }
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(row);
  }

  {  // L2
    GradCheckRow row{"l2_field", 0.0, 0, false};
    SplitMix64 rng(505);
    for (int rep = 0; rep < 8; ++rep) {
      FieldPair fp;
      fp.components = 2;
      fp.mask.assign(8, 1);
      fp.predicted.resize(16);
      fp.target.resize(16);
      for (std::size_t i = 0; i < 16; ++i) {
        fp.target[i] = rng.uniform(-1.0, 1.0);
        fp.predicted[i] = fp.target[i] + rng.uniform(0.01, 0.5) * (rng.below(2) ? 1.0 : -1.0);
      }
      const ScalarWithGrad out = l2_field(fp);
      for (std::size_t i = 0; i < fp.predicted.size(); ++i) {
        const double fd = detail::central_diff(
            [&](const std::vector<double>& x) {
              FieldPair p = fp;
              p.predicted = x;
              return l2_field(p).value;
            },
            fp.predicted, i, 1e-6);
        row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(out.grad[i], fd));
        row.points += 1;
      }
    }
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(row);
  }

  {  // semantic CE, gradient on true-class entries
    GradCheckRow row{"semantic_ce", 0.0, 0, false};
    SplitMix64 rng(606);
    const int classes = 6;
    for (int rep = 0; rep < 8; ++rep) {
      VoxelGrid grid = VoxelGrid::filled_free(tiny, classes);
      for (std::uint8_t& s : grid.semantics) {
        s = static_cast<std::uint8_t>(rng.below(classes));
      }
      const std::size_t n = grid.semantics.size();
      std::vector<double> probs(n * classes);
      for (std::size_t cell = 0; cell < n; ++cell) {
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
          const double v = rng.uniform(0.05, 1.0);
          probs[cell * classes + static_cast<std::size_t>(c)] = v;
          sum += v;
        }
        for (int c = 0; c < classes; ++c) probs[cell * classes + static_cast<std::size_t>(c)] /= sum;
      }
      const ScalarWithGrad out = semantic_ce(probs, grid);
      for (std::size_t cell = 0; cell < n; ++cell) {
        const std::size_t slot = cell * classes + grid.semantics[cell];
        const double fd = detail::central_diff(
            [&](const std::vector<double>& x) { return semantic_ce(x, grid).value; }, probs,
            slot, 2e-7);
        row.max_rel_err = std::max(row.max_rel_err, detail::rel_err(out.grad[slot], fd));
        row.points += 1;
      }
    }
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(row);
  }

  return rows;
}

}  // namespace occkit
