#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/errors.hpp"
#include "occkit/parallel.hpp"

namespace occkit {

struct Ray {
  Vec3 origin{};
  Vec3 direction{0.0, 0.0, 1.0};
  int camera_index = 0;
  double u = 0.0;
  double v = 0.0;

  void validate() const {
    if (!all_finite(origin) || !all_finite(direction)) {
      throw std::invalid_argument("Ray fields must be finite");
    }
    if (std::abs(norm(direction) - 1.0) > 1e-9) {
      throw std::invalid_argument("Ray direction must be unit length within 1e-9");
    }
  }
};

struct RayHit {
  int cls = 0;
  int instance = 0;
  double depth = 0.0;
};

// Per-ray evidence: what the ground-truth and predicted volumes returned for
// the same ray.
struct RayRecord {
  std::optional<RayHit> gt_hit;
  std::optional<RayHit> pred_hit;
};

// One ray per stride-sampled pixel per camera; origin at the camera center,
// direction through the pixel. Ordering is camera index, then row-major
// pixels, so the list is reproducible.
inline std::vector<Ray> generate_rays(const std::vector<CameraModel>& cams, int stride) {
  if (stride < 1) throw std::invalid_argument("generate_rays: stride must be >= 1");
  std::vector<Ray> rays;
  for (std::size_t ci = 0; ci < cams.size(); ++ci) {
    const CameraModel& cam = cams[ci];
    cam.validate();
    for (int v = 0; v < cam.height; v += stride) {
      for (int u = 0; u < cam.width; u += stride) {
        Ray r;
        r.origin = cam.center();
        r.direction = cam.ray_direction(u, v);
        r.camera_index = static_cast<int>(ci);
        r.u = u;
        r.v = v;
        rays.push_back(r);
      }
    }
  }
  return rays;
}

namespace detail {

// Parametric entry distance of the ray into an axis-aligned box, clamped at 0
// for origins inside the box. Written as max over axes of the near slab
// crossing; both the traversal and the exhaustive test oracle use this exact
// expression, so agreeing on the hit voxel implies agreeing on the depth.
inline double box_entry_distance(const Vec3& origin, const Vec3& dir, const Vec3& lo,
                                 const Vec3& hi) {
  double t_in = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) continue;
    const double ta = (lo[a] - origin[a]) / dir[a];
    const double tb = (hi[a] - origin[a]) / dir[a];
    t_in = std::max(t_in, std::min(ta, tb));
  }
  return t_in;
}

}  // namespace detail

// First non-free voxel along the ray, via amanatides-woo stepping from the
// grid entry point. Depth is recomputed as the entry distance into the hit
// voxel's own box rather than taken from the accumulated crossing times, so
// it carries no per-step rounding drift.
inline std::optional<RayHit> traverse(const VoxelGrid& grid, const Ray& ray) {
  ray.validate();
  const GridGeometry& g = grid.geometry;
  const Vec3 lo{g.x_range[0], g.y_range[0], g.z_range[0]};
  const Vec3 hi{g.x_range[1], g.y_range[1], g.z_range[1]};

  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (ray.direction[a] == 0.0) {
      if (ray.origin[a] < lo[a] || ray.origin[a] >= hi[a]) return std::nullopt;
      continue;
    }
    const double ta = (lo[a] - ray.origin[a]) / ray.direction[a];
    const double tb = (hi[a] - ray.origin[a]) / ray.direction[a];
    t0 = std::max(t0, std::min(ta, tb));
    t1 = std::min(t1, std::max(ta, tb));
  }
  if (t1 < t0) return std::nullopt;

  const Vec3 entry = ray.origin + t0 * ray.direction;
  int idx[3];
  int step[3];
  double t_max[3];
  double t_delta[3];
  for (int a = 0; a < 3; ++a) {
    const double size = g.voxel_size[a];
    int i = static_cast<int>(std::floor((entry[a] - lo[a]) / size));
    idx[a] = std::clamp(i, 0, g.dims[a] - 1);
    const double d = ray.direction[a];
    if (d > 0.0) {
      step[a] = 1;
      t_max[a] = (lo[a] + (idx[a] + 1) * size - ray.origin[a]) / d;
      t_delta[a] = size / d;
    } else if (d < 0.0) {
      step[a] = -1;
      t_max[a] = (lo[a] + idx[a] * size - ray.origin[a]) / d;
      t_delta[a] = -size / d;
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  while (true) {
    const std::size_t f = g.flat_index(idx[0], idx[1], idx[2]);
    if (grid.semantics[f] != grid.free_class) {
      const Vec3 vlo = {lo.x + idx[0] * g.voxel_size.x, lo.y + idx[1] * g.voxel_size.y,
                        lo.z + idx[2] * g.voxel_size.z};
      const Vec3 vhi = {vlo.x + g.voxel_size.x, vlo.y + g.voxel_size.y,
                        vlo.z + g.voxel_size.z};
      return RayHit{grid.semantics[f], grid.instances[f],
                    detail::box_entry_distance(ray.origin, ray.direction, vlo, vhi)};
    }
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= g.dims[axis]) return std::nullopt;
    t_max[axis] += t_delta[axis];
  }
}

// Traverses both volumes for every ray. Slots are written independently, so
// the output is identical for any thread count.
inline std::vector<RayRecord> build_records(const VoxelGrid& pred, const VoxelGrid& gt,
                                            const std::vector<Ray>& rays, int threads = 1) {
  if (!(pred.geometry == gt.geometry) || pred.class_count != gt.class_count ||
      pred.free_class != gt.free_class) {
    throw shape_error("build_records: pred/gt volume mismatch");
  }
  std::vector<RayRecord> records(rays.size());
  parallel_for(rays.size(), threads, [&](std::size_t i) {
    records[i].gt_hit = traverse(gt, rays[i]);
    records[i].pred_hit = traverse(pred, rays[i]);
  });
  return records;
}

struct IoUReport {
  std::vector<double> per_class;
  std::vector<std::uint8_t> included;  // 0: empty union or FREE, excluded from mean
  double miou = 0.0;
  bool vacuous = false;  // no class had a nonempty union; miou reported as 1
};

// Voxel-set IoU per class over masked voxels. FREE and classes with an empty
// union are excluded from the mean.
inline IoUReport per_class_iou(const VoxelGrid& pred, const VoxelGrid& gt,
                               const std::vector<std::uint8_t>& mask = {}) {
  if (!(pred.geometry == gt.geometry) || pred.class_count != gt.class_count) {
    throw shape_error("per_class_iou: volume mismatch");
  }
  const std::size_t n = gt.semantics.size();
  if (!mask.empty() && mask.size() != n) {
    throw shape_error("per_class_iou: mask size mismatch");
  }
  const std::size_t c_count = static_cast<std::size_t>(gt.class_count);
  std::vector<long long> inter(c_count, 0), pred_n(c_count, 0), gt_n(c_count, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const std::uint8_t p = pred.semantics[i], g = gt.semantics[i];
    pred_n[p] += 1;
    gt_n[g] += 1;
    if (p == g) inter[p] += 1;
  }
  IoUReport report;
  report.per_class.assign(c_count, 0.0);
  report.included.assign(c_count, 0);
  double sum = 0.0;
  int included = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    const long long uni = pred_n[c] + gt_n[c] - inter[c];
    if (uni > 0) {
      report.per_class[c] = static_cast<double>(inter[c]) / static_cast<double>(uni);
    }
    if (static_cast<int>(c) == gt.free_class || uni == 0) continue;
    report.included[c] = 1;
    sum += report.per_class[c];
    included += 1;
  }
  if (included == 0) {
    report.vacuous = true;
    report.miou = 1.0;
  } else {
    report.miou = sum / included;
  }
  return report;
}

struct RayTallies {
  std::vector<long long> tp, fp, fn;
};

// Integer TP/FP/FN per class at one depth threshold. A both-hit ray with
// matching class and depth error within the threshold is one TP; otherwise
// the pred hit charges FP to its class and the gt hit charges FN to its
// class (both, when both hits exist and mismatch).
inline RayTallies rayiou_tallies(const std::vector<RayRecord>& records, int class_count,
                                 double threshold) {
  RayTallies t;
  t.tp.assign(static_cast<std::size_t>(class_count), 0);
  t.fp.assign(static_cast<std::size_t>(class_count), 0);
  t.fn.assign(static_cast<std::size_t>(class_count), 0);
  for (const RayRecord& r : records) {
    if (r.pred_hit && r.gt_hit && r.pred_hit->cls == r.gt_hit->cls &&
        std::abs(r.pred_hit->depth - r.gt_hit->depth) <= threshold) {
      t.tp[static_cast<std::size_t>(r.pred_hit->cls)] += 1;
      continue;
    }
    if (r.pred_hit) t.fp[static_cast<std::size_t>(r.pred_hit->cls)] += 1;
    if (r.gt_hit) t.fn[static_cast<std::size_t>(r.gt_hit->cls)] += 1;
  }
  return t;
}

struct RayIoUResult {
  std::map<double, double> at;
  double mean = 0.0;
  bool vacuous = false;  // no class had any tally at any threshold
};

// Mean over classes (with a nonzero tally) of TP/(TP+FP+FN) per threshold,
// then mean over thresholds. free_class never appears in hits, so it never
// enters the average.
inline RayIoUResult rayiou(const std::vector<RayRecord>& records, int class_count,
                           const std::vector<double>& thresholds = {1.0, 2.0, 4.0}) {
  if (thresholds.empty()) throw std::invalid_argument("rayiou: need at least one threshold");
  RayIoUResult result;
  result.vacuous = true;
  double total = 0.0;
  for (double d : thresholds) {
    const RayTallies t = rayiou_tallies(records, class_count, d);
    double sum = 0.0;
    int classes = 0;
    for (int c = 0; c < class_count; ++c) {
      const long long denom = t.tp[static_cast<std::size_t>(c)] +
                              t.fp[static_cast<std::size_t>(c)] +
                              t.fn[static_cast<std::size_t>(c)];
      if (denom == 0) continue;
      sum += static_cast<double>(t.tp[static_cast<std::size_t>(c)]) /
             static_cast<double>(denom);
      classes += 1;
    }
    const double value = classes == 0 ? 1.0 : sum / classes;
    if (classes > 0) result.vacuous = false;
    result.at[d] = value;
    total += value;
  }
  result.mean = total / static_cast<double>(thresholds.size());
  return result;
}

struct PQComponents {
  double sq = 0.0;
  double rq = 0.0;
  double pq = 0.0;
  long long tp = 0, fp = 0, fn = 0;
};

struct RayPQResult {
  std::map<double, PQComponents> at;
  double mean = 0.0;
};

// Ray-level panoptic quality. Instance id 0 is "no instance" and never forms
// an instance. A ray supports pair (p, g) when its pred instance is p, its gt
// instance is g, the classes agree, and the depth error is within the
// threshold; IoU is support over the union of the two instances' rays. Pairs
// with IoU above match_iou match greedily (descending IoU, then instance ids)
// with each instance used once. With no instances on either side the result
// is the identity value 1.
inline RayPQResult raypq(const std::vector<RayRecord>& records,
                         const std::vector<double>& thresholds = {1.0, 2.0, 4.0},
                         double match_iou = 0.5) {
  if (thresholds.empty()) throw std::invalid_argument("raypq: need at least one threshold");
  if (!(match_iou >= 0.0 && match_iou < 1.0)) {
    throw std::invalid_argument("raypq: match_iou must be in [0,1)");
  }

  std::map<int, long long> pred_rays, gt_rays;
  for (const RayRecord& r : records) {
    if (r.pred_hit && r.pred_hit->instance != 0) pred_rays[r.pred_hit->instance] += 1;
    if (r.gt_hit && r.gt_hit->instance != 0) gt_rays[r.gt_hit->instance] += 1;
  }

  RayPQResult result;
  double total = 0.0;
  for (double d : thresholds) {
    std::map<std::pair<int, int>, long long> support;
    for (const RayRecord& r : records) {
      if (!r.pred_hit || !r.gt_hit) continue;
      if (r.pred_hit->instance == 0 || r.gt_hit->instance == 0) continue;
      if (r.pred_hit->cls != r.gt_hit->cls) continue;
      if (std::abs(r.pred_hit->depth - r.gt_hit->depth) > d) continue;
      support[{r.pred_hit->instance, r.gt_hit->instance}] += 1;
    }

    struct Candidate {
      double iou;
      int p, g;
    };
    std::vector<Candidate> candidates;
    for (const auto& [pair, valid] : support) {
      const long long uni = pred_rays[pair.first] + gt_rays[pair.second] - valid;
      const double iou = static_cast<double>(valid) / static_cast<double>(uni);
      if (iou > match_iou) candidates.push_back({iou, pair.first, pair.second});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.p != b.p) return a.p < b.p;
      return a.g < b.g;
    });

    std::map<int, bool> p_used, g_used;
    double iou_sum = 0.0;
    long long tp = 0;
    for (const Candidate& c : candidates) {
      if (p_used[c.p] || g_used[c.g]) continue;
      p_used[c.p] = g_used[c.g] = true;
      iou_sum += c.iou;
      tp += 1;
    }
    const long long fp = static_cast<long long>(pred_rays.size()) - tp;
    const long long fn = static_cast<long long>(gt_rays.size()) - tp;

    PQComponents pc;
    pc.tp = tp;
    pc.fp = fp;
    pc.fn = fn;
    if (pred_rays.empty() && gt_rays.empty()) {
      pc.sq = pc.rq = pc.pq = 1.0;
    } else {
      pc.sq = tp > 0 ? iou_sum / static_cast<double>(tp) : 0.0;
      const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) +
                            0.5 * static_cast<double>(fn);
      pc.rq = denom > 0.0 ? static_cast<double>(tp) / denom : 0.0;
      pc.pq = pc.sq * pc.rq;
    }
    result.at[d] = pc;
    total += pc.pq;
  }
  result.mean = total / static_cast<double>(thresholds.size());
  return result;
}

struct MetricReport {
  IoUReport iou;
  RayIoUResult ray_iou;
  RayPQResult ray_pq;
};

struct EvalConfig {
  std::vector<double> thresholds = {1.0, 2.0, 4.0};
  double match_iou = 0.5;
  int threads = 1;
  std::vector<std::uint8_t> voxel_mask;  // optional mIoU mask
};

inline MetricReport evaluate_metrics(const VoxelGrid& pred, const VoxelGrid& gt,
                                     const std::vector<Ray>& rays,
                                     const EvalConfig& cfg = {}) {
  MetricReport report;
  report.iou = per_class_iou(pred, gt, cfg.voxel_mask);
  const std::vector<RayRecord> records = build_records(pred, gt, rays, cfg.threads);
  report.ray_iou = rayiou(records, gt.class_count, cfg.thresholds);
  report.ray_pq = raypq(records, cfg.thresholds, cfg.match_iou);
  return report;
}

}  // namespace occkit
