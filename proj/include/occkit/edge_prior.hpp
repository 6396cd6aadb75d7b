#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/errors.hpp"

namespace occkit {

// Row-major integer class-id image, values[row * width + col].
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> values;

  int at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }
};

// Row-major scalar image in [0,1].
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  static EdgeMap zeros(int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("EdgeMap size must be positive");
    EdgeMap e;
    e.width = width;
    e.height = height;
    e.values.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
    return e;
  }

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }
  double& at(int row, int col) {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }

  void validate() const {
    if (values.size() !=
        static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw shape_error("EdgeMap payload size does not match dimensions");
    }
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) throw shape_error("EdgeMap value outside [0,1]");
    }
  }
};

enum class EdgeKernelKind { Sobel, Prewitt, Laplacian };

namespace detail {

inline std::vector<double> conv_1d(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

inline std::vector<double> outer_taps(const std::vector<double>& col,
                                      const std::vector<double>& row) {
  const std::size_t n = col.size();
  std::vector<double> taps(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) taps[r * n + c] = col[r] * row[c];
  }
  return taps;
}

}  // namespace detail

// Gradient kernels as size x size tap matrices. The horizontal kernel taps_x
// responds to left/right changes; taps_y is its transpose. Sizes 5 and 7 grow
// the 3x3 base by repeated binomial smoothing (Sobel, Laplacian) or extend the
// uniform-smoothing ramp form (Prewitt). Laplacian is a single symmetric
// kernel; its taps_y mirrors taps_x and is ignored by consumers.
struct EdgeKernel {
  EdgeKernelKind kind = EdgeKernelKind::Sobel;
  int size = 3;
  std::vector<double> taps_x;
  std::vector<double> taps_y;

  static EdgeKernel make(EdgeKernelKind kind, int size) {
    if (size != 3 && size != 5 && size != 7) {
      throw std::invalid_argument("EdgeKernel size must be 3, 5, or 7");
    }
    EdgeKernel k;
    k.kind = kind;
    k.size = size;
    const std::size_t n = static_cast<std::size_t>(size);

    if (kind == EdgeKernelKind::Sobel) {
      std::vector<double> smooth{1, 2, 1};
      std::vector<double> diff{-1, 0, 1};
      for (int s = 3; s < size; s += 2) {
        smooth = detail::conv_1d(smooth, {1, 2, 1});
        diff = detail::conv_1d(diff, {1, 2, 1});
      }
      k.taps_x = detail::outer_taps(smooth, diff);
    } else if (kind == EdgeKernelKind::Prewitt) {
      std::vector<double> smooth(n, 1.0);
      std::vector<double> diff(n);
      for (int i = 0; i < size; ++i) diff[static_cast<std::size_t>(i)] = i - size / 2;
      k.taps_x = detail::outer_taps(smooth, diff);
    } else {
      std::vector<double> taps{0, 1, 0, 1, -4, 1, 0, 1, 0};
      std::vector<double> smooth{1};
      for (int s = 3; s < size; s += 2) smooth = detail::conv_1d(smooth, {1, 2, 1});
      if (size > 3) {
        const std::vector<double> window = detail::outer_taps(smooth, smooth);
        const int ws = size - 2;
        std::vector<double> grown(n * n, 0.0);
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            for (int wr = 0; wr < ws; ++wr) {
              for (int wc = 0; wc < ws; ++wc) {
                grown[static_cast<std::size_t>((r + wr) * size + (c + wc))] +=
                    taps[static_cast<std::size_t>(r * 3 + c)] *
                    window[static_cast<std::size_t>(wr * ws + wc)];
              }
            }
          }
        }
        taps = std::move(grown);
      }
      k.taps_x = std::move(taps);
    }

    k.taps_y.resize(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) k.taps_y[r * n + c] = k.taps_x[c * n + r];
    }
    k.validate();
    return k;
  }

  void validate() const {
    const std::size_t n = static_cast<std::size_t>(size);
    if (taps_x.size() != n * n || taps_y.size() != n * n) {
      throw shape_error("EdgeKernel taps size mismatch");
    }
    double sum_x = 0.0;
    for (double t : taps_x) sum_x += t;
    if (std::abs(sum_x) > 1e-12) {
      throw std::invalid_argument("EdgeKernel taps_x must sum to zero");
    }
    if (kind != EdgeKernelKind::Laplacian) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          if (taps_y[r * n + c] != taps_x[c * n + r]) {
            throw std::invalid_argument("EdgeKernel taps_y must equal transpose of taps_x");
          }
        }
      }
    }
  }
};

inline EdgeKernelKind parse_kernel_kind(const std::string& name) {
  if (name == "sobel") return EdgeKernelKind::Sobel;
  if (name == "prewitt") return EdgeKernelKind::Prewitt;
  if (name == "laplacian") return EdgeKernelKind::Laplacian;
  throw std::invalid_argument("unknown edge kernel: " + name);
}

// Two-layer head p = sigmoid(w2 . relu(w1 . x)) applied per cell.
// w1 is hidden_dim x channels row-major, w2 has hidden_dim entries.
struct EdgeHead {
  int hidden_dim = 0;
  std::vector<double> w1;
  std::vector<double> w2;

  void validate(int channels) const {
    if (hidden_dim < 1) throw std::invalid_argument("EdgeHead hidden_dim must be >= 1");
    if (w1.size() != static_cast<std::size_t>(hidden_dim) * static_cast<std::size_t>(channels)) {
      throw shape_error("EdgeHead w1 shape mismatch");
    }
    if (w2.size() != static_cast<std::size_t>(hidden_dim)) {
      throw shape_error("EdgeHead w2 shape mismatch");
    }
    for (double v : w1) {
      if (!std::isfinite(v)) throw std::invalid_argument("EdgeHead w1 not finite");
    }
    for (double v : w2) {
      if (!std::isfinite(v)) throw std::invalid_argument("EdgeHead w2 not finite");
    }
  }
};

// Binary pseudo edge labels: gradient magnitude of the raw class-id map under
// the kernel pair, replicate border padding, binarized at magnitude > 0.
// Class ids are small integers, so the convolution is exact in doubles and
// the > 0 test is free of threshold tuning.
inline EdgeMap extract_pseudo_edges(const LabelMap& labels, const EdgeKernel& kernel) {
  if (labels.width < 1 || labels.height < 1 ||
      labels.values.size() !=
          static_cast<std::size_t>(labels.width) * static_cast<std::size_t>(labels.height)) {
    throw shape_error("extract_pseudo_edges: invalid label map");
  }
  kernel.validate();
  const int h = kernel.size / 2;
  EdgeMap out = EdgeMap::zeros(labels.width, labels.height);
  for (int r = 0; r < labels.height; ++r) {
    for (int c = 0; c < labels.width; ++c) {
      double gx = 0.0, gy = 0.0;
      for (int dr = -h; dr <= h; ++dr) {
        for (int dc = -h; dc <= h; ++dc) {
          const int rr = std::clamp(r + dr, 0, labels.height - 1);
          const int cc = std::clamp(c + dc, 0, labels.width - 1);
          const std::size_t t =
              static_cast<std::size_t>((dr + h) * kernel.size + (dc + h));
          const double y = labels.at(rr, cc);
          gx += kernel.taps_x[t] * y;
          gy += kernel.taps_y[t] * y;
        }
      }
      const double mag = (kernel.kind == EdgeKernelKind::Laplacian)
                             ? std::abs(gx)
                             : std::sqrt(gx * gx + gy * gy);
      out.at(r, c) = mag > 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Rows map to BEV x, columns to BEV y.
inline EdgeMap edge_head_forward(const BEVGrid& features, const EdgeHead& head) {
  head.validate(features.channels);
  EdgeMap out = EdgeMap::zeros(features.geometry.dims[1], features.geometry.dims[0]);
  const int channels = features.channels;
  for (int ix = 0; ix < features.geometry.dims[0]; ++ix) {
    for (int iy = 0; iy < features.geometry.dims[1]; ++iy) {
      double pre = 0.0;
      for (int hd = 0; hd < head.hidden_dim; ++hd) {
        double acc = 0.0;
        const std::size_t row = static_cast<std::size_t>(hd) * static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) {
          acc += head.w1[row + static_cast<std::size_t>(c)] * features.at(ix, iy, c);
        }
        if (acc > 0.0) pre += head.w2[static_cast<std::size_t>(hd)] * acc;
      }
      out.at(ix, iy) = sigmoid(pre);
    }
  }
  return out;
}

inline constexpr double kLogClampEps = 1e-7;

// Mean binary cross-entropy over cells; gradient w.r.t. pred, evaluated at
// the clamped probabilities.
inline ScalarWithGrad edge_bce_loss(const EdgeMap& pred, const EdgeMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw shape_error("edge_bce_loss: shape mismatch");
  }
  for (double g : gt.values) {
    if (g != 0.0 && g != 1.0) throw std::invalid_argument("edge_bce_loss: gt must be binary");
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

}  // namespace occkit
