#pragma once

#include <Eigen/Core>

#include <cassert>
#include <string>

#include "sgan/errors.hpp"

namespace sgan::nn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A batch of feature maps stored channel-planar: one row per channel, one
/// column per (sample, y, x) site, column index (n * height + y) * width + x.
template <typename Scalar>
struct Tensor {
  Index batch = 0;
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  RowMatrix<Scalar> data;

  Tensor() = default;
  Tensor(Index n, Index c, Index h, Index w)
      : batch(n), channels(c), height(h), width(w), data(RowMatrix<Scalar>::Zero(c, n * h * w)) {}

  Index sites() const { return height * width; }
  bool same_shape(const Tensor& other) const {
    return batch == other.batch && channels == other.channels && height == other.height &&
           width == other.width;
  }
  std::string shape_string() const {
    return std::to_string(batch) + "x" + std::to_string(channels) + "x" + std::to_string(height) +
           "x" + std::to_string(width);
  }
};

/// Geometry of a strided square-kernel convolution between a "large" grid
/// (conv input / transposed-conv output) and a "small" grid.
struct ConvGeometry {
  Index kernel = 5;
  Index stride = 2;
  Index pad = 2;

  /// Output extent of a forward convolution over `in` pixels.
  Index reduced(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

/// Unfolds `large` (C x N*H*W) into patch columns: row (c*K + ky)*K + kx,
/// column (n*Ho + oy)*Wo + ox. Out-of-frame taps read zero.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& large, const ConvGeometry& g, Index out_h,
                         Index out_w) {
  const Index k = g.kernel;
  const Index n_cols = large.batch * out_h * out_w;
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(large.channels * k * k, n_cols);
  for (Index c = 0; c < large.channels; ++c) {
    const Scalar* src = large.data.row(c).data();
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((c * k + ky) * k + kx).data();
        for (Index n = 0; n < large.batch; ++n) {
          const Scalar* plane = src + n * large.height * large.width;
          Scalar* out = dst + n * out_h * out_w;
          for (Index oy = 0; oy < out_h; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= large.height) continue;
            const Scalar* line = plane + iy * large.width;
            for (Index ox = 0; ox < out_w; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < large.width) out[oy * out_w + ox] = line[ix];
            }
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters patch columns back onto `large`, accumulating.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Index out_h, Index out_w,
            Tensor<Scalar>& large) {
  const Index k = g.kernel;
  assert(cols.rows() == large.channels * k * k);
  for (Index c = 0; c < large.channels; ++c) {
    Scalar* dst = large.data.row(c).data();
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* src = cols.row((c * k + ky) * k + kx).data();
        for (Index n = 0; n < large.batch; ++n) {
          Scalar* plane = dst + n * large.height * large.width;
          const Scalar* in = src + n * out_h * out_w;
          for (Index oy = 0; oy < out_h; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= large.height) continue;
            Scalar* line = plane + iy * large.width;
            for (Index ox = 0; ox < out_w; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < large.width) line[ix] += in[oy * out_w + ox];
            }
          }
        }
      }
    }
  }
}

/// Tap-validity matrix (K*K x Ho*Wo): 1 where a kernel tap lands inside a
/// `large_h` x `large_w` frame. Convolving a spatially constant input reduces
/// to a product with this matrix.
template <typename Scalar>
RowMatrix<Scalar> tap_validity(const ConvGeometry& g, Index large_h, Index large_w, Index out_h,
                               Index out_w) {
  const Index k = g.kernel;
  RowMatrix<Scalar> valid = RowMatrix<Scalar>::Zero(k * k, out_h * out_w);
  for (Index ky = 0; ky < k; ++ky)
    for (Index kx = 0; kx < k; ++kx)
      for (Index oy = 0; oy < out_h; ++oy)
        for (Index ox = 0; ox < out_w; ++ox) {
          const Index iy = oy * g.stride - g.pad + ky;
          const Index ix = ox * g.stride - g.pad + kx;
          if (iy >= 0 && iy < large_h && ix >= 0 && ix < large_w)
            valid(ky * k + kx, oy * out_w + ox) = Scalar(1);
        }
  return valid;
}

}  // namespace sgan::nn
