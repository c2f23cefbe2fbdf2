#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgan/errors.hpp"

namespace sgan {

using Index = Eigen::Index;

/// H x W x 3 image in the generator range [-1, 1], stored as three channel
/// planes (row c, column y * width + x).
template <typename Scalar>
struct Image {
  using Planes = Eigen::Matrix<Scalar, 3, Eigen::Dynamic, Eigen::RowMajor>;

  Index height = 0;
  Index width = 0;
  Planes data;

  Image() = default;
  Image(Index h, Index w) : height(h), width(w), data(Planes::Zero(3, h * w)) {}

  static Image constant(Index h, Index w, Scalar value) {
    Image img(h, w);
    img.data.setConstant(value);
    return img;
  }

  Scalar& operator()(Index c, Index y, Index x) { return data(c, y * width + x); }
  Scalar operator()(Index c, Index y, Index x) const { return data(c, y * width + x); }

  Index pixels() const { return height * width; }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }

  bool operator==(const Image& o) const { return same_shape(o) && data == o.data; }
};

using ImageF = Image<float>;
using ImageD = Image<double>;

/// Binary per-pixel mask, 1 = uncorrupted, broadcast across channels.
struct Mask {
  using Values = Eigen::Array<std::uint8_t, 1, Eigen::Dynamic>;

  Index height = 0;
  Index width = 0;
  Values data;

  Mask() = default;
  Mask(Index h, Index w, std::uint8_t fill = 1) : height(h), width(w), data(Values::Constant(h * w, fill)) {}

  std::uint8_t& operator()(Index y, Index x) { return data(y * width + x); }
  std::uint8_t operator()(Index y, Index x) const { return data(y * width + x); }

  Index pixels() const { return height * width; }
  Index count_zeros() const { return pixels() - count_ones(); }
  Index count_ones() const { return static_cast<Index>((data != 0).count()); }
  double corrupted_fraction() const { return double(count_zeros()) / double(pixels()); }
  bool is_binary() const { return ((data == 0) || (data == 1)).all(); }

  bool operator==(const Mask& o) const {
    return height == o.height && width == o.width && (data == o.data).all();
  }
};

/// Elementwise product of two masks.
Mask hadamard(const Mask& a, const Mask& b);

template <typename Scalar>
Image<Scalar> to_unit_range(const Image<Scalar>& img) {
  Image<Scalar> out = img;
  out.data = (img.data.array() + Scalar(1)) / Scalar(2);
  return out;
}

template <typename Scalar>
Image<Scalar> from_unit_range(const Image<Scalar>& img) {
  Image<Scalar> out = img;
  out.data = img.data.array() * Scalar(2) - Scalar(1);
  return out;
}

/// True when every value lies in [-1, 1].
template <typename Scalar>
bool in_generator_range(const Image<Scalar>& img) {
  return (img.data.array() >= Scalar(-1)).all() && (img.data.array() <= Scalar(1)).all();
}

/// PSNR returned for identical images, keeping averages over pairs finite.
inline constexpr double kPsnrCap = 100.0;

/// Peak signal-to-noise ratio on the 8-bit scale: both images are mapped
/// affinely to [0, 255] (no rounding) and PSNR = 10 log10(255^2 / MSE), MSE
/// averaged over pixels and channels. Zero MSE yields kPsnrCap.
template <typename Scalar>
double psnr(const Image<Scalar>& a, const Image<Scalar>& b) {
  if (!a.same_shape(b)) throw UsageError("psnr: shape mismatch");
  if (a.pixels() == 0) throw UsageError("psnr: empty images");
  const double scale = 127.5;
  const double mse =
      ((a.data.template cast<double>() - b.data.template cast<double>()) * scale).squaredNorm() /
      double(a.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

/// Keeps mask-1 pixels and replaces mask-0 pixels with `fill` (black by
/// default).
template <typename Scalar>
Image<Scalar> apply_mask(const Image<Scalar>& img, const Mask& mask, Scalar fill = Scalar(-1)) {
  if (img.height != mask.height || img.width != mask.width)
    throw UsageError("apply_mask: shape mismatch");
  Image<Scalar> out = img;
  for (Index p = 0; p < img.pixels(); ++p)
    if (mask.data(p) == 0) out.data.col(p).setConstant(fill);
  return out;
}

// PNG boundary. Pixel p in {0..255} maps to 2p/255 - 1; saving inverts with
// round-half-up and clamps to [0, 255].

template <typename Scalar>
Image<Scalar> load_image(const std::filesystem::path& path, Index target_size);

template <typename Scalar>
void save_image(const Image<Scalar>& img, const std::filesystem::path& path);

/// 8-bit value for a generator-range sample.
template <typename Scalar>
std::uint8_t quantize(Scalar v) {
  const double unit = (double(v) + 1.0) * 127.5;
  const double rounded = std::floor(unit + 0.5);
  return static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
}

template <typename Scalar>
Scalar dequantize(std::uint8_t p) {
  return Scalar(2.0 * double(p) / 255.0 - 1.0);
}

/// Masks are 8-bit grayscale PNGs: 0 = corrupted, 255 = uncorrupted.
Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path);

/// Raw 8-bit raster used by the PNG layer.
struct Raster {
  Index height = 0;
  Index width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

Raster read_png(const std::filesystem::path& path);
void write_png(const Raster& raster, const std::filesystem::path& path);

}  // namespace sgan
