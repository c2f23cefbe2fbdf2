#include "sgan/imaging.hpp"

#include <png.h>

namespace sgan {

Mask hadamard(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) throw UsageError("hadamard: shape mismatch");
  Mask out = a;
  out.data = a.data * b.data;
  return out;
}

namespace {

/// Box filter when the source is an integer multiple of the target,
/// bilinear (pixel-center aligned) otherwise.
std::vector<double> resample(const Raster& src, Index th, Index tw) {
  std::vector<double> out(static_cast<std::size_t>(th * tw * 3));
  const Index sh = src.height, sw = src.width;
  auto px = [&](Index y, Index x, int c) {
    return double(src.pixels[static_cast<std::size_t>((y * sw + x) * 3 + c)]);
  };
  if (sh % th == 0 && sw % tw == 0) {
    const Index fy = sh / th, fx = sw / tw;
    for (Index y = 0; y < th; ++y)
      for (Index x = 0; x < tw; ++x)
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (Index dy = 0; dy < fy; ++dy)
            for (Index dx = 0; dx < fx; ++dx) acc += px(y * fy + dy, x * fx + dx, c);
          out[static_cast<std::size_t>((y * tw + x) * 3 + c)] = acc / double(fy * fx);
        }
    return out;
  }
  for (Index y = 0; y < th; ++y) {
    const double sy = std::clamp((double(y) + 0.5) * double(sh) / double(th) - 0.5, 0.0, double(sh - 1));
    const Index y0 = Index(sy), y1 = std::min(y0 + 1, sh - 1);
    const double wy = sy - double(y0);
    for (Index x = 0; x < tw; ++x) {
      const double sx =
          std::clamp((double(x) + 0.5) * double(sw) / double(tw) - 0.5, 0.0, double(sw - 1));
      const Index x0 = Index(sx), x1 = std::min(x0 + 1, sw - 1);
      const double wx = sx - double(x0);
      for (int c = 0; c < 3; ++c) {
        const double top = px(y0, x0, c) * (1 - wx) + px(y0, x1, c) * wx;
        const double bottom = px(y1, x0, c) * (1 - wx) + px(y1, x1, c) * wx;
        out[static_cast<std::size_t>((y * tw + x) * 3 + c)] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DataError("corrupt raster " + path.string() + ": " + image.message);
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw DataError("non-RGB input (alpha channel): " + path.string());
  }
  Raster raster;
  raster.channels = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  raster.height = image.height;
  raster.width = image.width;
  raster.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raster.pixels.data(), 0, nullptr))
    throw DataError("corrupt raster " + path.string() + ": " + image.message);
  return raster;
}

void write_png(const Raster& raster, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(raster.width);
  image.height = png_uint_32(raster.height);
  image.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, raster.pixels.data(), 0, nullptr))
    throw DataError("cannot write " + path.string() + ": " + image.message);
}

template <typename Scalar>
Image<Scalar> load_image(const std::filesystem::path& path, Index target_size) {
  if (target_size != 32 && target_size != 64 && target_size != 128)
    throw UsageError("target size must be 32, 64 or 128");
  const Raster raster = read_png(path);
  if (raster.channels != 3) throw DataError("non-RGB input: " + path.string());
  Image<Scalar> img(target_size, target_size);
  if (raster.height == target_size && raster.width == target_size) {
    for (Index p = 0; p < img.pixels(); ++p)
      for (int c = 0; c < 3; ++c)
        img.data(c, p) = dequantize<Scalar>(raster.pixels[std::size_t(p * 3 + c)]);
    return img;
  }
  const std::vector<double> resized = resample(raster, target_size, target_size);
  for (Index p = 0; p < img.pixels(); ++p)
    for (int c = 0; c < 3; ++c)
      img.data(c, p) = Scalar(2.0 * resized[std::size_t(p * 3 + c)] / 255.0 - 1.0);
  return img;
}

template <typename Scalar>
void save_image(const Image<Scalar>& img, const std::filesystem::path& path) {
  Raster raster;
  raster.height = img.height;
  raster.width = img.width;
  raster.channels = 3;
  raster.pixels.resize(std::size_t(img.pixels() * 3));
  for (Index p = 0; p < img.pixels(); ++p)
    for (int c = 0; c < 3; ++c) raster.pixels[std::size_t(p * 3 + c)] = quantize(img.data(c, p));
  write_png(raster, path);
}

template Image<float> load_image<float>(const std::filesystem::path&, Index);
template Image<double> load_image<double>(const std::filesystem::path&, Index);
template void save_image<float>(const Image<float>&, const std::filesystem::path&);
template void save_image<double>(const Image<double>&, const std::filesystem::path&);

Mask load_mask(const std::filesystem::path& path) {
  const Raster raster = read_png(path);
  if (raster.channels != 1) throw DataError("mask must be an 8-bit grayscale PNG: " + path.string());
  Mask mask(raster.height, raster.width);
  for (Index p = 0; p < mask.pixels(); ++p) {
    const std::uint8_t v = raster.pixels[std::size_t(p)];
    if (v != 0 && v != 255) throw DataError("mask values must be 0 or 255: " + path.string());
    mask.data(p) = v == 255 ? 1 : 0;
  }
  return mask;
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  Raster raster;
  raster.height = mask.height;
  raster.width = mask.width;
  raster.channels = 1;
  raster.pixels.resize(std::size_t(mask.pixels()));
  for (Index p = 0; p < mask.pixels(); ++p) raster.pixels[std::size_t(p)] = mask.data(p) ? 255 : 0;
  write_png(raster, path);
}

}  // namespace sgan
