#include "semsds/render/image_io.hpp"

#include "semsds/error.hpp"
#include "semsds/util/binary_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace semsds {

namespace {

void check_shape(std::span<const double> values, int width, int height, int channels) {
  if (width <= 0 || height <= 0 || channels <= 0 ||
      values.size() != std::size_t(width) * height * channels) {
    throw_error(ErrorKind::InvalidInput, "image buffer does not match its shape");
  }
}

}  // namespace

namespace {

/// libpng reports errors through longjmp; keep only trivially destructible
/// locals in this frame.
bool encode_png(FILE* file, png_bytep* rows, int width, int height, int color_type) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

void write_png(const std::filesystem::path& path, std::span<const double> values, int width,
               int height, int channels) {
  check_shape(values, width, height, channels);
  int color_type = 0;
  switch (channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: throw_error(ErrorKind::InvalidInput, "PNG output supports 1, 3 or 4 channels");
  }
  std::vector<png_byte> pixels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    pixels[i] = static_cast<png_byte>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = &pixels[std::size_t(y) * width * channels];

  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw_error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  if (!encode_png(file.get(), rows.data(), width, height, color_type)) {
    throw_error(ErrorKind::Io, "libpng failed writing " + path.string());
  }
}

void write_float_image(const std::filesystem::path& path, std::span<const double> values,
                       int width, int height, int channels) {
  check_shape(values, width, height, channels);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw_error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  binio::write_magic(os, "IMG1");
  binio::write<std::uint32_t>(os, height);
  binio::write<std::uint32_t>(os, width);
  binio::write<std::uint32_t>(os, channels);
  for (double v : values) binio::write<float>(os, static_cast<float>(v));
  if (!os) throw_error(ErrorKind::Io, "failed writing " + path.string());
}

FloatImage read_float_image(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_error(ErrorKind::Io, "cannot open " + path.string());
  if (!binio::read_magic(is, "IMG1")) {
    throw_error(ErrorKind::InvalidInput, path.string() + " is not an IMG1 dump");
  }
  FloatImage img;
  img.height = static_cast<int>(binio::read<std::uint32_t>(is));
  img.width = static_cast<int>(binio::read<std::uint32_t>(is));
  img.channels = static_cast<int>(binio::read<std::uint32_t>(is));
  img.values.resize(std::size_t(img.height) * img.width * img.channels);
  is.read(reinterpret_cast<char*>(img.values.data()),
          static_cast<std::streamsize>(img.values.size() * sizeof(float)));
  if (!is) throw_error(ErrorKind::InvalidInput, path.string() + " is truncated");
  return img;
}

}  // namespace semsds
