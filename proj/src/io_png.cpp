#include "gdhm/io_png.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace gdhm {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

int color_type_for(int channels) {
  switch (channels) {
    case 1:
      return PNG_COLOR_TYPE_GRAY;
    case 3:
      return PNG_COLOR_TYPE_RGB;
    default:
      throw data_error("png: unsupported channel count " + std::to_string(channels));
  }
}

template <typename Pixel>
void write_png_impl(const std::string& path, const Image& img, int bit_depth, double scale) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw data_error("png: cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw data_error("png: write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, bit_depth, color_type_for(img.c),
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // rows below are little-endian

  std::vector<Pixel> row(static_cast<size_t>(img.w) * img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.c; ++c) {
        double v = img.at(c, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        row[static_cast<size_t>(x) * img.c + c] = static_cast<Pixel>(std::lround(v * scale));
      }
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png8(const std::string& path, const Image& img) {
  write_png_impl<uint8_t>(path, img, 8, 255.0);
}

void write_png16(const std::string& path, const Image& img) {
  write_png_impl<uint16_t>(path, img, 16, 65535.0);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw data_error("png: cannot open: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw data_error("png: read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int w = png_get_image_width(png, info);
  const int h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int ctype = png_get_color_type(png, info);

  if (ctype == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (ctype == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (ctype & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw data_error("png: unsupported channel count in " + path);
  }

  Image img(h, w, channels);
  const double inv = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  if (depth == 16) {
    std::vector<uint16_t> row(static_cast<size_t>(w) * channels);
    for (int y = 0; y < h; ++y) {
      png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < channels; ++c)
          img.at(c, y, x) = row[static_cast<size_t>(x) * channels + c] * inv;
    }
  } else {
    std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
    for (int y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < channels; ++c)
          img.at(c, y, x) = row[static_cast<size_t>(x) * channels + c] * inv;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace gdhm
