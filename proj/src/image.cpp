#include "dynfv/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "dynfv/error.hpp"

namespace dynfv {

Image Image::flat(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  for (size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

Mask Mask::all_on(int w, int h) {
  Mask m;
  m.width = w;
  m.height = h;
  m.on.assign(static_cast<size_t>(w) * h, 1);
  return m;
}

size_t Mask::active() const {
  size_t n = 0;
  for (uint8_t v : on) n += v != 0;
  return n;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png_rgb(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) raise(ErrorCode::io, "cannot open PNG: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(ErrorCode::internal, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(ErrorCode::internal, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::format, "not a valid PNG file: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  // Normalize whatever we were handed to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  Image img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);

  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    rows[y] = img.rgb.data() + static_cast<size_t>(y) * img.width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png_rgb(const std::string& path, const Image& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) raise(ErrorCode::io, "cannot write PNG: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) raise(ErrorCode::internal, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    raise(ErrorCode::internal, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::io, "failed writing PNG: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(
                           img.rgb.data() + static_cast<size_t>(y) * img.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Mask load_mask(const std::string& path) {
  const Image img = load_png_rgb(path);
  Mask m;
  m.width = img.width;
  m.height = img.height;
  m.on.resize(static_cast<size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      m.on[static_cast<size_t>(y) * img.width + x] =
          img.pixel(x, y)[0] >= 128 ? 1 : 0;
    }
  }
  return m;
}

void save_mask(const std::string& path, const Mask& mask) {
  Image img;
  img.width = mask.width;
  img.height = mask.height;
  img.rgb.resize(static_cast<size_t>(mask.width) * mask.height * 3);
  for (size_t i = 0; i < mask.on.size(); ++i) {
    const uint8_t v = mask.on[i] ? 255 : 0;
    img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = v;
  }
  save_png_rgb(path, img);
}

}  // namespace dynfv
