#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynfv {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;

  static Image flat(int w, int h, uint8_t r, uint8_t g, uint8_t b);

  const uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  uint8_t* pixel(int x, int y) {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
};

// Per-camera binary mask; a zero pixel is excluded from every statistic.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> on;  // 0 or 1

  static Mask all_on(int w, int h);

  bool at(int x, int y) const {
    return on[static_cast<size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool value) {
    on[static_cast<size_t>(y) * width + x] = value ? 1 : 0;
  }
  size_t active() const;
};

Image load_png_rgb(const std::string& path);
void save_png_rgb(const std::string& path, const Image& img);

// Reads any PNG as a mask: a pixel is on when its (gray or red) value is
// >= 128.
Mask load_mask(const std::string& path);
void save_mask(const std::string& path, const Mask& mask);

}  // namespace dynfv
