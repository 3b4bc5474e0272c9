#pragma once

#include <vector>

#include "dynfv/image.hpp"

namespace dynfv {

enum class ColorSpace { hsv, lab, yuv, gray };

// Single float channel in [0, 1].
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<float> v;

  static Plane zeros(int w, int h) {
    return {w, h, std::vector<float>(static_cast<size_t>(w) * h, 0.0f)};
  }
  float at(int x, int y) const {
    return v[static_cast<size_t>(y) * width + x];
  }
  float& at(int x, int y) { return v[static_cast<size_t>(y) * width + x]; }
};

// Standard conversions, every channel affinely rescaled to [0, 1]:
// HSV hexcone (H/360), YUV per BT.601 (U, V centred at 0.5), LAB via
// sRGB -> XYZ with D65 white (L/100, (a+128)/255, (b+128)/255), gray =
// BT.601 luma. `gray` yields one plane, the rest three.
std::vector<Plane> convert_color(const Image& img, ColorSpace space);

// Raw channel c (0 = R, 1 = G, 2 = B) scaled by 1/255.
Plane rgb_plane(const Image& img, int c);

// Zeroes masked-out pixels so nothing downstream can read them.
void apply_mask(Plane& plane, const Mask& mask);
void apply_mask(std::vector<Plane>& planes, const Mask& mask);

}  // namespace dynfv
