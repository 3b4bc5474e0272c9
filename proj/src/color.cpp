#include "dynfv/color.hpp"

#include <algorithm>
#include <cmath>

#include "dynfv/error.hpp"

namespace dynfv {

namespace {

constexpr float kUMax = 0.436f;  // BT.601 extremes of B - Y and R - Y scaled
constexpr float kVMax = 0.615f;

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

inline void rgb_to_hsv(float r, float g, float b, float& h, float& s,
                       float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float d = mx - mn;
  v = mx;
  s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    h = 0.0f;
    return;
  }
  float hue;
  if (mx == r) {
    hue = (g - b) / d;
    if (hue < 0.0f) hue += 6.0f;
  } else if (mx == g) {
    hue = (b - r) / d + 2.0f;
  } else {
    hue = (r - g) / d + 4.0f;
  }
  h = hue / 6.0f;  // [0, 1)
}

inline float srgb_to_linear(float c) {
  return c <= 0.04045f ? c / 12.92f
                       : std::pow((c + 0.055f) / 1.055f, 2.4f);
}

inline float lab_f(float t) {
  constexpr float delta3 = 0.008856452f;  // (6/29)^3
  constexpr float scale = 7.787037f;      // 1 / (3 (6/29)^2)
  return t > delta3 ? std::cbrt(t) : scale * t + 4.0f / 29.0f;
}

inline void rgb_to_lab(float r, float g, float b, float& l_out, float& a_out,
                       float& b_out) {
  const float rl = srgb_to_linear(r);
  const float gl = srgb_to_linear(g);
  const float bl = srgb_to_linear(b);
  // sRGB -> XYZ, D65 reference white.
  const float x = 0.4124564f * rl + 0.3575761f * gl + 0.1804375f * bl;
  const float y = 0.2126729f * rl + 0.7151522f * gl + 0.0721750f * bl;
  const float z = 0.0193339f * rl + 0.1191920f * gl + 0.9503041f * bl;
  const float fx = lab_f(x / 0.95047f);
  const float fy = lab_f(y);
  const float fz = lab_f(z / 1.08883f);
  const float L = 116.0f * fy - 16.0f;
  const float A = 500.0f * (fx - fy);
  const float B = 200.0f * (fy - fz);
  l_out = clamp01(L / 100.0f);
  a_out = clamp01((A + 128.0f) / 255.0f);
  b_out = clamp01((B + 128.0f) / 255.0f);
}

}  // namespace

std::vector<Plane> convert_color(const Image& img, ColorSpace space) {
  const int w = img.width;
  const int h = img.height;
  const int planes = space == ColorSpace::gray ? 1 : 3;
  std::vector<Plane> out;
  out.reserve(planes);
  for (int p = 0; p < planes; ++p) out.push_back(Plane::zeros(w, h));

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const uint8_t* px = img.pixel(x, y);
      const float r = px[0] / 255.0f;
      const float g = px[1] / 255.0f;
      const float b = px[2] / 255.0f;
      switch (space) {
        case ColorSpace::hsv: {
          float hh, ss, vv;
          rgb_to_hsv(r, g, b, hh, ss, vv);
          out[0].at(x, y) = hh;
          out[1].at(x, y) = ss;
          out[2].at(x, y) = vv;
          break;
        }
        case ColorSpace::lab: {
          float ll, aa, bb;
          rgb_to_lab(r, g, b, ll, aa, bb);
          out[0].at(x, y) = ll;
          out[1].at(x, y) = aa;
          out[2].at(x, y) = bb;
          break;
        }
        case ColorSpace::yuv: {
          const float yy = 0.299f * r + 0.587f * g + 0.114f * b;
          const float uu = 0.492f * (b - yy);
          const float vv = 0.877f * (r - yy);
          out[0].at(x, y) = yy;
          out[1].at(x, y) = clamp01(uu / (2.0f * kUMax) + 0.5f);
          out[2].at(x, y) = clamp01(vv / (2.0f * kVMax) + 0.5f);
          break;
        }
        case ColorSpace::gray:
          out[0].at(x, y) = 0.299f * r + 0.587f * g + 0.114f * b;
          break;
      }
    }
  }
  return out;
}

Plane rgb_plane(const Image& img, int c) {
  if (c < 0 || c > 2) raise(ErrorCode::invalid_argument, "bad RGB channel");
  Plane p = Plane::zeros(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      p.at(x, y) = img.pixel(x, y)[c] / 255.0f;
    }
  }
  return p;
}

void apply_mask(Plane& plane, const Mask& mask) {
  if (mask.width != plane.width || mask.height != plane.height) {
    raise(ErrorCode::invalid_argument, "mask size does not match the frame");
  }
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      if (!mask.at(x, y)) plane.at(x, y) = 0.0f;
    }
  }
}

void apply_mask(std::vector<Plane>& planes, const Mask& mask) {
  for (Plane& p : planes) apply_mask(p, mask);
}

}  // namespace dynfv
