#include "dynfv/spatial.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "codebook_io.hpp"
#include "dynfv/error.hpp"
#include "dynfv/parallel.hpp"
#include "dynfv/rng.hpp"

namespace dynfv {

namespace {

void check_frames(const FrameSequence& seq, const GridSpec& layout) {
  if (seq.frames.empty()) {
    raise(ErrorCode::invalid_argument,
          "sequence " + seq.person_id + " has no frames");
  }
  for (const Image& f : seq.frames) {
    if (f.width != layout.crop_width || f.height != layout.crop_height) {
      raise(ErrorCode::invalid_argument,
            "frame size " + std::to_string(f.width) + "x" +
                std::to_string(f.height) + " does not match the " +
                std::to_string(layout.crop_width) + "x" +
                std::to_string(layout.crop_height) + " crop");
    }
  }
  if (seq.mask && (seq.mask->width != layout.crop_width ||
                   seq.mask->height != layout.crop_height)) {
    raise(ErrorCode::invalid_argument, "mask size does not match the crop");
  }
}

inline bool pixel_on(const Mask* mask, int x, int y) {
  return !mask || mask->at(x, y);
}

// Blocks are cell-major; every cell has the same width.
PooledFeature make_cell_layout(const GridSpec& layout, const char* name,
                               size_t per_cell) {
  PooledFeature out;
  const int cells = layout.cell_count();
  out.values.assign(static_cast<size_t>(cells) * per_cell, 0.0);
  out.layout.reserve(cells);
  for (int c = 0; c < cells; ++c) {
    out.layout.push_back(
        {name, static_cast<uint32_t>(c), 0, c * per_cell, per_cell});
  }
  return out;
}

void l1_normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (s <= 0.0) return;
  for (double& x : v) x /= s;
}

}  // namespace

Plane gradient_x(const Plane& p) {
  Plane g = Plane::zeros(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const int xm = std::max(0, x - 1);
      const int xp = std::min(p.width - 1, x + 1);
      g.at(x, y) = 0.5f * (p.at(xp, y) - p.at(xm, y));
    }
  }
  return g;
}

Plane gradient_y(const Plane& p) {
  Plane g = Plane::zeros(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    const int ym = std::max(0, y - 1);
    const int yp = std::min(p.height - 1, y + 1);
    for (int x = 0; x < p.width; ++x) {
      g.at(x, y) = 0.5f * (p.at(x, yp) - p.at(x, ym));
    }
  }
  return g;
}

Plane second_derivative_x(const Plane& p) {
  Plane g = Plane::zeros(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const int xm = std::max(0, x - 1);
      const int xp = std::min(p.width - 1, x + 1);
      g.at(x, y) = p.at(xp, y) - 2.0f * p.at(x, y) + p.at(xm, y);
    }
  }
  return g;
}

Plane second_derivative_y(const Plane& p) {
  Plane g = Plane::zeros(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    const int ym = std::max(0, y - 1);
    const int yp = std::min(p.height - 1, y + 1);
    for (int x = 0; x < p.width; ++x) {
      g.at(x, y) = p.at(x, yp) - 2.0f * p.at(x, y) + p.at(x, ym);
    }
  }
  return g;
}

std::vector<double> ldfv_descriptors(const std::vector<Plane>& hsv,
                                     const std::vector<Plane>& dx,
                                     const std::vector<Plane>& dy,
                                     const std::vector<Plane>& dxx,
                                     const std::vector<Plane>& dyy,
                                     GridSpec::Cell cell, int cell_w,
                                     int cell_h, const Mask* mask) {
  std::vector<double> out;
  const int w = hsv[0].width;
  const int h = hsv[0].height;
  out.reserve(static_cast<size_t>(cell_w) * cell_h * kLdfvDim);
  for (int y = cell.y; y < cell.y + cell_h; ++y) {
    for (int x = cell.x; x < cell.x + cell_w; ++x) {
      if (!pixel_on(mask, x, y)) continue;
      out.push_back(static_cast<double>(x) / w);
      out.push_back(static_cast<double>(y) / h);
      for (int c = 0; c < 3; ++c) {
        out.push_back(hsv[c].at(x, y));
        out.push_back(dx[c].at(x, y));
        out.push_back(dy[c].at(x, y));
        out.push_back(dxx[c].at(x, y));
        out.push_back(dyy[c].at(x, y));
      }
    }
  }
  return out;
}

namespace {

struct LdfvFramePlanes {
  std::vector<Plane> hsv, dx, dy, dxx, dyy;
};

LdfvFramePlanes ldfv_planes(const Image& frame, const Mask* mask) {
  LdfvFramePlanes p;
  p.hsv = convert_color(frame, ColorSpace::hsv);
  if (mask) apply_mask(p.hsv, *mask);
  for (int c = 0; c < 3; ++c) {
    p.dx.push_back(gradient_x(p.hsv[c]));
    p.dy.push_back(gradient_y(p.hsv[c]));
    p.dxx.push_back(second_derivative_x(p.hsv[c]));
    p.dyy.push_back(second_derivative_y(p.hsv[c]));
  }
  return p;
}

}  // namespace

LdfvCodebook::LdfvCodebook(GridSpec layout, int gaussians,
                           std::vector<GmmModel> models)
    : layout_(layout), gaussians_(gaussians), models_(std::move(models)) {
  if (models_.size() != static_cast<size_t>(layout_.cell_count())) {
    raise(ErrorCode::invalid_argument, "LDFV codebook cell count mismatch");
  }
}

LdfvCodebook train_ldfv_codebook(std::span<const FrameSequence> training,
                                 uint64_t seed, const LdfvTrainOptions& opts) {
  const GridSpec layout = GridSpec::ldfv_patches();
  const std::vector<GridSpec::Cell> cells = layout.cell_origins();
  std::vector<std::vector<double>> per_cell(cells.size());

  for (const FrameSequence& seq : training) {
    check_frames(seq, layout);
    const Mask* mask = seq.mask ? &*seq.mask : nullptr;
    for (const Image& frame : seq.frames) {
      const LdfvFramePlanes p = ldfv_planes(frame, mask);
      for (size_t c = 0; c < cells.size(); ++c) {
        const std::vector<double> d =
            ldfv_descriptors(p.hsv, p.dx, p.dy, p.dxx, p.dyy, cells[c],
                             layout.cell_width, layout.cell_height, mask);
        per_cell[c].insert(per_cell[c].end(), d.begin(), d.end());
      }
    }
  }

  std::vector<GmmModel> models(cells.size());
  parallel_for(cells.size(), opts.threads, [&](size_t c) {
    const size_t count = per_cell[c].size() / kLdfvDim;
    if (count < static_cast<size_t>(opts.gaussians)) {
      raise(ErrorCode::insufficient_data,
            "LDFV cell " + std::to_string(c) + " has " +
                std::to_string(count) + " descriptors (< " +
                std::to_string(opts.gaussians) + " Gaussians)");
    }
    FitOptions fit = opts.fit;
    fit.threads = 1;  // determinism: parallelism lives across cells
    models[c] = fit_gmm(per_cell[c], kLdfvDim, opts.gaussians,
                        mix_seed(seed, c + 1, 0x1dfd), fit)
                    .first;
  });
  return LdfvCodebook(layout, opts.gaussians, std::move(models));
}

PooledFeature encode_ldfv(const FrameSequence& seq, const LdfvCodebook& cb,
                          int threads) {
  const GridSpec& layout = cb.layout();
  check_frames(seq, layout);
  const std::vector<GridSpec::Cell> cells = layout.cell_origins();
  const size_t per_cell = 2 * static_cast<size_t>(cb.gaussians()) * kLdfvDim;
  PooledFeature out = make_cell_layout(layout, "ldfv", per_cell);
  const Mask* mask = seq.mask ? &*seq.mask : nullptr;

  for (const Image& frame : seq.frames) {
    const LdfvFramePlanes p = ldfv_planes(frame, mask);
    parallel_for(cells.size(), threads, [&](size_t c) {
      const std::vector<double> d =
          ldfv_descriptors(p.hsv, p.dx, p.dy, p.dxx, p.dyy, cells[c],
                           layout.cell_width, layout.cell_height, mask);
      FisherVector fv = fisher_encode(cb.model(static_cast<int>(c)), d);
      power_normalize(fv.values);
      l2_normalize(fv.values);
      double* dst = out.values.data() + c * per_cell;
      for (size_t i = 0; i < per_cell; ++i) dst[i] += fv.values[i];
    });
  }
  const double inv = 1.0 / static_cast<double>(seq.frames.size());
  for (double& v : out.values) v *= inv;
  return out;
}

PooledFeature hist_feature(const FrameSequence& seq, int threads) {
  const GridSpec layout = GridSpec::ldfv_patches();
  check_frames(seq, layout);
  const std::vector<GridSpec::Cell> cells = layout.cell_origins();
  constexpr int kChannels = 8;  // R, G, B, H, S, V, Y, U
  const size_t per_cell = kChannels * kHistBins;
  PooledFeature out = make_cell_layout(layout, "hist", per_cell);
  const Mask* mask = seq.mask ? &*seq.mask : nullptr;

  for (const Image& frame : seq.frames) {
    std::vector<Plane> planes;
    planes.reserve(kChannels);
    for (int c = 0; c < 3; ++c) planes.push_back(rgb_plane(frame, c));
    std::vector<Plane> hsv = convert_color(frame, ColorSpace::hsv);
    std::vector<Plane> yuv = convert_color(frame, ColorSpace::yuv);
    for (int c = 0; c < 3; ++c) planes.push_back(std::move(hsv[c]));
    planes.push_back(std::move(yuv[0]));
    planes.push_back(std::move(yuv[1]));

    parallel_for(cells.size(), threads, [&](size_t c) {
      std::vector<double> hist(per_cell, 0.0);
      for (int y = cells[c].y; y < cells[c].y + layout.cell_height; ++y) {
        for (int x = cells[c].x; x < cells[c].x + layout.cell_width; ++x) {
          if (!pixel_on(mask, x, y)) continue;
          for (int ch = 0; ch < kChannels; ++ch) {
            const int bin = std::min(
                kHistBins - 1,
                static_cast<int>(planes[ch].at(x, y) * kHistBins));
            hist[static_cast<size_t>(ch) * kHistBins + bin] += 1.0;
          }
        }
      }
      for (int ch = 0; ch < kChannels; ++ch) {
        l1_normalize({hist.data() + static_cast<size_t>(ch) * kHistBins,
                      static_cast<size_t>(kHistBins)});
      }
      double* dst = out.values.data() + c * per_cell;
      for (size_t i = 0; i < per_cell; ++i) dst[i] += hist[i];
    });
  }
  const double inv = 1.0 / static_cast<double>(seq.frames.size());
  for (double& v : out.values) v *= inv;
  return out;
}

PooledFeature mean_color_feature(const FrameSequence& seq, int threads) {
  const GridSpec layout = GridSpec::color_patches();
  check_frames(seq, layout);
  const std::vector<GridSpec::Cell> cells = layout.cell_origins();
  constexpr int kChannels = 6;  // H, S, V, L, A, B
  PooledFeature out = make_cell_layout(layout, "mean", kChannels);
  const Mask* mask = seq.mask ? &*seq.mask : nullptr;

  for (const Image& frame : seq.frames) {
    std::vector<Plane> planes = convert_color(frame, ColorSpace::hsv);
    std::vector<Plane> lab = convert_color(frame, ColorSpace::lab);
    for (int c = 0; c < 3; ++c) planes.push_back(std::move(lab[c]));

    parallel_for(cells.size(), threads, [&](size_t c) {
      double sums[kChannels] = {0, 0, 0, 0, 0, 0};
      size_t n = 0;
      for (int y = cells[c].y; y < cells[c].y + layout.cell_height; ++y) {
        for (int x = cells[c].x; x < cells[c].x + layout.cell_width; ++x) {
          if (!pixel_on(mask, x, y)) continue;
          ++n;
          for (int ch = 0; ch < kChannels; ++ch) {
            sums[ch] += planes[ch].at(x, y);
          }
        }
      }
      double* dst = out.values.data() + c * kChannels;
      if (n > 0) {
        for (int ch = 0; ch < kChannels; ++ch) {
          dst[ch] += sums[ch] / static_cast<double>(n);
        }
      }
    });
  }
  const double inv = 1.0 / static_cast<double>(seq.frames.size());
  for (double& v : out.values) v *= inv;
  return out;
}

const std::array<uint8_t, 256>& lbp_uniform_table() {
  static const std::array<uint8_t, 256> table = [] {
    std::array<uint8_t, 256> t{};
    uint8_t next = 0;
    for (int p = 0; p < 256; ++p) {
      const uint8_t rotated =
          static_cast<uint8_t>((p << 1) | (p >> 7));
      const int transitions = std::popcount(static_cast<uint8_t>(p ^ rotated));
      t[p] = transitions <= 2 ? next++ : kLbpBins - 1;
    }
    return t;
  }();
  return table;
}

std::vector<uint8_t> lbp_codes(const Plane& gray) {
  // Clockwise from the top-left neighbor.
  static constexpr int kOffsets[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0},
                                         {1, 1},   {0, 1},  {-1, 1}, {-1, 0}};
  const int w = gray.width;
  const int h = gray.height;
  std::vector<uint8_t> codes(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float center = gray.at(x, y);
      uint8_t code = 0;
      for (int i = 0; i < 8; ++i) {
        const int nx = std::clamp(x + kOffsets[i][0], 0, w - 1);
        const int ny = std::clamp(y + kOffsets[i][1], 0, h - 1);
        if (gray.at(nx, ny) > center) code |= static_cast<uint8_t>(1 << i);
      }
      codes[static_cast<size_t>(y) * w + x] = code;
    }
  }
  return codes;
}

PooledFeature lbp_feature(const FrameSequence& seq, const GridSpec& layout,
                          int threads) {
  check_frames(seq, layout);
  const std::vector<GridSpec::Cell> cells = layout.cell_origins();
  PooledFeature out = make_cell_layout(layout, "lbp", kLbpBins);
  const Mask* mask = seq.mask ? &*seq.mask : nullptr;
  const auto& table = lbp_uniform_table();

  for (const Image& frame : seq.frames) {
    std::vector<Plane> gray = convert_color(frame, ColorSpace::gray);
    if (mask) apply_mask(gray[0], *mask);
    const std::vector<uint8_t> codes = lbp_codes(gray[0]);

    parallel_for(cells.size(), threads, [&](size_t c) {
      double hist[kLbpBins] = {};
      for (int y = cells[c].y; y < cells[c].y + layout.cell_height; ++y) {
        for (int x = cells[c].x; x < cells[c].x + layout.cell_width; ++x) {
          if (!pixel_on(mask, x, y)) continue;
          hist[table[codes[static_cast<size_t>(y) * layout.crop_width + x]]] +=
              1.0;
        }
      }
      l1_normalize({hist, static_cast<size_t>(kLbpBins)});
      double* dst = out.values.data() + c * kLbpBins;
      for (int i = 0; i < kLbpBins; ++i) dst[i] += hist[i];
    });
  }
  const double inv = 1.0 / static_cast<double>(seq.frames.size());
  for (double& v : out.values) v *= inv;
  return out;
}

std::vector<double> temporal_average_pool(
    std::span<const std::vector<double>> per_frame) {
  if (per_frame.empty()) {
    raise(ErrorCode::invalid_argument, "temporal pooling of zero frames");
  }
  const size_t dim = per_frame.front().size();
  std::vector<double> out(dim, 0.0);
  for (const auto& f : per_frame) {
    if (f.size() != dim) {
      raise(ErrorCode::invalid_argument,
            "temporal pooling with ragged frame features");
    }
    for (size_t i = 0; i < dim; ++i) out[i] += f[i];
  }
  const double inv = 1.0 / static_cast<double>(per_frame.size());
  for (double& v : out) v *= inv;
  return out;
}

void save_ldfv_codebook(const std::string& path, const LdfvCodebook& cb) {
  detail::CodebookBlob blob;
  blob.kind = "ldfv";
  blob.grid = cb.layout();
  blob.gaussians = cb.gaussians();
  blob.levels = {0};
  for (int c = 0; c < cb.layout().cell_count(); ++c) {
    blob.model_grid.push_back(static_cast<uint32_t>(c));
    blob.model_level.push_back(0);
    blob.fallback.push_back(0);
    blob.models.push_back(cb.model(c));
  }
  detail::save_codebook_blob(path, blob);
}

LdfvCodebook load_ldfv_codebook(const std::string& path) {
  const detail::CodebookBlob blob = detail::load_codebook_blob(path);
  if (blob.kind != "ldfv") {
    raise(ErrorCode::format,
          "codebook kind mismatch: expected ldfv, got " + blob.kind);
  }
  return LdfvCodebook(blob.grid, blob.gaussians, blob.models);
}

}  // namespace dynfv
