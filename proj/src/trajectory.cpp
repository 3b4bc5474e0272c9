#include "dynfv/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dynfv/error.hpp"

namespace dynfv {

std::vector<double> VelocityTracklet::flattened() const {
  std::vector<double> out;
  out.reserve(deltas.size() * 2);
  for (const Point& d : deltas) {
    out.push_back(d.x);
    out.push_back(d.y);
  }
  return out;
}

namespace {

int axis_cell_count(int crop, int cell, double overlap) {
  if (cell <= 0 || cell > crop) {
    raise(ErrorCode::invalid_argument, "grid cell does not fit the crop");
  }
  const double stride = cell * (1.0 - overlap);
  if (stride <= 0.0) {
    raise(ErrorCode::invalid_argument, "grid overlap must be < 1");
  }
  // 1e-9 guards exact divisions against floating error.
  return static_cast<int>(std::floor((crop - cell) / stride + 1e-9)) + 1;
}

int axis_origin(int i, int crop, int cell, double overlap) {
  const double stride = cell * (1.0 - overlap);
  const int x = static_cast<int>(std::lround(i * stride));
  return std::min(x, crop - cell);
}

}  // namespace

int GridSpec::cols() const {
  return axis_cell_count(crop_width, cell_width, overlap);
}

int GridSpec::rows() const {
  return axis_cell_count(crop_height, cell_height, overlap);
}

std::vector<GridSpec::Cell> GridSpec::cell_origins() const {
  const int nx = cols();
  const int ny = rows();
  std::vector<Cell> cells;
  cells.reserve(static_cast<size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      cells.push_back({axis_origin(ix, crop_width, cell_width, overlap),
                       axis_origin(iy, crop_height, cell_height, overlap)});
    }
  }
  return cells;
}

std::vector<int> GridSpec::cells_containing(double x, double y) const {
  const int nx = cols();
  const int ny = rows();
  std::vector<int> xs;
  for (int ix = 0; ix < nx; ++ix) {
    const double x0 = axis_origin(ix, crop_width, cell_width, overlap);
    const double x1 = x0 + cell_width;
    const bool last = ix == nx - 1;
    if (x >= x0 && (x < x1 || (last && x <= x1))) xs.push_back(ix);
  }
  std::vector<int> out;
  for (int iy = 0; iy < ny; ++iy) {
    const double y0 = axis_origin(iy, crop_height, cell_height, overlap);
    const double y1 = y0 + cell_height;
    const bool last = iy == ny - 1;
    if (y >= y0 && (y < y1 || (last && y <= y1))) {
      for (int ix : xs) out.push_back(iy * nx + ix);
    }
  }
  return out;
}

GridSpec GridSpec::dynfv() { return GridSpec{64, 128, 32, 36, 0.5}; }

GridSpec GridSpec::ldfv_patches() { return GridSpec{64, 128, 21, 16, 0.5}; }

GridSpec GridSpec::color_patches() { return GridSpec{64, 128, 16, 8, 0.5}; }

TrkParseResult parse_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::io, "cannot open trajectory file: " + path);
  return parse_trajectory_stream(in, path);
}

TrkParseResult parse_trajectory_stream(std::istream& in,
                                       const std::string& origin) {
  TrkParseResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id) || id[0] == '#') continue;

    const auto malformed = [&](const std::string& why) {
      raise(ErrorCode::format,
            origin + ":" + std::to_string(line_no) + ": " + why);
    };

    Tracklet t;
    if (!(ls >> t.start_frame)) malformed("missing or invalid start frame");
    std::vector<double> coords;
    double v;
    while (ls >> v) coords.push_back(v);
    if (!ls.eof()) malformed("invalid coordinate token");
    if (coords.size() % 2 != 0) malformed("odd number of coordinates");
    if (coords.size() < 4) malformed("a tracklet needs at least 2 points");

    bool finite = true;
    t.points.reserve(coords.size() / 2);
    for (size_t i = 0; i < coords.size(); i += 2) {
      if (!std::isfinite(coords[i]) || !std::isfinite(coords[i + 1])) {
        finite = false;
        break;
      }
      t.points.push_back({coords[i], coords[i + 1]});
    }
    if (!finite) {
      ++result.rejected;
      continue;
    }
    result.records.emplace_back(std::move(id), std::move(t));
  }
  return result;
}

void write_trajectory_file(
    const std::string& path,
    std::span<const std::pair<std::string, Tracklet>> records) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::io, "cannot write trajectory file: " + path);
  char buf[32];
  for (const auto& [id, t] : records) {
    out << id << ' ' << t.start_frame;
    for (const Point& p : t.points) {
      // %.17g round-trips doubles exactly.
      std::snprintf(buf, sizeof(buf), "%.17g", p.x);
      out << ' ' << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", p.y);
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) raise(ErrorCode::io, "failed writing trajectory file: " + path);
}

VelocityTracklet to_velocities(const Tracklet& t) {
  if (t.points.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "tracklet too short for velocities (needs >= 2 points)");
  }
  VelocityTracklet v;
  v.deltas.reserve(t.points.size() - 1);
  for (size_t i = 0; i + 1 < t.points.size(); ++i) {
    v.deltas.push_back({t.points[i + 1].x - t.points[i].x,
                        t.points[i + 1].y - t.points[i].y});
  }
  return v;
}

HankelMatrix build_hankel(std::span<const double> samples, int sample_dim,
                          int num_block_rows) {
  if (sample_dim <= 0 || samples.size() % sample_dim != 0) {
    raise(ErrorCode::invalid_argument, "sample buffer size mismatch");
  }
  const int n = static_cast<int>(samples.size()) / sample_dim;
  if (num_block_rows <= 0 || num_block_rows > n) {
    raise(ErrorCode::invalid_argument,
          "Hankel block rows exceed sequence length");
  }
  HankelMatrix h;
  h.block_rows = num_block_rows;
  h.cols = n - num_block_rows + 1;
  h.sample_dim = sample_dim;
  h.data.resize(static_cast<size_t>(h.rows()) * h.cols);
  for (int i = 0; i < num_block_rows; ++i) {
    for (int j = 0; j < h.cols; ++j) {
      for (int d = 0; d < sample_dim; ++d) {
        h.data[(static_cast<size_t>(i) * sample_dim + d) * h.cols + j] =
            samples[static_cast<size_t>(i + j) * sample_dim + d];
      }
    }
  }
  return h;
}

HankelMatrix build_hankel(const VelocityTracklet& v, int num_block_rows) {
  return build_hankel(v.flattened(), 2, num_block_rows);
}

std::vector<VelocityTracklet> pyramid_windows(const VelocityTracklet& v,
                                              int window_length) {
  std::vector<VelocityTracklet> windows;
  if (window_length <= 0) {
    raise(ErrorCode::invalid_argument, "window length must be positive");
  }
  const size_t l = v.deltas.size();
  const size_t a = static_cast<size_t>(window_length);
  if (a > l) return windows;  // tracklet skipped at this level
  windows.reserve(l - a + 1);
  for (size_t off = 0; off + a <= l; ++off) {
    VelocityTracklet w;
    w.deltas.assign(v.deltas.begin() + off, v.deltas.begin() + off + a);
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<int> assign_grids(const Tracklet& t, const GridSpec& grid,
                              const Mask* mask) {
  if (t.points.empty()) return {};
  const Point& s = t.start();
  if (s.x < 0 || s.x > grid.crop_width || s.y < 0 || s.y > grid.crop_height) {
    return {};
  }
  if (mask && mask->width > 0) {
    const int px = std::min(static_cast<int>(s.x), mask->width - 1);
    const int py = std::min(static_cast<int>(s.y), mask->height - 1);
    if (!mask->at(px, py)) return {};
  }
  return grid.cells_containing(s.x, s.y);
}

}  // namespace dynfv
