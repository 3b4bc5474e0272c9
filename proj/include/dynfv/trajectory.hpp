#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynfv/image.hpp"

namespace dynfv {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// A dense trajectory of tracked image points inside the normalized 64x128
// crop.
struct Tracklet {
  int64_t start_frame = 0;
  std::vector<Point> points;

  size_t length() const { return points.size(); }
  const Point& start() const { return points.front(); }
};

// First differences of a tracklet: deltas[t] = points[t+1] - points[t].
struct VelocityTracklet {
  std::vector<Point> deltas;

  size_t length() const { return deltas.size(); }
  // Interleaved (dx1, dy1, dx2, dy2, ...); the layout fed to the encoders.
  std::vector<double> flattened() const;
};

// Block Hankel matrix with constant block anti-diagonals. Each block row is
// `sample_dim` scalar rows.
struct HankelMatrix {
  int block_rows = 0;
  int cols = 0;
  int sample_dim = 1;
  std::vector<double> data;  // row-major, (block_rows * sample_dim) x cols

  int rows() const { return block_rows * sample_dim; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
};

// Overlapping cell grid over the crop. Cell origins stride by
// cell size * (1 - overlap), rounded to whole pixels.
struct GridSpec {
  int crop_width = 64;
  int crop_height = 128;
  int cell_width = 32;
  int cell_height = 36;
  double overlap = 0.5;

  struct Cell {
    int x = 0;
    int y = 0;
  };

  int cols() const;
  int rows() const;
  int cell_count() const { return cols() * rows(); }
  // Row-major: cell index = row * cols() + col.
  std::vector<Cell> cell_origins() const;

  // Every cell whose rectangle contains (x, y), ascending cell index.
  // Containment is half-open [x0, x0+w) x [y0, y0+h); the right/bottom edge
  // is closed for the last column/row so the crop border belongs to a cell.
  std::vector<int> cells_containing(double x, double y) const;

  // 18 cells of 32x36 at 50% overlap (3 x 6).
  static GridSpec dynfv();
  // 75 patches of 21x16 at 50% overlap (5 x 15).
  static GridSpec ldfv_patches();
  // 217 patches of 16x8 at 50% overlap (7 x 31).
  static GridSpec color_patches();
};

struct PyramidConfig {
  std::vector<int> window_lengths = {5, 9, 14};
};

struct TrkParseResult {
  std::vector<std::pair<std::string, Tracklet>> records;  // file order
  int rejected = 0;  // records dropped for non-finite coordinates
};

// TRK text format: one record per line,
//   sequence_id start_frame x1 y1 x2 y2 ... xL yL
// '#' starts a comment line. A malformed line is a hard error naming the
// line; a record with a non-finite coordinate is dropped and counted.
TrkParseResult parse_trajectory_file(const std::string& path);
TrkParseResult parse_trajectory_stream(std::istream& in,
                                       const std::string& origin);
void write_trajectory_file(
    const std::string& path,
    std::span<const std::pair<std::string, Tracklet>> records);

VelocityTracklet to_velocities(const Tracklet& t);

HankelMatrix build_hankel(std::span<const double> samples, int sample_dim,
                          int num_block_rows);
HankelMatrix build_hankel(const VelocityTracklet& v, int num_block_rows);

// All sliding windows of `window_length` velocities at stride 1; empty when
// the tracklet is shorter than the window.
std::vector<VelocityTracklet> pyramid_windows(const VelocityTracklet& v,
                                              int window_length);

// Grid cells owning a tracklet, determined by its starting point. Returns
// an empty list when the start is masked out or outside the crop.
std::vector<int> assign_grids(const Tracklet& t, const GridSpec& grid,
                              const Mask* mask = nullptr);

}  // namespace dynfv
