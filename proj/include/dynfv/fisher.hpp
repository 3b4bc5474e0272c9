#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dynfv/gmm.hpp"
#include "dynfv/trajectory.hpp"

namespace dynfv {

// Raw (un-normalized) Fisher vector: the k*dim mean-gradient entries
// followed by the k*dim variance-gradient entries.
struct FisherVector {
  std::vector<double> values;
  int k = 0;
  int dim = 0;
};

// Encodes the row-major set X (n x m.dim) against m. Empty X gives the
// all-zero vector, keeping feature layouts fixed across sequences.
FisherVector fisher_encode(const GmmModel& m, std::span<const double> X);

// z -> sign(z) * |z|^alpha, in place.
void power_normalize(std::span<double> v, double alpha = 0.5);

// Scales to unit L2 norm; the all-zero vector is left untouched.
void l2_normalize(std::span<double> v);

struct FeatureBlock {
  std::string name;
  uint32_t grid = 0;
  uint32_t level = 0;
  size_t offset = 0;
  size_t length = 0;
};

// A flat feature vector with a block map recording where each
// (feature, grid/patch, level) slice lives.
struct PooledFeature {
  std::vector<double> values;
  std::vector<FeatureBlock> layout;

  size_t dim() const { return values.size(); }
  std::span<const double> block(size_t i) const {
    return {values.data() + layout[i].offset, layout[i].length};
  }
};

// One GMM per (grid cell, pyramid level), grid-major.
class DynFvCodebook {
 public:
  DynFvCodebook() = default;
  DynFvCodebook(GridSpec grid, PyramidConfig pyramid, int gaussians,
                std::vector<GmmModel> models, std::vector<uint8_t> fallback);

  const GridSpec& grid() const { return grid_; }
  const PyramidConfig& pyramid() const { return pyramid_; }
  int gaussians() const { return gaussians_; }
  int levels() const { return static_cast<int>(pyramid_.window_lengths.size()); }

  const GmmModel& model(int grid_cell, int level_index) const;
  bool used_fallback(int grid_cell, int level_index) const;

  // Total encoded dimension: sum over (g, a) of 2 * k * 2a.
  size_t feature_dim() const;

 private:
  GridSpec grid_;
  PyramidConfig pyramid_;
  int gaussians_ = 0;
  std::vector<GmmModel> models_;
  std::vector<uint8_t> fallback_;
};

struct SequenceTracklets {
  std::string id;
  std::vector<Tracklet> tracklets;
  const Mask* mask = nullptr;  // per-camera mask; may be null
};

struct DynFvTrainOptions {
  int gaussians = 12;
  FitOptions fit;
  int threads = 1;  // parallelism across (grid, level) fits
};

// Fits one GMM per (grid cell, pyramid level) on the flattened velocity
// windows of the training tracklets. A cell with fewer windows than
// components falls back to the model pooled over all grids at that level; a
// level with no windows at all is an error.
DynFvCodebook train_dynfv_codebook(std::span<const SequenceTracklets> training,
                                   const GridSpec& grid,
                                   const PyramidConfig& pyramid, uint64_t seed,
                                   const DynFvTrainOptions& opts = {});

struct DynFvDiagnostics {
  size_t masked_or_outside = 0;  // tracklets with no grid assignment
  size_t empty_blocks = 0;       // (grid, level) blocks with no windows
};

// Per (grid, level): Fisher-encode the sequence's windows, power + L2
// normalize the block, concatenate grid-major then level. Blocks with no
// windows stay zero.
PooledFeature encode_dynfv(std::span<const Tracklet> tracklets,
                           const DynFvCodebook& cb, const Mask* mask = nullptr,
                           DynFvDiagnostics* diag = nullptr, int threads = 1);

// FVE1 feature file: magic "FVE1", u32 block count, per block (string name,
// u32 grid, u32 level, u32 length), then every value as LE f32.
void save_feature_file(const std::string& path, const PooledFeature& f);
PooledFeature load_feature_file(const std::string& path);

// CBK1 codebook container (embeds GMM1 records per (grid, level)).
void save_dynfv_codebook(const std::string& path, const DynFvCodebook& cb);
DynFvCodebook load_dynfv_codebook(const std::string& path);

// Peeks at a CBK1 file and returns its kind string ("dynfv" or "ldfv").
std::string codebook_kind(const std::string& path);

}  // namespace dynfv
