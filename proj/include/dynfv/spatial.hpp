#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynfv/color.hpp"
#include "dynfv/fisher.hpp"
#include "dynfv/image.hpp"

namespace dynfv {

inline constexpr int kLdfvDim = 17;
inline constexpr int kLbpBins = 59;
inline constexpr int kHistBins = 16;

// A person's cropped frame sequence from one camera.
struct FrameSequence {
  std::string camera_id;
  std::string person_id;
  std::vector<Image> frames;
  std::optional<Mask> mask;  // per camera, constant over frames
};

// Local descriptor per unmasked pixel of one cell: normalized (x, y) then,
// per HSV channel, (I, I_x, I_y, I_xx, I_yy). Gradients are central
// differences with replicated borders; second derivatives use [1, -2, 1].
// Channels must already be masked. Returns rows of kLdfvDim, row-major.
std::vector<double> ldfv_descriptors(const std::vector<Plane>& hsv,
                                     const std::vector<Plane>& dx,
                                     const std::vector<Plane>& dy,
                                     const std::vector<Plane>& dxx,
                                     const std::vector<Plane>& dyy,
                                     GridSpec::Cell cell, int cell_w,
                                     int cell_h, const Mask* mask);

// Derivative planes for one channel (central differences, replicate border).
Plane gradient_x(const Plane& p);
Plane gradient_y(const Plane& p);
Plane second_derivative_x(const Plane& p);
Plane second_derivative_y(const Plane& p);

// One 16-component GMM per LDFV patch cell.
class LdfvCodebook {
 public:
  LdfvCodebook() = default;
  LdfvCodebook(GridSpec layout, int gaussians, std::vector<GmmModel> models);

  const GridSpec& layout() const { return layout_; }
  int gaussians() const { return gaussians_; }
  const GmmModel& model(int cell) const { return models_[cell]; }
  size_t feature_dim() const {
    return static_cast<size_t>(layout_.cell_count()) * 2 * gaussians_ *
           kLdfvDim;
  }

 private:
  GridSpec layout_;
  int gaussians_ = 0;
  std::vector<GmmModel> models_;
};

struct LdfvTrainOptions {
  int gaussians = 16;
  FitOptions fit;
  int threads = 1;
};

LdfvCodebook train_ldfv_codebook(std::span<const FrameSequence> training,
                                 uint64_t seed,
                                 const LdfvTrainOptions& opts = {});

void save_ldfv_codebook(const std::string& path, const LdfvCodebook& cb);
LdfvCodebook load_ldfv_codebook(const std::string& path);

// Per frame per cell: Fisher-encode the cell's descriptors, power + L2
// normalize, then average over frames. 75 cells x 2*16*17 = 40800 dims.
PooledFeature encode_ldfv(const FrameSequence& seq, const LdfvCodebook& cb,
                          int threads = 1);

// 16-bin histograms of {R, G, B, H, S, V, Y, U} per cell on the LDFV patch
// layout, each histogram L1-normalized, averaged over frames. 9600 dims.
PooledFeature hist_feature(const FrameSequence& seq, int threads = 1);

// Mean of {H, S, V, L, A, B} per cell on the 217-patch layout, averaged
// over frames. 1302 dims.
PooledFeature mean_color_feature(const FrameSequence& seq, int threads = 1);

// Uniform LBP (8 neighbors, radius 1) 59-bin histograms per cell on the
// gray channel, L1-normalized, averaged over frames.
PooledFeature lbp_feature(const FrameSequence& seq,
                          const GridSpec& layout = GridSpec::ldfv_patches(),
                          int threads = 1);

// LBP code per pixel; a neighbor strictly brighter than the center sets its
// bit. Replicated borders keep one code per pixel.
std::vector<uint8_t> lbp_codes(const Plane& gray);
// Maps the 256 patterns onto the 59 uniform-LBP bins.
const std::array<uint8_t, 256>& lbp_uniform_table();

// Arithmetic mean over frames, per coordinate. All rows must have equal
// length.
std::vector<double> temporal_average_pool(
    std::span<const std::vector<double>> per_frame);

}  // namespace dynfv
