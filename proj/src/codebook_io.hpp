#pragma once

#include <string>
#include <vector>

#include "dynfv/gmm.hpp"
#include "dynfv/trajectory.hpp"

// Shared CBK1 container used by both codebook kinds. Layout:
//   magic "CBK1", string kind, grid spec (u32 crop_w, crop_h, cell_w,
//   cell_h, f64 overlap), u32 gaussians, u32 level count + u32 levels,
//   u32 model count, then per model: u32 grid, u32 level, u8 fallback,
//   embedded GMM1 record.

namespace dynfv::detail {

struct CodebookBlob {
  std::string kind;  // "dynfv" | "ldfv"
  GridSpec grid;
  int gaussians = 0;
  std::vector<int> levels;
  std::vector<uint32_t> model_grid;
  std::vector<uint32_t> model_level;
  std::vector<uint8_t> fallback;
  std::vector<GmmModel> models;
};

void save_codebook_blob(const std::string& path, const CodebookBlob& blob);
CodebookBlob load_codebook_blob(const std::string& path);

}  // namespace dynfv::detail
