#include "dynfv/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "codebook_io.hpp"
#include "dynfv/binio.hpp"
#include "dynfv/error.hpp"
#include "dynfv/parallel.hpp"
#include "dynfv/rng.hpp"

namespace dynfv {

FisherVector fisher_encode(const GmmModel& m, std::span<const double> X) {
  if (X.size() % m.dim != 0) {
    raise(ErrorCode::invalid_argument, "fisher_encode: dimension mismatch");
  }
  const int k = m.k;
  const int dim = m.dim;
  FisherVector fv;
  fv.k = k;
  fv.dim = dim;
  fv.values.assign(2 * static_cast<size_t>(k) * dim, 0.0);
  const size_t n = X.size() / dim;
  if (n == 0) return fv;

  const GmmEvaluator eval(m);
  std::vector<double> gamma(k);
  std::vector<double> sum_mu(static_cast<size_t>(k) * dim, 0.0);
  std::vector<double> sum_sigma(static_cast<size_t>(k) * dim, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double* x = X.data() + i * dim;
    eval.posteriors({x, static_cast<size_t>(dim)}, gamma);
    for (int c = 0; c < k; ++c) {
      const double g = gamma[c];
      if (g == 0.0) continue;
      const double* mu = m.means.data() + static_cast<size_t>(c) * dim;
      const double* var = m.variances.data() + static_cast<size_t>(c) * dim;
      double* smu = sum_mu.data() + static_cast<size_t>(c) * dim;
      double* ssg = sum_sigma.data() + static_cast<size_t>(c) * dim;
      for (int d = 0; d < dim; ++d) {
        const double t = x[d] - mu[d];
        smu[d] += g * t / std::sqrt(var[d]);
        ssg[d] += g * (t * t / var[d] - 1.0);
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int c = 0; c < k; ++c) {
    const double w = m.weights[c];
    const double mu_scale = inv_n / std::sqrt(w);
    const double sg_scale = inv_n / std::sqrt(2.0 * w);
    for (int d = 0; d < dim; ++d) {
      const size_t j = static_cast<size_t>(c) * dim + d;
      fv.values[j] = sum_mu[j] * mu_scale;
      fv.values[static_cast<size_t>(k) * dim + j] = sum_sigma[j] * sg_scale;
    }
  }
  return fv;
}

void power_normalize(std::span<double> v, double alpha) {
  for (double& x : v) {
    x = x >= 0.0 ? std::pow(x, alpha) : -std::pow(-x, alpha);
  }
}

void l2_normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s == 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
}

DynFvCodebook::DynFvCodebook(GridSpec grid, PyramidConfig pyramid,
                             int gaussians, std::vector<GmmModel> models,
                             std::vector<uint8_t> fallback)
    : grid_(grid),
      pyramid_(std::move(pyramid)),
      gaussians_(gaussians),
      models_(std::move(models)),
      fallback_(std::move(fallback)) {
  const size_t expected =
      static_cast<size_t>(grid_.cell_count()) * pyramid_.window_lengths.size();
  if (models_.size() != expected || fallback_.size() != expected) {
    raise(ErrorCode::invalid_argument, "codebook model table size mismatch");
  }
}

const GmmModel& DynFvCodebook::model(int grid_cell, int level_index) const {
  return models_[static_cast<size_t>(grid_cell) * levels() + level_index];
}

bool DynFvCodebook::used_fallback(int grid_cell, int level_index) const {
  return fallback_[static_cast<size_t>(grid_cell) * levels() + level_index] !=
         0;
}

size_t DynFvCodebook::feature_dim() const {
  size_t dim = 0;
  for (int g = 0; g < grid_.cell_count(); ++g) {
    for (int a : pyramid_.window_lengths) {
      dim += 2 * static_cast<size_t>(gaussians_) * (2 * a);
    }
  }
  return dim;
}

namespace {

// Flattened windows per (grid cell, level), gathered by starting point.
struct WindowBuckets {
  // cells x levels, each a flat buffer of 2a-dim rows
  std::vector<std::vector<double>> per_cell;
  // one copy per tracklet regardless of grid, for the pooled fallback
  std::vector<std::vector<double>> pooled;
  size_t no_grid = 0;

  WindowBuckets(size_t cells, size_t levels)
      : per_cell(cells * levels), pooled(levels) {}
};

void gather_windows(std::span<const Tracklet> tracklets, const GridSpec& grid,
                    const PyramidConfig& pyramid, const Mask* mask,
                    bool fill_pooled, WindowBuckets& out) {
  const size_t levels = pyramid.window_lengths.size();
  for (const Tracklet& t : tracklets) {
    if (t.points.size() < 2) continue;
    const std::vector<int> cells = assign_grids(t, grid, mask);
    if (cells.empty()) {
      ++out.no_grid;
      continue;
    }
    const VelocityTracklet v = to_velocities(t);
    for (size_t li = 0; li < levels; ++li) {
      const int a = pyramid.window_lengths[li];
      for (const VelocityTracklet& w : pyramid_windows(v, a)) {
        const std::vector<double> flat = w.flattened();
        for (int c : cells) {
          auto& buf = out.per_cell[static_cast<size_t>(c) * levels + li];
          buf.insert(buf.end(), flat.begin(), flat.end());
        }
        if (fill_pooled) {
          auto& buf = out.pooled[li];
          buf.insert(buf.end(), flat.begin(), flat.end());
        }
      }
    }
  }
}

}  // namespace

DynFvCodebook train_dynfv_codebook(std::span<const SequenceTracklets> training,
                                   const GridSpec& grid,
                                   const PyramidConfig& pyramid, uint64_t seed,
                                   const DynFvTrainOptions& opts) {
  const int cells = grid.cell_count();
  const size_t levels = pyramid.window_lengths.size();
  if (levels == 0) {
    raise(ErrorCode::invalid_argument, "pyramid has no window lengths");
  }
  const int k = opts.gaussians;

  WindowBuckets buckets(cells, levels);
  for (const SequenceTracklets& seq : training) {
    gather_windows(seq.tracklets, grid, pyramid, seq.mask, true, buckets);
  }

  // Pooled per-level models back the cells that are too starved to fit.
  std::vector<GmmModel> pooled(levels);
  for (size_t li = 0; li < levels; ++li) {
    const int a = pyramid.window_lengths[li];
    const size_t dim = 2 * static_cast<size_t>(a);
    const size_t count = buckets.pooled[li].size() / dim;
    if (count == 0) {
      raise(ErrorCode::insufficient_data,
            "no training windows at pyramid level " + std::to_string(a));
    }
    if (count < static_cast<size_t>(k)) {
      raise(ErrorCode::insufficient_data,
            "fewer windows (" + std::to_string(count) +
                ") than Gaussians at pyramid level " + std::to_string(a));
    }
    FitOptions fit = opts.fit;
    fit.threads = 1;
    pooled[li] = fit_gmm(buckets.pooled[li], static_cast<int>(dim), k,
                         mix_seed(seed, 0, li), fit)
                     .first;
  }

  std::vector<GmmModel> models(static_cast<size_t>(cells) * levels);
  std::vector<uint8_t> fallback(models.size(), 0);
  parallel_for(models.size(), opts.threads, [&](size_t idx) {
    const size_t g = idx / levels;
    const size_t li = idx % levels;
    const int a = pyramid.window_lengths[li];
    const size_t dim = 2 * static_cast<size_t>(a);
    const auto& buf = buckets.per_cell[idx];
    if (buf.size() / dim < static_cast<size_t>(k)) {
      models[idx] = pooled[li];
      fallback[idx] = 1;
      return;
    }
    FitOptions fit = opts.fit;
    fit.threads = 1;  // determinism: parallelism lives across cells
    models[idx] = fit_gmm(buf, static_cast<int>(dim), k,
                          mix_seed(seed, g + 1, li), fit)
                      .first;
  });

  return DynFvCodebook(grid, pyramid, k, std::move(models),
                       std::move(fallback));
}

PooledFeature encode_dynfv(std::span<const Tracklet> tracklets,
                           const DynFvCodebook& cb, const Mask* mask,
                           DynFvDiagnostics* diag, int threads) {
  const GridSpec& grid = cb.grid();
  const PyramidConfig& pyramid = cb.pyramid();
  const int cells = grid.cell_count();
  const size_t levels = pyramid.window_lengths.size();

  WindowBuckets buckets(cells, levels);
  gather_windows(tracklets, grid, pyramid, mask, false, buckets);
  if (diag) diag->masked_or_outside = buckets.no_grid;

  PooledFeature out;
  out.values.assign(cb.feature_dim(), 0.0);
  out.layout.reserve(static_cast<size_t>(cells) * levels);
  size_t offset = 0;
  for (int g = 0; g < cells; ++g) {
    for (size_t li = 0; li < levels; ++li) {
      const int a = pyramid.window_lengths[li];
      const size_t len = 2 * static_cast<size_t>(cb.gaussians()) * (2 * a);
      out.layout.push_back({"dynfv", static_cast<uint32_t>(g),
                            static_cast<uint32_t>(a), offset, len});
      offset += len;
    }
  }

  parallel_for(out.layout.size(), threads, [&](size_t idx) {
    const FeatureBlock& block = out.layout[idx];
    const auto& buf = buckets.per_cell[idx];
    if (buf.empty()) return;  // zero block
    const FisherVector fv =
        fisher_encode(cb.model(static_cast<int>(idx / levels),
                               static_cast<int>(idx % levels)),
                      buf);
    std::span<double> dst(out.values.data() + block.offset, block.length);
    std::copy(fv.values.begin(), fv.values.end(), dst.begin());
    power_normalize(dst);
    l2_normalize(dst);
  });

  if (diag) {
    for (size_t i = 0; i < buckets.per_cell.size(); ++i) {
      if (buckets.per_cell[i].empty()) ++diag->empty_blocks;
    }
  }
  return out;
}

void save_feature_file(const std::string& path, const PooledFeature& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorCode::io, "cannot write feature file: " + path);
  os.write("FVE1", 4);
  binio::write_u32(os, static_cast<uint32_t>(f.layout.size()));
  size_t total = 0;
  for (const FeatureBlock& b : f.layout) {
    binio::write_string(os, b.name);
    binio::write_u32(os, b.grid);
    binio::write_u32(os, b.level);
    binio::write_u32(os, static_cast<uint32_t>(b.length));
    total += b.length;
  }
  if (total != f.values.size()) {
    raise(ErrorCode::invalid_argument,
          "feature layout does not partition the value vector");
  }
  for (double v : f.values) binio::write_f32(os, static_cast<float>(v));
  if (!os) raise(ErrorCode::io, "failed writing feature file: " + path);
}

PooledFeature load_feature_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorCode::io, "cannot open feature file: " + path);
  binio::expect_magic(is, "FVE1", "FVE1");
  const uint32_t blocks = binio::read_u32(is, "FVE1 block count");
  PooledFeature f;
  f.layout.reserve(blocks);
  size_t offset = 0;
  for (uint32_t i = 0; i < blocks; ++i) {
    FeatureBlock b;
    b.name = binio::read_string(is, "FVE1 block name");
    b.grid = binio::read_u32(is, "FVE1 block grid");
    b.level = binio::read_u32(is, "FVE1 block level");
    b.length = binio::read_u32(is, "FVE1 block length");
    b.offset = offset;
    offset += b.length;
    f.layout.push_back(std::move(b));
  }
  f.values.resize(offset);
  for (double& v : f.values) {
    v = static_cast<double>(binio::read_f32(is, "FVE1 values"));
  }
  return f;
}

namespace detail {

void save_codebook_blob(const std::string& path, const CodebookBlob& blob) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorCode::io, "cannot write codebook file: " + path);
  os.write("CBK1", 4);
  binio::write_string(os, blob.kind);
  binio::write_u32(os, static_cast<uint32_t>(blob.grid.crop_width));
  binio::write_u32(os, static_cast<uint32_t>(blob.grid.crop_height));
  binio::write_u32(os, static_cast<uint32_t>(blob.grid.cell_width));
  binio::write_u32(os, static_cast<uint32_t>(blob.grid.cell_height));
  binio::write_f64(os, blob.grid.overlap);
  binio::write_u32(os, static_cast<uint32_t>(blob.gaussians));
  binio::write_u32(os, static_cast<uint32_t>(blob.levels.size()));
  for (int a : blob.levels) binio::write_u32(os, static_cast<uint32_t>(a));
  binio::write_u32(os, static_cast<uint32_t>(blob.models.size()));
  for (size_t i = 0; i < blob.models.size(); ++i) {
    binio::write_u32(os, blob.model_grid[i]);
    binio::write_u32(os, blob.model_level[i]);
    os.put(blob.fallback[i] ? '\1' : '\0');
    save_gmm(os, blob.models[i]);
  }
  if (!os) raise(ErrorCode::io, "failed writing codebook file: " + path);
}

CodebookBlob load_codebook_blob(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorCode::io, "cannot open codebook file: " + path);
  binio::expect_magic(is, "CBK1", "CBK1");
  CodebookBlob blob;
  blob.kind = binio::read_string(is, "CBK1 kind");
  blob.grid.crop_width = static_cast<int>(binio::read_u32(is, "CBK1 grid"));
  blob.grid.crop_height = static_cast<int>(binio::read_u32(is, "CBK1 grid"));
  blob.grid.cell_width = static_cast<int>(binio::read_u32(is, "CBK1 grid"));
  blob.grid.cell_height = static_cast<int>(binio::read_u32(is, "CBK1 grid"));
  blob.grid.overlap = binio::read_f64(is, "CBK1 grid overlap");
  blob.gaussians = static_cast<int>(binio::read_u32(is, "CBK1 gaussians"));
  const uint32_t levels = binio::read_u32(is, "CBK1 level count");
  blob.levels.resize(levels);
  for (auto& a : blob.levels) {
    a = static_cast<int>(binio::read_u32(is, "CBK1 level"));
  }
  const uint32_t count = binio::read_u32(is, "CBK1 model count");
  blob.models.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    blob.model_grid.push_back(binio::read_u32(is, "CBK1 model grid"));
    blob.model_level.push_back(binio::read_u32(is, "CBK1 model level"));
    char flag = 0;
    if (!is.get(flag)) binio::fail_truncated("CBK1 fallback flag");
    blob.fallback.push_back(flag != 0);
    blob.models.push_back(load_gmm(is));
  }
  return blob;
}

}  // namespace detail

void save_dynfv_codebook(const std::string& path, const DynFvCodebook& cb) {
  detail::CodebookBlob blob;
  blob.kind = "dynfv";
  blob.grid = cb.grid();
  blob.gaussians = cb.gaussians();
  blob.levels = cb.pyramid().window_lengths;
  for (int g = 0; g < cb.grid().cell_count(); ++g) {
    for (int li = 0; li < cb.levels(); ++li) {
      blob.model_grid.push_back(static_cast<uint32_t>(g));
      blob.model_level.push_back(
          static_cast<uint32_t>(cb.pyramid().window_lengths[li]));
      blob.fallback.push_back(cb.used_fallback(g, li) ? 1 : 0);
      blob.models.push_back(cb.model(g, li));
    }
  }
  detail::save_codebook_blob(path, blob);
}

DynFvCodebook load_dynfv_codebook(const std::string& path) {
  const detail::CodebookBlob blob = detail::load_codebook_blob(path);
  if (blob.kind != "dynfv") {
    raise(ErrorCode::format,
          "codebook kind mismatch: expected dynfv, got " + blob.kind);
  }
  PyramidConfig pyramid;
  pyramid.window_lengths = blob.levels;
  const size_t expected =
      static_cast<size_t>(blob.grid.cell_count()) * blob.levels.size();
  if (blob.models.size() != expected) {
    raise(ErrorCode::format, "codebook model table size mismatch");
  }
  return DynFvCodebook(blob.grid, std::move(pyramid), blob.gaussians,
                       blob.models, blob.fallback);
}

std::string codebook_kind(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorCode::io, "cannot open codebook file: " + path);
  binio::expect_magic(is, "CBK1", "CBK1");
  return binio::read_string(is, "CBK1 kind");
}

}  // namespace dynfv
