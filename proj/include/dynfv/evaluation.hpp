#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dynfv/fisher.hpp"

namespace dynfv {

// Probe x gallery distances for one feature.
struct DistanceMatrix {
  std::string feature_name;
  std::vector<std::string> probes;
  std::vector<std::string> gallery;
  std::vector<double> values;  // row-major, probes x gallery

  double at(size_t p, size_t g) const {
    return values[p * gallery.size() + g];
  }
  double& at(size_t p, size_t g) { return values[p * gallery.size() + g]; }
};

// Pairwise Euclidean distances between equally sized feature vectors.
DistanceMatrix euclidean_distances(std::span<const PooledFeature> probe_feats,
                                   std::span<const std::string> probe_ids,
                                   std::span<const PooledFeature> gallery_feats,
                                   std::span<const std::string> gallery_ids,
                                   const std::string& feature_name,
                                   int threads = 1);

// (d - min) / (max - min) over the whole matrix; a constant matrix maps to
// all zeros instead of dividing by zero.
DistanceMatrix min_max_normalize(const DistanceMatrix& d);

// Normalizes each matrix then sums them. All inputs must share the same
// probe and gallery id lists.
DistanceMatrix min_max_fuse(std::span<const DistanceMatrix> matrices);

// m[r-1] = fraction of probes whose true match ranks r-th.
struct MatchCharacteristic {
  std::vector<double> m;
};

// Sorts each probe's gallery ascending by distance (ties broken by
// ascending gallery id) and records the true match's rank. Every probe must
// have its true match in the gallery.
MatchCharacteristic rank_matches(
    const DistanceMatrix& d,
    const std::map<std::string, std::string>& truth);

struct CmcCurve {
  std::vector<double> c;  // prefix sums of the match characteristic

  // C(r) with r clamped to the gallery size; r is 1-based.
  double at_rank(int r) const {
    if (c.empty()) return 0.0;
    const int idx = std::min<int>(r, static_cast<int>(c.size())) - 1;
    return c[idx < 0 ? 0 : idx];
  }
};

CmcCurve cmc(const MatchCharacteristic& m);

// Proportion of uncertainty removed: 1 for perfect rank-1 matching, 0 for a
// uniform match characteristic. Log-base free; 0 log 0 = 0.
double pur(const MatchCharacteristic& m, size_t gallery_size);

// Distance-matrix JSON files (.dmx.json). `truth` may be empty.
void save_distance_matrix(const std::string& path, const DistanceMatrix& d,
                          const std::map<std::string, std::string>& truth = {});
struct LoadedDistanceMatrix {
  DistanceMatrix matrix;
  std::map<std::string, std::string> truth;
};
LoadedDistanceMatrix load_distance_matrix(const std::string& path);

}  // namespace dynfv
