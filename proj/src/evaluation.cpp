#include "dynfv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dynfv/error.hpp"
#include "dynfv/parallel.hpp"

namespace dynfv {

using nlohmann::json;

DistanceMatrix euclidean_distances(std::span<const PooledFeature> probe_feats,
                                   std::span<const std::string> probe_ids,
                                   std::span<const PooledFeature> gallery_feats,
                                   std::span<const std::string> gallery_ids,
                                   const std::string& feature_name,
                                   int threads) {
  if (probe_feats.size() != probe_ids.size() ||
      gallery_feats.size() != gallery_ids.size()) {
    raise(ErrorCode::invalid_argument, "feature/id list size mismatch");
  }
  DistanceMatrix d;
  d.feature_name = feature_name;
  d.probes.assign(probe_ids.begin(), probe_ids.end());
  d.gallery.assign(gallery_ids.begin(), gallery_ids.end());
  d.values.assign(probe_feats.size() * gallery_feats.size(), 0.0);

  parallel_for(probe_feats.size(), threads, [&](size_t p) {
    const auto& fp = probe_feats[p].values;
    for (size_t g = 0; g < gallery_feats.size(); ++g) {
      const auto& fg = gallery_feats[g].values;
      if (fp.size() != fg.size()) {
        raise(ErrorCode::invalid_argument,
              "dimension mismatch in feature '" + feature_name + "': probe " +
                  d.probes[p] + " has " + std::to_string(fp.size()) +
                  ", gallery " + d.gallery[g] + " has " +
                  std::to_string(fg.size()));
      }
      double s = 0.0;
      for (size_t i = 0; i < fp.size(); ++i) {
        const double t = fp[i] - fg[i];
        s += t * t;
      }
      d.at(p, g) = std::sqrt(s);
    }
  });
  return d;
}

DistanceMatrix min_max_normalize(const DistanceMatrix& d) {
  DistanceMatrix out = d;
  if (d.values.empty()) return out;
  const auto [mn_it, mx_it] =
      std::minmax_element(d.values.begin(), d.values.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  if (mx == mn) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  const double inv = 1.0 / (mx - mn);
  for (double& v : out.values) v = (v - mn) * inv;
  return out;
}

DistanceMatrix min_max_fuse(std::span<const DistanceMatrix> matrices) {
  if (matrices.empty()) {
    raise(ErrorCode::invalid_argument, "nothing to fuse");
  }
  DistanceMatrix out = min_max_normalize(matrices.front());
  out.feature_name = matrices.front().feature_name;
  for (size_t i = 1; i < matrices.size(); ++i) {
    const DistanceMatrix& m = matrices[i];
    if (m.probes != out.probes || m.gallery != out.gallery) {
      raise(ErrorCode::invalid_argument,
            "cannot fuse distance matrices with different probe/gallery ids ('" +
                out.feature_name + "' vs '" + m.feature_name + "')");
    }
    const DistanceMatrix norm = min_max_normalize(m);
    for (size_t j = 0; j < out.values.size(); ++j) {
      out.values[j] += norm.values[j];
    }
    out.feature_name += "+" + m.feature_name;
  }
  return out;
}

MatchCharacteristic rank_matches(
    const DistanceMatrix& d, const std::map<std::string, std::string>& truth) {
  const size_t P = d.probes.size();
  const size_t G = d.gallery.size();
  MatchCharacteristic mc;
  mc.m.assign(G, 0.0);
  if (P == 0) raise(ErrorCode::invalid_argument, "no probes to rank");

  std::string missing;
  for (size_t p = 0; p < P; ++p) {
    const auto it = truth.find(d.probes[p]);
    if (it == truth.end() ||
        std::find(d.gallery.begin(), d.gallery.end(), it->second) ==
            d.gallery.end()) {
      missing += (missing.empty() ? "" : ", ") + d.probes[p];
    }
  }
  if (!missing.empty()) {
    raise(ErrorCode::invalid_argument,
          "probes without a true gallery match: " + missing);
  }

  std::vector<size_t> order(G);
  for (size_t p = 0; p < P; ++p) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const double da = d.at(p, a);
      const double db = d.at(p, b);
      if (da != db) return da < db;
      return d.gallery[a] < d.gallery[b];
    });
    const std::string& target = truth.at(d.probes[p]);
    for (size_t r = 0; r < G; ++r) {
      if (d.gallery[order[r]] == target) {
        mc.m[r] += 1.0 / static_cast<double>(P);
        break;
      }
    }
  }
  return mc;
}

CmcCurve cmc(const MatchCharacteristic& m) {
  CmcCurve curve;
  curve.c.resize(m.m.size());
  double acc = 0.0;
  for (size_t i = 0; i < m.m.size(); ++i) {
    acc += m.m[i];
    curve.c[i] = acc;
  }
  return curve;
}

double pur(const MatchCharacteristic& m, size_t gallery_size) {
  if (gallery_size < 2) return 1.0;  // a single-entry gallery has no entropy
  double entropy = 0.0;
  for (double p : m.m) {
    if (p > 0.0) entropy -= p * std::log(p);
  }
  const double log_n = std::log(static_cast<double>(gallery_size));
  return (log_n - entropy) / log_n;
}

void save_distance_matrix(const std::string& path, const DistanceMatrix& d,
                          const std::map<std::string, std::string>& truth) {
  json j;
  j["schema"] = "dynfv-distances-v1";
  j["feature"] = d.feature_name;
  j["probes"] = d.probes;
  j["gallery"] = d.gallery;
  json rows = json::array();
  for (size_t p = 0; p < d.probes.size(); ++p) {
    json row = json::array();
    for (size_t g = 0; g < d.gallery.size(); ++g) row.push_back(d.at(p, g));
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  if (!truth.empty()) j["truth"] = truth;

  std::ofstream os(path);
  if (!os) raise(ErrorCode::io, "cannot write distance file: " + path);
  os << j.dump(2) << '\n';
  if (!os) raise(ErrorCode::io, "failed writing distance file: " + path);
}

LoadedDistanceMatrix load_distance_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) raise(ErrorCode::io, "cannot open distance file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::format, path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != "dynfv-distances-v1") {
    raise(ErrorCode::format, path + ": not a dynfv distance file");
  }
  LoadedDistanceMatrix out;
  try {
    out.matrix.feature_name = j.at("feature").get<std::string>();
    out.matrix.probes = j.at("probes").get<std::vector<std::string>>();
    out.matrix.gallery = j.at("gallery").get<std::vector<std::string>>();
    for (const auto& row : j.at("values")) {
      for (const auto& v : row) out.matrix.values.push_back(v.get<double>());
    }
    if (j.contains("truth")) {
      out.truth = j.at("truth").get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::format, path + ": malformed distance file: " + e.what());
  }
  if (out.matrix.values.size() !=
      out.matrix.probes.size() * out.matrix.gallery.size()) {
    raise(ErrorCode::format, path + ": distance matrix shape mismatch");
  }
  return out;
}

}  // namespace dynfv
