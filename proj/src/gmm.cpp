#include "dynfv/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "dynfv/binio.hpp"
#include "dynfv/error.hpp"
#include "dynfv/rng.hpp"

namespace dynfv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double sq_dist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

// Deterministic subsample without replacement (partial Fisher-Yates over an
// index vector); returns a row-major copy of the kept rows.
std::vector<double> subsample_rows(std::span<const double> data, int dim,
                                   size_t keep, Rng& rng) {
  const size_t n = data.size() / dim;
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < keep; ++i) {
    const size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<double> out(keep * dim);
  for (size_t i = 0; i < keep; ++i) {
    std::copy_n(data.data() + idx[i] * dim, dim, out.data() + i * dim);
  }
  return out;
}

struct KmeansResult {
  std::vector<double> centers;  // k * dim
  std::vector<int> assign;      // n
};

KmeansResult kmeans_plus_plus(std::span<const double> data, int dim, int k,
                              int iterations, Rng& rng) {
  const size_t n = data.size() / dim;
  KmeansResult res;
  res.centers.resize(static_cast<size_t>(k) * dim);
  res.assign.assign(n, 0);

  // Seeding: first center uniform, then proportional to squared distance.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  size_t first = rng.uniform_index(n);
  std::copy_n(data.data() + first * dim, dim, res.centers.data());
  for (int c = 1; c < k; ++c) {
    const double* prev = res.centers.data() + static_cast<size_t>(c - 1) * dim;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(data.data() + i * dim, prev, dim));
      total += d2[i];
    }
    size_t pick;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(n);
    }
    std::copy_n(data.data() + pick * dim,
                dim, res.centers.data() + static_cast<size_t>(c) * dim);
  }

  std::vector<double> sums(static_cast<size_t>(k) * dim);
  std::vector<size_t> counts(k);
  for (int it = 0; it < iterations; ++it) {
    for (size_t i = 0; i < n; ++i) {
      const double* x = data.data() + i * dim;
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d =
            sq_dist(x, res.centers.data() + static_cast<size_t>(c) * dim, dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assign[i] = best;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), size_t{0});
    for (size_t i = 0; i < n; ++i) {
      const double* x = data.data() + i * dim;
      double* s = sums.data() + static_cast<size_t>(res.assign[i]) * dim;
      for (int d = 0; d < dim; ++d) s[d] += x[d];
      ++counts[res.assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster from the point farthest from its center.
        size_t far_i = 0;
        double far_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
          const double d = sq_dist(
              data.data() + i * dim,
              res.centers.data() + static_cast<size_t>(res.assign[i]) * dim,
              dim);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        std::copy_n(data.data() + far_i * dim, dim,
                    res.centers.data() + static_cast<size_t>(c) * dim);
        continue;
      }
      double* ctr = res.centers.data() + static_cast<size_t>(c) * dim;
      const double* s = sums.data() + static_cast<size_t>(c) * dim;
      for (int d = 0; d < dim; ++d) ctr[d] = s[d] / counts[c];
    }
  }
  // Final assignment against the final centers.
  for (size_t i = 0; i < n; ++i) {
    const double* x = data.data() + i * dim;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d =
          sq_dist(x, res.centers.data() + static_cast<size_t>(c) * dim, dim);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    res.assign[i] = best;
  }
  return res;
}

struct EStepAccum {
  double ll_sum = 0.0;
  std::vector<double> nk;       // k
  std::vector<double> sum;      // k * dim, gamma * x
  std::vector<double> sum_sq;   // k * dim, gamma * x^2

  EStepAccum(int k, int dim)
      : nk(k, 0.0),
        sum(static_cast<size_t>(k) * dim, 0.0),
        sum_sq(static_cast<size_t>(k) * dim, 0.0) {}

  void add(const EStepAccum& o) {
    ll_sum += o.ll_sum;
    for (size_t i = 0; i < nk.size(); ++i) nk[i] += o.nk[i];
    for (size_t i = 0; i < sum.size(); ++i) sum[i] += o.sum[i];
    for (size_t i = 0; i < sum_sq.size(); ++i) sum_sq[i] += o.sum_sq[i];
  }
};

void e_step_range(const GmmEvaluator& eval, std::span<const double> data,
                  int dim, size_t begin, size_t end, EStepAccum& acc) {
  const int k = eval.k();
  std::vector<double> gamma(k);
  for (size_t i = begin; i < end; ++i) {
    const double* x = data.data() + i * dim;
    acc.ll_sum += eval.posteriors({x, static_cast<size_t>(dim)}, gamma);
    for (int c = 0; c < k; ++c) {
      const double g = gamma[c];
      if (g == 0.0) continue;
      acc.nk[c] += g;
      double* s = acc.sum.data() + static_cast<size_t>(c) * dim;
      double* s2 = acc.sum_sq.data() + static_cast<size_t>(c) * dim;
      for (int d = 0; d < dim; ++d) {
        const double xd = x[d];
        s[d] += g * xd;
        s2[d] += g * xd * xd;
      }
    }
  }
}

}  // namespace

GmmEvaluator::GmmEvaluator(const GmmModel& m) : model_(&m) {
  log_const_.resize(m.k);
  inv_var_.resize(m.variances.size());
  for (int i = 0; i < m.k; ++i) {
    double log_det = 0.0;
    for (int d = 0; d < m.dim; ++d) {
      const double v = m.variances[static_cast<size_t>(i) * m.dim + d];
      log_det += std::log(v);
      inv_var_[static_cast<size_t>(i) * m.dim + d] = 1.0 / v;
    }
    const double w = m.weights[i];
    log_const_[i] = (w > 0.0 ? std::log(w)
                             : -std::numeric_limits<double>::infinity()) -
                    0.5 * (m.dim * kLog2Pi + log_det);
  }
}

void GmmEvaluator::component_log_densities(std::span<const double> x,
                                           std::span<double> out) const {
  const int dim = model_->dim;
  for (int i = 0; i < model_->k; ++i) {
    const double* mu = model_->means.data() + static_cast<size_t>(i) * dim;
    const double* iv = inv_var_.data() + static_cast<size_t>(i) * dim;
    double maha = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double t = x[d] - mu[d];
      maha += t * t * iv[d];
    }
    out[i] = log_const_[i] - 0.5 * maha;
  }
}

double GmmEvaluator::log_density(std::span<const double> x) const {
  std::vector<double> ld(model_->k);
  component_log_densities(x, ld);
  const double mx = *std::max_element(ld.begin(), ld.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : ld) s += std::exp(v - mx);
  return mx + std::log(s);
}

double GmmEvaluator::posteriors(std::span<const double> x,
                                std::span<double> gamma) const {
  component_log_densities(x, gamma);
  const double mx = *std::max_element(gamma.begin(), gamma.end());
  double s = 0.0;
  for (int i = 0; i < model_->k; ++i) {
    gamma[i] = std::exp(gamma[i] - mx);
    s += gamma[i];
  }
  for (int i = 0; i < model_->k; ++i) gamma[i] /= s;
  return mx + std::log(s);
}

std::vector<double> responsibilities(const GmmModel& m,
                                     std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.dim) {
    raise(ErrorCode::invalid_argument, "responsibilities: dimension mismatch");
  }
  std::vector<double> gamma(m.k);
  GmmEvaluator(m).posteriors(x, gamma);
  return gamma;
}

double log_likelihood(const GmmModel& m, std::span<const double> data) {
  if (data.empty()) {
    raise(ErrorCode::invalid_argument, "log_likelihood of empty data");
  }
  if (data.size() % m.dim != 0) {
    raise(ErrorCode::invalid_argument, "log_likelihood: dimension mismatch");
  }
  const GmmEvaluator eval(m);
  const size_t n = data.size() / m.dim;
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    s += eval.log_density(
        {data.data() + i * m.dim, static_cast<size_t>(m.dim)});
  }
  return s / static_cast<double>(n);
}

std::pair<GmmModel, FitReport> fit_gmm(std::span<const double> data, int dim,
                                       int k, uint64_t seed,
                                       const FitOptions& opts) {
  if (dim <= 0 || k <= 0 || data.size() % dim != 0) {
    raise(ErrorCode::invalid_argument, "fit_gmm: bad dimensions");
  }
  for (double v : data) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::invalid_argument, "fit_gmm: non-finite input");
    }
  }
  size_t n = data.size() / dim;
  if (n < static_cast<size_t>(k)) {
    raise(ErrorCode::insufficient_data,
          "fit_gmm: fewer points (" + std::to_string(n) + ") than components (" +
              std::to_string(k) + ")");
  }

  Rng rng(seed);
  std::vector<double> owned;
  if (opts.sample_cap > 0 && n > opts.sample_cap) {
    owned = subsample_rows(data, dim, opts.sample_cap, rng);
    data = owned;
    n = opts.sample_cap;
  }

  const double floor = opts.variance_floor;

  // Global per-dimension variance, used for initialisation and re-seeding.
  std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) global_mean[d] += data[i * dim + d];
  }
  for (int d = 0; d < dim; ++d) global_mean[d] /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) {
      const double t = data[i * dim + d] - global_mean[d];
      global_var[d] += t * t;
    }
  }
  for (int d = 0; d < dim; ++d) {
    global_var[d] = std::max(global_var[d] / static_cast<double>(n), floor);
  }

  const KmeansResult km =
      kmeans_plus_plus(data, dim, k, opts.kmeans_iterations, rng);

  GmmModel model;
  model.k = k;
  model.dim = dim;
  model.weights.assign(k, 0.0);
  model.means = km.centers;
  model.variances.assign(static_cast<size_t>(k) * dim, 0.0);
  {
    std::vector<size_t> counts(k, 0);
    for (int a : km.assign) ++counts[a];
    for (size_t i = 0; i < n; ++i) {
      const int c = km.assign[i];
      for (int d = 0; d < dim; ++d) {
        const double t =
            data[i * dim + d] - model.means[static_cast<size_t>(c) * dim + d];
        model.variances[static_cast<size_t>(c) * dim + d] += t * t;
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        model.weights[c] = 1.0 / static_cast<double>(n);
        std::copy(global_var.begin(), global_var.end(),
                  model.variances.begin() + static_cast<size_t>(c) * dim);
        continue;
      }
      model.weights[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
      for (int d = 0; d < dim; ++d) {
        auto& v = model.variances[static_cast<size_t>(c) * dim + d];
        v = std::max(v / static_cast<double>(counts[c]), floor);
      }
    }
    double wsum = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
    for (double& w : model.weights) w /= wsum;
  }

  FitReport report;
  report.seed = seed;

  const int chunks = std::max(1, opts.threads);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    const GmmEvaluator eval(model);
    EStepAccum total(k, dim);
    if (chunks == 1) {
      e_step_range(eval, data, dim, 0, n, total);
    } else {
      std::vector<EStepAccum> parts(chunks, EStepAccum(k, dim));
      std::vector<std::thread> pool;
      const size_t per = (n + chunks - 1) / chunks;
      for (int c = 0; c < chunks; ++c) {
        const size_t b = std::min(n, c * per);
        const size_t e = std::min(n, b + per);
        pool.emplace_back([&, c, b, e] {
          e_step_range(eval, data, dim, b, e, parts[c]);
        });
      }
      for (auto& t : pool) t.join();
      for (auto& p : parts) total.add(p);  // fixed chunk order
    }
    const double mean_ll = total.ll_sum / static_cast<double>(n);
    report.log_likelihood_trace.push_back(mean_ll);
    report.iterations = iter;

    // M-step.
    for (int c = 0; c < k; ++c) {
      const double nk = total.nk[c];
      if (nk / static_cast<double>(n) < kDegenerateWeight) {
        // Re-seed a dead component from the point the model explains worst.
        size_t far_i = 0;
        double far_ll = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < n; ++i) {
          const double ll = eval.log_density(
              {data.data() + i * dim, static_cast<size_t>(dim)});
          if (ll < far_ll) {
            far_ll = ll;
            far_i = i;
          }
        }
        std::copy_n(data.data() + far_i * dim, dim,
                    model.means.begin() + static_cast<size_t>(c) * dim);
        std::copy(global_var.begin(), global_var.end(),
                  model.variances.begin() + static_cast<size_t>(c) * dim);
        model.weights[c] = 1.0 / static_cast<double>(n);
        ++report.reseeded_components;
        continue;
      }
      model.weights[c] = nk / static_cast<double>(n);
      for (int d = 0; d < dim; ++d) {
        const size_t j = static_cast<size_t>(c) * dim + d;
        const double mu = total.sum[j] / nk;
        model.means[j] = mu;
        model.variances[j] =
            std::max(total.sum_sq[j] / nk - mu * mu, floor);
      }
    }
    {
      double wsum =
          std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
      for (double& w : model.weights) w /= wsum;
    }

    if (iter >= 2 && std::abs(mean_ll - prev_ll) <
                         opts.tolerance * std::max(1.0, std::abs(prev_ll))) {
      report.converged = true;
      prev_ll = mean_ll;
      break;
    }
    prev_ll = mean_ll;
  }

  report.final_log_likelihood = log_likelihood(model, data);
  report.log_likelihood_trace.push_back(report.final_log_likelihood);
  return {std::move(model), std::move(report)};
}

void save_gmm(std::ostream& os, const GmmModel& m) {
  os.write("GMM1", 4);
  binio::write_u32(os, static_cast<uint32_t>(m.k));
  binio::write_u32(os, static_cast<uint32_t>(m.dim));
  for (double w : m.weights) binio::write_f64(os, w);
  for (double v : m.means) binio::write_f64(os, v);
  for (double v : m.variances) binio::write_f64(os, v);
}

GmmModel load_gmm(std::istream& is) {
  binio::expect_magic(is, "GMM1", "GMM1");
  GmmModel m;
  m.k = static_cast<int>(binio::read_u32(is, "GMM1 k"));
  m.dim = static_cast<int>(binio::read_u32(is, "GMM1 dim"));
  if (m.k <= 0 || m.dim <= 0 || m.k > (1 << 20) || m.dim > (1 << 20)) {
    raise(ErrorCode::format, "GMM1: implausible header");
  }
  m.weights.resize(m.k);
  m.means.resize(static_cast<size_t>(m.k) * m.dim);
  m.variances.resize(static_cast<size_t>(m.k) * m.dim);
  for (auto& v : m.weights) v = binio::read_f64(is, "GMM1 weights");
  for (auto& v : m.means) v = binio::read_f64(is, "GMM1 means");
  for (auto& v : m.variances) v = binio::read_f64(is, "GMM1 variances");
  return m;
}

void save_gmm_file(const std::string& path, const GmmModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorCode::io, "cannot write GMM file: " + path);
  save_gmm(os, m);
  if (!os) raise(ErrorCode::io, "failed writing GMM file: " + path);
}

GmmModel load_gmm_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorCode::io, "cannot open GMM file: " + path);
  return load_gmm(is);
}

}  // namespace dynfv
