#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dynfv {

inline constexpr double kVarianceFloor = 1e-4;
inline constexpr double kDegenerateWeight = 1e-8;

// Diagonal-covariance Gaussian mixture. Weights sum to 1; every variance is
// at least the floor it was fitted with.
struct GmmModel {
  int k = 0;
  int dim = 0;
  std::vector<double> weights;    // k
  std::vector<double> means;      // k * dim
  std::vector<double> variances;  // k * dim

  std::span<const double> mean(int i) const {
    return {means.data() + static_cast<size_t>(i) * dim,
            static_cast<size_t>(dim)};
  }
  std::span<const double> variance(int i) const {
    return {variances.data() + static_cast<size_t>(i) * dim,
            static_cast<size_t>(dim)};
  }
};

struct FitOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // relative change of the mean log-likelihood
  int kmeans_iterations = 10;
  double variance_floor = kVarianceFloor;
  size_t sample_cap = 0;  // subsample the training set above this; 0 = all
  int threads = 1;        // E-step chunking; 1 keeps bit determinism
};

struct FitReport {
  int iterations = 0;
  double final_log_likelihood = 0.0;
  bool converged = false;
  uint64_t seed = 0;
  int reseeded_components = 0;
  // Mean log-likelihood observed at each E-step, plus the final model's.
  std::vector<double> log_likelihood_trace;
};

// EM from a k-means++ start. `data` is row-major, n x dim. Deterministic
// given (data, k, seed) when opts.threads == 1; multi-threaded fits agree
// to ~1e-6 relative (summation order changes with the chunk count).
std::pair<GmmModel, FitReport> fit_gmm(std::span<const double> data, int dim,
                                       int k, uint64_t seed,
                                       const FitOptions& opts = {});

// Precomputed per-component constants for repeated density queries.
class GmmEvaluator {
 public:
  explicit GmmEvaluator(const GmmModel& m);

  int k() const { return model_->k; }
  int dim() const { return model_->dim; }

  // out[i] = log pi_i + log N(x; mu_i, sigma_i^2)
  void component_log_densities(std::span<const double> x,
                               std::span<double> out) const;
  // log p(x), log-sum-exp over components.
  double log_density(std::span<const double> x) const;
  // Fills gamma with the posterior over components; returns log p(x).
  double posteriors(std::span<const double> x, std::span<double> gamma) const;

 private:
  const GmmModel* model_;
  std::vector<double> log_const_;  // log pi_i - 0.5 * sum_d log(2 pi s2_id)
  std::vector<double> inv_var_;    // k * dim
};

// Soft assignment of x over the components (sums to 1).
std::vector<double> responsibilities(const GmmModel& m,
                                     std::span<const double> x);

// Mean of log p(x_n) over the rows of data. Errors on empty data.
double log_likelihood(const GmmModel& m, std::span<const double> data);

// GMM1 file format: magic "GMM1", LE u32 k, u32 dim, then weights, means,
// variances as LE f64.
void save_gmm(std::ostream& os, const GmmModel& m);
GmmModel load_gmm(std::istream& is);
void save_gmm_file(const std::string& path, const GmmModel& m);
GmmModel load_gmm_file(const std::string& path);

}  // namespace dynfv
