#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ldmm/corpus.hpp"
#include "ldmm/loss_models.hpp"
#include "ldmm/rng.hpp"

namespace ldmm {

using Vector = Eigen::VectorXd;
/// n x K row-stochastic responsibilities w_ik.
using ResponsibilityMatrix = RowMatrix;
/// Component index per observation, 0-based.
using Assignment = std::vector<int>;

struct HyperParams {
  Vector alpha;                        // K, Dirichlet prior on theta
  Vector gamma;                        // |V|, Dirichlet prior on each psi_k
  std::vector<LossPrior> loss_priors;  // K

  /// alpha = 1, gamma = 2 (Laplace smoothing), family-appropriate loss priors.
  static HyperParams defaults(const std::vector<LossFamily>& families, std::size_t vocab_size);
  void validate(std::size_t K, std::size_t vocab_size) const;
};

struct MixtureParams {
  Vector theta;                        // K-simplex
  std::vector<LossParams> components;  // K
  RowMatrix psi;                       // K x |V|, rows on the simplex

  [[nodiscard]] std::size_t K() const noexcept { return components.size(); }
  [[nodiscard]] std::size_t vocab_size() const noexcept {
    return static_cast<std::size_t>(psi.cols());
  }
  [[nodiscard]] std::vector<LossFamily> families() const;
  /// Throws ConfigError when a dimension, simplex or parameter check fails.
  void validate(double tol = 1e-12) const;
  /// Reorders components so that new index j holds old index perm[j].
  [[nodiscard]] MixtureParams permuted(const std::vector<int>& perm) const;
};

double log_sum_exp(std::span<const double> values);

/// log Pr(Z_i = k | Y_i, D_i, params) for every k. Throws NumericalError
/// when the observation is impossible under every component.
Vector log_responsibilities(double y, const Document& doc, const MixtureParams& params);

/// Pr(Z_i = k | D_i, theta, psi), ignoring the loss.
Vector doc_only_responsibilities(const Document& doc, const Vector& theta, const RowMatrix& psi);

/// Complete-data log posterior up to an additive constant.
double log_complete_posterior(const MixtureParams& params, const HyperParams& hyper,
                              const Corpus& corpus, const Assignment& z);

/// -2 sum_i log sum_k theta_k p_k(Y_i) prod_v psi_kv^N_iv. Throws
/// NumericalError when some observation has zero likelihood.
double observed_data_deviance(const MixtureParams& params, const Corpus& corpus);

using LengthSampler = std::function<std::uint32_t(Rng&)>;
LengthSampler uniform_length(std::uint32_t lo, std::uint32_t hi);
/// Resamples document lengths from a reference corpus.
LengthSampler empirical_length(const Corpus& reference);

struct SimulatedData {
  Corpus corpus;
  Assignment z;
};

/// Forward simulation of the generative model. Documents keep every drawn
/// word, so none is empty.
SimulatedData simulate_dataset(const MixtureParams& params, const Vocabulary& vocabulary,
                               std::size_t n, const LengthSampler& length_sampler, Rng& rng);

/// Words "w000", "w001", ... (zero-padded so alphabetical order is id order).
Vocabulary synthetic_vocabulary(std::size_t size);

/// Topic k puts `mass` uniformly on its own block of `keywords` words and
/// spreads the rest uniformly over the other words. Blocks are disjoint.
RowMatrix planted_topics(std::size_t K, std::size_t vocab_size, std::size_t keywords, double mass);

/// Writes each document back out as space-separated words.
std::vector<ClaimRecord> to_records(const Corpus& corpus);

/// Indices of the m most probable words of each topic, descending.
std::vector<std::vector<WordId>> top_words(const RowMatrix& psi, std::size_t m);

/// Permutation sorting components by ascending loss mean (report relabeling).
std::vector<int> order_by_mean(const MixtureParams& params);

}  // namespace ldmm
