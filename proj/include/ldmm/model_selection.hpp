#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ldmm/corpus.hpp"
#include "ldmm/gibbs.hpp"
#include "ldmm/mixture.hpp"

namespace ldmm {

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;       // posterior mean of D
  double deviance_at_mean = 0.0;    // D at the posterior-mean parameters
};

/// Draw-wise mean of the parameters: theta and psi arithmetically on the
/// simplex, loss parameters in their unconstrained coordinates.
MixtureParams posterior_mean(const PosteriorDraws& draws);

DicResult dic(const PosteriorDraws& draws, const Corpus& corpus);

/// (K - 1) + K (|V| - 1) + sum_k dim(phi_k).
int parameter_count(const MixtureParams& params);

struct InformationCriteria {
  double nll = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double nll_per_obs = 0.0;
  double aic_per_obs = 0.0;
  double bic_per_obs = 0.0;
  int parameter_count = 0;
  std::size_t n = 0;
};

InformationCriteria nll_aic_bic(const MixtureParams& params, const Corpus& corpus,
                                int parameter_count);

/// Order-statistic W1 between empirical samples. With `truncation` p, each
/// sample keeps its own lowest ceil(p * size) order statistics; the larger
/// sample is then thinned to the common size by evenly spaced order
/// statistics.
double wasserstein1(std::span<const double> u, std::span<const double> v,
                    std::optional<double> truncation = std::nullopt);

/// Held-out perplexity with description-only topic probabilities; the word
/// sum runs over words present in each document.
double perplexity(const Corpus& test, const MixtureParams& params);

enum class StabilityMetric { Euclidean, KL };

/// Mean distance of each topic's retained psi draws from their mean.
std::vector<double> topic_stability(const PosteriorDraws& draws, StabilityMetric metric);

/// Draws n losses from the fitted loss mixture sum_k theta_k p_k.
std::vector<double> sample_loss_mixture(const MixtureParams& params, std::size_t n, Rng& rng);

struct MetricReport {
  InformationCriteria criteria;
  DicResult dic;
  double perplexity = 0.0;
  std::map<double, double> wasserstein_train;  // truncation level -> distance
  std::map<double, double> wasserstein_test;
  std::vector<double> stability_euclidean;
  std::vector<double> stability_kl;
};

}  // namespace ldmm
