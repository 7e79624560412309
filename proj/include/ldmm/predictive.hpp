#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ldmm/corpus.hpp"
#include "ldmm/gibbs.hpp"
#include "ldmm/kernels.hpp"

namespace ldmm {

struct PredictiveSample {
  std::vector<double> losses;
  std::vector<int> topic_draws;  // 0-based
};

/// One (topic, loss) pair per retained draw: the topic from the
/// description-only conditional, the loss from that topic's component.
PredictiveSample predict(const Document& doc, const PosteriorDraws& draws, Rng& rng);

/// Smallest sample member y with empirical Pr(L > y) <= 1 - level.
double value_at_risk(std::span<const double> losses, double level);

struct TailExpectation {
  double value = 0.0;
  /// No sample strictly exceeds the VaR; value falls back to the VaR.
  bool degenerate = false;
};

/// Mean of the sample members strictly above value_at_risk(losses, level).
TailExpectation conditional_tail_expectation(std::span<const double> losses, double level);

/// Fraction of claims whose loss lies strictly below its VaR.
double var_coverage(std::span<const double> losses, std::span<const double> vars);
double var_coverage(const Corpus& test, std::span<const double> vars);

struct ClaimRisk {
  double mean = 0.0;
  std::vector<double> var;  // per level
  std::vector<TailExpectation> cte;
  int modal_topic = 0;  // 0-based
};

/// Risk measures for every document; document i uses substream (seed, i).
std::vector<ClaimRisk> predict_risk(const Corpus& corpus, const PosteriorDraws& draws,
                                    std::span<const double> levels, std::uint64_t seed,
                                    kernels::Backend backend = kernels::default_backend());

}  // namespace ldmm
