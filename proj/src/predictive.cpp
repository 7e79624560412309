#include "ldmm/predictive.hpp"

#include <algorithm>
#include <cmath>

#include "ldmm/errors.hpp"

namespace ldmm {

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("risk level must lie in (0, 1)");
}

/// Index into the ascending sample of the VaR order statistic.
std::size_t var_index(const std::vector<double>& sorted, double level) {
  const double allowed = (1.0 - level) * static_cast<double>(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    // members strictly greater than sorted[j]
    const auto above = static_cast<double>(
        sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), sorted[j]));
    if (above <= allowed + 1e-9) return j;
  }
  return sorted.size() - 1;
}

}  // namespace

PredictiveSample predict(const Document& doc, const PosteriorDraws& draws, Rng& rng) {
  if (draws.empty()) throw ConfigError("no posterior draws to predict from");
  PredictiveSample out;
  out.losses.reserve(draws.size());
  out.topic_draws.reserve(draws.size());
  for (const auto& d : draws.draws) {
    const Vector prob = doc_only_responsibilities(doc, d.params.theta, d.params.psi);
    const int k = kernels::detail::draw_categorical(prob.data(), static_cast<std::size_t>(prob.size()), rng);
    out.topic_draws.push_back(k);
    out.losses.push_back(sample(d.params.components[static_cast<std::size_t>(k)], rng));
  }
  return out;
}

double value_at_risk(std::span<const double> losses, double level) {
  check_level(level);
  if (losses.empty()) throw DataError("VaR of an empty sample");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[var_index(sorted, level)];
}

TailExpectation conditional_tail_expectation(std::span<const double> losses, double level) {
  const double var = value_at_risk(losses, level);
  double sum = 0.0;
  std::size_t count = 0;
  for (double y : losses) {
    if (y > var) {
      sum += y;
      ++count;
    }
  }
  if (count == 0) return {var, true};
  return {sum / static_cast<double>(count), false};
}

double var_coverage(std::span<const double> losses, std::span<const double> vars) {
  if (losses.size() != vars.size()) throw DataError("losses and VaRs differ in length");
  if (losses.empty()) throw DataError("coverage of an empty test set");
  std::size_t below = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) below += losses[i] < vars[i] ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(losses.size());
}

double var_coverage(const Corpus& test, std::span<const double> vars) {
  return var_coverage(std::span<const double>(test.losses), vars);
}

std::vector<ClaimRisk> predict_risk(const Corpus& corpus, const PosteriorDraws& draws,
                                    std::span<const double> levels, std::uint64_t seed,
                                    kernels::Backend backend) {
  if (draws.empty()) throw ConfigError("no posterior draws to predict from");
  for (double level : levels) check_level(level);
  const std::size_t K = draws.draws.front().params.K();
  std::vector<ClaimRisk> out(corpus.size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 16) if (backend == kernels::Backend::OpenMP)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Rng rng = substream(seed, 0x5052, ui);
    const auto s = predict(corpus.documents[ui], draws, rng);
    ClaimRisk risk;
    double total = 0.0;
    for (double y : s.losses) total += y;
    risk.mean = total / static_cast<double>(s.losses.size());
    for (double level : levels) {
      risk.var.push_back(value_at_risk(s.losses, level));
      risk.cte.push_back(conditional_tail_expectation(s.losses, level));
    }
    std::vector<int> tally(K, 0);
    for (int k : s.topic_draws) ++tally[static_cast<std::size_t>(k)];
    risk.modal_topic =
        static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
    out[ui] = std::move(risk);
  }
  return out;
}

}  // namespace ldmm
