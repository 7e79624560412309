#include "ldmm/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ldmm/errors.hpp"

namespace ldmm {

MixtureParams posterior_mean(const PosteriorDraws& draws) {
  if (draws.empty()) throw ConfigError("no posterior draws");
  const auto& first = draws.draws.front().params;
  if (draws.size() == 1) return first;
  const std::size_t K = first.K();
  const auto families = first.families();
  const double T = static_cast<double>(draws.size());

  MixtureParams out;
  out.theta = Vector::Zero(first.theta.size());
  out.psi = RowMatrix::Zero(first.psi.rows(), first.psi.cols());
  std::vector<std::vector<double>> coords(K);
  for (std::size_t k = 0; k < K; ++k) coords[k].assign(to_unconstrained(first.components[k]).size(), 0.0);

  for (const auto& d : draws.draws) {
    out.theta += d.params.theta;
    out.psi += d.params.psi;
    for (std::size_t k = 0; k < K; ++k) {
      const auto x = to_unconstrained(d.params.components[k]);
      for (std::size_t j = 0; j < x.size(); ++j) coords[k][j] += x[j];
    }
  }
  out.theta /= T;
  out.psi /= T;
  out.theta /= out.theta.sum();
  for (Eigen::Index k = 0; k < out.psi.rows(); ++k) out.psi.row(k) /= out.psi.row(k).sum();
  for (std::size_t k = 0; k < K; ++k) {
    for (auto& v : coords[k]) v /= T;
    out.components.push_back(from_unconstrained(families[k], coords[k], first.components[k]));
  }
  return out;
}

DicResult dic(const PosteriorDraws& draws, const Corpus& corpus) {
  if (draws.empty()) throw ConfigError("DIC needs at least one draw");
  DicResult r;
  double total = 0.0;
  for (const auto& d : draws.draws) total += observed_data_deviance(d.params, corpus);
  r.mean_deviance = total / static_cast<double>(draws.size());
  r.deviance_at_mean = observed_data_deviance(posterior_mean(draws), corpus);
  r.p_d = r.mean_deviance - r.deviance_at_mean;
  r.dic = r.p_d + r.mean_deviance;
  return r;
}

int parameter_count(const MixtureParams& params) {
  const auto K = static_cast<int>(params.K());
  int count = (K - 1) + K * (static_cast<int>(params.vocab_size()) - 1);
  for (const auto& c : params.components) count += dimension(family_of(c));
  return count;
}

InformationCriteria nll_aic_bic(const MixtureParams& params, const Corpus& corpus,
                                int parameter_count) {
  InformationCriteria ic;
  ic.n = corpus.size();
  ic.parameter_count = parameter_count;
  ic.nll = observed_data_deviance(params, corpus) / 2.0;
  ic.aic = 2.0 * parameter_count + 2.0 * ic.nll;
  ic.bic = parameter_count * std::log(static_cast<double>(ic.n)) + 2.0 * ic.nll;
  const double n = static_cast<double>(ic.n);
  ic.nll_per_obs = ic.nll / n;
  ic.aic_per_obs = ic.aic / n;
  ic.bic_per_obs = ic.bic / n;
  return ic;
}

namespace {

std::vector<double> truncated_sorted(std::span<const double> x, std::optional<double> truncation) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  if (truncation) {
    const double p = *truncation;
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("truncation level must lie in (0, 1]");
    const auto keep = static_cast<std::size_t>(std::ceil(p * static_cast<double>(s.size()) - 1e-9));
    s.resize(std::min(keep, s.size()));
  }
  if (s.empty()) throw DataError("empty sample after truncation");
  return s;
}

std::vector<double> thin_to(const std::vector<double>& sorted, std::size_t m) {
  if (sorted.size() == m) return sorted;
  std::vector<double> out(m);
  const double ratio = static_cast<double>(sorted.size()) / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto idx = static_cast<std::size_t>(std::floor((static_cast<double>(j) + 0.5) * ratio));
    out[j] = sorted[std::min(idx, sorted.size() - 1)];
  }
  return out;
}

}  // namespace

double wasserstein1(std::span<const double> u, std::span<const double> v,
                    std::optional<double> truncation) {
  auto su = truncated_sorted(u, truncation);
  auto sv = truncated_sorted(v, truncation);
  const std::size_t m = std::min(su.size(), sv.size());
  su = thin_to(su, m);
  sv = thin_to(sv, m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += std::abs(su[i] - sv[i]);
  return total / static_cast<double>(m);
}

double perplexity(const Corpus& test, const MixtureParams& params) {
  const std::uint64_t words = test.total_length();
  if (words == 0) throw DataError("perplexity of a corpus with no words");
  const auto K = static_cast<Eigen::Index>(params.K());
  double total = 0.0;
  std::vector<double> terms(static_cast<std::size_t>(K));
  for (const auto& doc : test.documents) {
    if (doc.counts.empty()) continue;
    const Vector prob = doc_only_responsibilities(doc, params.theta, params.psi);
    for (const auto& wc : doc.counts) {
      for (Eigen::Index k = 0; k < K; ++k) {
        terms[static_cast<std::size_t>(k)] = wc.count * std::log(params.psi(k, wc.id)) + std::log(prob[k]);
      }
      total += log_sum_exp(terms);
    }
  }
  return std::exp(-total / static_cast<double>(words));
}

std::vector<double> topic_stability(const PosteriorDraws& draws, StabilityMetric metric) {
  if (draws.size() < 2) throw ConfigError("stability needs at least two retained draws");
  const auto& first = draws.draws.front().params.psi;
  // Offsets from the first draw, so a constant chain has its mean exactly.
  RowMatrix offset = RowMatrix::Zero(first.rows(), first.cols());
  for (const auto& d : draws.draws) offset += d.params.psi - first;
  const RowMatrix mean = first + offset / static_cast<double>(draws.size());

  std::vector<double> out(static_cast<std::size_t>(first.rows()), 0.0);
  for (const auto& d : draws.draws) {
    for (Eigen::Index k = 0; k < first.rows(); ++k) {
      double s = 0.0;
      if (metric == StabilityMetric::Euclidean) {
        s = (d.params.psi.row(k) - mean.row(k)).norm();
      } else {
        for (Eigen::Index v = 0; v < first.cols(); ++v) {
          const double p = d.params.psi(k, v);
          if (p > 0.0) s += p * std::log(p / mean(k, v));
        }
        s = std::max(s, 0.0);
      }
      out[static_cast<std::size_t>(k)] += s;
    }
  }
  for (auto& v : out) v /= static_cast<double>(draws.size());
  return out;
}

std::vector<double> sample_loss_mixture(const MixtureParams& params, std::size_t n, Rng& rng) {
  std::discrete_distribution<int> topic(params.theta.data(), params.theta.data() + params.theta.size());
  std::vector<double> out(n);
  for (auto& y : out) y = sample(params.components[static_cast<std::size_t>(topic(rng))], rng);
  return out;
}

}  // namespace ldmm
