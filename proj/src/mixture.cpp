#include "ldmm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ldmm/errors.hpp"
#include "ldmm/kernels.hpp"

namespace ldmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// c * log(x) with the convention 0 * log(0) = 0.
double xlogy(double c, double x) { return c == 0.0 ? 0.0 : c * std::log(x); }

}  // namespace

HyperParams HyperParams::defaults(const std::vector<LossFamily>& families,
                                  std::size_t vocab_size) {
  HyperParams h;
  h.alpha = Vector::Ones(static_cast<Eigen::Index>(families.size()));
  h.gamma = Vector::Constant(static_cast<Eigen::Index>(vocab_size), 2.0);
  for (auto f : families) {
    switch (f) {
      case LossFamily::LogNormal:
        h.loss_priors.emplace_back(NigPrior{});
        break;
      case LossFamily::Pareto:
        h.loss_priors.emplace_back(GammaShapePrior{});
        break;
      case LossFamily::GB2:
        h.loss_priors.emplace_back(FlatPrior{});
        break;
    }
  }
  return h;
}

void HyperParams::validate(std::size_t K, std::size_t vocab_size) const {
  if (static_cast<std::size_t>(alpha.size()) != K || loss_priors.size() != K) {
    throw ConfigError("hyper-parameters do not match K = " + std::to_string(K));
  }
  if (static_cast<std::size_t>(gamma.size()) != vocab_size) {
    throw ConfigError("gamma length does not match the vocabulary size");
  }
  if (!(alpha.array() > 0.0).all() || !(gamma.array() > 0.0).all()) {
    throw ConfigError("Dirichlet hyper-parameters must be positive");
  }
  for (const auto& p : loss_priors) ldmm::validate(p);
}

std::vector<LossFamily> MixtureParams::families() const {
  std::vector<LossFamily> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(family_of(c));
  return out;
}

void MixtureParams::validate(double tol) const {
  const auto K = static_cast<Eigen::Index>(components.size());
  if (K == 0) throw ConfigError("mixture has no components");
  if (theta.size() != K || psi.rows() != K) throw ConfigError("mixture dimensions disagree");
  if ((theta.array() < 0.0).any() || std::abs(theta.sum() - 1.0) > tol) {
    throw ConfigError("theta is not a probability vector");
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(psi.row(k).array() > 0.0).all() || std::abs(psi.row(k).sum() - 1.0) > tol) {
      throw ConfigError("psi row " + std::to_string(k + 1) + " is not a positive simplex");
    }
  }
  for (const auto& c : components) ldmm::validate(c);
}

MixtureParams MixtureParams::permuted(const std::vector<int>& perm) const {
  MixtureParams out;
  const auto K = static_cast<Eigen::Index>(perm.size());
  out.theta.resize(K);
  out.psi.resize(K, psi.cols());
  for (Eigen::Index j = 0; j < K; ++j) {
    out.theta[j] = theta[perm[static_cast<std::size_t>(j)]];
    out.psi.row(j) = psi.row(perm[static_cast<std::size_t>(j)]);
    out.components.push_back(components[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])]);
  }
  return out;
}

double log_sum_exp(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

namespace {

Vector normalize_log(Vector u, const char* what) {
  const double lse = log_sum_exp(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
  if (!std::isfinite(lse)) throw NumericalError(std::string(what) + ": impossible under every component");
  u.array() -= lse;
  return u;
}

double word_log_likelihood(const Document& doc, const RowMatrix& psi, Eigen::Index k) {
  double s = 0.0;
  for (const auto& wc : doc.counts) s += wc.count * std::log(psi(k, wc.id));
  return s;
}

}  // namespace

Vector log_responsibilities(double y, const Document& doc, const MixtureParams& params) {
  const auto K = static_cast<Eigen::Index>(params.K());
  Vector u(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    u[k] = std::log(params.theta[k]) + log_pdf(params.components[static_cast<std::size_t>(k)], y) +
           word_log_likelihood(doc, params.psi, k);
  }
  return normalize_log(std::move(u), "log_responsibilities");
}

Vector doc_only_responsibilities(const Document& doc, const Vector& theta, const RowMatrix& psi) {
  Vector u(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    u[k] = std::log(theta[k]) + word_log_likelihood(doc, psi, k);
  }
  return normalize_log(std::move(u), "doc_only_responsibilities").array().exp().matrix();
}

double log_complete_posterior(const MixtureParams& params, const HyperParams& hyper,
                              const Corpus& corpus, const Assignment& z) {
  const std::size_t K = params.K();
  hyper.validate(K, params.vocab_size());
  if (z.size() != corpus.size()) throw ConfigError("assignment length does not match corpus");

  std::vector<double> members(K, 0.0);
  std::vector<double> loss_ll(K, 0.0);
  RowMatrix counts = RowMatrix::Zero(static_cast<Eigen::Index>(K), params.psi.cols());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto k = static_cast<std::size_t>(z[i]);
    members[k] += 1.0;
    loss_ll[k] += log_pdf(params.components[k], corpus.losses[i]);
    for (const auto& wc : corpus.documents[i].counts) {
      counts(static_cast<Eigen::Index>(k), wc.id) += wc.count;
    }
  }

  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    double term = log_prior_density(hyper.loss_priors[k], params.components[k]) + loss_ll[k];
    for (Eigen::Index v = 0; v < params.psi.cols(); ++v) {
      term += xlogy(hyper.gamma[v] - 1.0 + counts(kk, v), params.psi(kk, v));
    }
    term += xlogy(members[k] + hyper.alpha[kk] - 1.0, params.theta[kk]);
    total += term;
  }
  return total;
}

double observed_data_deviance(const MixtureParams& params, const Corpus& corpus) {
  const auto backend = kernels::default_backend();
  RowMatrix u;
  RowMatrix w;
  Vector lse;
  kernels::log_joint(corpus, params, true, u, backend);
  kernels::normalize_rows(u, w, lse, backend);
  double total = 0.0;
  for (Eigen::Index i = 0; i < lse.size(); ++i) {
    if (!std::isfinite(lse[i])) {
      throw NumericalError("deviance: observation " + std::to_string(i + 1) + " is impossible under every component");
    }
    total += lse[i];
  }
  return -2.0 * total;
}

LengthSampler uniform_length(std::uint32_t lo, std::uint32_t hi) {
  if (lo < 1 || hi < lo) throw ConfigError("document length range must satisfy 1 <= lo <= hi");
  return [lo, hi](Rng& rng) {
    std::uniform_int_distribution<std::uint32_t> d(lo, hi);
    return d(rng);
  };
}

LengthSampler empirical_length(const Corpus& reference) {
  std::vector<std::uint32_t> lengths;
  for (const auto& d : reference.documents) {
    if (d.length() > 0) lengths.push_back(d.length());
  }
  if (lengths.empty()) throw DataError("reference corpus has no non-empty document");
  return [lengths = std::move(lengths)](Rng& rng) {
    std::uniform_int_distribution<std::size_t> d(0, lengths.size() - 1);
    return lengths[d(rng)];
  };
}

SimulatedData simulate_dataset(const MixtureParams& params, const Vocabulary& vocabulary,
                               std::size_t n, const LengthSampler& length_sampler, Rng& rng) {
  params.validate(1e-9);
  if (vocabulary.size() != params.vocab_size()) {
    throw ConfigError("vocabulary size does not match psi");
  }
  const std::size_t K = params.K();
  std::discrete_distribution<int> topic(params.theta.data(), params.theta.data() + K);
  std::vector<std::discrete_distribution<WordId>> words;
  words.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto row = params.psi.row(static_cast<Eigen::Index>(k));
    words.emplace_back(row.data(), row.data() + row.size());
  }

  SimulatedData out;
  out.corpus.vocabulary = vocabulary;
  out.corpus.documents.reserve(n);
  out.corpus.losses.reserve(n);
  out.z.reserve(n);
  std::vector<WordId> tokens;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = topic(rng);
    out.z.push_back(k);
    out.corpus.losses.push_back(sample(params.components[static_cast<std::size_t>(k)], rng));
    const std::uint32_t len = length_sampler(rng);
    if (len < 1) throw ConfigError("length sampler returned zero");
    tokens.clear();
    for (std::uint32_t j = 0; j < len; ++j) {
      tokens.push_back(words[static_cast<std::size_t>(k)](rng));
    }
    out.corpus.documents.push_back(Document::from_tokens(tokens));
  }
  return out;
}

Vocabulary synthetic_vocabulary(std::size_t size) {
  const std::size_t digits = std::max<std::size_t>(3, std::to_string(size > 0 ? size - 1 : 0).size());
  std::vector<std::string> words(size);
  for (std::size_t v = 0; v < size; ++v) {
    std::string id = std::to_string(v);
    words[v] = "w" + std::string(digits - id.size(), '0') + id;
  }
  return Vocabulary(std::move(words));
}

RowMatrix planted_topics(std::size_t K, std::size_t vocab_size, std::size_t keywords, double mass) {
  if (K * keywords > vocab_size) throw ConfigError("planted keyword blocks exceed the vocabulary");
  if (!(mass > 0.0 && mass <= 1.0)) throw ConfigError("planted mass must lie in (0, 1]");
  if (keywords == 0) throw ConfigError("planted topics need at least one keyword");
  const std::size_t rest = vocab_size - keywords;
  if (rest == 0 && mass < 1.0) throw ConfigError("no words left for the residual mass");
  RowMatrix psi(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(vocab_size));
  for (std::size_t k = 0; k < K; ++k) {
    const double background = rest == 0 ? 0.0 : (1.0 - mass) / static_cast<double>(rest);
    psi.row(static_cast<Eigen::Index>(k)).setConstant(background);
    for (std::size_t j = 0; j < keywords; ++j) {
      psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k * keywords + j)) =
          mass / static_cast<double>(keywords);
    }
  }
  return psi;
}

std::vector<ClaimRecord> to_records(const Corpus& corpus) {
  std::vector<ClaimRecord> out(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out[i].claim_amount = corpus.losses[i];
    std::string& text = out[i].description;
    for (const auto& wc : corpus.documents[i].counts) {
      for (std::uint32_t c = 0; c < wc.count; ++c) {
        if (!text.empty()) text += ' ';
        text += corpus.vocabulary.word(wc.id);
      }
    }
  }
  return out;
}

std::vector<std::vector<WordId>> top_words(const RowMatrix& psi, std::size_t m) {
  std::vector<std::vector<WordId>> out;
  const auto V = static_cast<std::size_t>(psi.cols());
  m = std::min(m, V);
  for (Eigen::Index k = 0; k < psi.rows(); ++k) {
    std::vector<WordId> ids(V);
    std::iota(ids.begin(), ids.end(), WordId{0});
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(m), ids.end(),
                      [&](WordId a, WordId b) {
                        if (psi(k, a) != psi(k, b)) return psi(k, a) > psi(k, b);
                        return a < b;
                      });
    ids.resize(m);
    out.push_back(std::move(ids));
  }
  return out;
}

std::vector<int> order_by_mean(const MixtureParams& params) {
  std::vector<int> perm(params.K());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    return mean(params.components[static_cast<std::size_t>(a)]) <
           mean(params.components[static_cast<std::size_t>(b)]);
  });
  return perm;
}

}  // namespace ldmm
