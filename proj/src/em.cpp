#include "ldmm/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ldmm/errors.hpp"

namespace ldmm {

namespace {

double xlogy(double c, double x) { return c == 0.0 ? 0.0 : c * std::log(x); }

double dirichlet_log_priors(const MixtureParams& params, const HyperParams& hyper) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < params.theta.size(); ++k) {
    total += xlogy(hyper.alpha[k] - 1.0, params.theta[k]);
    for (Eigen::Index v = 0; v < params.psi.cols(); ++v) {
      total += xlogy(hyper.gamma[v] - 1.0, params.psi(k, v));
    }
  }
  return total;
}

std::vector<double> column(const ResponsibilityMatrix& w, Eigen::Index k) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) out[static_cast<std::size_t>(i)] = w(i, k);
  return out;
}

void check_hyper_for_em(const HyperParams& hyper, const std::vector<LossFamily>& families,
                        std::size_t vocab_size) {
  hyper.validate(families.size(), vocab_size);
  if ((hyper.alpha.array() < 1.0).any()) {
    throw ConfigError("EM requires alpha >= 1 so the theta MAP stays a probability");
  }
  if ((hyper.gamma.array() < 1.0).any()) throw ConfigError("EM requires gamma >= 1");
  for (std::size_t k = 0; k < families.size(); ++k) {
    if (families[k] == LossFamily::Pareto &&
        !std::holds_alternative<GammaShapePrior>(hyper.loss_priors[k])) {
      throw ConfigError("Pareto component " + std::to_string(k + 1) +
                        " needs a gamma shape prior carrying scale_min");
    }
  }
}

/// Alternates E and M steps from `params`, filling the trace.
EmTrace iterate(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config,
                MixtureParams params, std::uint64_t seed) {
  const auto backend = config.backend.value_or(kernels::default_backend());
  const auto families = config.families;
  EmTrace trace;
  trace.hyper = hyper;
  trace.seed = seed;

  RowMatrix u;
  RowMatrix w;
  Vector lse;
  auto evaluate = [&](const MixtureParams& p) {
    kernels::log_joint(corpus, p, true, u, backend);
    kernels::normalize_rows(u, w, lse, backend);
    double total = 0.0;
    for (Eigen::Index i = 0; i < lse.size(); ++i) {
      if (!std::isfinite(lse[i])) {
        throw NumericalError("observation " + std::to_string(i + 1) +
                             " is impossible under every component");
      }
      total += lse[i];
    }
    return total + dirichlet_log_priors(p, hyper);
  };

  trace.log_posterior.push_back(evaluate(params));
  for (int t = 1; t <= config.max_iters; ++t) {
    MStepOptions opts;
    opts.sigma_floor = config.sigma_floor;
    opts.empty_weight = config.empty_weight;
    opts.previous = &params;
    opts.seed = splitmix64(seed ^ static_cast<std::uint64_t>(t));
    opts.backend = backend;
    auto step = m_step(corpus, w, hyper, families, opts);
    params = std::move(step.params);
    trace.empty_components = std::move(step.empty_components);
    trace.optimizer_converged = trace.optimizer_converged && step.optimizer_converged;
    trace.iterations = t;

    const double prev = trace.log_posterior.back();
    const double curr = evaluate(params);
    trace.log_posterior.push_back(curr);
    if ((curr - prev) / std::abs(prev) <= config.tol) {
      trace.converged = true;
      break;
    }
  }
  trace.params = std::move(params);
  trace.responsibilities = std::move(w);
  return trace;
}

}  // namespace

void EmConfig::validate() const {
  if (families.empty()) throw ConfigError("EM needs K >= 1");
  if (!(tol > 0.0)) throw ConfigError("EM tolerance must be positive");
  if (max_iters < 1) throw ConfigError("EM max_iters must be >= 1");
  if (restarts < 1) throw ConfigError("EM restarts must be >= 1");
}

ResponsibilityMatrix e_step(const Corpus& corpus, const MixtureParams& params,
                            kernels::Backend backend) {
  RowMatrix u;
  ResponsibilityMatrix w;
  Vector lse;
  kernels::log_joint(corpus, params, true, u, backend);
  kernels::normalize_rows(u, w, lse, backend);
  for (Eigen::Index i = 0; i < lse.size(); ++i) {
    if (!std::isfinite(lse[i])) {
      throw NumericalError("observation " + std::to_string(i + 1) +
                           " is impossible under every component");
    }
  }
  return w;
}

MStepResult m_step(const Corpus& corpus, const ResponsibilityMatrix& w, const HyperParams& hyper,
                   const std::vector<LossFamily>& families, const MStepOptions& options) {
  const std::size_t K = families.size();
  const auto KK = static_cast<Eigen::Index>(K);
  const std::size_t V = corpus.vocabulary.size();
  if (w.rows() != static_cast<Eigen::Index>(corpus.size()) || w.cols() != KK) {
    throw ConfigError("responsibility matrix does not match corpus and K");
  }
  check_hyper_for_em(hyper, families, V);

  MStepResult out;
  const Vector weight_total = w.colwise().sum().transpose();
  const double n = static_cast<double>(corpus.size());

  out.params.theta.resize(KK);
  const double alpha_excess = (hyper.alpha.array() - 1.0).sum();
  for (Eigen::Index k = 0; k < KK; ++k) {
    out.params.theta[k] = (weight_total[k] + hyper.alpha[k] - 1.0) / (n + alpha_excess);
  }

  const RowMatrix counts = kernels::weighted_word_counts(corpus, w, options.backend);
  const double gamma_excess = (hyper.gamma.array() - 1.0).sum();
  out.params.psi.resize(KK, static_cast<Eigen::Index>(V));
  for (Eigen::Index k = 0; k < KK; ++k) {
    const double denom = gamma_excess + counts.row(k).sum();
    bool floored = false;
    for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(V); ++v) {
      double p = denom > 0.0 ? (hyper.gamma[v] - 1.0 + counts(k, v)) / denom
                             : 1.0 / static_cast<double>(V);
      if (!(p > 0.0)) {
        p = 1e-300;
        floored = true;
      }
      out.params.psi(k, v) = p;
    }
    if (floored) out.params.psi.row(k) /= out.params.psi.row(k).sum();
  }

  const std::span<const double> y(corpus.losses);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const LossParams* prev =
        options.previous && options.previous->K() == K ? &options.previous->components[k] : nullptr;
    if (prev && family_of(*prev) != families[k]) prev = nullptr;

    LossParams fallback;
    switch (families[k]) {
      case LossFamily::LogNormal:
        fallback = prev ? *prev : LossParams{LogNormalParams{}};
        break;
      case LossFamily::Pareto: {
        const auto& prior = std::get<GammaShapePrior>(hyper.loss_priors[k]);
        fallback = prev ? *prev : LossParams{ParetoParams{1.0, prior.scale_min > 0.0 ? prior.scale_min : 1.0}};
        break;
      }
      case LossFamily::GB2:
        fallback = prev ? *prev : LossParams{Gb2Params{}};
        break;
    }

    if (weight_total[kk] < options.empty_weight) {
      out.empty_components.push_back(static_cast<int>(k));
      out.params.components.push_back(prior_mode(hyper.loss_priors[k], families[k], fallback));
      continue;
    }

    const auto wk = column(w, kk);
    switch (families[k]) {
      case LossFamily::LogNormal:
        out.params.components.emplace_back(weighted_map_fit_lognormal(y, wk, options.sigma_floor));
        break;
      case LossFamily::Pareto: {
        double scale_min = std::get<GammaShapePrior>(hyper.loss_priors[k]).scale_min;
        if (!(scale_min > 0.0)) {
          scale_min = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < y.size(); ++i) {
            if (wk[i] > 0.0) scale_min = std::min(scale_min, y[i]);
          }
        }
        out.params.components.emplace_back(weighted_mle_pareto(y, wk, scale_min));
        break;
      }
      case LossFamily::GB2: {
        Gb2FitOptions gopts;
        gopts.seed = splitmix64(options.seed + k);
        if (prev) gopts.initial = std::get<Gb2Params>(*prev);
        try {
          auto fit = weighted_map_fit_gb2(y, wk, gopts);
          out.optimizer_converged = out.optimizer_converged && fit.converged;
          if (prev && weighted_log_likelihood(*prev, y, wk) > fit.objective) {
            out.params.components.push_back(*prev);
          } else {
            out.params.components.emplace_back(fit.params);
          }
        } catch (const NumericalError&) {
          out.optimizer_converged = false;
          out.params.components.push_back(fallback);
        }
        break;
      }
    }
  }
  return out;
}

MixtureParams m_step(const Corpus& corpus, const ResponsibilityMatrix& w, const HyperParams& hyper,
                     const std::vector<LossFamily>& families) {
  return m_step(corpus, w, hyper, families, MStepOptions{}).params;
}

double observed_log_posterior(const Corpus& corpus, const MixtureParams& params,
                              const HyperParams& hyper, kernels::Backend backend) {
  RowMatrix u;
  RowMatrix w;
  Vector lse;
  kernels::log_joint(corpus, params, true, u, backend);
  kernels::normalize_rows(u, w, lse, backend);
  double total = 0.0;
  for (Eigen::Index i = 0; i < lse.size(); ++i) total += lse[i];
  return total + dirichlet_log_priors(params, hyper);
}

EmTrace run_em_single(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config,
                      std::uint64_t seed) {
  config.validate();
  corpus.validate();
  check_hyper_for_em(hyper, config.families, corpus.vocabulary.size());
  const std::size_t K = config.K();

  Rng rng(splitmix64(seed));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(K) - 1);
  ResponsibilityMatrix w0 =
      ResponsibilityMatrix::Zero(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < w0.rows(); ++i) w0(i, pick(rng)) = 1.0;

  HyperParams resolved = hyper;
  for (std::size_t k = 0; k < K; ++k) {
    auto* prior = std::get_if<GammaShapePrior>(&resolved.loss_priors[k]);
    if (!prior || config.families[k] != LossFamily::Pareto || prior->scale_min > 0.0) continue;
    double lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < w0.rows(); ++i) {
      if (w0(i, static_cast<Eigen::Index>(k)) > 0.0) lo = std::min(lo, corpus.losses[static_cast<std::size_t>(i)]);
    }
    prior->scale_min = std::isfinite(lo) ? lo : *std::min_element(corpus.losses.begin(), corpus.losses.end());
  }

  MStepOptions opts;
  opts.sigma_floor = config.sigma_floor;
  opts.empty_weight = config.empty_weight;
  opts.seed = splitmix64(seed);
  opts.backend = config.backend.value_or(kernels::default_backend());
  auto init = m_step(corpus, w0, resolved, config.families, opts);
  auto trace = iterate(corpus, resolved, config, std::move(init.params), seed);
  trace.optimizer_converged = trace.optimizer_converged && init.optimizer_converged;
  return trace;
}

EmTrace run_em_from(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config,
                    const MixtureParams& initial) {
  config.validate();
  corpus.validate();
  initial.validate(1e-9);
  if (initial.families() != config.families) {
    throw ConfigError("initial parameters do not match the configured families");
  }
  HyperParams resolved = hyper;
  for (std::size_t k = 0; k < config.K(); ++k) {
    auto* prior = std::get_if<GammaShapePrior>(&resolved.loss_priors[k]);
    if (prior && prior->scale_min <= 0.0) {
      prior->scale_min = std::get<ParetoParams>(initial.components[k]).scale_min;
    }
  }
  check_hyper_for_em(resolved, config.families, corpus.vocabulary.size());
  return iterate(corpus, resolved, config, initial, config.seed);
}

EmTrace run_em(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config) {
  config.validate();
  std::optional<EmTrace> best;
  for (int r = 0; r < config.restarts; ++r) {
    const std::uint64_t seed = splitmix64(config.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r));
    auto trace = run_em_single(corpus, hyper, config, seed);
    if (!best || trace.log_posterior.back() > best->log_posterior.back()) best = std::move(trace);
  }
  return std::move(*best);
}

}  // namespace ldmm
