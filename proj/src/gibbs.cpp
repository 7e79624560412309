#include "ldmm/gibbs.hpp"

#include <cmath>
#include <random>

#include "ldmm/errors.hpp"

namespace ldmm {

namespace {

enum Stream : std::uint64_t { kInit = 0, kPhi = 1, kPsi = 2, kTheta = 3, kZ = 4 };

std::uint64_t sweep_seed(std::uint64_t seed, std::uint64_t sweep) {
  return splitmix64(splitmix64(seed) + sweep);
}

std::vector<double> assigned_losses(const Corpus& corpus, const Assignment& z, std::size_t k) {
  std::vector<double> y;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (static_cast<std::size_t>(z[i]) == k) y.push_back(corpus.losses[i]);
  }
  return y;
}

void resolve_scale_min(HyperParams& hyper, const MixtureParams& params) {
  for (std::size_t k = 0; k < hyper.loss_priors.size(); ++k) {
    auto* prior = std::get_if<GammaShapePrior>(&hyper.loss_priors[k]);
    if (!prior || prior->scale_min > 0.0) continue;
    if (const auto* pa = std::get_if<ParetoParams>(&params.components[k])) {
      prior->scale_min = pa->scale_min;
    }
  }
}

void check_priors(const HyperParams& hyper, const std::vector<LossFamily>& families) {
  for (std::size_t k = 0; k < families.size(); ++k) {
    const auto& prior = hyper.loss_priors[k];
    const bool ok = (families[k] == LossFamily::LogNormal && std::holds_alternative<NigPrior>(prior)) ||
                    (families[k] == LossFamily::Pareto && std::holds_alternative<GammaShapePrior>(prior)) ||
                    (families[k] == LossFamily::GB2 && std::holds_alternative<FlatPrior>(prior));
    if (!ok) {
      throw ConfigError("component " + std::to_string(k + 1) + " (" + to_string(families[k]) +
                        ") has a prior of the wrong kind");
    }
  }
}

}  // namespace

void GibbsConfig::validate() const {
  if (sweeps < 1) throw ConfigError("Gibbs sweeps must be >= 1");
  if (burn_in < 0 || burn_in >= sweeps) throw ConfigError("Gibbs burn_in must lie in [0, sweeps)");
  if (thin < 1) throw ConfigError("Gibbs thin must be >= 1");
  if (!(mh_step_scale > 0.0)) throw ConfigError("mh_step_scale must be positive");
}

Vector draw_theta(const Assignment& z, const Vector& alpha, Rng& rng) {
  Vector conc = alpha;
  for (int k : z) conc[k] += 1.0;
  return draw_dirichlet(conc, rng);
}

Vector draw_psi_k(const Corpus& corpus, const Assignment& z, std::size_t k, const Vector& gamma,
                  Rng& rng) {
  Vector conc = gamma;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (static_cast<std::size_t>(z[i]) != k) continue;
    for (const auto& wc : corpus.documents[i].counts) conc[wc.id] += wc.count;
  }
  return draw_dirichlet(conc, rng);
}

bool mh_accept(double log_ratio, Rng& rng) {
  if (log_ratio >= 0.0) return true;
  if (std::isnan(log_ratio)) return false;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(rng) < std::exp(log_ratio);
}

PhiDraw draw_phi_k(const Corpus& corpus, const Assignment& z, std::size_t k,
                   const LossPrior& prior, const LossParams& current, double mh_scale, Rng& rng) {
  const auto y = assigned_losses(corpus, z, k);
  switch (family_of(current)) {
    case LossFamily::LogNormal: {
      const auto* nig = std::get_if<NigPrior>(&prior);
      if (!nig) throw ConfigError("log-normal component needs a normal-inverse-gamma prior");
      return {draw_from_prior_or_posterior(conjugate_posterior_lognormal(y, *nig), rng), true};
    }
    case LossFamily::Pareto: {
      const auto* g = std::get_if<GammaShapePrior>(&prior);
      if (!g) throw ConfigError("Pareto component needs a gamma shape prior");
      GammaShapePrior resolved = *g;
      if (!(resolved.scale_min > 0.0)) resolved.scale_min = std::get<ParetoParams>(current).scale_min;
      return {draw_from_prior_or_posterior(conjugate_posterior_pareto(y, resolved), rng), true};
    }
    case LossFamily::GB2: {
      const std::vector<double> ones(y.size(), 1.0);
      auto log_target = [&](const LossParams& p) {
        return weighted_log_likelihood(p, y, ones) + log_prior_density(prior, p);
      };
      auto x = to_unconstrained(current);
      std::normal_distribution<double> step(0.0, mh_scale);
      for (auto& v : x) v += step(rng);
      const LossParams proposal = from_unconstrained(LossFamily::GB2, x, current);
      if (mh_accept(log_target(proposal) - log_target(current), rng)) return {proposal, true};
      return {current, false};
    }
  }
  throw ConfigError("unknown family");
}

Assignment draw_z(const Corpus& corpus, const MixtureParams& params, Rng& rng,
                  kernels::Backend backend) {
  RowMatrix u;
  RowMatrix w;
  Vector lse;
  kernels::log_joint(corpus, params, true, u, backend);
  kernels::normalize_rows(u, w, lse, backend);
  for (Eigen::Index i = 0; i < lse.size(); ++i) {
    if (!std::isfinite(lse[i])) {
      throw NumericalError("observation " + std::to_string(i + 1) +
                           " is impossible under every component");
    }
  }
  Assignment z;
  kernels::draw_rows(w, rng(), kZ, z, backend);
  return z;
}

SweepStats gibbs_sweep(GibbsState& state, const Corpus& corpus, const HyperParams& hyper,
                       const GibbsConfig& config, double mh_scale, std::uint64_t sweep) {
  const auto backend = config.backend.value_or(kernels::default_backend());
  const std::uint64_t seed = sweep_seed(config.seed, sweep);
  const auto K = static_cast<std::ptrdiff_t>(state.params.K());
  SweepStats stats;
  stats.accepted.assign(static_cast<std::size_t>(K), 1);
  const bool parallel = backend == kernels::Backend::OpenMP;

  if (config.update_phi) {
    std::vector<PhiDraw> drawn(static_cast<std::size_t>(K));
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (std::ptrdiff_t k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      Rng rng = substream(seed, kPhi, uk);
      drawn[uk] = draw_phi_k(corpus, state.z, uk, hyper.loss_priors[uk], state.params.components[uk],
                             mh_scale, rng);
    }
    for (std::size_t k = 0; k < drawn.size(); ++k) {
      state.params.components[k] = drawn[k].params;
      stats.accepted[k] = drawn[k].accepted ? 1 : 0;
    }
  }

  if (config.update_psi) {
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (std::ptrdiff_t k = 0; k < K; ++k) {
      Rng rng = substream(seed, kPsi, static_cast<std::uint64_t>(k));
      state.params.psi.row(k) =
          draw_psi_k(corpus, state.z, static_cast<std::size_t>(k), hyper.gamma, rng).transpose();
    }
  }

  if (config.update_theta) {
    Rng rng = substream(seed, kTheta, 0);
    state.params.theta = draw_theta(state.z, hyper.alpha, rng);
  }

  Rng rng = substream(seed, kZ, 0);
  state.z = draw_z(corpus, state.params, rng, backend);
  return stats;
}

PosteriorDraws run_gibbs_from(const Corpus& corpus, const HyperParams& hyper_in, GibbsState state,
                              const GibbsConfig& config) {
  config.validate();
  corpus.validate();
  state.params.validate(1e-9);
  HyperParams hyper = hyper_in;
  resolve_scale_min(hyper, state.params);
  hyper.validate(state.params.K(), corpus.vocabulary.size());
  if (state.z.size() != corpus.size()) throw ConfigError("initial assignment length mismatch");

  const std::size_t K = state.params.K();
  const auto families = state.params.families();
  check_priors(hyper, families);
  PosteriorDraws out;
  double scale = config.mh_step_scale;
  std::vector<long> accepted(K, 0);
  long counted = 0;
  std::vector<long> window_accepted(K, 0);
  int window = 0;
  constexpr int kAdaptWindow = 50;

  for (int t = 1; t <= config.sweeps; ++t) {
    const auto stats = gibbs_sweep(state, corpus, hyper, config, scale, static_cast<std::uint64_t>(t));
    const bool burning = t <= config.burn_in;

    if (burning && config.adapt_burnin && config.update_phi) {
      for (std::size_t k = 0; k < K; ++k) window_accepted[k] += stats.accepted[k];
      if (++window == kAdaptWindow) {
        long gb2_acc = 0;
        int gb2_count = 0;
        for (std::size_t k = 0; k < K; ++k) {
          if (families[k] != LossFamily::GB2) continue;
          gb2_acc += window_accepted[k];
          ++gb2_count;
        }
        if (gb2_count > 0) {
          const double rate = static_cast<double>(gb2_acc) / (gb2_count * kAdaptWindow);
          if (rate < 0.13) scale *= 0.7;
          if (rate > 0.33) scale *= 1.4;
        }
        std::fill(window_accepted.begin(), window_accepted.end(), 0);
        window = 0;
      }
    }

    if (!burning) {
      ++counted;
      for (std::size_t k = 0; k < K; ++k) accepted[k] += stats.accepted[k];
      if ((t - config.burn_in) % config.thin == 0) {
        PosteriorDraw d;
        d.sweep = t;
        d.params = state.params;
        if (config.keep_assignments) d.z = state.z;
        out.draws.push_back(std::move(d));
      }
    }
  }

  out.acceptance_rates.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    out.acceptance_rates[k] = counted > 0 ? static_cast<double>(accepted[k]) / counted : 1.0;
  }
  out.final_mh_scale = scale;
  return out;
}

PosteriorDraws run_gibbs(const Corpus& corpus, const HyperParams& hyper, const EmTrace& em_result,
                         const GibbsConfig& config) {
  const auto& w = em_result.responsibilities;
  if (static_cast<std::size_t>(w.rows()) != corpus.size() ||
      static_cast<std::size_t>(w.cols()) != em_result.params.K()) {
    throw ConfigError("EM result was computed on a different corpus or K");
  }
  if (em_result.params.vocab_size() != corpus.vocabulary.size()) {
    throw ConfigError("EM result vocabulary size differs from the corpus");
  }
  HyperParams resolved = hyper;
  for (std::size_t k = 0; k < resolved.loss_priors.size() && k < em_result.hyper.loss_priors.size(); ++k) {
    auto* prior = std::get_if<GammaShapePrior>(&resolved.loss_priors[k]);
    const auto* em_prior = std::get_if<GammaShapePrior>(&em_result.hyper.loss_priors[k]);
    if (prior && em_prior && prior->scale_min <= 0.0) prior->scale_min = em_prior->scale_min;
  }

  GibbsState state;
  state.params = em_result.params;
  kernels::draw_rows(w, splitmix64(config.seed), kInit, state.z,
                     config.backend.value_or(kernels::default_backend()));
  return run_gibbs_from(corpus, resolved, std::move(state), config);
}

}  // namespace ldmm
