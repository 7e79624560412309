#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ldmm/corpus.hpp"
#include "ldmm/em.hpp"
#include "ldmm/kernels.hpp"
#include "ldmm/mixture.hpp"

namespace ldmm {

struct GibbsConfig {
  int sweeps = 4000;
  int burn_in = 2000;
  int thin = 2;
  double mh_step_scale = 0.05;
  bool adapt_burnin = true;
  std::uint64_t seed = 1;
  /// Blocks can be frozen at their initial value, e.g. for enumeration checks.
  bool update_phi = true;
  bool update_psi = true;
  bool update_theta = true;
  bool keep_assignments = true;
  std::optional<kernels::Backend> backend;

  void validate() const;
};

struct PosteriorDraw {
  int sweep = 0;  // 1-based sweep index
  MixtureParams params;
  Assignment z;  // empty when assignments are not kept
};

struct PosteriorDraws {
  std::vector<PosteriorDraw> draws;
  std::vector<double> acceptance_rates;  // per component, post burn-in
  double final_mh_scale = 0.0;

  [[nodiscard]] bool empty() const noexcept { return draws.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return draws.size(); }
};

/// Dirichlet(M + alpha) with M_k the component counts of z.
Vector draw_theta(const Assignment& z, const Vector& alpha, Rng& rng);

/// Dirichlet(gamma + sum_{i: z_i = k} N_i).
Vector draw_psi_k(const Corpus& corpus, const Assignment& z, std::size_t k, const Vector& gamma,
                  Rng& rng);

struct PhiDraw {
  LossParams params;
  bool accepted = true;
};

/// Conjugate draw for log-normal and Pareto; one random-walk Metropolis step on
/// the log-parameters for GB2.
PhiDraw draw_phi_k(const Corpus& corpus, const Assignment& z, std::size_t k,
                   const LossPrior& prior, const LossParams& current, double mh_scale, Rng& rng);

/// Accepts with probability min(1, exp(log_ratio)).
bool mh_accept(double log_ratio, Rng& rng);

/// Each z_i from its full conditional, via block substreams seeded from rng.
Assignment draw_z(const Corpus& corpus, const MixtureParams& params, Rng& rng,
                  kernels::Backend backend = kernels::default_backend());

struct GibbsState {
  MixtureParams params;
  Assignment z;
};

struct SweepStats {
  std::vector<int> accepted;  // per component, this sweep
};

/// One systematic-scan sweep: phi, psi, theta, then z, each block using the
/// values already updated in this sweep.
SweepStats gibbs_sweep(GibbsState& state, const Corpus& corpus, const HyperParams& hyper,
                       const GibbsConfig& config, double mh_scale, std::uint64_t sweep);

/// Chain started at the EM MAP, with Z drawn from the last
/// EM responsibilities.
PosteriorDraws run_gibbs(const Corpus& corpus, const HyperParams& hyper, const EmTrace& em_result,
                         const GibbsConfig& config);

/// Chain from an explicit state (used by tests and resumed runs).
PosteriorDraws run_gibbs_from(const Corpus& corpus, const HyperParams& hyper, GibbsState state,
                              const GibbsConfig& config);

}  // namespace ldmm
