#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ldmm/corpus.hpp"
#include "ldmm/kernels.hpp"
#include "ldmm/mixture.hpp"

namespace ldmm {

struct EmConfig {
  std::vector<LossFamily> families;  // one per component; K = families.size()
  int max_iters = 500;
  double tol = 1e-6;  // on the relative change of the observed log posterior
  std::uint64_t seed = 1;
  int restarts = 5;
  double sigma_floor = 1e-6;
  double empty_weight = 1e-8;
  std::optional<kernels::Backend> backend;

  [[nodiscard]] std::size_t K() const noexcept { return families.size(); }
  void validate() const;
};

struct EmTrace {
  /// Observed-data log posterior; entry 0 is the initialization, entry t the
  /// value after t E/M iterations.
  std::vector<double> log_posterior;
  MixtureParams params;
  /// E-step weights computed at `params`.
  ResponsibilityMatrix responsibilities;
  /// Hyper-parameters with every Pareto scale_min resolved.
  HyperParams hyper;
  int iterations = 0;
  bool converged = false;
  /// False when some GB2 inner fit reported non-convergence.
  bool optimizer_converged = true;
  std::vector<int> empty_components;
  std::uint64_t seed = 0;  // seed of the restart that was kept
};

/// Row i is exp(log_responsibilities(Y_i, D_i, params)). Throws
/// NumericalError if some observation is impossible under every component.
ResponsibilityMatrix e_step(const Corpus& corpus, const MixtureParams& params,
                            kernels::Backend backend = kernels::default_backend());

struct MStepOptions {
  double sigma_floor = 1e-6;
  double empty_weight = 1e-8;
  /// Current iterate; enables GB2 warm starts and keeps a GB2 fit only when it
  /// does not lower the weighted likelihood.
  const MixtureParams* previous = nullptr;
  std::uint64_t seed = 0;
  kernels::Backend backend = kernels::default_backend();
};

struct MStepResult {
  MixtureParams params;
  std::vector<int> empty_components;
  bool optimizer_converged = true;
};

/// Closed-form theta and psi updates plus weighted loss fits under flat loss
/// priors. Components with total weight below `empty_weight` are re-seeded at
/// their prior mode.
MStepResult m_step(const Corpus& corpus, const ResponsibilityMatrix& w, const HyperParams& hyper,
                   const std::vector<LossFamily>& families, const MStepOptions& options);
MixtureParams m_step(const Corpus& corpus, const ResponsibilityMatrix& w, const HyperParams& hyper,
                     const std::vector<LossFamily>& families);

/// sum_i log sum_k theta_k p_k(Y_i) prod_v psi_kv^N_iv plus the Dirichlet
/// log priors (up to their constants); loss priors are flat in EM.
double observed_log_posterior(const Corpus& corpus, const MixtureParams& params,
                              const HyperParams& hyper,
                              kernels::Backend backend = kernels::default_backend());

/// Best of `config.restarts` randomly initialized runs.
EmTrace run_em(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config);

/// A single run from a random hard assignment drawn with `seed`.
EmTrace run_em_single(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config,
                      std::uint64_t seed);

/// A single run starting at `initial`; unresolved Pareto scale_min values are
/// taken from `initial`.
EmTrace run_em_from(const Corpus& corpus, const HyperParams& hyper, const EmConfig& config,
                    const MixtureParams& initial);

}  // namespace ldmm
