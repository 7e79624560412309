#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ldmm/rng.hpp"

namespace ldmm {

enum class LossFamily { LogNormal, Pareto, GB2 };

std::string to_string(LossFamily family);
/// Accepts "lognormal"/"ln", "pareto"/"p", "gb2" (case-insensitive).
LossFamily parse_family(std::string_view name);

struct LogNormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Density shape * scale_min^shape / y^(shape+1) on y >= scale_min.
struct ParetoParams {
  double shape = 1.0;
  double scale_min = 1.0;
};

/// Generalized beta of the second kind.
struct Gb2Params {
  double a = 1.0;
  double b = 1.0;
  double p = 1.0;
  double q = 1.0;
};

using LossParams = std::variant<LogNormalParams, ParetoParams, Gb2Params>;

/// Normal-inverse-gamma on (mu, sigma^2): sigma^2 ~ InvGamma(a, b),
/// mu | sigma^2 ~ N(mu0, sigma^2 / r).
struct NigPrior {
  double mu0 = 8.0;
  double r = 100.0;
  double a = 1.0;
  double b = 1.0;
};

/// Gamma(a, rate b) on the Pareto shape; scale_min is treated as known.
/// A scale_min <= 0 means "resolve from the initial assignment".
struct GammaShapePrior {
  double a = 25000.0;
  double b = 50000.0;
  double scale_min = 0.0;
};

/// Flat on the log-parameters (improper).
struct FlatPrior {};

using LossPrior = std::variant<NigPrior, GammaShapePrior, FlatPrior>;

LossFamily family_of(const LossParams& params);
/// Number of free parameters (Pareto scale_min is fixed, so 1).
int dimension(LossFamily family);

/// Throws ConfigError on out-of-domain parameters.
void validate(const LossParams& params);
void validate(const LossPrior& prior);

double log_pdf(const LossParams& params, double y);
double sample(const LossParams& params, Rng& rng);
/// Infinite when the mean does not exist.
double mean(const LossParams& params);

/// Log density of the prior at `params` (0 under FlatPrior).
double log_prior_density(const LossPrior& prior, const LossParams& params);

/// Unconstrained coordinates used for averaging draws and random-walk moves,
/// e.g. (mu, log sigma) for the log-normal.
std::vector<double> to_unconstrained(const LossParams& params);
LossParams from_unconstrained(LossFamily family, std::span<const double> x,
                              const LossParams& reference);

/// Weighted log-normal MLE; sigma is floored at `sigma_floor`.
LogNormalParams weighted_map_fit_lognormal(std::span<const double> y, std::span<const double> w,
                                           double sigma_floor = 1e-6);

/// Weighted shape MLE with scale_min fixed; observations below scale_min must
/// carry zero weight.
ParetoParams weighted_mle_pareto(std::span<const double> y, std::span<const double> w,
                                 double scale_min);

struct Gb2FitOptions {
  int restarts = 5;
  std::uint64_t seed = 0x6b32;
  int max_iters = 4000;
  double size_tol = 1e-7;
  /// Optional extra start, e.g. the current EM iterate.
  std::optional<Gb2Params> initial;
};

struct Gb2FitResult {
  Gb2Params params;
  double objective = 0.0;  // sum_i w_i log f(y_i)
  bool converged = false;
};

/// Multi-start simplex search over (log a, log b, log p, log q). Throws
/// NumericalError when fewer than four distinct positive-weight points exist.
Gb2FitResult weighted_map_fit_gb2(std::span<const double> y, std::span<const double> w,
                                  const Gb2FitOptions& options = {});

double weighted_log_likelihood(const LossParams& params, std::span<const double> y,
                               std::span<const double> w);

NigPrior conjugate_posterior_lognormal(std::span<const double> y, const NigPrior& prior);
/// Throws DataError when an observation lies below scale_min.
GammaShapePrior conjugate_posterior_pareto(std::span<const double> y,
                                           const GammaShapePrior& prior);

/// Exact draw from a proper prior or posterior. Throws ConfigError for FlatPrior.
LossParams draw_from_prior_or_posterior(const LossPrior& spec, Rng& rng);

/// A representative point of the prior (its mode), used to re-seed empty
/// components. Returns `fallback` under FlatPrior.
LossParams prior_mode(const LossPrior& prior, LossFamily family, const LossParams& fallback);

}  // namespace ldmm
