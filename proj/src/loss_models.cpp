#include "ldmm/loss_models.hpp"

#include <algorithm>
#include <cctype>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "ldmm/errors.hpp"
#include "ldmm/optimize.hpp"

namespace ldmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double log_beta(double p, double q) { return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q); }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double safe_log_gamma_draw(double shape, Rng& rng) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return std::log(std::max(dist(rng), DBL_MIN));
}

void check_weights(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) throw DataError("observation and weight lengths differ");
}

}  // namespace

std::string to_string(LossFamily family) {
  switch (family) {
    case LossFamily::LogNormal:
      return "lognormal";
    case LossFamily::Pareto:
      return "pareto";
    case LossFamily::GB2:
      return "gb2";
  }
  return "unknown";
}

LossFamily parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "lognormal" || lower == "ln") return LossFamily::LogNormal;
  if (lower == "pareto" || lower == "p") return LossFamily::Pareto;
  if (lower == "gb2") return LossFamily::GB2;
  throw ConfigError("unknown loss family '" + std::string(name) + "'");
}

LossFamily family_of(const LossParams& params) {
  return std::visit(overloaded{[](const LogNormalParams&) { return LossFamily::LogNormal; },
                               [](const ParetoParams&) { return LossFamily::Pareto; },
                               [](const Gb2Params&) { return LossFamily::GB2; }},
                    params);
}

int dimension(LossFamily family) {
  switch (family) {
    case LossFamily::LogNormal:
      return 2;
    case LossFamily::Pareto:
      return 1;
    case LossFamily::GB2:
      return 4;
  }
  return 0;
}

void validate(const LossParams& params) {
  std::visit(overloaded{
                 [](const LogNormalParams& p) {
                   if (!std::isfinite(p.mu) || !(p.sigma > 0.0) || !std::isfinite(p.sigma))
                     throw ConfigError("log-normal requires finite mu and sigma > 0");
                 },
                 [](const ParetoParams& p) {
                   if (!(p.shape > 0.0) || !(p.scale_min > 0.0) || !std::isfinite(p.shape))
                     throw ConfigError("Pareto requires shape > 0 and scale_min > 0");
                 },
                 [](const Gb2Params& p) {
                   if (p.a == 0.0 || !std::isfinite(p.a) || !(p.b > 0.0) || !(p.p > 0.0) ||
                       !(p.q > 0.0))
                     throw ConfigError("GB2 requires a != 0 and b, p, q > 0");
                 }},
             params);
}

void validate(const LossPrior& prior) {
  std::visit(overloaded{
                 [](const NigPrior& p) {
                   if (!std::isfinite(p.mu0) || !(p.r > 0.0) || !(p.a > 0.0) || !(p.b > 0.0))
                     throw ConfigError("normal-inverse-gamma prior requires r, a, b > 0");
                 },
                 [](const GammaShapePrior& p) {
                   if (!(p.a > 0.0) || !(p.b > 0.0) || p.scale_min < 0.0)
                     throw ConfigError("gamma prior requires a, b > 0 and scale_min >= 0");
                 },
                 [](const FlatPrior&) {}},
             prior);
}

double log_pdf(const LossParams& params, double y) {
  if (!(y > 0.0)) return kNegInf;
  return std::visit(
      overloaded{
          [y](const LogNormalParams& p) {
            const double z = (std::log(y) - p.mu) / p.sigma;
            return -std::log(y) - std::log(p.sigma) - 0.5 * std::log(2.0 * std::numbers::pi) -
                   0.5 * z * z;
          },
          [y](const ParetoParams& p) {
            if (y < p.scale_min) return kNegInf;
            return std::log(p.shape) + p.shape * std::log(p.scale_min) -
                   (p.shape + 1.0) * std::log(y);
          },
          [y](const Gb2Params& p) {
            const double t = std::log(y) - std::log(p.b);
            return std::log(std::abs(p.a)) - std::log(p.b) + (p.a * p.p - 1.0) * t -
                   log_beta(p.p, p.q) - (p.p + p.q) * softplus(p.a * t);
          }},
      params);
}

double sample(const LossParams& params, Rng& rng) {
  return std::visit(
      overloaded{[&rng](const LogNormalParams& p) {
                   std::normal_distribution<double> n(p.mu, p.sigma);
                   return std::exp(n(rng));
                 },
                 [&rng](const ParetoParams& p) {
                   std::exponential_distribution<double> e(1.0);
                   return p.scale_min * std::exp(e(rng) / p.shape);
                 },
                 [&rng](const Gb2Params& p) {
                   // Y = b (G_p / G_q)^(1/a) with independent unit-rate gammas.
                   const double lg = safe_log_gamma_draw(p.p, rng) - safe_log_gamma_draw(p.q, rng);
                   return p.b * std::exp(lg / p.a);
                 }},
      params);
}

double mean(const LossParams& params) {
  return std::visit(overloaded{[](const LogNormalParams& p) {
                                 return std::exp(p.mu + 0.5 * p.sigma * p.sigma);
                               },
                               [](const ParetoParams& p) {
                                 return p.shape > 1.0 ? p.shape * p.scale_min / (p.shape - 1.0)
                                                      : kInf;
                               },
                               [](const Gb2Params& p) {
                                 const double inv = 1.0 / p.a;
                                 if (!(-p.p < inv && inv < p.q)) return kInf;
                                 return p.b * std::exp(log_beta(p.p + inv, p.q - inv) -
                                                       log_beta(p.p, p.q));
                               }},
                    params);
}

double log_prior_density(const LossPrior& prior, const LossParams& params) {
  return std::visit(
      overloaded{
          [&](const NigPrior& pr) {
            const auto* ln = std::get_if<LogNormalParams>(&params);
            if (!ln) throw ConfigError("normal-inverse-gamma prior needs a log-normal component");
            const double s2 = ln->sigma * ln->sigma;
            const double d = ln->mu - pr.mu0;
            return 0.5 * std::log(pr.r) - 0.5 * std::log(2.0 * std::numbers::pi * s2) -
                   pr.r * d * d / (2.0 * s2) + pr.a * std::log(pr.b) - std::lgamma(pr.a) -
                   (pr.a + 1.0) * std::log(s2) - pr.b / s2;
          },
          [&](const GammaShapePrior& pr) {
            const auto* pa = std::get_if<ParetoParams>(&params);
            if (!pa) throw ConfigError("gamma shape prior needs a Pareto component");
            return pr.a * std::log(pr.b) - std::lgamma(pr.a) + (pr.a - 1.0) * std::log(pa->shape) -
                   pr.b * pa->shape;
          },
          [](const FlatPrior&) { return 0.0; }},
      prior);
}

std::vector<double> to_unconstrained(const LossParams& params) {
  return std::visit(overloaded{[](const LogNormalParams& p) {
                                 return std::vector<double>{p.mu, std::log(p.sigma)};
                               },
                               [](const ParetoParams& p) {
                                 return std::vector<double>{std::log(p.shape)};
                               },
                               [](const Gb2Params& p) {
                                 return std::vector<double>{std::log(std::abs(p.a)), std::log(p.b),
                                                            std::log(p.p), std::log(p.q)};
                               }},
                    params);
}

LossParams from_unconstrained(LossFamily family, std::span<const double> x,
                              const LossParams& reference) {
  switch (family) {
    case LossFamily::LogNormal:
      return LogNormalParams{x[0], std::exp(x[1])};
    case LossFamily::Pareto: {
      const auto* ref = std::get_if<ParetoParams>(&reference);
      return ParetoParams{std::exp(x[0]), ref ? ref->scale_min : 1.0};
    }
    case LossFamily::GB2: {
      const auto* ref = std::get_if<Gb2Params>(&reference);
      const double sign = (ref && ref->a < 0.0) ? -1.0 : 1.0;
      return Gb2Params{sign * std::exp(x[0]), std::exp(x[1]), std::exp(x[2]), std::exp(x[3])};
    }
  }
  throw ConfigError("unknown family");
}

LogNormalParams weighted_map_fit_lognormal(std::span<const double> y, std::span<const double> w,
                                           double sigma_floor) {
  check_weights(y, w);
  double total = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    total += w[i];
    sum += w[i] * std::log(y[i]);
  }
  if (!(total > 0.0)) throw NumericalError("log-normal fit: all weights are zero");
  const double mu = sum / total;
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    const double d = std::log(y[i]) - mu;
    ss += w[i] * d * d;
  }
  return {mu, std::max(std::sqrt(ss / total), sigma_floor)};
}

ParetoParams weighted_mle_pareto(std::span<const double> y, std::span<const double> w,
                                 double scale_min) {
  check_weights(y, w);
  if (!(scale_min > 0.0)) throw ConfigError("Pareto fit requires scale_min > 0");
  double total = 0.0;
  double log_excess = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    if (y[i] < scale_min) throw DataError("Pareto fit: weighted observation below scale_min");
    total += w[i];
    log_excess += w[i] * std::log(y[i] / scale_min);
  }
  if (!(total > 0.0)) throw NumericalError("Pareto fit: all weights are zero");
  constexpr double kMaxShape = 1e6;
  const double shape = log_excess > total / kMaxShape ? total / log_excess : kMaxShape;
  return {shape, scale_min};
}

double weighted_log_likelihood(const LossParams& params, std::span<const double> y,
                               std::span<const double> w) {
  check_weights(y, w);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    total += w[i] * log_pdf(params, y[i]);
  }
  return total;
}

Gb2FitResult weighted_map_fit_gb2(std::span<const double> y, std::span<const double> w,
                                  const Gb2FitOptions& options) {
  check_weights(y, w);
  std::set<double> distinct;
  double total = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0 || !(y[i] > 0.0)) continue;
    distinct.insert(y[i]);
    total += w[i];
    sum += w[i] * std::log(y[i]);
  }
  if (distinct.size() < 4) {
    throw NumericalError("GB2 fit needs at least four distinct positive-weight observations");
  }
  const double m = sum / total;
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0 || !(y[i] > 0.0)) continue;
    ss += w[i] * (std::log(y[i]) - m) * (std::log(y[i]) - m);
  }
  const double sd = std::max(std::sqrt(ss / total), 1e-3);

  auto objective = [&](std::span<const double> x) {
    for (double v : x) {
      if (std::abs(v) > 25.0) return kInf;
    }
    const Gb2Params p{std::exp(x[0]), std::exp(x[1]), std::exp(x[2]), std::exp(x[3])};
    return -weighted_log_likelihood(p, y, w) / total;
  };

  // With p = q = 1, log Y is logistic with scale 1/a.
  const std::vector<double> base{std::log(std::numbers::pi / (std::sqrt(3.0) * sd)), m, 0.0, 0.0};
  std::vector<std::vector<double>> starts{base};
  Rng rng(splitmix64(options.seed));
  std::normal_distribution<double> jitter(0.0, 0.75);
  for (int r = 1; r < options.restarts; ++r) {
    auto x = base;
    for (auto& v : x) v += jitter(rng);
    starts.push_back(std::move(x));
  }
  if (options.initial) {
    const auto& p = *options.initial;
    starts.push_back({std::log(std::abs(p.a)), std::log(p.b), std::log(p.p), std::log(p.q)});
  }

  const std::vector<double> step{0.3, 0.3 * sd + 0.1, 0.5, 0.5};
  Gb2FitResult best;
  double best_value = kInf;
  bool any_converged = false;
  for (const auto& start : starts) {
    const auto res = minimize_simplex(objective, start, step, options.max_iters, options.size_tol);
    any_converged = any_converged || res.converged;
    if (res.value < best_value) {
      best_value = res.value;
      best.params = {std::exp(res.x[0]), std::exp(res.x[1]), std::exp(res.x[2]),
                     std::exp(res.x[3])};
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("GB2 fit: no finite objective found");
  best.objective = weighted_log_likelihood(best.params, y, w);
  best.converged = any_converged;
  return best;
}

NigPrior conjugate_posterior_lognormal(std::span<const double> y, const NigPrior& prior) {
  if (y.empty()) return prior;
  const double n = static_cast<double>(y.size());
  double sum = 0.0;
  for (double v : y) sum += std::log(v);
  const double ybar = sum / n;
  double ss = 0.0;
  for (double v : y) ss += (std::log(v) - ybar) * (std::log(v) - ybar);
  const double d = ybar - prior.mu0;
  return {(prior.r * prior.mu0 + n * ybar) / (prior.r + n), prior.r + n, prior.a + 0.5 * n,
          prior.b + 0.5 * ss + n * prior.r / (prior.r + n) * d * d / 2.0};
}

GammaShapePrior conjugate_posterior_pareto(std::span<const double> y,
                                           const GammaShapePrior& prior) {
  if (y.empty()) return prior;
  if (!(prior.scale_min > 0.0)) throw ConfigError("Pareto posterior requires scale_min > 0");
  double log_excess = 0.0;
  for (double v : y) {
    if (v < prior.scale_min) throw DataError("Pareto posterior: observation below scale_min");
    log_excess += std::log(v / prior.scale_min);
  }
  return {prior.a + static_cast<double>(y.size()), prior.b + log_excess, prior.scale_min};
}

LossParams draw_from_prior_or_posterior(const LossPrior& spec, Rng& rng) {
  return std::visit(
      overloaded{[&rng](const NigPrior& p) -> LossParams {
                   const double s2 = 1.0 / draw_gamma(p.a, p.b, rng);
                   std::normal_distribution<double> n(p.mu0, std::sqrt(s2 / p.r));
                   return LogNormalParams{n(rng), std::sqrt(s2)};
                 },
                 [&rng](const GammaShapePrior& p) -> LossParams {
                   if (!(p.scale_min > 0.0))
                     throw ConfigError("gamma shape prior has unresolved scale_min");
                   return ParetoParams{std::max(draw_gamma(p.a, p.b, rng), DBL_MIN), p.scale_min};
                 },
                 [](const FlatPrior&) -> LossParams {
                   throw ConfigError("cannot draw from an improper flat prior");
                 }},
      spec);
}

LossParams prior_mode(const LossPrior& prior, LossFamily family, const LossParams& fallback) {
  if (const auto* nig = std::get_if<NigPrior>(&prior); nig && family == LossFamily::LogNormal) {
    return LogNormalParams{nig->mu0, std::sqrt(2.0 * nig->b / (2.0 * nig->a + 3.0))};
  }
  if (const auto* g = std::get_if<GammaShapePrior>(&prior); g && family == LossFamily::Pareto) {
    double scale = g->scale_min;
    if (!(scale > 0.0)) {
      const auto* ref = std::get_if<ParetoParams>(&fallback);
      scale = ref ? ref->scale_min : 1.0;
    }
    return ParetoParams{g->a >= 1.0 ? std::max((g->a - 1.0) / g->b, 1e-6) : g->a / g->b, scale};
  }
  return fallback;
}

}  // namespace ldmm
