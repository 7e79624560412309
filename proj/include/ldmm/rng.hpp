#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ldmm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for lane `index` of stream `stream` under `seed`.
/// The mapping depends only on its arguments, never on the thread that asks.
inline Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t mixed =
      splitmix64(splitmix64(splitmix64(seed) ^ stream) + 0x632be59bd9b4e019ULL * (index + 1));
  return Rng(mixed);
}

/// Gamma(shape, rate) draw.
inline double draw_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

/// Dirichlet draw via normalized gammas; entries are clamped away from zero so
/// downstream logarithms stay finite.
inline Eigen::VectorXd draw_dirichlet(const Eigen::VectorXd& concentration, Rng& rng) {
  Eigen::VectorXd out(concentration.size());
  double total = 0.0;
  for (Eigen::Index v = 0; v < concentration.size(); ++v) {
    std::gamma_distribution<double> dist(concentration[v], 1.0);
    out[v] = dist(rng);
    total += out[v];
  }
  if (!(total > 0.0)) {
    out.setConstant(1.0 / static_cast<double>(out.size()));
    return out;
  }
  constexpr double kMin = 1e-300;
  double renorm = 0.0;
  for (Eigen::Index v = 0; v < out.size(); ++v) {
    out[v] = std::max(out[v] / total, kMin);
    renorm += out[v];
  }
  out /= renorm;
  return out;
}

}  // namespace ldmm
