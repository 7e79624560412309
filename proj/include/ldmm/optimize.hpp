#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ldmm {

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free Nelder-Mead minimization. Non-finite objective values are
/// treated as +huge so the simplex backs away from them.
SimplexResult minimize_simplex(const std::function<double(std::span<const double>)>& objective,
                               std::span<const double> start, std::span<const double> step,
                               int max_iters, double size_tol);

}  // namespace ldmm
