#include "ldmm/optimize.hpp"

#include <cmath>
#include <memory>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace ldmm {

namespace {

struct Context {
  const std::function<double(std::span<const double>)>* objective;
};

double trampoline(const gsl_vector* x, void* params) {
  const auto* ctx = static_cast<const Context*>(params);
  const std::span<const double> view(x->data, x->size);
  const double v = (*ctx->objective)(view);
  return std::isfinite(v) ? v : 1e300;
}

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

std::unique_ptr<gsl_vector, VectorDeleter> make_vector(std::span<const double> values) {
  std::unique_ptr<gsl_vector, VectorDeleter> v(gsl_vector_alloc(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) gsl_vector_set(v.get(), i, values[i]);
  return v;
}

}  // namespace

SimplexResult minimize_simplex(const std::function<double(std::span<const double>)>& objective,
                               std::span<const double> start, std::span<const double> step,
                               int max_iters, double size_tol) {
  gsl_set_error_handler_off();
  Context ctx{&objective};
  gsl_multimin_function fn;
  fn.n = start.size();
  fn.f = &trampoline;
  fn.params = &ctx;

  auto x = make_vector(start);
  auto ss = make_vector(step);
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> state(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, start.size()));
  gsl_multimin_fminimizer_set(state.get(), &fn, x.get(), ss.get());

  SimplexResult result;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && result.iterations < max_iters) {
    ++result.iterations;
    if (gsl_multimin_fminimizer_iterate(state.get()) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(state.get()), size_tol);
  }
  result.converged = status == GSL_SUCCESS;
  const gsl_vector* best = gsl_multimin_fminimizer_x(state.get());
  result.x.assign(best->data, best->data + best->size);
  result.value = gsl_multimin_fminimizer_minimum(state.get());
  return result;
}

}  // namespace ldmm
