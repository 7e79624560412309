#include <cmath>
#include <limits>

#include <omp.h>

#include "ldmm/kernels.hpp"

namespace ldmm::kernels {

namespace {
int g_threads = 0;  // 0 = OpenMP default
}

Backend default_backend() { return num_threads() > 1 ? Backend::OpenMP : Backend::Serial; }

void set_num_threads(int threads) {
  g_threads = threads;
  if (threads > 0) omp_set_num_threads(threads);
}

int num_threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

void log_joint(const Corpus& corpus, const MixtureParams& params, bool with_loss, RowMatrix& u,
               Backend backend) {
  backend == Backend::OpenMP ? omp::log_joint(corpus, params, with_loss, u)
                             : serial::log_joint(corpus, params, with_loss, u);
}

void normalize_rows(const RowMatrix& u, RowMatrix& w, Vector& lse, Backend backend) {
  backend == Backend::OpenMP ? omp::normalize_rows(u, w, lse) : serial::normalize_rows(u, w, lse);
}

RowMatrix weighted_word_counts(const Corpus& corpus, const RowMatrix& w, Backend backend) {
  return backend == Backend::OpenMP ? omp::weighted_word_counts(corpus, w)
                                    : serial::weighted_word_counts(corpus, w);
}

void draw_rows(const RowMatrix& probs, std::uint64_t seed, std::uint64_t stream, Assignment& z,
               Backend backend) {
  backend == Backend::OpenMP ? omp::draw_rows(probs, seed, stream, z)
                             : serial::draw_rows(probs, seed, stream, z);
}

namespace detail {

RowMatrix log_of(const RowMatrix& m) { return m.array().log().matrix(); }

double row_log_joint(const Document& doc, double y, std::size_t k, const Vector& log_theta,
                     const RowMatrix& log_psi, const MixtureParams& params, bool with_loss) {
  const auto kk = static_cast<Eigen::Index>(k);
  double u = log_theta[kk];
  if (with_loss) u += log_pdf(params.components[k], y);
  for (const auto& wc : doc.counts) u += wc.count * log_psi(kk, wc.id);
  return u;
}

double normalize_row(const double* u, double* w, std::size_t K) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) m = std::max(m, u[k]);
  if (!std::isfinite(m)) {
    for (std::size_t k = 0; k < K; ++k) w[k] = 0.0;
    return m;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    w[k] = std::exp(u[k] - m);
    sum += w[k];
  }
  for (std::size_t k = 0; k < K; ++k) w[k] /= sum;
  return m + std::log(sum);
}

int draw_categorical(const double* probs, std::size_t K, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (probs[k] <= 0.0) continue;
    acc += probs[k];
    last_positive = static_cast<int>(k);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

}  // namespace detail

namespace serial {

void log_joint(const Corpus& corpus, const MixtureParams& params, bool with_loss, RowMatrix& u) {
  const std::size_t n = corpus.size();
  const std::size_t K = params.K();
  const Vector log_theta = params.theta.array().log().matrix();
  const RowMatrix log_psi = detail::log_of(params.psi);
  u.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          detail::row_log_joint(corpus.documents[i], corpus.losses[i], k, log_theta, log_psi,
                                params, with_loss);
    }
  }
}

void normalize_rows(const RowMatrix& u, RowMatrix& w, Vector& lse) {
  w.resize(u.rows(), u.cols());
  lse.resize(u.rows());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    lse[i] = detail::normalize_row(u.row(i).data(), w.row(i).data(),
                                   static_cast<std::size_t>(u.cols()));
  }
}

RowMatrix weighted_word_counts(const Corpus& corpus, const RowMatrix& w) {
  const auto K = w.cols();
  RowMatrix counts = RowMatrix::Zero(K, static_cast<Eigen::Index>(corpus.vocabulary.size()));
  for (Eigen::Index k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const double wik = w(static_cast<Eigen::Index>(i), k);
      if (wik == 0.0) continue;
      for (const auto& wc : corpus.documents[i].counts) counts(k, wc.id) += wik * wc.count;
    }
  }
  return counts;
}

void draw_rows(const RowMatrix& probs, std::uint64_t seed, std::uint64_t stream, Assignment& z) {
  const auto n = static_cast<std::size_t>(probs.rows());
  const auto K = static_cast<std::size_t>(probs.cols());
  z.resize(n);
  const std::size_t blocks = (n + kDrawBlock - 1) / kDrawBlock;
  for (std::size_t b = 0; b < blocks; ++b) {
    Rng rng = substream(seed, stream, b);
    const std::size_t end = std::min(n, (b + 1) * kDrawBlock);
    for (std::size_t i = b * kDrawBlock; i < end; ++i) {
      z[i] = detail::draw_categorical(probs.row(static_cast<Eigen::Index>(i)).data(), K, rng);
    }
  }
}

}  // namespace serial

}  // namespace ldmm::kernels
