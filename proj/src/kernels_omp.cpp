#include <cmath>

#include "ldmm/kernels.hpp"

namespace ldmm::kernels::omp {

void log_joint(const Corpus& corpus, const MixtureParams& params, bool with_loss, RowMatrix& u) {
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  const std::size_t K = params.K();
  const Vector log_theta = params.theta.array().log().matrix();
  const RowMatrix log_psi = detail::log_of(params.psi);
  u.resize(n, static_cast<Eigen::Index>(K));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t k = 0; k < K; ++k) {
      u(i, static_cast<Eigen::Index>(k)) = detail::row_log_joint(
          corpus.documents[ui], corpus.losses[ui], k, log_theta, log_psi, params, with_loss);
    }
  }
}

void normalize_rows(const RowMatrix& u, RowMatrix& w, Vector& lse) {
  w.resize(u.rows(), u.cols());
  lse.resize(u.rows());
  const auto K = static_cast<std::size_t>(u.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    lse[i] = detail::normalize_row(u.row(i).data(), w.row(i).data(), K);
  }
}

RowMatrix weighted_word_counts(const Corpus& corpus, const RowMatrix& w) {
  const auto K = w.cols();
  const auto V = static_cast<Eigen::Index>(corpus.vocabulary.size());
  RowMatrix counts = RowMatrix::Zero(K, V);
  // Each topic row is owned by one thread and accumulated in observation order.
#pragma omp parallel for schedule(dynamic, 1)
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
  const auto blocks = static_cast<std::ptrdiff_t>((n + kDrawBlock - 1) / kDrawBlock);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    Rng rng = substream(seed, stream, ub);
    const std::size_t end = std::min(n, (ub + 1) * kDrawBlock);
    for (std::size_t i = ub * kDrawBlock; i < end; ++i) {
      z[i] = detail::draw_categorical(probs.row(static_cast<Eigen::Index>(i)).data(), K, rng);
    }
  }
}

}  // namespace ldmm::kernels::omp
