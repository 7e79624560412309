#pragma once

#include <cstdint>
#include <vector>

#include "ldmm/corpus.hpp"
#include "ldmm/mixture.hpp"

/// Per-observation hot loops, each with a serial reference and an OpenMP
/// version of identical signature. Every kernel writes per-row results and
/// leaves reductions to fixed-order serial code, so both backends produce
/// bit-identical output.
namespace ldmm::kernels {

enum class Backend { Serial, OpenMP };

/// OpenMP unless the process asked for one thread.
Backend default_backend();
void set_num_threads(int threads);
int num_threads();

/// u_ik = log theta_k + [log p_k(Y_i)] + sum_v N_iv log psi_kv.
void log_joint(const Corpus& corpus, const MixtureParams& params, bool with_loss, RowMatrix& u,
               Backend backend);

/// w_i = softmax(u_i); lse_i = log sum_k exp(u_ik). Rows whose entries are all
/// -inf get lse = -inf and a zero row.
void normalize_rows(const RowMatrix& u, RowMatrix& w, Vector& lse, Backend backend);

/// K x |V| matrix of sum_i w_ik N_iv.
RowMatrix weighted_word_counts(const Corpus& corpus, const RowMatrix& w, Backend backend);

/// One categorical draw per row of `probs`. Rows are grouped in fixed-size
/// blocks, each with its own substream of (seed, stream), so the draws do not
/// depend on the thread count.
void draw_rows(const RowMatrix& probs, std::uint64_t seed, std::uint64_t stream, Assignment& z,
               Backend backend);

inline constexpr std::size_t kDrawBlock = 512;

namespace serial {
void log_joint(const Corpus& corpus, const MixtureParams& params, bool with_loss, RowMatrix& u);
void normalize_rows(const RowMatrix& u, RowMatrix& w, Vector& lse);
RowMatrix weighted_word_counts(const Corpus& corpus, const RowMatrix& w);
void draw_rows(const RowMatrix& probs, std::uint64_t seed, std::uint64_t stream, Assignment& z);
}  // namespace serial

namespace omp {
void log_joint(const Corpus& corpus, const MixtureParams& params, bool with_loss, RowMatrix& u);
void normalize_rows(const RowMatrix& u, RowMatrix& w, Vector& lse);
RowMatrix weighted_word_counts(const Corpus& corpus, const RowMatrix& w);
void draw_rows(const RowMatrix& probs, std::uint64_t seed, std::uint64_t stream, Assignment& z);
}  // namespace omp

/// Per-row helpers shared by both backends.
namespace detail {
RowMatrix log_of(const RowMatrix& m);
double row_log_joint(const Document& doc, double y, std::size_t k, const Vector& log_theta,
                     const RowMatrix& log_psi, const MixtureParams& params, bool with_loss);
double normalize_row(const double* u, double* w, std::size_t K);
int draw_categorical(const double* probs, std::size_t K, Rng& rng);
}  // namespace detail

}  // namespace ldmm::kernels
