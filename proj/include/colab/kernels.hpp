// Data-parallel inner loops of inference and prediction.
//
// Every kernel exists twice with identical signatures: `serial` is the plain
// reference used by the tests, `parallel` is the OpenMP version used by the
// library. Work is split so that each output slot has a single writer and
// partial sums are combined in a fixed order, so results do not depend on the
// thread count.
#pragma once

#include "colab/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace colab {

/// For each event n, the strictly earlier events k inside the cutoff window
/// and the joint kernel weight κ_t(t_n − t_k)·κ_s(‖ℓ_n − ℓ_k‖; h_{i_n}).
struct ExcitationTable {
  std::vector<std::size_t> offsets{0};
  std::vector<int> source;
  std::vector<double> weight;

  std::size_t n_events() const { return offsets.size() - 1; }
  std::size_t n_pairs() const { return source.size(); }
  std::span<const int> sources(std::size_t n) const {
    return {source.data() + offsets[n], offsets[n + 1] - offsets[n]};
  }
  std::span<const double> weights(std::size_t n) const {
    return {weight.data() + offsets[n], offsets[n + 1] - offsets[n]};
  }
  bool operator==(const ExcitationTable&) const = default;
};

/// Transpose of an ExcitationTable: for each event k, the later events whose
/// intensity it enters.
struct ChildTable {
  std::vector<std::size_t> offsets{0};
  std::vector<int> child;

  std::span<const int> children(std::size_t k) const {
    return {child.data() + offsets[k], offsets[k + 1] - offsets[k]};
  }
};

ChildTable build_child_table(const ExcitationTable& table);

/// Accumulators for ∂/∂μ, ∂/∂η and ∂/∂A of Σ_n log λ_n.
struct IntensityGradients {
  std::vector<double> mu;
  std::vector<double> eta;
  Matrix A;

  IntensityGradients() = default;
  IntensityGradients(std::size_t n_users, std::size_t n_communities)
      : mu(n_users, 0.0), eta(n_communities, 0.0), A(n_users, n_users, 0.0) {}
  void add(const IntensityGradients& other);
};

/// Threading knobs shared by all parallel kernels.
struct ParallelSettings {
  int threads = 0;           // 0 = OpenMP default
  bool deterministic = false; // fixed-order reductions and no wall-clock in reports
};

ParallelSettings& parallel_settings();
/// Applies `threads` to the OpenMP runtime.
void configure_parallelism(const ParallelSettings& settings);

/// Candidate venue with its score, as produced by the scoring kernel.
struct ScoredVenue {
  int venue = 0;
  double score = 0.0;
};

/// Inputs for scoring candidate venues of one test event.
struct ScoringQuery {
  int user = 0;
  double t = 0.0;
  /// History events (indices into `trace`) that precede the query within the cutoff window.
  std::span<const int> history;
  /// Σ_g π_{user,g} μ_user η_g θ_{g,c} for every category c.
  std::span<const double> base_by_category;
  /// For every history entry: Σ_g π_{user,g} φ_{i_k,g} θ_{g,c}, laid out [history][category].
  std::span<const double> mark_by_history;
  std::size_t n_categories = 0;
};

namespace kernels {

#define COLAB_KERNEL_DECLARATIONS                                                                  \
  ExcitationTable build_excitation_table(const Trace& trace, const HyperParams& hyper);            \
                                                                                                   \
  /* K[k][j] = Σ_{e: i_e = k} ∫_{t_e}^{T} κ_t · ∫_R κ_s(·; h_j) */                                  \
  Matrix influence_mass(const Trace& trace, const HyperParams& hyper);                             \
                                                                                                   \
  /* λ_{i_n, g_n}(t_n, ℓ_n) for every event under the given assignment. */                         \
  void intensities(const Trace& trace, const ExcitationTable& table, const ModelParams& params,    \
                   std::span<const int> assignment, std::span<double> out);                        \
                                                                                                   \
  /* Adds weight·∂/∂(μ, η, A) of Σ_n log λ_n to `grads`. */                                        \
  void accumulate_intensity_gradients(const Trace& trace, const ExcitationTable& table,            \
                                      const ModelParams& params, std::span<const int> assignment,  \
                                      std::span<const double> lambda, double weight,               \
                                      IntensityGradients& grads);                                  \
                                                                                                   \
  /* F_n = log λ_n + Σ_{m ∈ children(n)} log λ_m: every term that depends on g_n. */                \
  void local_objective(const ChildTable& children, std::span<const double> log_lambda,             \
                       std::span<double> out);                                                     \
                                                                                                   \
  /* Scores log Σ_g π θ λ̃ for every candidate venue. */                                            \
  void score_venues(const Trace& trace, const ModelParams& params, const HyperParams& hyper,       \
                    const ScoringQuery& query, std::span<const int> candidates,                    \
                    std::span<ScoredVenue> out);

namespace serial {
COLAB_KERNEL_DECLARATIONS
} // namespace serial

namespace parallel {
COLAB_KERNEL_DECLARATIONS
} // namespace parallel

#undef COLAB_KERNEL_DECLARATIONS

} // namespace kernels
} // namespace colab
