// Likelihood, evidence lower bound and its gradients.
//
// The variational posterior gives every event of user i the community
// distribution φ_i. The expected log-intensity term is estimated from
// weighted joint community assignments: S Monte-Carlo draws of weight 1/S,
// or, on tiny instances, every assignment weighted by q(g). The π, θ,
// survival and entropy terms are closed form.
#pragma once

#include "colab/kernels.hpp"
#include "colab/random.hpp"
#include "colab/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace colab {

/// Trace-dependent quantities reused across every ELBO evaluation.
class InferenceData {
public:
  InferenceData(Trace trace, HyperParams hyper);

  const Trace& trace() const { return trace_; }
  const HyperParams& hyper() const { return hyper_; }
  const ExcitationTable& table() const { return table_; }
  const ChildTable& children() const { return children_; }
  /// K[k][j] = Σ_{e: i_e = k} ∫_{t_e}^{T} κ_t · ∫_R κ_s(·; h_j).
  const Matrix& influence_mass() const { return influence_mass_; }
  /// T·|R|, the space-time volume of the observation window.
  double base_mass() const { return base_mass_; }
  std::span<const int> events_of(int user) const { return events_by_user_[static_cast<std::size_t>(user)]; }
  /// Events per user.
  std::span<const double> user_counts() const { return user_counts_; }
  /// n_{i,c}: events of user i with category c.
  const Matrix& user_category_counts() const { return user_category_counts_; }

private:
  Trace trace_;
  HyperParams hyper_;
  ExcitationTable table_;
  ChildTable children_;
  Matrix influence_mass_;
  double base_mass_ = 0.0;
  std::vector<std::vector<int>> events_by_user_;
  std::vector<double> user_counts_;
  Matrix user_category_counts_;
};

/// Weighted set of joint community assignments, one community per event.
struct AssignmentSet {
  std::vector<std::vector<int>> samples;
  std::vector<double> weights;
  /// True when the set is an exact expectation (enumeration or degenerate q).
  bool exact = false;
};

/// S independent draws g_n ~ Categorical(φ_{i_n}), each of weight 1/S.
AssignmentSet sample_assignments(const Matrix& phi, const Trace& trace, int S, Rng& rng);

/// Inverse-CDF draws from pre-drawn uniforms laid out [sample][event]. Reusing
/// the same uniforms gives common random numbers across parameter values.
AssignmentSet assignments_from_uniforms(const Matrix& phi, const Trace& trace, const Matrix& uniforms);

/// Every assignment in M^N, weighted by q(g). Throws ContractError when the
/// count exceeds `max_count`.
AssignmentSet enumerate_assignments(const Matrix& phi, const Trace& trace, std::size_t max_count = 1u << 20);

/// When every φ row used by the trace is one-hot, the unique assignment with weight 1.
std::optional<AssignmentSet> degenerate_assignment(const Matrix& phi, const Trace& trace);

/// The ground-truth labels of a trace as an assignment vector.
/// Throws ContractError when an event has no label.
std::vector<int> trace_communities(const Trace& trace);

struct ElboEstimate {
  double value = 0.0;
  double excitation = 0.0; // E_q Σ_n log λ_{i_n,g_n}(t_n, ℓ_n)
  double pi_term = 0.0;    // Σ_n Σ_m φ_{i_n,m} log π_{i_n,m}
  double theta_term = 0.0; // Σ_n Σ_m φ_{i_n,m} log θ_{m,c_n}
  double survival = 0.0;   // Σ_i ∫∫ λ_i, subtracted
  double entropy = 0.0;    // −Σ_n Σ_m φ_{i_n,m} log φ_{i_n,m}
  int samples = 0;
  bool exact = false;
};

struct LikelihoodTerms {
  double value = 0.0;
  double excitation = 0.0;
  double pi_term = 0.0;
  double theta_term = 0.0;
  double survival = 0.0;
};

/// Σ_i ∫_0^T ∫_R λ_i. Community indicators sum to one over g, so the value
/// does not depend on the assignment.
double survival_integral(const InferenceData& data, const ModelParams& params);
double survival_integral(const ModelParams& params, const HyperParams& hyper, const Trace& trace);

/// Complete-data log likelihood under the given assignment (defaults to the
/// trace's ground-truth labels).
LikelihoodTerms complete_log_likelihood_terms(const InferenceData& data, const ModelParams& params,
                                              std::span<const int> assignment);
double complete_log_likelihood(const ModelParams& params, const HyperParams& hyper, const Trace& trace);

ElboEstimate elbo(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments);

/// ELBO with S fresh draws from the given seed; exact when φ is degenerate.
ElboEstimate elbo(const ModelParams& params, const HyperParams& hyper, const Trace& trace, int S,
                  std::uint64_t seed);

/// log Σ_g exp(complete log likelihood of g), by enumeration.
double log_evidence(const InferenceData& data, const ModelParams& params, std::size_t max_count = 1u << 20);

/// Gradient of the ELBO. μ, η, A and θ are natural coordinates; φ is with
/// respect to the softmax logits of each row.
struct ElboGradient {
  std::vector<double> mu;
  std::vector<double> eta;
  Matrix A;
  Matrix theta;
  Matrix phi_logits;

  bool all_finite() const;
};

struct GradientOptions {
  /// Per-event baseline subtracted inside the score-function estimator. When
  /// empty, Monte-Carlo sets with S ≥ 2 use the leave-one-out sample mean.
  std::span<const double> baseline;
  bool with_phi = true;
  bool parallel = true;
};

ElboGradient elbo_gradient(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments,
                           const GradientOptions& options = {});

/// φ-logit part of elbo_gradient.
Matrix grad_phi(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments,
                const GradientOptions& options = {});

/// μ, η, A, θ part of elbo_gradient.
ElboGradient grad_params(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments);

/// Per-event local objectives F_n averaged over the assignment set; the fitter
/// keeps a running mean of these as an optional baseline.
std::vector<double> mean_local_objective(const InferenceData& data, const ModelParams& params,
                                         const AssignmentSet& assignments);

} // namespace colab
