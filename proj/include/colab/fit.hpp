// Stochastic variational EM driver.
//
// Each step draws S community assignments from φ, takes one Adam step on the
// unconstrained coordinates (log μ, log η, log A, softmax logits of θ and φ),
// then sets π to its closed-form maximizer, the normalized φ expectations.
#pragma once

#include "colab/inference.hpp"
#include "colab/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace colab {

enum class BaselineKind {
  none,
  /// Mean of the other samples' local objectives at the same step.
  leave_one_out,
  /// Exponential running mean of each event's local objective over past steps.
  running_mean,
};

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);

struct FitOptions {
  bool learn_mu = true;
  bool learn_eta = true;
  bool learn_A = true;
  bool learn_theta = true;
  bool learn_pi = true;
  bool learn_phi = true;

  /// A frozen at zero.
  bool no_influence = false;
  /// μ frozen at `no_base_mu`.
  bool no_base = false;
  double no_base_mu = 1e-8;
  /// θ frozen at the uniform distribution.
  bool no_category = false;

  BaselineKind baseline = BaselineKind::leave_one_out;
  double running_mean_decay = 0.9;
  /// Relative change of the 10-epoch moving average below which the fit counts as converged.
  double convergence_tolerance = 1e-4;
  bool record_elbo = true;
  /// Called after every epoch with (epoch, elbo).
  std::function<void(int, double)> on_epoch;
};

struct FitReport {
  std::vector<double> elbo_trace;
  ModelParams params;
  double wall_seconds = 0.0;
  bool converged = false;
  int epochs = 0;
};

/// Default starting point: μ and A scaled so that base rate and excitation each
/// explain about half of every user's events, η uniform, θ rows drawn from
/// Dirichlet(θ_0), φ rows from Dirichlet(1), π = φ.
ModelParams default_init(const InferenceData& data, std::uint64_t seed);

/// Applies ablation settings to a starting point (A = 0, μ ≈ 0, θ uniform).
void apply_ablations(ModelParams& params, const FitOptions& options);

FitReport fit(const Trace& trace, const HyperParams& hyper, std::optional<ModelParams> init = std::nullopt,
              const FitOptions& options = {});
FitReport fit(const InferenceData& data, std::optional<ModelParams> init, const FitOptions& options);

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

} // namespace colab
