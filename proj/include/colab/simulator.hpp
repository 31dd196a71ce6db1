// Synthetic trace generation by thinning, with proposals snapped to venues.
#pragma once

#include "colab/random.hpp"
#include "colab/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace colab {

enum class InfluenceInit {
  /// Every entry uniform on (0, 1), then column-normalized.
  dense,
  /// Each influenced user gets `in_degree` influencers; columns of source users stay zero.
  sparse,
};

enum class LocationProposal {
  /// Uniform over the region. Together with the bound this is exact thinning.
  uniform,
  /// Gaussian around the previous event's location.
  gaussian_previous,
};

enum class CommunitySampling {
  /// g ~ π_user, drawn after (t, ℓ, user).
  prior,
  /// g ∝ λ_{user,g}(t, ℓ).
  intensity_proportional,
};

struct SimConfig {
  int n_events = 1000;
  int n_users = 10;
  int M = 2;
  int V = 5;
  std::vector<Venue> venues;
  Region region;
  std::uint64_t seed = 1;

  // μ_i = mu_scale·N_i. When empty, N_i = n_events / n_users for every user.
  double mu_scale = 0.01;
  std::vector<double> user_checkins;

  InfluenceInit A_init = InfluenceInit::dense;
  int in_degree = 3;
  double source_fraction = 0.0;
  bool within_community = false;
  bool self_excitation = false;

  double pi_alpha = 1.0;
  int pi_draws = 0; // 0 = plain Dirichlet draw
  double theta_alpha = 1.0;
  int theta_draws = 0;
  double eta_alpha = 1.0;

  LocationProposal proposal = LocationProposal::uniform;
  /// Std of the Gaussian proposal; non-positive means the previous user's bandwidth.
  double proposal_std = 0.0;
  CommunitySampling community = CommunitySampling::prior;
  double bound_safety = 1.1;

  void validate() const;
};

struct SimStats {
  long long proposals = 0;
  long long rejections = 0;
  /// Largest observed λ(t, ℓ) / Λ̄ over all proposals; never above 1.
  double max_bound_ratio = 0.0;
  bool horizon_exhausted = false;
};

struct SimResult {
  Trace trace;
  ModelParams truth;
  SimStats stats;
};

/// Venues placed uniformly at random, `per_category` of each category, ids in
/// category-major order.
std::vector<Venue> random_venues(const Region& region, int n_categories, int per_category, std::uint64_t seed);

/// Ground-truth parameters: μ ∝ N_i, column-normalized A, Dirichlet(-multinomial) π, θ, η.
/// φ is set equal to π here; generate_trace replaces it with empirical frequencies.
ModelParams init_params(const SimConfig& config);

/// Nearest venue to `p` (lowest id on ties). When `category` is given, only
/// venues of that category are considered unless none exists.
/// Throws ContractError on an empty venue set.
int snap_to_venue(Point p, std::span<const Venue> venues, std::optional<int> category = std::nullopt);

/// Index drawn proportionally to the intensities. Throws ContractError if all are zero.
int sample_user(std::span<const double> intensities, Rng& rng);

struct CommunityAndCategory {
  int community = 0;
  int category = 0;
};

CommunityAndCategory sample_community_and_category(const ModelParams& params, int user, Rng& rng);

/// Runs the generative process with the given true parameters. Stops after
/// `config.n_events` events (the trace horizon is then the last event time)
/// or at the region horizon, whichever comes first.
SimResult simulate(const SimConfig& config, const HyperParams& hyper, const ModelParams& truth);

/// init_params followed by simulate; φ of the returned truth holds each user's
/// empirical community frequencies (π for users without events).
SimResult generate_trace(const SimConfig& config, const HyperParams& hyper);

std::string to_string(InfluenceInit v);
std::string to_string(LocationProposal v);
std::string to_string(CommunitySampling v);
InfluenceInit influence_init_from_string(const std::string& s);
LocationProposal location_proposal_from_string(const std::string& s);
CommunitySampling community_sampling_from_string(const std::string& s);

} // namespace colab
