// Next-location prediction and top-K evaluation.
//
// A candidate venue ℓ for user i at time t scores
//   log Σ_g π_{i,g} θ_{g,c(ℓ)} λ̃_{i,g}(t, ℓ)
// where λ̃ uses φ-weighted history indicators instead of sampled communities.
#pragma once

#include "colab/kernels.hpp"
#include "colab/types.hpp"

#include <span>
#include <vector>

namespace colab {

struct ScoringOptions {
  /// Weight communities by π_i. Without it every community counts equally.
  bool use_prior = true;
  bool parallel = true;
};

/// Candidates sorted by descending score, ties by venue id. `history` holds
/// indices into `trace` of events strictly before t. Throws ContractError on
/// an empty candidate set or a history event not before t.
std::vector<ScoredVenue> score_candidates(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                                          std::span<const int> history, int user, double t,
                                          std::span<const int> candidates, const ScoringOptions& options = {});

struct PredictionResult {
  std::vector<int> ks;
  /// Per test event, the top max(ks) venues.
  std::vector<std::vector<int>> ranked;
  /// hit[e][k] for test event e and the k-th entry of `ks`.
  std::vector<std::vector<char>> hit;
  std::vector<int> hits;
  int n_test = 0;
};

/// Chronological split: the first `fraction` of events (rounded down) train.
std::pair<Trace, Trace> split_trace(const Trace& trace, double fraction);

/// Venues visited in the training trace, in id order.
std::vector<int> seen_venues(const Trace& train);

/// Scores every test event against the training venues. History is the
/// training trace plus earlier test events.
PredictionResult evaluate_topk(const ModelParams& params, const HyperParams& hyper, const Trace& train,
                               const Trace& test, std::vector<int> ks, const ScoringOptions& options = {});

} // namespace colab
