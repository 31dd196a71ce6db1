// Seeded random helpers. Every stream is derived from (seed, tags...) so
// results do not depend on thread scheduling.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace colab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

template <typename... Tags>
Rng make_rng(std::uint64_t seed, Tags... tags) {
  std::uint64_t s = mix_seed(seed);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(tags))), ...);
  return Rng(s);
}

/// Uniform in [0, 1).
double uniform01(Rng& rng);

/// Index drawn proportionally to non-negative weights. Throws ContractError
/// when every weight is zero.
int sample_categorical(std::span<const double> weights, Rng& rng);

/// Inverse-CDF categorical draw for a given uniform u ∈ [0, 1).
int categorical_from_uniform(std::span<const double> probs, double u);

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

/// Dirichlet-multinomial draw normalized to the simplex: p ~ Dir(α),
/// counts ~ Mult(draws, p), result = counts / draws.
std::vector<double> sample_dirichlet_multinomial(std::span<const double> alpha, int draws, Rng& rng);

} // namespace colab
