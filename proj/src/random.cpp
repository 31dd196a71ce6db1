#include "colab/random.hpp"

#include "colab/types.hpp"

#include <algorithm>
#include <numeric>

namespace colab {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(Rng& rng) {
  // 53 random bits, never returns 1.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int categorical_from_uniform(std::span<const double> probs, double u) {
  double total = 0.0;
  for (double p : probs) {
    total += p;
  }
  const double target = u * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) {
      continue;
    }
    last_positive = static_cast<int>(k);
    acc += probs[k];
    if (target < acc) {
      return static_cast<int>(k);
    }
  }
  if (last_positive < 0) {
    throw ContractError("categorical: all weights are zero");
  }
  return last_positive;
}

int sample_categorical(std::span<const double> weights, Rng& rng) {
  for (double w : weights) {
    if (w < 0.0) {
      throw ContractError("categorical: negative weight");
    }
  }
  return categorical_from_uniform(weights, uniform01(rng));
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    std::gamma_distribution<double> gamma(alpha[k], 1.0);
    out[k] = gamma(rng);
    sum += out[k];
  }
  if (!(sum > 0.0)) {
    // All draws underflowed (tiny α): fall back to a single vertex.
    std::fill(out.begin(), out.end(), 0.0);
    out[static_cast<std::size_t>(sample_categorical(alpha, rng))] = 1.0;
    return out;
  }
  for (double& v : out) {
    v /= sum;
  }
  return out;
}

std::vector<double> sample_dirichlet_multinomial(std::span<const double> alpha, int draws, Rng& rng) {
  const std::vector<double> p = sample_dirichlet(alpha, rng);
  if (draws <= 0) {
    return p;
  }
  std::vector<double> counts(p.size(), 0.0);
  for (int d = 0; d < draws; ++d) {
    counts[static_cast<std::size_t>(sample_categorical(p, rng))] += 1.0;
  }
  for (double& c : counts) {
    c /= static_cast<double>(draws);
  }
  return counts;
}

} // namespace colab
