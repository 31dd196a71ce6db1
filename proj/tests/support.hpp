// Small hand-built traces and parameter sets shared by the test binaries.
#pragma once

#include "colab/random.hpp"
#include "colab/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace colab::testing {

inline Trace grid_trace(int n_users, int n_categories, const Region& region) {
  Trace t;
  t.region = region;
  t.n_users = n_users;
  t.n_categories = n_categories;
  return t;
}

inline void add_venue(Trace& t, double x, double y, int category) {
  t.venues.push_back({static_cast<int>(t.venues.size()), {x, y}, category});
}

inline void add_event(Trace& t, double time, int user, int venue, std::optional<int> community = std::nullopt) {
  Event e;
  e.t = time;
  e.user = user;
  e.venue = venue;
  e.category = t.venues[static_cast<std::size_t>(venue)].category;
  e.community = community;
  t.events.push_back(e);
}

inline HyperParams hyper_for(int n_users, int n_categories, int M, double nu = 0.5, double h = 0.3) {
  HyperParams hp;
  hp.nu = nu;
  hp.h.assign(static_cast<std::size_t>(n_users), h);
  hp.theta0.assign(static_cast<std::size_t>(n_categories), 1.0);
  hp.M = M;
  hp.S = 10;
  return hp;
}

inline Matrix random_stochastic(std::size_t rows, std::size_t cols, Rng& rng, double floor = 0.05) {
  Matrix m(rows, cols);
  for (double& v : m.data()) {
    v = floor + uniform01(rng);
  }
  normalize_rows(m);
  return m;
}

// Random interior parameters of the right shapes.
inline ModelParams random_params(int I, int M, int V, std::uint64_t seed) {
  Rng rng = make_rng(seed, 77);
  ModelParams p;
  p.mu.resize(static_cast<std::size_t>(I));
  for (double& v : p.mu) {
    v = 0.2 + uniform01(rng);
  }
  p.eta.resize(static_cast<std::size_t>(M));
  for (double& v : p.eta) {
    v = 0.3 + uniform01(rng);
  }
  p.A = Matrix(static_cast<std::size_t>(I), static_cast<std::size_t>(I));
  for (double& v : p.A.data()) {
    v = 0.1 + uniform01(rng);
  }
  p.theta = random_stochastic(static_cast<std::size_t>(M), static_cast<std::size_t>(V), rng);
  p.pi = random_stochastic(static_cast<std::size_t>(I), static_cast<std::size_t>(M), rng);
  p.phi = random_stochastic(static_cast<std::size_t>(I), static_cast<std::size_t>(M), rng);
  return p;
}

// N events spread over [0, T] on a small random venue set; communities drawn uniformly when M > 0.
inline Trace random_trace(int I, int V, int n_venues, int N, std::uint64_t seed, int M = 0, double T = 10.0) {
  Rng rng = make_rng(seed, 11);
  Trace t = grid_trace(I, V, Region{T, 0.0, 1.0, 0.0, 1.0});
  for (int v = 0; v < n_venues; ++v) {
    add_venue(t, 0.05 + 0.9 * uniform01(rng), 0.05 + 0.9 * uniform01(rng), v % V);
  }
  std::vector<double> times(static_cast<std::size_t>(N));
  for (double& x : times) {
    x = T * uniform01(rng);
  }
  std::sort(times.begin(), times.end());
  for (int n = 0; n < N; ++n) {
    const int user = static_cast<int>(uniform01(rng) * I);
    const int venue = static_cast<int>(uniform01(rng) * n_venues);
    std::optional<int> g;
    if (M > 0) {
      g = static_cast<int>(uniform01(rng) * M);
    }
    add_event(t, times[static_cast<std::size_t>(n)], user, venue, g);
  }
  return t;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace colab::testing
