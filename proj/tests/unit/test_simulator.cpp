#include "colab/model.hpp"
#include "colab/simulator.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace colab;
using namespace colab::testing;

namespace {

SimConfig small_config(int n_events = 200, std::uint64_t seed = 5) {
  SimConfig c;
  c.n_events = n_events;
  c.n_users = 4;
  c.M = 2;
  c.V = 3;
  c.region = Region{1000.0, 0.0, 1.0, 0.0, 1.0};
  c.seed = seed;
  c.venues = random_venues(c.region, c.V, 2, seed);
  c.mu_scale = 0.01;
  return c;
}

HyperParams sim_hyper(const SimConfig& c, double nu = 0.5, double h = 0.1) { return hyper_for(c.n_users, c.V, c.M, nu, h); }

// Frequency of `target` in n draws is within 3σ of p.
void check_frequency(int count, int n, double p) {
  const double sigma = std::sqrt(p * (1.0 - p) / n);
  CHECK(std::abs(static_cast<double>(count) / n - p) <= 3.0 * sigma);
}

} // namespace

TEST_SUITE("simulator") {

TEST_CASE("init_params: base rates proportional to check-in counts") {
  SimConfig c = small_config(400);
  const ModelParams p = init_params(c);
  for (double mu : p.mu) {
    CHECK(mu == doctest::Approx(0.01 * 100.0));
  }
  c.user_checkins = {10.0, 20.0, 30.0, 40.0};
  const ModelParams q = init_params(c);
  CHECK(q.mu[3] == doctest::Approx(0.4));
  CHECK(q.mu[0] == doctest::Approx(0.1));
  CHECK_NOTHROW(q.validate());
}

TEST_CASE("init_params: every column of A sums to one") {
  SimConfig c = small_config();
  c.n_users = 3;
  const ModelParams p = init_params(c);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      s += p.A(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("init_params: Dirichlet rows are simplex points") {
  SimConfig c = small_config();
  c.M = 5;
  c.V = 7;
  c.venues = random_venues(c.region, c.V, 1, 2);
  for (int draws : {0, 3}) {
    c.pi_draws = draws;
    c.theta_draws = draws;
    const ModelParams p = init_params(c);
    CHECK_NOTHROW(p.validate());
    for (double v : p.theta.data()) {
      CHECK(v >= 0.0);
      if (draws > 0) {
        CHECK(std::abs(v * draws - std::round(v * draws)) < 1e-12);
      }
    }
  }
}

TEST_CASE("init_params: sparse influence structure") {
  SimConfig c = small_config();
  c.n_users = 20;
  c.M = 2;
  c.A_init = InfluenceInit::sparse;
  c.in_degree = 2;
  c.source_fraction = 0.25;
  c.within_community = true;
  c.pi_draws = 1;
  const ModelParams p = init_params(c);
  int sources = 0;
  for (std::size_t j = 0; j < 20; ++j) {
    int nonzero = 0;
    double s = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      if (p.A(i, j) > 0.0) {
        ++nonzero;
        s += p.A(i, j);
        CHECK(i != j);
      }
    }
    if (nonzero == 0) {
      ++sources;
    } else {
      CHECK(nonzero <= 2);
      CHECK(s == doctest::Approx(1.0));
    }
  }
  CHECK(sources == 5);
}

TEST_CASE("snap_to_venue examples") {
  const std::vector<Venue> venues{{0, {0.0, 0.0}, 0}, {1, {1.0, 1.0}, 1}};
  CHECK(snap_to_venue({0.4, 0.5}, venues) == 0);
  CHECK(distance({0.4, 0.5}, {0.0, 0.0}) == doctest::Approx(0.640).epsilon(1e-3));
  CHECK(distance({0.4, 0.5}, {1.0, 1.0}) == doctest::Approx(0.781).epsilon(1e-3));
  CHECK(snap_to_venue({1.0, 1.0}, venues) == 1);
  CHECK(snap_to_venue({0.5, 0.5}, venues) == 0);
  // Category restriction, with global fallback for an absent category.
  CHECK(snap_to_venue({0.1, 0.1}, venues, 1) == 1);
  CHECK(snap_to_venue({0.9, 0.9}, venues, 7) == 1);
  CHECK_THROWS_AS(snap_to_venue({0.0, 0.0}, std::vector<Venue>{}), ContractError);
}

TEST_CASE("sample_user frequencies") {
  Rng rng = make_rng(9);
  const std::vector<double> single{0.0, 2.5, 0.0};
  for (int k = 0; k < 100; ++k) {
    CHECK(sample_user(single, rng) == 1);
  }
  const int n = 10000;
  int first = 0;
  for (int k = 0; k < n; ++k) {
    first += sample_user(std::vector<double>{1.0, 1.0}, rng) == 0;
  }
  check_frequency(first, n, 0.5);
  first = 0;
  for (int k = 0; k < n; ++k) {
    first += sample_user(std::vector<double>{1.0, 3.0}, rng) == 0;
  }
  check_frequency(first, n, 0.25);
  CHECK_THROWS_AS(sample_user(std::vector<double>{0.0, 0.0}, rng), ContractError);
}

TEST_CASE("sample_community_and_category") {
  ModelParams p = random_params(2, 10, 5, 4);
  Rng rng = make_rng(10);
  SUBCASE("one-hot prior is deterministic") {
    for (double& v : p.pi.row(1)) {
      v = 0.0;
    }
    p.pi(1, 6) = 1.0;
    for (double& v : p.theta.row(6)) {
      v = 0.0;
    }
    p.theta(6, 2) = 1.0;
    for (int k = 0; k < 200; ++k) {
      const auto gc = sample_community_and_category(p, 1, rng);
      CHECK(gc.community == 6);
      CHECK(gc.category == 2);
    }
  }
  SUBCASE("uniform prior over ten communities") {
    for (double& v : p.pi.row(0)) {
      v = 0.1;
    }
    const int n = 10000;
    std::vector<int> counts(10, 0);
    for (int k = 0; k < n; ++k) {
      ++counts[static_cast<std::size_t>(sample_community_and_category(p, 0, rng).community)];
    }
    for (int c : counts) {
      check_frequency(c, n, 0.1);
    }
  }
}

TEST_CASE("generate_trace: zero events") {
  const SimConfig c = small_config(0);
  const SimResult r = generate_trace(c, sim_hyper(c));
  CHECK(r.trace.size() == 0);
  CHECK_FALSE(r.stats.horizon_exhausted);
}

TEST_CASE("generate_trace: invariants and reproducibility") {
  SimConfig c = small_config(300);
  const HyperParams h = sim_hyper(c);
  const SimResult a = generate_trace(c, h);
  const SimResult b = generate_trace(c, h);
  REQUIRE(a.trace.size() == 300);
  CHECK_NOTHROW(a.trace.validate());
  CHECK_NOTHROW(a.truth.validate());
  CHECK(a.stats.max_bound_ratio <= 1.0);
  for (std::size_t n = 0; n < a.trace.size(); ++n) {
    const Event& e = a.trace.events[n];
    CHECK(e.category == a.trace.venues[static_cast<std::size_t>(e.venue)].category);
    CHECK(e.community.has_value());
    if (n > 0) {
      CHECK(e.t > a.trace.events[n - 1].t);
    }
    CHECK(a.trace.events[n].t == b.trace.events[n].t);
    CHECK(a.trace.events[n].venue == b.trace.events[n].venue);
    CHECK(a.trace.events[n].user == b.trace.events[n].user);
  }
  CHECK(a.trace.region.t_end == a.trace.events.back().t);
  c.seed = 6;
  const SimResult other = generate_trace(c, h);
  CHECK(other.trace.events.front().t != a.trace.events.front().t);
}

TEST_CASE("generate_trace: community sampling variants") {
  SimConfig c = small_config(150);
  c.community = CommunitySampling::intensity_proportional;
  const SimResult r = generate_trace(c, sim_hyper(c));
  CHECK(r.trace.size() == 150);
  CHECK_NOTHROW(r.trace.validate());
  c.proposal = LocationProposal::gaussian_previous;
  const SimResult g = generate_trace(c, sim_hyper(c));
  CHECK(g.trace.size() == 150);
  CHECK(g.stats.max_bound_ratio <= 1.0);
}

TEST_CASE("thinning with an exact constant bound never rejects") {
  SimConfig c = small_config(1000);
  c.bound_safety = 1.0;
  const HyperParams h = sim_hyper(c);
  ModelParams truth = init_params(c);
  truth.A = Matrix(4, 4, 0.0);
  const SimResult r = simulate(c, h, truth);
  CHECK(r.stats.rejections == 0);
  CHECK(r.stats.proposals == static_cast<long long>(r.trace.size()));
}

TEST_CASE("A = 0: event counts follow the homogeneous Poisson law") {
  SimConfig c = small_config(1000000);
  c.region.t_end = 20.0;
  const HyperParams h = sim_hyper(c);
  ModelParams truth = init_params(c);
  truth.A = Matrix(4, 4, 0.0);
  truth.mu = {0.5, 1.0, 0.25, 0.75};
  const double expected = 2.5 * std::accumulate(truth.eta.begin(), truth.eta.end(), 0.0) * 20.0 * 1.0;
  const int runs = 200;
  double total = 0.0;
  for (int k = 0; k < runs; ++k) {
    c.seed = 1000 + static_cast<std::uint64_t>(k);
    const SimResult r = simulate(c, h, truth);
    CHECK(r.stats.horizon_exhausted);
    total += static_cast<double>(r.trace.size());
  }
  const double mean = total / runs;
  CHECK(std::abs(mean - expected) <= 3.0 * std::sqrt(expected / runs));
}

TEST_CASE("horizon exhaustion returns a shorter trace") {
  SimConfig c = small_config(100000);
  c.region.t_end = 5.0;
  const SimResult r = generate_trace(c, sim_hyper(c));
  CHECK(r.stats.horizon_exhausted);
  CHECK(r.trace.size() < 100000);
  CHECK(r.trace.region.t_end == 5.0);
}

TEST_CASE("configuration and shape errors") {
  SimConfig c = small_config();
  c.venues.clear();
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_config();
  c.venues[0].category = 9;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_config();
  c.bound_safety = 0.9;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_config();
  ModelParams wrong = random_params(3, 2, 3, 1);
  CHECK_THROWS_AS(simulate(c, sim_hyper(c), wrong), ContractError);
  CHECK(influence_init_from_string(to_string(InfluenceInit::sparse)) == InfluenceInit::sparse);
  CHECK(community_sampling_from_string("intensity_proportional") == CommunitySampling::intensity_proportional);
  CHECK_THROWS_AS(location_proposal_from_string("nearby"), ContractError);
}

} // TEST_SUITE
