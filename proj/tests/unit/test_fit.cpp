#include "colab/fit.hpp"
#include "colab/inference.hpp"
#include "colab/kernels.hpp"
#include "colab/simulator.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace colab;
using namespace colab::testing;

namespace {

struct Synthetic {
  SimResult sim;
  HyperParams hyper;
};

Synthetic small_synthetic(int M, int n_events = 300, int epochs = 30) {
  SimConfig c;
  c.n_events = n_events;
  c.n_users = 6;
  c.M = M;
  c.V = 4;
  c.region = Region{1e4, 0.0, 1.0, 0.0, 1.0};
  c.seed = 17;
  c.venues = random_venues(c.region, c.V, 3, 17);
  c.mu_scale = 0.002;
  Synthetic s;
  s.hyper = hyper_for(c.n_users, c.V, M, 0.05, 0.1);
  s.hyper.S = 4;
  s.hyper.optimizer.epochs = epochs;
  s.hyper.optimizer.steps_per_epoch = 3;
  s.sim = generate_trace(c, s.hyper);
  return s;
}

void check_valid(const ModelParams& p) {
  CHECK_NOTHROW(p.validate(1e-6));
  for (double v : p.mu) {
    CHECK(v >= 0.0);
  }
  for (double v : p.A.data()) {
    CHECK(v >= 0.0);
  }
}

} // namespace

TEST_SUITE("fit") {

TEST_CASE("moving average") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> expected{1.0, 1.5, 2.0, 3.0, 4.0};
  CHECK(moving_average(v, 3) == expected);
  CHECK(moving_average({}, 10).empty());
}

TEST_CASE("default initialization") {
  const Synthetic s = small_synthetic(3);
  const InferenceData data(s.sim.trace, s.hyper);
  const ModelParams p = default_init(data, 4);
  CHECK_NOTHROW(p.validate());
  CHECK(p.pi == p.phi);
  for (double e : p.eta) {
    CHECK(e == doctest::Approx(1.0 / 3.0));
  }
  for (double a : p.A.data()) {
    CHECK(a > 0.0);
  }
  const ModelParams q = default_init(data, 4);
  CHECK(q.A == p.A);
  CHECK(q.theta == p.theta);
  CHECK_FALSE(default_init(data, 5).phi == p.phi);
}

TEST_CASE("single community: recorded ELBO is the complete log-likelihood of the fit") {
  Synthetic s = small_synthetic(1, 200, 10);
  for (Event& e : s.sim.trace.events) {
    e.community = 0;
  }
  const FitReport r = fit(s.sim.trace, s.hyper);
  REQUIRE(r.elbo_trace.size() == 10);
  CHECK(r.elbo_trace.back() == complete_log_likelihood(r.params, s.hyper, s.sim.trace));
}

TEST_CASE("fitted parameters stay on their domains and the ELBO improves") {
  const Synthetic s = small_synthetic(2, 300, 40);
  const FitReport r = fit(s.sim.trace, s.hyper);
  check_valid(r.params);
  CHECK(r.params.pi == r.params.phi);
  CHECK(r.epochs == 40);
  const std::vector<double> smooth = moving_average(r.elbo_trace, 10);
  CHECK(smooth.back() > smooth.front());
}

TEST_CASE("ablations stay frozen") {
  const Synthetic s = small_synthetic(2, 200, 8);
  SUBCASE("no influence") {
    FitOptions o;
    o.no_influence = true;
    const FitReport r = fit(s.sim.trace, s.hyper, std::nullopt, o);
    for (double a : r.params.A.data()) {
      CHECK(a == 0.0);
    }
  }
  SUBCASE("no base rate") {
    FitOptions o;
    o.no_base = true;
    const FitReport r = fit(s.sim.trace, s.hyper, std::nullopt, o);
    for (double m : r.params.mu) {
      CHECK(m == doctest::Approx(1e-8).epsilon(1e-12));
    }
  }
  SUBCASE("no category") {
    FitOptions o;
    o.no_category = true;
    const FitReport r = fit(s.sim.trace, s.hyper, std::nullopt, o);
    for (double v : r.params.theta.data()) {
      CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("held blocks") {
    const InferenceData data(s.sim.trace, s.hyper);
    const ModelParams init = default_init(data, 3);
    FitOptions o;
    o.learn_mu = false;
    o.learn_theta = false;
    o.learn_phi = false;
    o.learn_pi = false;
    const FitReport r = fit(data, init, o);
    for (std::size_t i = 0; i < init.mu.size(); ++i) {
      CHECK(r.params.mu[i] == doctest::Approx(init.mu[i]).epsilon(1e-14));
    }
    for (std::size_t k = 0; k < init.phi.data().size(); ++k) {
      CHECK(r.params.phi.data()[k] == doctest::Approx(init.phi.data()[k]).epsilon(1e-14));
      CHECK(r.params.pi.data()[k] == init.pi.data()[k]);
    }
    CHECK_FALSE(r.params.A == init.A);
  }
}

TEST_CASE("fits are reproducible across runs and thread counts") {
  const Synthetic s = small_synthetic(2, 250, 6);
  configure_parallelism({1, true});
  const FitReport one = fit(s.sim.trace, s.hyper);
  configure_parallelism({4, true});
  const FitReport four = fit(s.sim.trace, s.hyper);
  const FitReport again = fit(s.sim.trace, s.hyper);
  configure_parallelism({});
  CHECK(one.elbo_trace == four.elbo_trace);
  CHECK(one.params.A == four.params.A);
  CHECK(one.params.phi == four.params.phi);
  CHECK(again.elbo_trace == four.elbo_trace);
  CHECK(again.params.theta == four.params.theta);
}

TEST_CASE("baseline variants all run") {
  const Synthetic s = small_synthetic(2, 150, 4);
  for (BaselineKind kind : {BaselineKind::none, BaselineKind::leave_one_out, BaselineKind::running_mean}) {
    FitOptions o;
    o.baseline = kind;
    const FitReport r = fit(s.sim.trace, s.hyper, std::nullopt, o);
    check_valid(r.params);
    CHECK(baseline_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(baseline_kind_from_string("median"), ContractError);
}

TEST_CASE("initialization errors") {
  const Synthetic s = small_synthetic(2, 100, 2);
  ModelParams wrong = random_params(6, 3, 4, 1);
  CHECK_THROWS_AS(fit(s.sim.trace, s.hyper, wrong), ContractError);
  ModelParams bad = random_params(6, 2, 4, 1);
  bad.phi(0, 0) = 2.0;
  CHECK_THROWS_AS(fit(s.sim.trace, s.hyper, bad), ContractError);
}

} // TEST_SUITE
