#include "colab/inference.hpp"
#include "colab/kernels.hpp"
#include "colab/model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace colab;
using namespace colab::testing;

namespace {

struct ThreadGuard {
  explicit ThreadGuard(int threads) { configure_parallelism({threads, false}); }
  ~ThreadGuard() { configure_parallelism({}); }
};

std::vector<int> random_assignment(const Trace& t, int M, std::uint64_t seed) {
  Rng rng = make_rng(seed, 5);
  std::vector<int> out(t.size());
  for (int& g : out) {
    g = static_cast<int>(uniform01(rng) * M);
  }
  return out;
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("excitation table lists strictly earlier events above the cutoff") {
  Trace t = grid_trace(2, 1, Region{100.0, 0.0, 1.0, 0.0, 1.0});
  add_venue(t, 0.5, 0.5, 0);
  for (double time : {0.0, 1.0, 1.0, 2.0, 80.0}) {
    add_event(t, time, 0, 0);
  }
  HyperParams h = hyper_for(2, 1, 1, 1.0, 0.1);
  h.history_cutoff = std::exp(-10.0);
  const ExcitationTable table = kernels::serial::build_excitation_table(t, h);
  REQUIRE(table.n_events() == 5);
  CHECK(table.sources(0).size() == 0);
  CHECK(table.sources(1).size() == 1);
  // Simultaneous events do not excite each other.
  CHECK(table.sources(2).size() == 1);
  REQUIRE(table.sources(3).size() == 3);
  // Weights carry κ_t·κ_s; all events share one venue, so d = 0.
  CHECK(table.weights(3)[0] == doctest::Approx(std::exp(-2.0) * spatial_kernel(0.0, 0.1)));
  CHECK(table.weights(3)[2] == doctest::Approx(std::exp(-1.0) * spatial_kernel(0.0, 0.1)));
  CHECK(table.sources(4).size() == 0);

  const ChildTable children = build_child_table(table);
  CHECK(children.children(0).size() == 3);
  CHECK(children.children(3).size() == 0);
}

TEST_CASE("serial and parallel kernels agree") {
  const Trace t = random_trace(6, 4, 9, 120, 21, 0, 30.0);
  const HyperParams h = hyper_for(6, 4, 3, 0.3, 0.2);
  const ModelParams p = random_params(6, 3, 4, 22);
  const std::vector<int> assignment = random_assignment(t, 3, 23);
  ThreadGuard guard(4);

  const ExcitationTable ts = kernels::serial::build_excitation_table(t, h);
  const ExcitationTable tp = kernels::parallel::build_excitation_table(t, h);
  CHECK(ts == tp);

  CHECK(kernels::serial::influence_mass(t, h) == kernels::parallel::influence_mass(t, h));

  std::vector<double> ls(t.size());
  std::vector<double> lp(t.size());
  kernels::serial::intensities(t, ts, p, assignment, ls);
  kernels::parallel::intensities(t, ts, p, assignment, lp);
  CHECK(ls == lp);

  IntensityGradients gs(6, 3);
  IntensityGradients gp(6, 3);
  kernels::serial::accumulate_intensity_gradients(t, ts, p, assignment, ls, 0.5, gs);
  kernels::parallel::accumulate_intensity_gradients(t, ts, p, assignment, lp, 0.5, gp);
  CHECK(gs.mu == gp.mu);
  CHECK(gs.A == gp.A);
  // η partials are reduced per user in the parallel path: same value up to rounding...
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK(gp.eta[g] == doctest::Approx(gs.eta[g]).epsilon(1e-13));
  }
  // ...and bitwise independent of the thread count.
  {
    ThreadGuard one(1);
    IntensityGradients g1(6, 3);
    kernels::parallel::accumulate_intensity_gradients(t, ts, p, assignment, lp, 0.5, g1);
    CHECK(g1.eta == gp.eta);
    CHECK(g1.A == gp.A);
  }

  const ChildTable children = build_child_table(ts);
  std::vector<double> log_lambda(t.size());
  for (std::size_t n = 0; n < t.size(); ++n) {
    log_lambda[n] = std::log(ls[n]);
  }
  std::vector<double> fs(t.size());
  std::vector<double> fp(t.size());
  kernels::serial::local_objective(children, log_lambda, fs);
  kernels::parallel::local_objective(children, log_lambda, fp);
  CHECK(fs == fp);
}

TEST_CASE("intensities match the reference model evaluation") {
  const Trace t = random_trace(4, 3, 6, 60, 31, 0, 20.0);
  const HyperParams h = hyper_for(4, 3, 2, 0.4, 0.25);
  const ModelParams p = random_params(4, 2, 3, 32);
  const std::vector<int> assignment = random_assignment(t, 2, 33);
  const ExcitationTable table = kernels::serial::build_excitation_table(t, h);
  std::vector<double> lambda(t.size());
  kernels::serial::intensities(t, table, p, assignment, lambda);
  for (std::size_t n = 0; n < t.size(); ++n) {
    const Event& e = t.events[n];
    const double reference = community_intensity(p, h, t, e.user, assignment[n], e.t, e.venue, assignment);
    CHECK(lambda[n] == doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("influence mass equals the per-event survival contributions") {
  const Trace t = random_trace(3, 2, 5, 25, 41, 0, 15.0);
  const HyperParams h = [] {
    HyperParams x = hyper_for(3, 2, 1, 0.2, 0.1);
    x.h = {0.1, 0.2, 0.1};
    return x;
  }();
  const Matrix K = kernels::serial::influence_mass(t, h);
  Matrix expected(3, 3, 0.0);
  for (const Event& e : t.events) {
    for (std::size_t j = 0; j < 3; ++j) {
      expected(static_cast<std::size_t>(e.user), j) +=
          temporal_kernel_integral(t.region.t_end - e.t, h.nu) *
          spatial_rect_integral(t.location(e), t.region, h.h[j], h.kernel, h.quadrature_order);
    }
  }
  for (std::size_t k = 0; k < 9; ++k) {
    CHECK(K.data()[k] == doctest::Approx(expected.data()[k]).epsilon(1e-12));
  }
}

TEST_CASE("venue scores: serial and parallel agree and handle empty candidates") {
  const Trace t = random_trace(3, 2, 7, 30, 51, 0, 10.0);
  const HyperParams h = hyper_for(3, 2, 2, 0.5, 0.2);
  const ModelParams p = random_params(3, 2, 2, 52);
  std::vector<int> history(t.size());
  for (std::size_t n = 0; n < t.size(); ++n) {
    history[n] = static_cast<int>(n);
  }
  std::vector<double> base(2, 0.1);
  std::vector<double> marks(t.size() * 2, 0.3);
  ScoringQuery q{1, 11.0, history, base, marks, 2};
  std::vector<int> candidates{0, 1, 2, 3, 4, 5, 6};
  std::vector<ScoredVenue> a(candidates.size());
  std::vector<ScoredVenue> b(candidates.size());
  ThreadGuard guard(3);
  kernels::serial::score_venues(t, p, h, q, candidates, a);
  kernels::parallel::score_venues(t, p, h, q, candidates, b);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].venue == b[k].venue);
    CHECK(a[k].score == b[k].score);
  }
  std::vector<ScoredVenue> none;
  CHECK_THROWS_AS(kernels::serial::score_venues(t, p, h, q, std::vector<int>{}, none), ContractError);
}

} // TEST_SUITE
