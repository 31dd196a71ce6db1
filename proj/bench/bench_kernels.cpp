// Serial reference kernels against their OpenMP counterparts on one
// simulated workload. Arg(0) runs the serial version, Arg(1) the parallel one.
#include "colab/inference.hpp"
#include "colab/kernels.hpp"
#include "colab/random.hpp"
#include "colab/simulator.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace colab;

namespace {

struct Workload {
  Trace trace;
  HyperParams hyper;
  ModelParams params;
  ExcitationTable table;
  std::vector<int> assignment;
  std::vector<double> lambda;
};

const Workload& workload() {
  static const Workload w = [] {
    SimConfig c;
    c.n_events = 6000;
    c.n_users = 150;
    c.M = 8;
    c.V = 40;
    c.region = Region{1e9, 0.0, 0.05, 0.0, 0.05};
    c.venues = random_venues(c.region, c.V, 3, 7);
    c.mu_scale = 2e-5;
    c.A_init = InfluenceInit::sparse;
    c.in_degree = 2;
    c.seed = 7;
    Workload out;
    out.hyper.nu = 0.01;
    out.hyper.h.assign(static_cast<std::size_t>(c.n_users), 0.005);
    out.hyper.theta0.assign(static_cast<std::size_t>(c.V), 1.0);
    out.hyper.M = c.M;
    out.hyper.S = 10;
    SimResult sim = generate_trace(c, out.hyper);
    out.trace = std::move(sim.trace);
    out.params = std::move(sim.truth);
    out.table = kernels::serial::build_excitation_table(out.trace, out.hyper);
    out.assignment.resize(out.trace.size());
    for (std::size_t n = 0; n < out.trace.size(); ++n) {
      out.assignment[n] = *out.trace.events[n].community;
    }
    out.lambda.resize(out.trace.size());
    kernels::serial::intensities(out.trace, out.table, out.params, out.assignment, out.lambda);
    return out;
  }();
  return w;
}

void BM_ExcitationTable(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) {
    ExcitationTable t = state.range(0) ? kernels::parallel::build_excitation_table(w.trace, w.hyper)
                                       : kernels::serial::build_excitation_table(w.trace, w.hyper);
    benchmark::DoNotOptimize(t.weight.data());
  }
  state.counters["pairs"] = static_cast<double>(w.table.n_pairs());
}

void BM_InfluenceMass(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) {
    Matrix K = state.range(0) ? kernels::parallel::influence_mass(w.trace, w.hyper)
                              : kernels::serial::influence_mass(w.trace, w.hyper);
    benchmark::DoNotOptimize(K.data().data());
  }
}

void BM_Intensities(benchmark::State& state) {
  const Workload& w = workload();
  std::vector<double> out(w.trace.size());
  for (auto _ : state) {
    if (state.range(0)) {
      kernels::parallel::intensities(w.trace, w.table, w.params, w.assignment, out);
    } else {
      kernels::serial::intensities(w.trace, w.table, w.params, w.assignment, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_IntensityGradients(benchmark::State& state) {
  const Workload& w = workload();
  const auto I = static_cast<std::size_t>(w.trace.n_users);
  const auto M = static_cast<std::size_t>(w.hyper.M);
  for (auto _ : state) {
    IntensityGradients g(I, M);
    if (state.range(0)) {
      kernels::parallel::accumulate_intensity_gradients(w.trace, w.table, w.params, w.assignment, w.lambda, 1.0, g);
    } else {
      kernels::serial::accumulate_intensity_gradients(w.trace, w.table, w.params, w.assignment, w.lambda, 1.0, g);
    }
    benchmark::DoNotOptimize(g.A.data().data());
  }
}

void BM_ElboGradient(benchmark::State& state) {
  const Workload& w = workload();
  static const InferenceData data(w.trace, w.hyper);
  Rng rng = make_rng(3);
  const AssignmentSet set = sample_assignments(w.params.phi, w.trace, w.hyper.S, rng);
  GradientOptions opts;
  opts.parallel = state.range(0) != 0;
  for (auto _ : state) {
    ElboGradient g = elbo_gradient(data, w.params, set, opts);
    benchmark::DoNotOptimize(g.A.data().data());
  }
}

} // namespace

BENCHMARK(BM_ExcitationTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InfluenceMass)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Intensities)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_IntensityGradients)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ElboGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
