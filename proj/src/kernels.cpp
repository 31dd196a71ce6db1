#include "colab/kernels.hpp"

#include "colab/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <omp.h>

namespace colab {

ChildTable build_child_table(const ExcitationTable& table) {
  const std::size_t n_events = table.n_events();
  ChildTable out;
  out.offsets.assign(n_events + 1, 0);
  for (int k : table.source) {
    ++out.offsets[static_cast<std::size_t>(k) + 1];
  }
  for (std::size_t k = 0; k < n_events; ++k) {
    out.offsets[k + 1] += out.offsets[k];
  }
  out.child.resize(table.source.size());
  std::vector<std::size_t> cursor(out.offsets.begin(), out.offsets.end() - 1);
  for (std::size_t n = 0; n < n_events; ++n) {
    for (int k : table.sources(n)) {
      out.child[cursor[static_cast<std::size_t>(k)]++] = static_cast<int>(n);
    }
  }
  return out;
}

void IntensityGradients::add(const IntensityGradients& other) {
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] += other.mu[i];
  }
  for (std::size_t g = 0; g < eta.size(); ++g) {
    eta[g] += other.eta[g];
  }
  auto& a = A.data();
  const auto& b = other.A.data();
  for (std::size_t x = 0; x < a.size(); ++x) {
    a[x] += b[x];
  }
}

ParallelSettings& parallel_settings() {
  static ParallelSettings settings;
  return settings;
}

void configure_parallelism(const ParallelSettings& settings) {
  parallel_settings() = settings;
  if (settings.threads > 0) {
    omp_set_num_threads(settings.threads);
  }
}

namespace {

// First history index inside the cutoff window of event n.
std::size_t window_start(const Trace& trace, std::size_t n, double nu, double cutoff) {
  const double t = trace.events[n].t;
  const auto first = trace.events.begin();
  const auto it = std::partition_point(first, first + static_cast<std::ptrdiff_t>(n),
                                       [&](const Event& e) { return std::exp(-nu * (t - e.t)) < cutoff; });
  return static_cast<std::size_t>(it - first);
}

// One past the last history index strictly earlier than event n.
std::size_t window_end(const Trace& trace, std::size_t n) {
  const double t = trace.events[n].t;
  const auto first = trace.events.begin();
  const auto it = std::partition_point(first, first + static_cast<std::ptrdiff_t>(n),
                                       [&](const Event& e) { return e.t < t; });
  return static_cast<std::size_t>(it - first);
}

void fill_pairs(const Trace& trace, const HyperParams& hyper, std::size_t n, std::size_t begin,
                std::size_t end, int* source, double* weight) {
  const Event& e = trace.events[n];
  const Point loc = trace.location(e);
  const double h = hyper.h[static_cast<std::size_t>(e.user)];
  for (std::size_t k = begin; k < end; ++k) {
    const Event& src = trace.events[k];
    *source++ = static_cast<int>(k);
    *weight++ = temporal_kernel(e.t - src.t, hyper.nu) *
                spatial_kernel(distance(loc, trace.location(src)), h, hyper.kernel);
  }
}

// Distinct bandwidths and, per user, the index of its bandwidth.
struct BandwidthIndex {
  std::vector<double> values;
  std::vector<std::size_t> of_user;
};

BandwidthIndex index_bandwidths(const std::vector<double>& h) {
  BandwidthIndex out;
  std::map<double, std::size_t> seen;
  for (double v : h) {
    seen.emplace(v, 0);
  }
  for (auto& [v, idx] : seen) {
    idx = out.values.size();
    out.values.push_back(v);
  }
  out.of_user.reserve(h.size());
  for (double v : h) {
    out.of_user.push_back(seen.at(v));
  }
  return out;
}

std::vector<std::vector<int>> events_by_user(const Trace& trace) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(trace.n_users));
  for (std::size_t n = 0; n < trace.events.size(); ++n) {
    out[static_cast<std::size_t>(trace.events[n].user)].push_back(static_cast<int>(n));
  }
  return out;
}

// Venues that appear in the trace, in id order.
std::vector<int> used_venues(const Trace& trace) {
  std::vector<char> used(trace.venues.size(), 0);
  for (const Event& e : trace.events) {
    used[static_cast<std::size_t>(e.venue)] = 1;
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (used[v]) {
      out.push_back(static_cast<int>(v));
    }
  }
  return out;
}

// d log_floor(λ) / dλ
double inverse_intensity(double lambda) { return lambda > kProbFloor ? 1.0 / lambda : 0.0; }

double intensity_at(const Trace& trace, const ExcitationTable& table, const ModelParams& params,
                    std::span<const int> assignment, std::size_t n) {
  const Event& e = trace.events[n];
  const auto i = static_cast<std::size_t>(e.user);
  const int g = assignment[n];
  double excitation = 0.0;
  const auto sources = table.sources(n);
  const auto weights = table.weights(n);
  for (std::size_t p = 0; p < sources.size(); ++p) {
    const auto k = static_cast<std::size_t>(sources[p]);
    if (assignment[k] != g) {
      continue;
    }
    excitation += params.A(static_cast<std::size_t>(trace.events[k].user), i) * weights[p];
  }
  return params.mu[i] * params.eta[static_cast<std::size_t>(g)] + excitation;
}

// Contribution of one event to the (μ, η, A) gradients; η goes to `eta_out`.
void event_gradient(const Trace& trace, const ExcitationTable& table, const ModelParams& params,
                    std::span<const int> assignment, std::span<const double> lambda, double weight,
                    std::size_t n, IntensityGradients& grads, std::span<double> eta_out) {
  const Event& e = trace.events[n];
  const auto i = static_cast<std::size_t>(e.user);
  const int g = assignment[n];
  const double inv = weight * inverse_intensity(lambda[n]);
  if (inv == 0.0) {
    return;
  }
  grads.mu[i] += inv * params.eta[static_cast<std::size_t>(g)];
  eta_out[static_cast<std::size_t>(g)] += inv * params.mu[i];
  const auto sources = table.sources(n);
  const auto weights = table.weights(n);
  for (std::size_t p = 0; p < sources.size(); ++p) {
    const auto k = static_cast<std::size_t>(sources[p]);
    if (assignment[k] != g) {
      continue;
    }
    grads.A(static_cast<std::size_t>(trace.events[k].user), i) += inv * weights[p];
  }
}

double venue_score(const Trace& trace, const ModelParams& params, const HyperParams& hyper,
                   const ScoringQuery& query, int venue) {
  const Venue& v = trace.venues[static_cast<std::size_t>(venue)];
  const auto c = static_cast<std::size_t>(v.category);
  const auto user = static_cast<std::size_t>(query.user);
  const double h = hyper.h[user];
  double total = query.base_by_category[c];
  for (std::size_t p = 0; p < query.history.size(); ++p) {
    const Event& src = trace.events[static_cast<std::size_t>(query.history[p])];
    const double mark = query.mark_by_history[p * query.n_categories + c];
    const double a = params.A(static_cast<std::size_t>(src.user), user);
    if (mark == 0.0 || a == 0.0) {
      continue;
    }
    total += a * mark * temporal_kernel(query.t - src.t, hyper.nu) *
             spatial_kernel(distance(v.coords, trace.location(src)), h, hyper.kernel);
  }
  return floored_log(total);
}

void check_candidates(std::span<const int> candidates, std::span<ScoredVenue> out) {
  if (candidates.empty()) {
    throw ContractError("score_venues: empty candidate set");
  }
  if (out.size() != candidates.size()) {
    throw ContractError("score_venues: output size mismatch");
  }
}

} // namespace

namespace kernels::serial {

ExcitationTable build_excitation_table(const Trace& trace, const HyperParams& hyper) {
  ExcitationTable table;
  const std::size_t n_events = trace.size();
  table.offsets.assign(n_events + 1, 0);
  for (std::size_t n = 0; n < n_events; ++n) {
    const std::size_t begin = window_start(trace, n, hyper.nu, hyper.history_cutoff);
    const std::size_t end = window_end(trace, n);
    const std::size_t count = end > begin ? end - begin : 0;
    const std::size_t at = table.source.size();
    table.source.resize(at + count);
    table.weight.resize(at + count);
    fill_pairs(trace, hyper, n, begin, begin + count, table.source.data() + at, table.weight.data() + at);
    table.offsets[n + 1] = table.source.size();
  }
  return table;
}

Matrix influence_mass(const Trace& trace, const HyperParams& hyper) {
  const auto n_users = static_cast<std::size_t>(trace.n_users);
  const BandwidthIndex bw = index_bandwidths(hyper.h);
  const std::size_t H = bw.values.size();
  Matrix spatial(trace.venues.size(), H, 0.0);
  for (int v : used_venues(trace)) {
    for (std::size_t b = 0; b < H; ++b) {
      spatial(static_cast<std::size_t>(v), b) =
          spatial_rect_integral(trace.venues[static_cast<std::size_t>(v)].coords, trace.region,
                                bw.values[b], hyper.kernel, hyper.quadrature_order);
    }
  }
  Matrix out(n_users, n_users, 0.0);
  const auto by_user = events_by_user(trace);
  for (std::size_t u = 0; u < n_users; ++u) {
    std::vector<double> acc(H, 0.0);
    for (int n : by_user[u]) {
      const Event& e = trace.events[static_cast<std::size_t>(n)];
      const double kt = temporal_kernel_integral(trace.region.t_end - e.t, hyper.nu);
      for (std::size_t b = 0; b < H; ++b) {
        acc[b] += kt * spatial(static_cast<std::size_t>(e.venue), b);
      }
    }
    for (std::size_t j = 0; j < n_users; ++j) {
      out(u, j) = acc[bw.of_user[j]];
    }
  }
  return out;
}

void intensities(const Trace& trace, const ExcitationTable& table, const ModelParams& params,
                 std::span<const int> assignment, std::span<double> out) {
  for (std::size_t n = 0; n < trace.size(); ++n) {
    out[n] = intensity_at(trace, table, params, assignment, n);
  }
}

void accumulate_intensity_gradients(const Trace& trace, const ExcitationTable& table,
                                    const ModelParams& params, std::span<const int> assignment,
                                    std::span<const double> lambda, double weight,
                                    IntensityGradients& grads) {
  for (std::size_t n = 0; n < trace.size(); ++n) {
    event_gradient(trace, table, params, assignment, lambda, weight, n, grads, grads.eta);
  }
}

void local_objective(const ChildTable& children, std::span<const double> log_lambda, std::span<double> out) {
  for (std::size_t n = 0; n < log_lambda.size(); ++n) {
    double f = log_lambda[n];
    for (int m : children.children(n)) {
      f += log_lambda[static_cast<std::size_t>(m)];
    }
    out[n] = f;
  }
}

void score_venues(const Trace& trace, const ModelParams& params, const HyperParams& hyper,
                  const ScoringQuery& query, std::span<const int> candidates, std::span<ScoredVenue> out) {
  check_candidates(candidates, out);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    out[c] = {candidates[c], venue_score(trace, params, hyper, query, candidates[c])};
  }
}

} // namespace kernels::serial

namespace kernels::parallel {

ExcitationTable build_excitation_table(const Trace& trace, const HyperParams& hyper) {
  ExcitationTable table;
  const auto n_events = static_cast<std::ptrdiff_t>(trace.size());
  std::vector<std::size_t> begin(trace.size());
  table.offsets.assign(trace.size() + 1, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < n_events; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const std::size_t b = window_start(trace, un, hyper.nu, hyper.history_cutoff);
    const std::size_t e = window_end(trace, un);
    begin[un] = b;
    table.offsets[un + 1] = e > b ? e - b : 0;
  }
  for (std::size_t n = 0; n < trace.size(); ++n) {
    table.offsets[n + 1] += table.offsets[n];
  }
  table.source.resize(table.offsets.back());
  table.weight.resize(table.offsets.back());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t n = 0; n < n_events; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const std::size_t at = table.offsets[un];
    fill_pairs(trace, hyper, un, begin[un], begin[un] + (table.offsets[un + 1] - at),
               table.source.data() + at, table.weight.data() + at);
  }
  return table;
}

Matrix influence_mass(const Trace& trace, const HyperParams& hyper) {
  const auto n_users = static_cast<std::size_t>(trace.n_users);
  const BandwidthIndex bw = index_bandwidths(hyper.h);
  const std::size_t H = bw.values.size();
  const std::vector<int> venues = used_venues(trace);
  Matrix spatial(trace.venues.size(), H, 0.0);
  const auto n_cells = static_cast<std::ptrdiff_t>(venues.size() * H);
  // Warm the quadrature cache outside the parallel region.
  gauss_legendre(hyper.quadrature_order);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t cell = 0; cell < n_cells; ++cell) {
    const auto v = static_cast<std::size_t>(venues[static_cast<std::size_t>(cell) / H]);
    const std::size_t b = static_cast<std::size_t>(cell) % H;
    spatial(v, b) = spatial_rect_integral(trace.venues[v].coords, trace.region, bw.values[b], hyper.kernel,
                                          hyper.quadrature_order);
  }
  Matrix out(n_users, n_users, 0.0);
  const auto by_user = events_by_user(trace);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t su = 0; su < static_cast<std::ptrdiff_t>(n_users); ++su) {
    const auto u = static_cast<std::size_t>(su);
    std::vector<double> acc(H, 0.0);
    for (int n : by_user[u]) {
      const Event& e = trace.events[static_cast<std::size_t>(n)];
      const double kt = temporal_kernel_integral(trace.region.t_end - e.t, hyper.nu);
      for (std::size_t b = 0; b < H; ++b) {
        acc[b] += kt * spatial(static_cast<std::size_t>(e.venue), b);
      }
    }
    for (std::size_t j = 0; j < n_users; ++j) {
      out(u, j) = acc[bw.of_user[j]];
    }
  }
  return out;
}

void intensities(const Trace& trace, const ExcitationTable& table, const ModelParams& params,
                 std::span<const int> assignment, std::span<double> out) {
  const auto n_events = static_cast<std::ptrdiff_t>(trace.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t n = 0; n < n_events; ++n) {
    out[static_cast<std::size_t>(n)] = intensity_at(trace, table, params, assignment, static_cast<std::size_t>(n));
  }
}

void accumulate_intensity_gradients(const Trace& trace, const ExcitationTable& table,
                                    const ModelParams& params, std::span<const int> assignment,
                                    std::span<const double> lambda, double weight,
                                    IntensityGradients& grads) {
  // Every event only touches μ and the A column of its own user, so users are
  // independent work items. η is collected per user and reduced in user order,
  // which keeps the result independent of the schedule.
  const auto by_user = events_by_user(trace);
  const std::size_t n_users = by_user.size();
  const std::size_t M = grads.eta.size();
  Matrix eta_parts(n_users, M, 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t su = 0; su < static_cast<std::ptrdiff_t>(n_users); ++su) {
    const auto u = static_cast<std::size_t>(su);
    for (int n : by_user[u]) {
      event_gradient(trace, table, params, assignment, lambda, weight, static_cast<std::size_t>(n), grads,
                     eta_parts.row(u));
    }
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t g = 0; g < M; ++g) {
      grads.eta[g] += eta_parts(u, g);
    }
  }
}

void local_objective(const ChildTable& children, std::span<const double> log_lambda, std::span<double> out) {
  const auto n_events = static_cast<std::ptrdiff_t>(log_lambda.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t sn = 0; sn < n_events; ++sn) {
    const auto n = static_cast<std::size_t>(sn);
    double f = log_lambda[n];
    for (int m : children.children(n)) {
      f += log_lambda[static_cast<std::size_t>(m)];
    }
    out[n] = f;
  }
}

void score_venues(const Trace& trace, const ModelParams& params, const HyperParams& hyper,
                  const ScoringQuery& query, std::span<const int> candidates, std::span<ScoredVenue> out) {
  check_candidates(candidates, out);
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    out[uc] = {candidates[uc], venue_score(trace, params, hyper, query, candidates[uc])};
  }
}

} // namespace kernels::parallel
} // namespace colab
