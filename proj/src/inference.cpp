#include "colab/inference.hpp"

#include "colab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace colab {

InferenceData::InferenceData(Trace trace, HyperParams hyper) : trace_(std::move(trace)), hyper_(std::move(hyper)) {
  trace_.validate();
  trace_.region.validate();
  hyper_.validate(trace_.n_users, trace_.n_categories);
  table_ = kernels::parallel::build_excitation_table(trace_, hyper_);
  children_ = build_child_table(table_);
  influence_mass_ = kernels::parallel::influence_mass(trace_, hyper_);
  base_mass_ = trace_.region.t_end * trace_.region.area();
  const auto I = static_cast<std::size_t>(trace_.n_users);
  events_by_user_.assign(I, {});
  user_counts_.assign(I, 0.0);
  user_category_counts_ = Matrix(I, static_cast<std::size_t>(trace_.n_categories), 0.0);
  for (std::size_t n = 0; n < trace_.size(); ++n) {
    const Event& e = trace_.events[n];
    const auto i = static_cast<std::size_t>(e.user);
    events_by_user_[i].push_back(static_cast<int>(n));
    user_counts_[i] += 1.0;
    user_category_counts_(i, static_cast<std::size_t>(e.category)) += 1.0;
  }
}

namespace {

void check_phi(const Matrix& phi, const Trace& trace) {
  if (phi.rows() != static_cast<std::size_t>(trace.n_users) || phi.cols() == 0) {
    throw ContractError("assignments: phi shape does not match the trace");
  }
}

void check_params(const InferenceData& data, const ModelParams& params) {
  const Trace& trace = data.trace();
  if (params.n_users() != trace.n_users || params.n_categories() != trace.n_categories ||
      params.A.rows() != static_cast<std::size_t>(trace.n_users) || params.phi.rows() != params.mu.size() ||
      params.pi.rows() != params.mu.size() || params.theta.rows() != params.eta.size() ||
      params.phi.cols() != params.eta.size() || params.pi.cols() != params.eta.size()) {
    throw ContractError("inference: parameter shapes do not match the trace");
  }
}

void check_assignments(const InferenceData& data, const ModelParams& params, const AssignmentSet& set) {
  if (set.samples.empty() || set.samples.size() != set.weights.size()) {
    throw ContractError("inference: empty or inconsistent assignment set");
  }
  const int M = params.n_communities();
  for (const auto& g : set.samples) {
    if (g.size() != data.trace().size()) {
      throw ContractError("inference: assignment length differs from the trace");
    }
    for (int v : g) {
      if (v < 0 || v >= M) {
        throw ContractError("inference: community out of range");
      }
    }
  }
}

double dlog_floored(double x) { return x > kProbFloor ? 1.0 / x : 0.0; }

// Σ_n Σ_m w_{i_n,m}·log x_m, summed in event order.
double expected_log_term(const Trace& trace, const Matrix& weights, auto&& log_of) {
  double total = 0.0;
  for (const Event& e : trace.events) {
    const auto row = weights.row(static_cast<std::size_t>(e.user));
    double inner = 0.0;
    for (std::size_t m = 0; m < row.size(); ++m) {
      if (row[m] == 0.0) {
        continue;
      }
      inner += row[m] * log_of(m, e);
    }
    total += inner;
  }
  return total;
}

double sum_log_intensity(const InferenceData& data, const ModelParams& params, std::span<const int> assignment,
                         std::vector<double>& lambda, bool parallel) {
  lambda.resize(data.trace().size());
  if (parallel) {
    kernels::parallel::intensities(data.trace(), data.table(), params, assignment, lambda);
  } else {
    kernels::serial::intensities(data.trace(), data.table(), params, assignment, lambda);
  }
  double total = 0.0;
  for (double l : lambda) {
    total += floored_log(l);
  }
  return total;
}

} // namespace

AssignmentSet sample_assignments(const Matrix& phi, const Trace& trace, int S, Rng& rng) {
  check_phi(phi, trace);
  if (S < 1) {
    throw ContractError("sample_assignments: S must be at least 1");
  }
  Matrix uniforms(static_cast<std::size_t>(S), trace.size());
  for (double& u : uniforms.data()) {
    u = uniform01(rng);
  }
  return assignments_from_uniforms(phi, trace, uniforms);
}

AssignmentSet assignments_from_uniforms(const Matrix& phi, const Trace& trace, const Matrix& uniforms) {
  check_phi(phi, trace);
  if (uniforms.cols() != trace.size() || uniforms.rows() == 0) {
    throw ContractError("assignments_from_uniforms: uniform table shape mismatch");
  }
  AssignmentSet set;
  const std::size_t S = uniforms.rows();
  set.samples.assign(S, std::vector<int>(trace.size(), 0));
  set.weights.assign(S, 1.0 / static_cast<double>(S));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t n = 0; n < trace.size(); ++n) {
      set.samples[s][n] =
          categorical_from_uniform(phi.row(static_cast<std::size_t>(trace.events[n].user)), uniforms(s, n));
    }
  }
  return set;
}

AssignmentSet enumerate_assignments(const Matrix& phi, const Trace& trace, std::size_t max_count) {
  check_phi(phi, trace);
  const std::size_t M = phi.cols();
  const std::size_t N = trace.size();
  std::size_t count = 1;
  for (std::size_t n = 0; n < N; ++n) {
    if (count > max_count / M) {
      throw ContractError("enumerate_assignments: too many assignments");
    }
    count *= M;
  }
  AssignmentSet set;
  set.exact = true;
  set.samples.reserve(count);
  set.weights.reserve(count);
  std::vector<int> g(N, 0);
  for (std::size_t a = 0; a < count; ++a) {
    double q = 1.0;
    for (std::size_t n = 0; n < N; ++n) {
      q *= phi(static_cast<std::size_t>(trace.events[n].user), static_cast<std::size_t>(g[n]));
    }
    set.samples.push_back(g);
    set.weights.push_back(q);
    for (std::size_t n = 0; n < N; ++n) {
      if (++g[n] < static_cast<int>(M)) {
        break;
      }
      g[n] = 0;
    }
  }
  return set;
}

std::optional<AssignmentSet> degenerate_assignment(const Matrix& phi, const Trace& trace) {
  check_phi(phi, trace);
  std::vector<int> g(trace.size(), 0);
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const auto row = phi.row(static_cast<std::size_t>(trace.events[n].user));
    const auto it = std::find(row.begin(), row.end(), 1.0);
    if (it == row.end()) {
      return std::nullopt;
    }
    g[n] = static_cast<int>(it - row.begin());
  }
  AssignmentSet set;
  set.exact = true;
  set.samples.push_back(std::move(g));
  set.weights.push_back(1.0);
  return set;
}

std::vector<int> trace_communities(const Trace& trace) {
  std::vector<int> g(trace.size());
  for (std::size_t n = 0; n < trace.size(); ++n) {
    if (!trace.events[n].community) {
      throw ContractError("complete likelihood: event " + std::to_string(n) + " has no community label");
    }
    g[n] = *trace.events[n].community;
  }
  return g;
}

double survival_integral(const InferenceData& data, const ModelParams& params) {
  check_params(data, params);
  const double mu_total = std::accumulate(params.mu.begin(), params.mu.end(), 0.0);
  const double eta_total = std::accumulate(params.eta.begin(), params.eta.end(), 0.0);
  double excitation = 0.0;
  const auto& a = params.A.data();
  const auto& k = data.influence_mass().data();
  for (std::size_t x = 0; x < a.size(); ++x) {
    excitation += a[x] * k[x];
  }
  return mu_total * eta_total * data.base_mass() + excitation;
}

double survival_integral(const ModelParams& params, const HyperParams& hyper, const Trace& trace) {
  return survival_integral(InferenceData(trace, hyper), params);
}

LikelihoodTerms complete_log_likelihood_terms(const InferenceData& data, const ModelParams& params,
                                              std::span<const int> assignment) {
  check_params(data, params);
  const Trace& trace = data.trace();
  if (assignment.size() != trace.size()) {
    throw ContractError("complete likelihood: assignment length differs from the trace");
  }
  for (int g : assignment) {
    if (g < 0 || g >= params.n_communities()) {
      throw ContractError("complete likelihood: community out of range");
    }
  }
  LikelihoodTerms out;
  std::vector<double> lambda;
  out.excitation = sum_log_intensity(data, params, assignment, lambda, true);
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const Event& e = trace.events[n];
    out.pi_term += floored_log(params.pi(static_cast<std::size_t>(e.user), static_cast<std::size_t>(assignment[n])));
  }
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const Event& e = trace.events[n];
    out.theta_term += floored_log(
        params.theta(static_cast<std::size_t>(assignment[n]), static_cast<std::size_t>(e.category)));
  }
  out.survival = survival_integral(data, params);
  out.value = out.excitation + out.pi_term + out.theta_term - out.survival;
  return out;
}

double complete_log_likelihood(const ModelParams& params, const HyperParams& hyper, const Trace& trace) {
  const InferenceData data(trace, hyper);
  return complete_log_likelihood_terms(data, params, trace_communities(data.trace())).value;
}

ElboEstimate elbo(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments) {
  check_params(data, params);
  check_assignments(data, params, assignments);
  const Trace& trace = data.trace();
  ElboEstimate out;
  out.samples = static_cast<int>(assignments.samples.size());
  out.exact = assignments.exact;
  std::vector<double> lambda;
  for (std::size_t s = 0; s < assignments.samples.size(); ++s) {
    out.excitation += assignments.weights[s] * sum_log_intensity(data, params, assignments.samples[s], lambda, true);
  }
  out.pi_term = expected_log_term(trace, params.phi, [&](std::size_t m, const Event& e) {
    return floored_log(params.pi(static_cast<std::size_t>(e.user), m));
  });
  out.theta_term = expected_log_term(trace, params.phi, [&](std::size_t m, const Event& e) {
    return floored_log(params.theta(m, static_cast<std::size_t>(e.category)));
  });
  out.survival = survival_integral(data, params);
  out.entropy = -expected_log_term(trace, params.phi, [&](std::size_t m, const Event& e) {
    return floored_log(params.phi(static_cast<std::size_t>(e.user), m));
  });
  out.value = out.excitation + out.pi_term + out.theta_term - out.survival + out.entropy;
  return out;
}

ElboEstimate elbo(const ModelParams& params, const HyperParams& hyper, const Trace& trace, int S,
                  std::uint64_t seed) {
  const InferenceData data(trace, hyper);
  if (auto exact = degenerate_assignment(params.phi, data.trace())) {
    return elbo(data, params, *exact);
  }
  Rng rng = make_rng(seed, 0x656c626fULL);
  return elbo(data, params, sample_assignments(params.phi, data.trace(), S, rng));
}

double log_evidence(const InferenceData& data, const ModelParams& params, std::size_t max_count) {
  check_params(data, params);
  const Matrix uniform(params.mu.size(), params.eta.size(), 1.0);
  const AssignmentSet all = enumerate_assignments(uniform, data.trace(), max_count);
  std::vector<double> values;
  values.reserve(all.samples.size());
  for (const auto& g : all.samples) {
    values.push_back(complete_log_likelihood_terms(data, params, g).value);
  }
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) {
    total += std::exp(v - peak);
  }
  return peak + std::log(total);
}

bool ElboGradient::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(mu) && finite(eta) && finite(A.data()) && finite(theta.data()) && finite(phi_logits.data());
}

ElboGradient elbo_gradient(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments,
                           const GradientOptions& options) {
  check_params(data, params);
  check_assignments(data, params, assignments);
  const Trace& trace = data.trace();
  const auto I = static_cast<std::size_t>(trace.n_users);
  const auto M = params.eta.size();
  const auto V = static_cast<std::size_t>(trace.n_categories);
  const std::size_t N = trace.size();
  const std::size_t S = assignments.samples.size();
  if (!options.baseline.empty() && options.baseline.size() != N) {
    throw ContractError("elbo_gradient: baseline length differs from the trace");
  }

  IntensityGradients ig(I, M);
  // F^s for every sample, kept for the leave-one-out baseline.
  std::vector<std::vector<double>> local;
  std::vector<double> lambda(N);
  std::vector<double> log_lambda(N);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& g = assignments.samples[s];
    if (options.parallel) {
      kernels::parallel::intensities(trace, data.table(), params, g, lambda);
      kernels::parallel::accumulate_intensity_gradients(trace, data.table(), params, g, lambda,
                                                        assignments.weights[s], ig);
    } else {
      kernels::serial::intensities(trace, data.table(), params, g, lambda);
      kernels::serial::accumulate_intensity_gradients(trace, data.table(), params, g, lambda,
                                                      assignments.weights[s], ig);
    }
    if (options.with_phi) {
      for (std::size_t n = 0; n < N; ++n) {
        log_lambda[n] = floored_log(lambda[n]);
      }
      std::vector<double> f(N);
      if (options.parallel) {
        kernels::parallel::local_objective(data.children(), log_lambda, f);
      } else {
        kernels::serial::local_objective(data.children(), log_lambda, f);
      }
      local.push_back(std::move(f));
    }
  }

  ElboGradient out;
  const double mu_total = std::accumulate(params.mu.begin(), params.mu.end(), 0.0);
  const double eta_total = std::accumulate(params.eta.begin(), params.eta.end(), 0.0);
  out.mu.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    out.mu[i] = ig.mu[i] - eta_total * data.base_mass();
  }
  out.eta.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    out.eta[m] = ig.eta[m] - mu_total * data.base_mass();
  }
  out.A = Matrix(I, I);
  for (std::size_t x = 0; x < I * I; ++x) {
    out.A.data()[x] = ig.A.data()[x] - data.influence_mass().data()[x];
  }
  const Matrix& n_ic = data.user_category_counts();
  out.theta = Matrix(M, V, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t c = 0; c < V; ++c) {
      double weight = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        weight += n_ic(i, c) * params.phi(i, m);
      }
      out.theta(m, c) = weight * dlog_floored(params.theta(m, c));
    }
  }

  out.phi_logits = Matrix(I, M, 0.0);
  if (!options.with_phi) {
    return out;
  }
  // Score-function part, already in logit coordinates:
  // Σ_s w_s Σ_n (F^s_n − b^s_n)(𝟙(g^s_n = m) − φ_{i_n,m}).
  const bool leave_one_out = options.baseline.empty() && !assignments.exact && S >= 2;
  std::vector<double> totals;
  if (leave_one_out) {
    totals.assign(N, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t n = 0; n < N; ++n) {
        totals[n] += local[s][n];
      }
    }
  }
  for (std::size_t i = 0; i < I; ++i) {
    const auto phi_i = params.phi.row(i);
    auto out_i = out.phi_logits.row(i);
    for (int sn : data.events_of(static_cast<int>(i))) {
      const auto n = static_cast<std::size_t>(sn);
      for (std::size_t s = 0; s < S; ++s) {
        const double f = local[s][n];
        double b = 0.0;
        if (!options.baseline.empty()) {
          b = options.baseline[n];
        } else if (leave_one_out) {
          b = (totals[n] - f) / static_cast<double>(S - 1);
        }
        const double coef = assignments.weights[s] * (f - b);
        const auto g = static_cast<std::size_t>(assignments.samples[s][n]);
        for (std::size_t m = 0; m < M; ++m) {
          out_i[m] += coef * ((m == g ? 1.0 : 0.0) - phi_i[m]);
        }
      }
    }
  }
  // Closed-form π, θ and entropy terms, chained through the softmax.
  std::vector<double> d(M);
  for (std::size_t i = 0; i < I; ++i) {
    const double n_i = data.user_counts()[i];
    const auto phi_i = params.phi.row(i);
    for (std::size_t m = 0; m < M; ++m) {
      double theta_part = 0.0;
      for (std::size_t c = 0; c < V; ++c) {
        if (n_ic(i, c) != 0.0) {
          theta_part += n_ic(i, c) * floored_log(params.theta(m, c));
        }
      }
      const double entropy_part =
          phi_i[m] > kProbFloor ? -(std::log(phi_i[m]) + 1.0) : -std::log(kProbFloor);
      d[m] = n_i * floored_log(params.pi(i, m)) + theta_part + n_i * entropy_part;
    }
    double mean = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      mean += phi_i[m] * d[m];
    }
    for (std::size_t m = 0; m < M; ++m) {
      out.phi_logits(i, m) += phi_i[m] * (d[m] - mean);
    }
  }
  return out;
}

Matrix grad_phi(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments,
                const GradientOptions& options) {
  GradientOptions opts = options;
  opts.with_phi = true;
  return elbo_gradient(data, params, assignments, opts).phi_logits;
}

ElboGradient grad_params(const InferenceData& data, const ModelParams& params, const AssignmentSet& assignments) {
  GradientOptions opts;
  opts.with_phi = false;
  return elbo_gradient(data, params, assignments, opts);
}

std::vector<double> mean_local_objective(const InferenceData& data, const ModelParams& params,
                                         const AssignmentSet& assignments) {
  check_params(data, params);
  check_assignments(data, params, assignments);
  const std::size_t N = data.trace().size();
  std::vector<double> lambda(N);
  std::vector<double> log_lambda(N);
  std::vector<double> f(N);
  std::vector<double> out(N, 0.0);
  for (std::size_t s = 0; s < assignments.samples.size(); ++s) {
    kernels::parallel::intensities(data.trace(), data.table(), params, assignments.samples[s], lambda);
    for (std::size_t n = 0; n < N; ++n) {
      log_lambda[n] = floored_log(lambda[n]);
    }
    kernels::parallel::local_objective(data.children(), log_lambda, f);
    for (std::size_t n = 0; n < N; ++n) {
      out[n] += assignments.weights[s] * f[n];
    }
  }
  return out;
}

} // namespace colab
