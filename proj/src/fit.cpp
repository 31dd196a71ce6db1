#include "colab/fit.hpp"

#include "colab/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace colab {

std::string to_string(BaselineKind kind) {
  switch (kind) {
  case BaselineKind::none:
    return "none";
  case BaselineKind::leave_one_out:
    return "leave_one_out";
  case BaselineKind::running_mean:
    return "running_mean";
  }
  return "none";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "none") {
    return BaselineKind::none;
  }
  if (s == "leave_one_out") {
    return BaselineKind::leave_one_out;
  }
  if (s == "running_mean") {
    return BaselineKind::running_mean;
  }
  throw ContractError("unknown baseline '" + s + "'");
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    sum += values[k];
    if (k >= window) {
      sum -= values[k - window];
    }
    out[k] = sum / static_cast<double>(std::min(k + 1, window));
  }
  return out;
}

ModelParams default_init(const InferenceData& data, std::uint64_t seed) {
  const Trace& trace = data.trace();
  const HyperParams& hyper = data.hyper();
  const auto I = static_cast<std::size_t>(trace.n_users);
  const auto M = static_cast<std::size_t>(hyper.M);
  const auto V = static_cast<std::size_t>(trace.n_categories);
  Rng rng = make_rng(seed, 0x66697469ULL);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  ModelParams p;
  p.mu.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    p.mu[i] = 0.5 * std::max(data.user_counts()[i], 0.5) / data.base_mass();
  }
  p.eta.assign(M, 1.0 / static_cast<double>(M));
  p.A = Matrix(I, I, 0.0);
  const Matrix& K = data.influence_mass();
  for (std::size_t j = 0; j < I; ++j) {
    double column_mass = 0.0;
    for (std::size_t k = 0; k < I; ++k) {
      column_mass += K(k, j);
    }
    const double scale = column_mass > 0.0 ? 0.5 * std::max(data.user_counts()[j], 0.5) / column_mass : 1e-6;
    for (std::size_t k = 0; k < I; ++k) {
      p.A(k, j) = scale * jitter(rng);
    }
  }
  p.theta = Matrix(M, V);
  for (std::size_t m = 0; m < M; ++m) {
    const auto row = sample_dirichlet(hyper.theta0, rng);
    std::copy(row.begin(), row.end(), p.theta.row(m).begin());
  }
  p.phi = Matrix(I, M);
  const std::vector<double> ones(M, 1.0);
  for (std::size_t i = 0; i < I; ++i) {
    const auto row = sample_dirichlet(ones, rng);
    std::copy(row.begin(), row.end(), p.phi.row(i).begin());
  }
  p.pi = p.phi;
  return p;
}

void apply_ablations(ModelParams& params, const FitOptions& options) {
  if (options.no_influence) {
    std::fill(params.A.data().begin(), params.A.data().end(), 0.0);
  }
  if (options.no_base) {
    std::fill(params.mu.begin(), params.mu.end(), options.no_base_mu);
  }
  if (options.no_category) {
    std::fill(params.theta.data().begin(), params.theta.data().end(),
              1.0 / static_cast<double>(params.theta.cols()));
  }
}

namespace {

// Adam on one block of unconstrained coordinates. Masked coordinates never move.
struct AdamBlock {
  std::vector<double> u;
  std::vector<double> m;
  std::vector<double> v;
  std::vector<char> active;

  void init(std::vector<double> values, std::vector<char> mask) {
    u = std::move(values);
    active = std::move(mask);
    m.assign(u.size(), 0.0);
    v.assign(u.size(), 0.0);
  }

  void step(const std::vector<double>& grad, double lr, long long t, const OptimizerSettings& opt) {
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t x = 0; x < u.size(); ++x) {
      if (!active[x]) {
        continue;
      }
      // Gradient ascent on the ELBO.
      m[x] = opt.beta1 * m[x] + (1.0 - opt.beta1) * grad[x];
      v[x] = opt.beta2 * v[x] + (1.0 - opt.beta2) * grad[x] * grad[x];
      u[x] += lr * (m[x] / c1) / (std::sqrt(v[x] / c2) + opt.epsilon);
    }
  }
};

std::vector<double> log_values(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  for (std::size_t x = 0; x < values.size(); ++x) {
    out[x] = values[x] > 0.0 ? std::log(values[x]) : -INFINITY;
  }
  return out;
}

std::vector<char> positive_mask(const std::vector<double>& values, bool learn) {
  std::vector<char> out(values.size());
  for (std::size_t x = 0; x < values.size(); ++x) {
    out[x] = learn && values[x] > 0.0 ? 1 : 0;
  }
  return out;
}

std::vector<double> logits_of(const Matrix& rows) {
  std::vector<double> out(rows.data().size());
  for (std::size_t x = 0; x < out.size(); ++x) {
    out[x] = std::log(std::max(rows.data()[x], 1e-300));
  }
  return out;
}

void exp_into(const std::vector<double>& u, std::vector<double>& out) {
  for (std::size_t x = 0; x < u.size(); ++x) {
    out[x] = std::exp(u[x]);
  }
}

void softmax_into(const std::vector<double>& logits, Matrix& out) {
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double* z = logits.data() + r * cols;
    const double peak = *std::max_element(z, z + cols);
    double sum = 0.0;
    auto row = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(z[c] - peak);
      sum += row[c];
    }
    for (double& v : row) {
      v /= sum;
    }
  }
}

// ∂/∂ζ of f(softmax(ζ)) per row, given ∂f/∂p.
std::vector<double> softmax_chain(const Matrix& p, const Matrix& grad) {
  std::vector<double> out(p.data().size());
  const std::size_t cols = p.cols();
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      mean += p(r, c) * grad(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = p(r, c) * (grad(r, c) - mean);
    }
  }
  return out;
}

std::vector<double> times(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t x = 0; x < a.size(); ++x) {
    out[x] = a[x] * b[x];
  }
  return out;
}

void check_finite(const ElboGradient& grad, int epoch, int step) {
  if (grad.all_finite()) {
    return;
  }
  auto first_bad = [](const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); });
  };
  std::string block = "phi";
  if (first_bad(grad.mu)) {
    block = "mu";
  } else if (first_bad(grad.eta)) {
    block = "eta";
  } else if (first_bad(grad.A.data())) {
    block = "A";
  } else if (first_bad(grad.theta.data())) {
    block = "theta";
  }
  std::ostringstream msg;
  msg << "fit: non-finite gradient in " << block << " at epoch " << epoch << ", step " << step;
  throw std::runtime_error(msg.str());
}

AssignmentSet draw(const Matrix& phi, const Trace& trace, int S, Rng& rng) {
  if (auto exact = degenerate_assignment(phi, trace)) {
    return *exact;
  }
  return sample_assignments(phi, trace, S, rng);
}

} // namespace

FitReport fit(const Trace& trace, const HyperParams& hyper, std::optional<ModelParams> init,
              const FitOptions& options) {
  const InferenceData data(trace, hyper);
  return fit(data, std::move(init), options);
}

FitReport fit(const InferenceData& data, std::optional<ModelParams> init, const FitOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Trace& trace = data.trace();
  const HyperParams& hyper = data.hyper();
  const OptimizerSettings& opt = hyper.optimizer;

  ModelParams params = init ? *init : default_init(data, hyper.seed);
  params.validate(1e-6);
  if (params.n_communities() != hyper.M) {
    throw ContractError("fit: initial parameters have the wrong number of communities");
  }
  apply_ablations(params, options);

  const bool learn_mu = options.learn_mu && !options.no_base;
  const bool learn_A = options.learn_A && !options.no_influence;
  const bool learn_theta = options.learn_theta && !options.no_category;

  AdamBlock mu_block;
  AdamBlock eta_block;
  AdamBlock A_block;
  AdamBlock theta_block;
  AdamBlock phi_block;
  mu_block.init(log_values(params.mu), positive_mask(params.mu, learn_mu));
  eta_block.init(log_values(params.eta), positive_mask(params.eta, options.learn_eta));
  A_block.init(log_values(params.A.data()), positive_mask(params.A.data(), learn_A));
  theta_block.init(logits_of(params.theta), std::vector<char>(params.theta.data().size(), learn_theta ? 1 : 0));
  phi_block.init(logits_of(params.phi), std::vector<char>(params.phi.data().size(), options.learn_phi ? 1 : 0));

  // Fixed uniforms so that the recorded ELBO is a smooth function of the parameters.
  Rng elbo_rng = make_rng(hyper.seed, 0x7472616365ULL);
  Matrix elbo_uniforms(static_cast<std::size_t>(hyper.S), trace.size());
  for (double& u : elbo_uniforms.data()) {
    u = uniform01(elbo_rng);
  }

  std::vector<double> running_baseline;
  FitReport report;
  long long t = 0;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const double lr = opt.learning_rate / std::sqrt(static_cast<double>(epoch));
    for (int step = 0; step < opt.steps_per_epoch; ++step) {
      Rng rng = make_rng(hyper.seed, 0x73746570ULL, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step));
      const AssignmentSet samples = draw(params.phi, trace, hyper.S, rng);
      GradientOptions gopts;
      gopts.with_phi = options.learn_phi;
      if (options.baseline == BaselineKind::running_mean && !running_baseline.empty()) {
        gopts.baseline = running_baseline;
      }
      std::vector<double> zeros;
      if (options.baseline == BaselineKind::none) {
        zeros.assign(trace.size(), 0.0);
        gopts.baseline = zeros;
      }
      const ElboGradient grad = elbo_gradient(data, params, samples, gopts);
      check_finite(grad, epoch, step);
      ++t;
      mu_block.step(times(grad.mu, params.mu), lr, t, opt);
      eta_block.step(times(grad.eta, params.eta), lr, t, opt);
      A_block.step(times(grad.A.data(), params.A.data()), lr, t, opt);
      theta_block.step(softmax_chain(params.theta, grad.theta), lr, t, opt);
      phi_block.step(grad.phi_logits.data(), lr, t, opt);
      if (options.baseline == BaselineKind::running_mean && options.learn_phi) {
        const std::vector<double> f = mean_local_objective(data, params, samples);
        if (running_baseline.empty()) {
          running_baseline = f;
        } else {
          for (std::size_t n = 0; n < f.size(); ++n) {
            running_baseline[n] =
                options.running_mean_decay * running_baseline[n] + (1.0 - options.running_mean_decay) * f[n];
          }
        }
      }
      exp_into(mu_block.u, params.mu);
      exp_into(eta_block.u, params.eta);
      exp_into(A_block.u, params.A.data());
      softmax_into(theta_block.u, params.theta);
      softmax_into(phi_block.u, params.phi);
      if (options.learn_pi) {
        params.pi = params.phi;
      }
    }
    if (options.record_elbo) {
      const auto exact = degenerate_assignment(params.phi, trace);
      const double value =
          elbo(data, params, exact ? *exact : assignments_from_uniforms(params.phi, trace, elbo_uniforms)).value;
      report.elbo_trace.push_back(value);
      if (options.on_epoch) {
        options.on_epoch(epoch, value);
      }
    } else if (options.on_epoch) {
      options.on_epoch(epoch, NAN);
    }
    report.epochs = epoch;
  }
  const std::vector<double> smooth = moving_average(report.elbo_trace, 10);
  if (smooth.size() >= 20) {
    const double last = smooth.back();
    const double before = smooth[smooth.size() - 11];
    report.converged = std::abs(last - before) <= options.convergence_tolerance * std::max(1.0, std::abs(last));
  }
  params.validate(1e-6);
  report.params = std::move(params);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

} // namespace colab
