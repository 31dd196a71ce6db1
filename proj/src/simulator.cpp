#include "colab/simulator.hpp"

#include "colab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace colab {

void SimConfig::validate() const {
  if (n_events < 0) {
    throw ContractError("sim: n_events must be non-negative");
  }
  if (n_users < 1 || M < 1 || V < 1) {
    throw ContractError("sim: n_users, M and V must be positive");
  }
  region.validate();
  if (venues.empty()) {
    throw ContractError("sim: venue set is empty");
  }
  for (std::size_t v = 0; v < venues.size(); ++v) {
    if (venues[v].id != static_cast<int>(v)) {
      throw ContractError("sim: venue ids must be dense 0..L-1");
    }
    if (venues[v].category < 0 || venues[v].category >= V) {
      throw ContractError("sim: venue category out of range");
    }
    if (!region.contains(venues[v].coords)) {
      throw ContractError("sim: venue outside the region");
    }
  }
  if (!user_checkins.empty() && user_checkins.size() != static_cast<std::size_t>(n_users)) {
    throw ContractError("sim: user_checkins needs one entry per user");
  }
  if (!(mu_scale >= 0.0)) {
    throw ContractError("sim: mu_scale must be non-negative");
  }
  if (source_fraction < 0.0 || source_fraction > 1.0) {
    throw ContractError("sim: source_fraction must lie in [0, 1]");
  }
  if (in_degree < 1) {
    throw ContractError("sim: in_degree must be positive");
  }
  if (!(pi_alpha > 0.0) || !(theta_alpha > 0.0) || !(eta_alpha > 0.0)) {
    throw ContractError("sim: Dirichlet parameters must be positive");
  }
  if (!(bound_safety >= 1.0)) {
    throw ContractError("sim: bound_safety must be at least 1");
  }
}

std::vector<Venue> random_venues(const Region& region, int n_categories, int per_category, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x76656e75ULL);
  std::uniform_real_distribution<double> ux(region.x_min, region.x_max);
  std::uniform_real_distribution<double> uy(region.y_min, region.y_max);
  std::vector<Venue> out;
  out.reserve(static_cast<std::size_t>(n_categories * per_category));
  for (int c = 0; c < n_categories; ++c) {
    for (int k = 0; k < per_category; ++k) {
      const double x = ux(rng);
      const double y = uy(rng);
      out.push_back({static_cast<int>(out.size()), {x, y}, c});
    }
  }
  return out;
}

namespace {

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Matrix init_influence(const SimConfig& config, const Matrix& pi, Rng& rng) {
  const auto I = static_cast<std::size_t>(config.n_users);
  Matrix A(I, I, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (config.A_init == InfluenceInit::dense) {
    for (double& a : A.data()) {
      a = unit(rng);
    }
    normalize_columns(A);
    return A;
  }
  const std::vector<int> home = argmax_rows(pi);
  std::vector<int> order(I);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_sources = static_cast<std::size_t>(std::lround(config.source_fraction * static_cast<double>(I)));
  std::vector<char> is_source(I, 0);
  for (std::size_t s = 0; s < n_sources && s < I; ++s) {
    is_source[static_cast<std::size_t>(order[s])] = 1;
  }
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  for (std::size_t j = 0; j < I; ++j) {
    if (is_source[j]) {
      continue;
    }
    std::vector<int> pool;
    std::vector<int> fallback;
    for (std::size_t i = 0; i < I; ++i) {
      if (i == j && !config.self_excitation) {
        continue;
      }
      fallback.push_back(static_cast<int>(i));
      if (!config.within_community || home[i] == home[j]) {
        pool.push_back(static_cast<int>(i));
      }
    }
    if (pool.empty()) {
      pool = fallback;
    }
    if (pool.empty()) {
      continue;
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t degree = std::min<std::size_t>(static_cast<std::size_t>(config.in_degree), pool.size());
    for (std::size_t d = 0; d < degree; ++d) {
      A(static_cast<std::size_t>(pool[d]), j) = magnitude(rng);
    }
  }
  normalize_columns(A);
  return A;
}

Matrix dirichlet_rows(std::size_t rows, std::size_t cols, double alpha, int draws, Rng& rng) {
  Matrix out(rows, cols, 0.0);
  const std::vector<double> a(cols, alpha);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<double> p = sample_dirichlet_multinomial(a, draws, rng);
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

} // namespace

ModelParams init_params(const SimConfig& config) {
  config.validate();
  const auto I = static_cast<std::size_t>(config.n_users);
  const auto M = static_cast<std::size_t>(config.M);
  const auto V = static_cast<std::size_t>(config.V);
  Rng rng = make_rng(config.seed, 0x696e6974ULL);
  ModelParams p;
  p.mu.resize(I);
  for (std::size_t i = 0; i < I; ++i) {
    const double n_i = config.user_checkins.empty()
                           ? static_cast<double>(config.n_events) / static_cast<double>(config.n_users)
                           : config.user_checkins[i];
    p.mu[i] = config.mu_scale * n_i;
  }
  p.eta = sample_dirichlet(std::vector<double>(M, config.eta_alpha), rng);
  p.pi = dirichlet_rows(I, M, config.pi_alpha, config.pi_draws, rng);
  p.theta = dirichlet_rows(M, V, config.theta_alpha, config.theta_draws, rng);
  p.A = init_influence(config, p.pi, rng);
  p.phi = p.pi;
  return p;
}

int snap_to_venue(Point p, std::span<const Venue> venues, std::optional<int> category) {
  if (venues.empty()) {
    throw ContractError("snap_to_venue: empty venue set");
  }
  auto nearest = [&](bool filter) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const Venue& v : venues) {
      if (filter && v.category != *category) {
        continue;
      }
      const double d = distance(p, v.coords);
      if (d < best_d || (d == best_d && v.id < best)) {
        best = v.id;
        best_d = d;
      }
    }
    return best;
  };
  if (category) {
    const int found = nearest(true);
    if (found >= 0) {
      return found;
    }
  }
  return nearest(false);
}

int sample_user(std::span<const double> intensities, Rng& rng) { return sample_categorical(intensities, rng); }

CommunityAndCategory sample_community_and_category(const ModelParams& params, int user, Rng& rng) {
  CommunityAndCategory out;
  out.community = sample_categorical(params.pi.row(static_cast<std::size_t>(user)), rng);
  out.category = sample_categorical(params.theta.row(static_cast<std::size_t>(out.community)), rng);
  return out;
}

namespace {

// Incremental simulation state: accepted events plus the start of the active
// history window.
class Simulation {
public:
  Simulation(const SimConfig& config, const HyperParams& hyper, const ModelParams& truth)
      : config_(config), hyper_(hyper), truth_(truth), rng_(make_rng(config.seed, 0x73696dULL)) {
    const auto I = static_cast<std::size_t>(config.n_users);
    eta_total_ = std::accumulate(truth.eta.begin(), truth.eta.end(), 0.0);
    peak_.resize(I);
    for (std::size_t i = 0; i < I; ++i) {
      peak_[i] = spatial_kernel(0.0, hyper.h[i], hyper.kernel);
    }
    by_category_.resize(static_cast<std::size_t>(config.V));
    for (const Venue& v : config.venues) {
      by_category_[static_cast<std::size_t>(v.category)].push_back(v);
    }
  }

  SimResult run() {
    SimResult result;
    Trace& trace = result.trace;
    trace.venues = config_.venues;
    trace.region = config_.region;
    trace.n_users = config_.n_users;
    trace.n_categories = config_.V;
    const double area = config_.region.area();
    const auto I = static_cast<std::size_t>(config_.n_users);
    std::vector<double> lambda_user(I);
    double t = 0.0;
    while (static_cast<int>(trace.events.size()) < config_.n_events) {
      advance_window(trace, t);
      const double bound = config_.bound_safety * intensity_bound(trace, t);
      if (!(bound > 0.0)) {
        result.stats.horizon_exhausted = true;
        break;
      }
      std::exponential_distribution<double> wait(bound * area);
      t += wait(rng_);
      if (t > config_.region.t_end) {
        result.stats.horizon_exhausted = true;
        break;
      }
      advance_window(trace, t);
      ++result.stats.proposals;
      const Point proposal = propose_location(trace);
      if (!config_.region.contains(proposal)) {
        ++result.stats.rejections;
        continue;
      }
      double total = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        lambda_user[i] = user_intensity(trace, static_cast<int>(i), -1, t, proposal);
        total += lambda_user[i];
      }
      const double ratio = total / bound;
      result.stats.max_bound_ratio = std::max(result.stats.max_bound_ratio, ratio);
      if (ratio > 1.0 + 1e-12) {
        throw std::logic_error("simulate: intensity exceeds the thinning bound");
      }
      if (uniform01(rng_) * bound > total) {
        ++result.stats.rejections;
        continue;
      }
      Event e;
      e.t = t;
      e.user = sample_user(lambda_user, rng_);
      int g = 0;
      if (config_.community == CommunitySampling::prior) {
        g = sample_categorical(truth_.pi.row(static_cast<std::size_t>(e.user)), rng_);
      } else {
        std::vector<double> by_g(truth_.eta.size());
        for (std::size_t m = 0; m < by_g.size(); ++m) {
          by_g[m] = user_intensity(trace, e.user, static_cast<int>(m), t, proposal);
        }
        g = sample_categorical(by_g, rng_);
      }
      e.community = g;
      const int c = sample_categorical(truth_.theta.row(static_cast<std::size_t>(g)), rng_);
      const auto& same = by_category_[static_cast<std::size_t>(c)];
      e.venue = same.empty() ? snap_to_venue(proposal, config_.venues) : snap_to_venue(proposal, same);
      e.category = config_.venues[static_cast<std::size_t>(e.venue)].category;
      trace.events.push_back(e);
    }
    if (!trace.events.empty() && !result.stats.horizon_exhausted) {
      trace.region.t_end = trace.events.back().t;
    }
    result.truth = truth_;
    return result;
  }

private:
  void advance_window(const Trace& trace, double t) {
    while (window_ < trace.events.size() &&
           std::exp(-hyper_.nu * (t - trace.events[window_].t)) < hyper_.history_cutoff) {
      ++window_;
    }
  }

  // Σ_i [μ_i Σ_g η_g + Σ_k A_{i_k,i} κ_t(t − t_k) κ_s(0; h_i)]; only decays until the next event.
  double intensity_bound(const Trace& trace, double t) const {
    const auto I = static_cast<std::size_t>(config_.n_users);
    double total = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      total += truth_.mu[i] * eta_total_;
    }
    for (std::size_t k = window_; k < trace.events.size(); ++k) {
      const Event& src = trace.events[k];
      const double kt = temporal_kernel(t - src.t, hyper_.nu);
      const auto row = truth_.A.row(static_cast<std::size_t>(src.user));
      for (std::size_t i = 0; i < I; ++i) {
        total += row[i] * kt * peak_[i];
      }
    }
    return total;
  }

  // λ_{user,g}(t, ℓ), or Σ_g λ_{user,g} when g < 0.
  double user_intensity(const Trace& trace, int user, int g, double t, Point loc) const {
    const auto i = static_cast<std::size_t>(user);
    double value = g < 0 ? truth_.mu[i] * eta_total_ : truth_.mu[i] * truth_.eta[static_cast<std::size_t>(g)];
    for (std::size_t k = window_; k < trace.events.size(); ++k) {
      const Event& src = trace.events[k];
      if (g >= 0 && *src.community != g) {
        continue;
      }
      const double a = truth_.A(static_cast<std::size_t>(src.user), i);
      if (a == 0.0 || !(src.t < t)) {
        continue;
      }
      value += a * temporal_kernel(t - src.t, hyper_.nu) *
               spatial_kernel(distance(loc, trace.location(src)), hyper_.h[i], hyper_.kernel);
    }
    return value;
  }

  Point propose_location(const Trace& trace) {
    const Region& r = config_.region;
    if (config_.proposal == LocationProposal::gaussian_previous && !trace.events.empty()) {
      const Event& prev = trace.events.back();
      const double sd = config_.proposal_std > 0.0 ? config_.proposal_std
                                                   : hyper_.h[static_cast<std::size_t>(prev.user)];
      std::normal_distribution<double> noise(0.0, sd);
      const Point c = trace.location(prev);
      const double x = c.x + noise(rng_);
      const double y = c.y + noise(rng_);
      return {x, y};
    }
    const double x = r.x_min + uniform01(rng_) * r.width();
    const double y = r.y_min + uniform01(rng_) * r.height();
    return {x, y};
  }

  const SimConfig& config_;
  const HyperParams& hyper_;
  const ModelParams& truth_;
  Rng rng_;
  double eta_total_ = 0.0;
  std::vector<double> peak_;
  std::vector<std::vector<Venue>> by_category_;
  std::size_t window_ = 0;
};

} // namespace

SimResult simulate(const SimConfig& config, const HyperParams& hyper, const ModelParams& truth) {
  config.validate();
  hyper.validate(config.n_users, config.V);
  truth.validate();
  if (truth.n_users() != config.n_users || truth.n_communities() != config.M || truth.n_categories() != config.V) {
    throw ContractError("simulate: parameter shapes do not match the configuration");
  }
  return Simulation(config, hyper, truth).run();
}

SimResult generate_trace(const SimConfig& config, const HyperParams& hyper) {
  const ModelParams truth = init_params(config);
  SimResult result = simulate(config, hyper, truth);
  const auto I = static_cast<std::size_t>(config.n_users);
  const auto M = static_cast<std::size_t>(config.M);
  Matrix counts(I, M, 0.0);
  for (const Event& e : result.trace.events) {
    counts(static_cast<std::size_t>(e.user), static_cast<std::size_t>(*e.community)) += 1.0;
  }
  for (std::size_t i = 0; i < I; ++i) {
    const auto row = counts.row(i);
    const double n = std::accumulate(row.begin(), row.end(), 0.0);
    for (std::size_t m = 0; m < M; ++m) {
      result.truth.phi(i, m) = n > 0.0 ? row[m] / n : truth.pi(i, m);
    }
  }
  return result;
}

std::string to_string(InfluenceInit v) { return v == InfluenceInit::dense ? "dense" : "sparse"; }

std::string to_string(LocationProposal v) {
  return v == LocationProposal::uniform ? "uniform" : "gaussian_previous";
}

std::string to_string(CommunitySampling v) {
  return v == CommunitySampling::prior ? "prior" : "intensity_proportional";
}

InfluenceInit influence_init_from_string(const std::string& s) {
  if (s == "dense") {
    return InfluenceInit::dense;
  }
  if (s == "sparse") {
    return InfluenceInit::sparse;
  }
  throw ContractError("unknown influence init '" + s + "'");
}

LocationProposal location_proposal_from_string(const std::string& s) {
  if (s == "uniform") {
    return LocationProposal::uniform;
  }
  if (s == "gaussian_previous") {
    return LocationProposal::gaussian_previous;
  }
  throw ContractError("unknown location proposal '" + s + "'");
}

CommunitySampling community_sampling_from_string(const std::string& s) {
  if (s == "prior") {
    return CommunitySampling::prior;
  }
  if (s == "intensity_proportional") {
    return CommunitySampling::intensity_proportional;
  }
  throw ContractError("unknown community sampling '" + s + "'");
}

} // namespace colab
