#include "colab/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace colab {

double floored_log(double x) { return std::log(std::max(x, kProbFloor)); }

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

void Region::validate() const {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw ContractError("region: t_end must be positive and finite");
  }
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ContractError("region: spatial extent must have max > min on both axes");
  }
}

void Trace::validate() const {
  const auto n_venues = static_cast<int>(venues.size());
  for (int v = 0; v < n_venues; ++v) {
    const Venue& venue = venues[static_cast<std::size_t>(v)];
    if (venue.id != v) {
      throw ContractError("trace: venue ids must be dense 0..L-1");
    }
    if (venue.category < 0 || venue.category >= n_categories) {
      throw ContractError("trace: venue category out of range");
    }
  }
  double prev_t = -INFINITY;
  for (std::size_t n = 0; n < events.size(); ++n) {
    const Event& e = events[n];
    std::ostringstream where;
    where << "trace: event " << n << ": ";
    if (e.t < prev_t) {
      throw ContractError(where.str() + "timestamps are not sorted");
    }
    prev_t = e.t;
    if (e.user < 0 || e.user >= n_users) {
      throw ContractError(where.str() + "user out of range");
    }
    if (e.venue < 0 || e.venue >= n_venues) {
      throw ContractError(where.str() + "venue out of range");
    }
    if (e.category != venues[static_cast<std::size_t>(e.venue)].category) {
      throw ContractError(where.str() + "category differs from venue category");
    }
  }
}

std::vector<int> Trace::user_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(n_users), 0);
  for (const Event& e : events) {
    ++counts[static_cast<std::size_t>(e.user)];
  }
  return counts;
}

std::string to_string(SpatialKernelKind kind) {
  switch (kind) {
  case SpatialKernelKind::exponential:
    return "exponential";
  case SpatialKernelKind::squared_exponential:
    return "squared_exponential";
  }
  return "exponential";
}

SpatialKernelKind spatial_kernel_from_string(const std::string& name) {
  if (name == "exponential" || name == "paper") {
    return SpatialKernelKind::exponential;
  }
  if (name == "squared_exponential" || name == "gaussian") {
    return SpatialKernelKind::squared_exponential;
  }
  throw ContractError("unknown spatial kernel '" + name + "'");
}

void HyperParams::validate(int n_users, int n_categories) const {
  if (!(nu > 0.0)) {
    throw ContractError("hyper: nu must be positive");
  }
  if (M < 1) {
    throw ContractError("hyper: M must be at least 1");
  }
  if (S < 1) {
    throw ContractError("hyper: S must be at least 1");
  }
  if (h.size() != static_cast<std::size_t>(n_users)) {
    throw ContractError("hyper: need one bandwidth per user");
  }
  if (std::any_of(h.begin(), h.end(), [](double v) { return !(v > 0.0); })) {
    throw ContractError("hyper: bandwidths must be positive");
  }
  if (theta0.size() != static_cast<std::size_t>(n_categories)) {
    throw ContractError("hyper: theta0 must have one entry per category");
  }
  if (std::any_of(theta0.begin(), theta0.end(), [](double v) { return !(v > 0.0); })) {
    throw ContractError("hyper: theta0 entries must be positive");
  }
  if (quadrature_order < 2) {
    throw ContractError("hyper: quadrature order must be at least 2");
  }
  if (optimizer.epochs < 0 || optimizer.steps_per_epoch < 1 || !(optimizer.learning_rate > 0.0)) {
    throw ContractError("hyper: invalid optimizer settings");
  }
}

namespace {

void check_stochastic_rows(const Matrix& m, const char* name, double tol) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0)) {
        throw ContractError(std::string("params: negative or NaN entry in ") + name);
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ContractError(std::string("params: row of ") + name + " does not sum to 1");
    }
  }
}

} // namespace

void ModelParams::validate(double tol) const {
  const std::size_t I = mu.size();
  const std::size_t M = eta.size();
  if (A.rows() != I || A.cols() != I || pi.rows() != I || pi.cols() != M || phi.rows() != I ||
      phi.cols() != M || theta.rows() != M) {
    throw ContractError("params: inconsistent shapes");
  }
  auto non_negative = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!std::all_of(mu.begin(), mu.end(), non_negative)) {
    throw ContractError("params: mu must be non-negative");
  }
  if (!std::all_of(eta.begin(), eta.end(), non_negative)) {
    throw ContractError("params: eta must be non-negative");
  }
  if (!std::all_of(A.data().begin(), A.data().end(), non_negative)) {
    throw ContractError("params: A must be non-negative");
  }
  check_stochastic_rows(theta, "theta", tol);
  check_stochastic_rows(pi, "pi", tol);
  check_stochastic_rows(phi, "phi", tol);
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (sum > 0.0) {
      for (double& v : row) {
        v /= sum;
      }
    } else {
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
    }
  }
}

void normalize_columns(Matrix& m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      sum += m(r, c);
    }
    if (sum > 0.0) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        m(r, c) /= sum;
      }
    }
  }
}

} // namespace colab
