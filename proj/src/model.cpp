#include "colab/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace colab {

double temporal_kernel(double dt, double nu) {
  if (dt < 0.0) {
    throw std::domain_error("temporal_kernel: negative time difference");
  }
  if (!(nu > 0.0)) {
    throw std::domain_error("temporal_kernel: decay must be positive");
  }
  return std::exp(-nu * dt);
}

double spatial_kernel(double d, double h, SpatialKernelKind kind) {
  if (!(h > 0.0)) {
    throw std::domain_error("spatial_kernel: bandwidth must be positive");
  }
  if (d < 0.0) {
    throw std::domain_error("spatial_kernel: negative distance");
  }
  if (kind == SpatialKernelKind::squared_exponential) {
    return std::exp(-d * d / (2.0 * h * h)) / (2.0 * std::numbers::pi * h * h);
  }
  return std::exp(-d / (2.0 * h)) / (2.0 * std::numbers::pi * h);
}

double joint_kernel(double dt, double d, double nu, double h, SpatialKernelKind kind) {
  return temporal_kernel(dt, nu) * spatial_kernel(d, h, kind);
}

double temporal_kernel_integral(double span, double nu) {
  if (span <= 0.0) {
    return 0.0;
  }
  return -std::expm1(-nu * span) / nu;
}

double spatial_kernel_plane_mass(double h, SpatialKernelKind kind) {
  return kind == SpatialKernelKind::squared_exponential ? 1.0 : 4.0 * h;
}

namespace {

QuadratureRule compute_gauss_legendre(int order) {
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) {
        break;
      }
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= order; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(order - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(order - 1 - i)] = w;
  }
  return rule;
}

// 1 − e^{−x}(1 + x), accurate for small x.
double one_minus_exp_poly(double x) {
  if (x < 0.05) {
    // Σ_{n≥2} (−1)^n (n−1) x^n / n!
    double term = x * x / 2.0; // x^n / n! at n = 2
    double sum = 0.0;
    for (int n = 2; n < 16; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * (n - 1) * term;
      term *= x / (n + 1);
    }
    return sum;
  }
  return -std::expm1(-x) - x * std::exp(-x);
}

// ∫_0^R κ_s(r) r dr, the kernel mass per radian out to radius R.
double radial_mass_exponential(double R, double h) {
  const double x = R / (2.0 * h);
  return (2.0 * h / std::numbers::pi) * one_minus_exp_poly(x);
}

double integrate_angle(double a, double b, const QuadratureRule& rule, auto&& f) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    sum += rule.weights[q] * f(mid + half * rule.nodes[q]);
  }
  return sum * half;
}

// ∫_0^β radial_mass(a / cos θ) dθ: the right triangle with near side a on the
// x-axis and apex angle β. Panels end where the edge distance doubles, so a
// sliver near the far vertex is resolved however thin the triangle is.
double triangle_integral(double a, double beta, double h, const QuadratureRule& rule) {
  const double saturated = 2.0 * h / std::numbers::pi;
  // Past 80h the radial mass equals its limit to double precision.
  const double cap = 80.0 * h;
  if (a >= cap) {
    return saturated * beta;
  }
  const double far = a / std::cos(beta);
  double sum = 0.0;
  double theta = 0.0;
  double r = a;
  while (true) {
    const double next = std::min({2.0 * r, far, cap});
    const double end = next >= far ? beta : std::acos(a / next);
    sum += integrate_angle(theta, end, rule, [&](double th) { return radial_mass_exponential(a / std::cos(th), h); });
    if (next >= far) {
      return sum;
    }
    if (next >= cap) {
      return sum + saturated * (beta - end);
    }
    theta = end;
    r = next;
  }
}

// Integral over [0,u]×[0,v] (u, v ≥ 0) of the kernel centred at the origin.
double corner_integral(double u, double v, double h, SpatialKernelKind kind, const QuadratureRule& rule) {
  if (u <= 0.0 || v <= 0.0) {
    return 0.0;
  }
  if (kind == SpatialKernelKind::squared_exponential) {
    const double s = std::numbers::sqrt2 * h;
    return 0.25 * std::erf(u / s) * std::erf(v / s);
  }
  const double alpha = std::atan2(v, u);
  return triangle_integral(u, alpha, h, rule) + triangle_integral(v, 0.5 * std::numbers::pi - alpha, h, rule);
}

double signed_corner(double u, double v, double h, SpatialKernelKind kind, const QuadratureRule& rule) {
  const double sign = ((u < 0.0) != (v < 0.0)) ? -1.0 : 1.0;
  return sign * corner_integral(std::abs(u), std::abs(v), h, kind, rule);
}

} // namespace

const QuadratureRule& gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) {
    slot = std::make_unique<QuadratureRule>(compute_gauss_legendre(order));
  }
  return *slot;
}

double spatial_rect_integral(Point center, const Region& region, double h, SpatialKernelKind kind,
                             int order) {
  if (!(h > 0.0)) {
    throw std::domain_error("spatial_rect_integral: bandwidth must be positive");
  }
  const double x0 = region.x_min - center.x;
  const double x1 = region.x_max - center.x;
  const double y0 = region.y_min - center.y;
  const double y1 = region.y_max - center.y;
  if (kind == SpatialKernelKind::exponential) {
    // Beyond 80h the tail mass is below double rounding of the plane mass.
    const double margin = std::min({-x0, x1, -y0, y1});
    if (margin > 80.0 * h) {
      return 4.0 * h;
    }
  }
  const QuadratureRule& rule = gauss_legendre(order);
  return signed_corner(x1, y1, h, kind, rule) - signed_corner(x0, y1, h, kind, rule) -
         signed_corner(x1, y0, h, kind, rule) + signed_corner(x0, y0, h, kind, rule);
}

double community_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                           int user, int g, double t, Point loc, std::span<const int> assignment) {
  const auto i = static_cast<std::size_t>(user);
  const double h = hyper.h[i];
  double excitation = 0.0;
  for (std::size_t k = 0; k < trace.events.size(); ++k) {
    const Event& e = trace.events[k];
    if (!(e.t < t)) {
      break;
    }
    int gk = -1;
    if (!assignment.empty()) {
      if (k >= assignment.size()) {
        throw ContractError("community_intensity: assignment shorter than history");
      }
      gk = assignment[k];
    } else if (e.community) {
      gk = *e.community;
    } else {
      throw ContractError("community_intensity: history event without a community label");
    }
    if (gk != g) {
      continue;
    }
    const double a = params.A(static_cast<std::size_t>(e.user), i);
    if (a == 0.0) {
      continue;
    }
    excitation += a * temporal_kernel(t - e.t, hyper.nu) *
                  spatial_kernel(distance(loc, trace.location(e)), h, hyper.kernel);
  }
  return params.mu[i] * params.eta[static_cast<std::size_t>(g)] + excitation;
}

double community_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                           int user, int g, double t, int venue, std::span<const int> assignment) {
  return community_intensity(params, hyper, trace, user, g, t,
                             trace.venues.at(static_cast<std::size_t>(venue)).coords, assignment);
}

double total_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                       int user, double t, Point loc, std::span<const int> assignment) {
  double total = 0.0;
  for (int g = 0; g < params.n_communities(); ++g) {
    total += community_intensity(params, hyper, trace, user, g, t, loc, assignment);
  }
  return total;
}

double total_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                       int user, double t, int venue, std::span<const int> assignment) {
  return total_intensity(params, hyper, trace, user, t,
                         trace.venues.at(static_cast<std::size_t>(venue)).coords, assignment);
}

double category_logprob(const Matrix& theta, int g, int c) {
  if (g < 0 || c < 0 || static_cast<std::size_t>(g) >= theta.rows() ||
      static_cast<std::size_t>(c) >= theta.cols()) {
    throw std::out_of_range("category_logprob: index out of range");
  }
  return floored_log(theta(static_cast<std::size_t>(g), static_cast<std::size_t>(c)));
}

} // namespace colab
