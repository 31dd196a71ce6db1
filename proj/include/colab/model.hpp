// Triggering kernels, intensities and category probabilities.
//
// The community-specific intensity of user i at (t, ℓ) is
//
//   λ_{i,g}(t, ℓ) = μ_i η_g + Σ_{t_k < t} A[i_k][i] κ_t(t − t_k) κ_s(‖ℓ − ℓ_k‖; h_i) 𝟙(g_k = g)
//
// with κ_t(Δt) = exp(−ν Δt) and, by default, κ_s(d) = exp(−d / 2h) / (2πh).
// Everything here is a pure function of its arguments.
#pragma once

#include "colab/types.hpp"

#include <span>
#include <vector>

namespace colab {

/// exp(−ν·dt). Throws std::domain_error for dt < 0 or ν ≤ 0.
double temporal_kernel(double dt, double nu);

/// Spatial triggering kernel at distance d with bandwidth h.
/// Throws std::domain_error for h ≤ 0 or d < 0.
double spatial_kernel(double d, double h, SpatialKernelKind kind = SpatialKernelKind::exponential);

/// Joint kernel κ_t(dt)·κ_s(d).
double joint_kernel(double dt, double d, double nu, double h,
                    SpatialKernelKind kind = SpatialKernelKind::exponential);

/// ∫_0^span κ_t(s) ds = (1 − e^{−ν·span}) / ν.
double temporal_kernel_integral(double span, double nu);

/// Integral of the spatial kernel over the whole plane (4h for the exponential form, 1 for the Gaussian).
double spatial_kernel_plane_mass(double h, SpatialKernelKind kind);

/// Gauss–Legendre nodes and weights on [−1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached Gauss–Legendre rule of the given order (thread-safe).
const QuadratureRule& gauss_legendre(int order);

/// ∫∫ over the region rectangle of κ_s(‖ℓ − center‖; h) dℓ.
///
/// The rectangle is split at `center` into four corner-anchored pieces, each
/// piece into two triangles; in polar coordinates the radial integral is
/// closed form and the angular one uses Gauss–Legendre of the given order.
/// The Gaussian variant is separable and evaluated exactly with erf.
double spatial_rect_integral(Point center, const Region& region, double h, SpatialKernelKind kind,
                             int order = 32);

/// λ_{user,g}(t, loc). History communities come from `assignment` when it is
/// non-empty (indexed by event), otherwise from the events' ground-truth labels.
/// Throws ContractError when a contributing history event has no community.
double community_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                           int user, int g, double t, Point loc,
                           std::span<const int> assignment = {});

double community_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                           int user, int g, double t, int venue,
                           std::span<const int> assignment = {});

/// Σ_g λ_{user,g}(t, loc), summed in community order.
double total_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                       int user, double t, Point loc, std::span<const int> assignment = {});

double total_intensity(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                       int user, double t, int venue, std::span<const int> assignment = {});

/// log θ_{g,c} with the probability floor.
double category_logprob(const Matrix& theta, int g, int c);

} // namespace colab
