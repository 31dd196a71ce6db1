// Domain types shared by simulation, inference, prediction and evaluation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace colab {

/// Raised when inputs violate a documented precondition or invariant.
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Floor applied inside every logarithm of a probability or intensity.
inline constexpr double kProbFloor = 1e-12;

/// Log with the probability floor applied.
double floored_log(double x);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A venue (discrete location) with its category label index.
struct Venue {
  int id = 0;
  Point coords;
  int category = 0;
};

/// Observation window: time horizon [0, t_end] and the spatial rectangle.
struct Region {
  double t_end = 1.0;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool contains(Point p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  void validate() const;
};

/// One check-in. `community` is present only in synthetic ground truth.
struct Event {
  double t = 0.0;
  int venue = 0;
  int user = 0;
  int category = 0;
  std::optional<int> community;
};

/// A time-ordered event trace together with its venue set and dimensions.
struct Trace {
  std::vector<Event> events;
  std::vector<Venue> venues;
  Region region;
  int n_users = 0;
  int n_categories = 0;

  std::size_t size() const { return events.size(); }
  Point location(const Event& e) const { return venues[static_cast<std::size_t>(e.venue)].coords; }
  Point location(std::size_t n) const { return location(events[n]); }

  /// Throws ContractError when an index is out of range, timestamps are
  /// unsorted, or an event category disagrees with its venue.
  void validate() const;

  /// Events per user.
  std::vector<int> user_counts() const;
};

enum class SpatialKernelKind {
  /// (1/(2πh))·exp(−d/(2h)) on the unsquared distance.
  exponential,
  /// Normalized isotropic Gaussian (1/(2πh²))·exp(−d²/(2h²)).
  squared_exponential,
};

std::string to_string(SpatialKernelKind kind);
SpatialKernelKind spatial_kernel_from_string(const std::string& name);

struct OptimizerSettings {
  double learning_rate = 0.05;
  int epochs = 200;
  /// Stochastic steps taken inside one epoch; the ELBO is recorded once per epoch.
  int steps_per_epoch = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct HyperParams {
  double nu = 0.01;
  /// Per-user spatial bandwidth.
  std::vector<double> h;
  /// Dirichlet prior over categories, used to draw initial θ rows.
  std::vector<double> theta0;
  int M = 1;
  int S = 10;
  SpatialKernelKind kernel = SpatialKernelKind::exponential;
  OptimizerSettings optimizer;
  std::uint64_t seed = 1;
  /// Gauss–Legendre order for the rectangle integral of the spatial kernel.
  int quadrature_order = 32;
  /// History events whose temporal kernel falls below this value are dropped
  /// from the excitation tables.
  double history_cutoff = 1e-14;

  void validate(int n_users, int n_categories) const;
};

/// All learnable quantities plus the variational posterior φ.
struct ModelParams {
  std::vector<double> mu;  // I
  std::vector<double> eta; // M
  Matrix A;                // I×I, row = influencer, column = influenced
  Matrix theta;            // M×V
  Matrix pi;               // I×M
  Matrix phi;              // I×M

  int n_users() const { return static_cast<int>(mu.size()); }
  int n_communities() const { return static_cast<int>(eta.size()); }
  int n_categories() const { return static_cast<int>(theta.cols()); }

  /// Throws ContractError on negative entries, non-stochastic rows or shape mismatch.
  void validate(double tol = 1e-9) const;
};

/// Renormalizes each row to sum to one; all-zero rows become uniform.
void normalize_rows(Matrix& m);
/// Renormalizes each nonzero column to sum to one.
void normalize_columns(Matrix& m);

} // namespace colab
