// Trace CSV ingestion, JSON (de)serialization of parameters and configuration.
#pragma once

#include "colab/fit.hpp"
#include "colab/simulator.hpp"
#include "colab/types.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace colab {

/// Dense index → original identifier, plus the time transform that produced model times.
struct IndexMaps {
  std::vector<std::string> users;
  std::vector<std::string> venues;
  std::vector<std::string> categories;
  /// model time = (raw − time_offset) / time_scale
  double time_scale = 1.0;
  double time_offset = 0.0;
  /// Projection centre for lat/lon input.
  std::optional<Point> latlon_origin;
};

struct LoadOptions {
  /// Raw timestamp units per model unit (3600: seconds in, hours out).
  double time_scale = 3600.0;
  /// Shift times so the first event is at 0.
  bool shift_to_zero = true;
  /// Treat x as longitude and y as latitude and project to kilometres.
  bool latlon = false;
  /// Explicit observation window; otherwise the venue bounding box and last event time.
  std::optional<Region> region;
};

struct LoadedTrace {
  Trace trace;
  IndexMaps maps;
  std::vector<std::string> warnings;
};

/// Reads `user_id,timestamp,x,y,venue_id,category`. Throws ContractError with
/// the line number on malformed rows or conflicting venue records.
LoadedTrace parse_trace_csv(std::istream& in, const LoadOptions& options = {});
LoadedTrace load_trace(const std::string& path, const LoadOptions& options = {});

/// Canonical CSV: model-unit times (17 significant digits) and original identifiers.
void write_trace_csv(std::ostream& out, const Trace& trace, const IndexMaps& maps);
void write_trace_csv(const std::string& path, const Trace& trace, const IndexMaps& maps);

/// Identity maps (ids are the indices) for generated traces.
IndexMaps identity_maps(const Trace& trace);

/// h_i = σ̂_i · n_i^{−1/6}, σ̂_i the mean of the per-axis sample standard
/// deviations of user i's check-ins. Users with fewer than two check-ins or
/// zero spread get `fallback`.
std::vector<double> silverman_bandwidths(const Trace& trace, double fallback);
/// The same rule over all events; falls back to 1e-3 of the region diagonal when degenerate.
double global_silverman_bandwidth(const Trace& trace);

nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Region& r);
Region region_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HyperParams& h);
nlohmann::json to_json(const IndexMaps& m);
IndexMaps maps_from_json(const nlohmann::json& j);

/// Full configuration with every default filled in.
nlohmann::json default_config();
/// Defaults merged with the user document (RFC 7386 merge patch).
nlohmann::json merge_config(const nlohmann::json& user);
nlohmann::json load_config(const std::string& path);

/// Hyperparameters from a merged config. Bandwidths are resolved against the
/// trace when `hyper.bandwidth` is "silverman".
HyperParams hyper_from_config(const nlohmann::json& config, const Trace& trace);
FitOptions fit_options_from_config(const nlohmann::json& fit);
SimConfig sim_config_from_config(const nlohmann::json& config);
LoadOptions load_options_from_config(const nlohmann::json& config);

/// Whole-file helpers; both throw std::runtime_error on I/O failure.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

} // namespace colab
