#include "colab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace colab {

using nlohmann::json;

namespace {

std::string line_error(int line_no, const std::string& what) {
  return "trace csv: line " + std::to_string(line_no) + ": " + what;
}

// Splits one CSV record; fields may be double-quoted with "" as an escaped quote.
std::vector<std::string> split_csv(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) {
    throw ContractError(line_error(line_no, "unterminated quote"));
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_number(const std::string& text, const char* what, int line_no) {
  std::size_t begin = text.find_first_not_of(" \t");
  std::size_t end = text.find_last_not_of(" \t");
  if (begin == std::string::npos) {
    throw ContractError(line_error(line_no, std::string("empty ") + what));
  }
  const std::string trimmed = text.substr(begin, end - begin + 1);
  double value = 0.0;
  const auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size() || !std::isfinite(value)) {
    throw ContractError(line_error(line_no, std::string("invalid ") + what + " '" + text + "'"));
  }
  return value;
}

struct RawRow {
  std::string user;
  double timestamp = 0.0;
  double x = 0.0;
  double y = 0.0;
  std::string venue;
  std::string category;
  int line_no = 0;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') {
      out += '"';
    }
  }
  return out + "\"";
}

} // namespace

LoadedTrace parse_trace_csv(std::istream& in, const LoadOptions& options) {
  if (!(options.time_scale > 0.0)) {
    throw ContractError("trace csv: time scale must be positive");
  }
  LoadedTrace out;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) {
    throw ContractError("trace csv: missing header");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const std::vector<std::string> expected{"user_id", "timestamp", "x", "y", "venue_id", "category"};
  if (split_csv(line, line_no) != expected) {
    throw ContractError("trace csv: header must be user_id,timestamp,x,y,venue_id,category");
  }
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    const auto f = split_csv(line, line_no);
    if (f.size() != 6) {
      throw ContractError(line_error(line_no, "expected 6 fields, found " + std::to_string(f.size())));
    }
    RawRow r;
    r.user = f[0];
    r.timestamp = parse_number(f[1], "timestamp", line_no);
    r.x = parse_number(f[2], "x", line_no);
    r.y = parse_number(f[3], "y", line_no);
    r.venue = f[4];
    r.category = f[5];
    r.line_no = line_no;
    if (r.user.empty() || r.venue.empty() || r.category.empty()) {
      throw ContractError(line_error(line_no, "empty identifier"));
    }
    rows.push_back(std::move(r));
  }
  if (!std::is_sorted(rows.begin(), rows.end(),
                      [](const RawRow& a, const RawRow& b) { return a.timestamp < b.timestamp; })) {
    out.warnings.push_back("trace csv: rows were not sorted by timestamp; sorted on load");
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.timestamp < b.timestamp; });
  }

  IndexMaps& maps = out.maps;
  maps.time_scale = options.time_scale;
  maps.time_offset = options.shift_to_zero && !rows.empty() ? rows.front().timestamp : 0.0;
  if (options.latlon && !rows.empty()) {
    double lon = 0.0;
    double lat = 0.0;
    for (const RawRow& r : rows) {
      lon += r.x;
      lat += r.y;
    }
    maps.latlon_origin = Point{lon / static_cast<double>(rows.size()), lat / static_cast<double>(rows.size())};
  }
  auto project = [&](double x, double y) {
    if (!maps.latlon_origin) {
      return Point{x, y};
    }
    constexpr double earth_radius_km = 6371.0;
    const double rad = std::numbers::pi / 180.0;
    const Point o = *maps.latlon_origin;
    return Point{earth_radius_km * (x - o.x) * rad * std::cos(o.y * rad), earth_radius_km * (y - o.y) * rad};
  };

  std::map<std::string, int> user_index;
  std::map<std::string, int> venue_index;
  std::map<std::string, int> category_index;
  std::vector<std::pair<double, double>> raw_coords;
  Trace& trace = out.trace;
  for (const RawRow& r : rows) {
    auto [uit, unew] = user_index.emplace(r.user, static_cast<int>(maps.users.size()));
    if (unew) {
      maps.users.push_back(r.user);
    }
    auto [cit, cnew] = category_index.emplace(r.category, static_cast<int>(maps.categories.size()));
    if (cnew) {
      maps.categories.push_back(r.category);
    }
    auto [vit, vnew] = venue_index.emplace(r.venue, static_cast<int>(maps.venues.size()));
    if (vnew) {
      maps.venues.push_back(r.venue);
      raw_coords.emplace_back(r.x, r.y);
      trace.venues.push_back({vit->second, project(r.x, r.y), cit->second});
    } else {
      const Venue& v = trace.venues[static_cast<std::size_t>(vit->second)];
      const auto& raw = raw_coords[static_cast<std::size_t>(vit->second)];
      if (raw.first != r.x || raw.second != r.y) {
        throw ContractError(line_error(r.line_no, "venue '" + r.venue + "' has conflicting coordinates"));
      }
      if (v.category != cit->second) {
        throw ContractError(line_error(r.line_no, "venue '" + r.venue + "' has conflicting categories"));
      }
    }
    Event e;
    e.t = (r.timestamp - maps.time_offset) / maps.time_scale;
    e.user = uit->second;
    e.venue = vit->second;
    e.category = cit->second;
    trace.events.push_back(e);
  }
  trace.n_users = static_cast<int>(maps.users.size());
  trace.n_categories = static_cast<int>(maps.categories.size());
  if (options.region) {
    trace.region = *options.region;
  } else if (!trace.venues.empty()) {
    Region r;
    r.x_min = r.x_max = trace.venues.front().coords.x;
    r.y_min = r.y_max = trace.venues.front().coords.y;
    for (const Venue& v : trace.venues) {
      r.x_min = std::min(r.x_min, v.coords.x);
      r.x_max = std::max(r.x_max, v.coords.x);
      r.y_min = std::min(r.y_min, v.coords.y);
      r.y_max = std::max(r.y_max, v.coords.y);
    }
    // Keep the window non-degenerate when every venue shares a coordinate.
    const double pad_x = r.x_max > r.x_min ? 0.0 : std::max(1e-6, 1e-6 * std::abs(r.x_min));
    const double pad_y = r.y_max > r.y_min ? 0.0 : std::max(1e-6, 1e-6 * std::abs(r.y_min));
    r.x_min -= pad_x;
    r.x_max += pad_x;
    r.y_min -= pad_y;
    r.y_max += pad_y;
    r.t_end = trace.events.back().t > 0.0 ? trace.events.back().t : 1.0;
    trace.region = r;
  }
  trace.validate();
  for (const Venue& v : trace.venues) {
    if (!trace.region.contains(v.coords)) {
      throw ContractError("trace csv: venue '" + maps.venues[static_cast<std::size_t>(v.id)] +
                          "' lies outside the configured region");
    }
  }
  return out;
}

LoadedTrace load_trace(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open trace file '" + path + "'");
  }
  return parse_trace_csv(in, options);
}

void write_trace_csv(std::ostream& out, const Trace& trace, const IndexMaps& maps) {
  out << "user_id,timestamp,x,y,venue_id,category\n";
  for (const Event& e : trace.events) {
    const Point p = trace.location(e);
    out << csv_field(maps.users.at(static_cast<std::size_t>(e.user))) << ',' << format_double(e.t) << ','
        << format_double(p.x) << ',' << format_double(p.y) << ','
        << csv_field(maps.venues.at(static_cast<std::size_t>(e.venue))) << ','
        << csv_field(maps.categories.at(static_cast<std::size_t>(e.category))) << '\n';
  }
}

void write_trace_csv(const std::string& path, const Trace& trace, const IndexMaps& maps) {
  std::ostringstream buf;
  write_trace_csv(buf, trace, maps);
  write_text(path, buf.str());
}

IndexMaps identity_maps(const Trace& trace) {
  IndexMaps maps;
  for (int i = 0; i < trace.n_users; ++i) {
    maps.users.push_back(std::to_string(i));
  }
  for (const Venue& v : trace.venues) {
    maps.venues.push_back(std::to_string(v.id));
  }
  for (int c = 0; c < trace.n_categories; ++c) {
    maps.categories.push_back("c" + std::to_string(c));
  }
  return maps;
}

namespace {

// Mean of the per-axis sample standard deviations.
double mean_axis_sd(const std::vector<Point>& pts) {
  const auto n = static_cast<double>(pts.size());
  double mx = 0.0;
  double my = 0.0;
  for (const Point& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double vx = 0.0;
  double vy = 0.0;
  for (const Point& p : pts) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
  }
  return 0.5 * (std::sqrt(vx / (n - 1.0)) + std::sqrt(vy / (n - 1.0)));
}

} // namespace

double global_silverman_bandwidth(const Trace& trace) {
  std::vector<Point> pts;
  pts.reserve(trace.size());
  for (const Event& e : trace.events) {
    pts.push_back(trace.location(e));
  }
  double h = 0.0;
  if (pts.size() >= 2) {
    h = mean_axis_sd(pts) * std::pow(static_cast<double>(pts.size()), -1.0 / 6.0);
  }
  if (!(h > 0.0)) {
    h = 1e-3 * std::hypot(trace.region.width(), trace.region.height());
  }
  return h;
}

std::vector<double> silverman_bandwidths(const Trace& trace, double fallback) {
  if (!(fallback > 0.0)) {
    throw ContractError("silverman: fallback bandwidth must be positive");
  }
  std::vector<std::vector<Point>> pts(static_cast<std::size_t>(trace.n_users));
  for (const Event& e : trace.events) {
    pts[static_cast<std::size_t>(e.user)].push_back(trace.location(e));
  }
  std::vector<double> h(pts.size(), fallback);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].size() < 2) {
      continue;
    }
    const double v = mean_axis_sd(pts[i]) * std::pow(static_cast<double>(pts[i].size()), -1.0 / 6.0);
    if (v > 0.0) {
      h[i] = v;
    }
  }
  return h;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) {
    throw ContractError("json: matrix must be an array of rows");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || row.size() != cols) {
      throw ContractError("json: ragged matrix");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = row.at(c).get<double>();
    }
  }
  return m;
}

json to_json(const ModelParams& p) {
  return json{{"mu", p.mu}, {"eta", p.eta}, {"A", to_json(p.A)}, {"theta", to_json(p.theta)},
              {"pi", to_json(p.pi)}, {"phi", to_json(p.phi)}};
}

ModelParams params_from_json(const json& j) {
  ModelParams p;
  p.mu = j.at("mu").get<std::vector<double>>();
  p.eta = j.at("eta").get<std::vector<double>>();
  p.A = matrix_from_json(j.at("A"));
  p.theta = matrix_from_json(j.at("theta"));
  p.pi = matrix_from_json(j.at("pi"));
  p.phi = matrix_from_json(j.at("phi"));
  p.validate(1e-6);
  return p;
}

json to_json(const Region& r) {
  return json{{"t_end", r.t_end}, {"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min}, {"y_max", r.y_max}};
}

Region region_from_json(const json& j) {
  Region r;
  r.t_end = j.at("t_end").get<double>();
  r.x_min = j.at("x_min").get<double>();
  r.x_max = j.at("x_max").get<double>();
  r.y_min = j.at("y_min").get<double>();
  r.y_max = j.at("y_max").get<double>();
  r.validate();
  return r;
}

json to_json(const HyperParams& h) {
  const OptimizerSettings& o = h.optimizer;
  return json{{"nu", h.nu},
              {"h", h.h},
              {"theta0", h.theta0},
              {"M", h.M},
              {"S", h.S},
              {"kernel", to_string(h.kernel)},
              {"seed", h.seed},
              {"quadrature_order", h.quadrature_order},
              {"history_cutoff", h.history_cutoff},
              {"optimizer",
               {{"learning_rate", o.learning_rate},
                {"epochs", o.epochs},
                {"steps_per_epoch", o.steps_per_epoch},
                {"beta1", o.beta1},
                {"beta2", o.beta2},
                {"epsilon", o.epsilon}}}};
}

json to_json(const IndexMaps& m) {
  json out{{"users", m.users},
           {"venues", m.venues},
           {"categories", m.categories},
           {"time_scale", m.time_scale},
           {"time_offset", m.time_offset}};
  if (m.latlon_origin) {
    out["latlon_origin"] = {m.latlon_origin->x, m.latlon_origin->y};
  }
  return out;
}

IndexMaps maps_from_json(const json& j) {
  IndexMaps m;
  m.users = j.at("users").get<std::vector<std::string>>();
  m.venues = j.at("venues").get<std::vector<std::string>>();
  m.categories = j.at("categories").get<std::vector<std::string>>();
  m.time_scale = j.value("time_scale", 1.0);
  m.time_offset = j.value("time_offset", 0.0);
  if (j.contains("latlon_origin")) {
    const auto o = j.at("latlon_origin").get<std::vector<double>>();
    m.latlon_origin = Point{o.at(0), o.at(1)};
  }
  return m;
}

json default_config() {
  return json::parse(R"({
  "seed": 1,
  "threads": 0,
  "deterministic": false,
  "paths": {
    "trace": "",
    "model": "",
    "embeddings": "",
    "output_dir": "out"
  },
  "data": {
    "time_scale": 3600.0,
    "shift_to_zero": true,
    "coordinates": "planar",
    "region": null,
    "train_fraction": 0.8
  },
  "hyper": {
    "nu": 0.01,
    "bandwidth": "silverman",
    "theta0": 1.0,
    "M": 10,
    "S": 10,
    "kernel": "exponential",
    "quadrature_order": 32,
    "history_cutoff": 1e-14,
    "optimizer": {
      "learning_rate": 0.05,
      "epochs": 200,
      "steps_per_epoch": 10,
      "beta1": 0.9,
      "beta2": 0.999,
      "epsilon": 1e-8
    }
  },
  "fit": {
    "learn_mu": true,
    "learn_eta": true,
    "learn_A": true,
    "learn_theta": true,
    "learn_pi": true,
    "learn_phi": true,
    "no_influence": false,
    "no_base": false,
    "no_base_mu": 1e-8,
    "no_category": false,
    "baseline": "leave_one_out",
    "running_mean_decay": 0.9,
    "record_elbo": true
  },
  "simulation": {
    "n_events": 1000,
    "n_users": 10,
    "M": 2,
    "V": 5,
    "venues_per_category": 2,
    "region": {"t_end": 1000.0, "x_min": 0.0, "x_max": 1.0, "y_min": 0.0, "y_max": 1.0},
    "bandwidth": 0.05,
    "mu_scale": 0.01,
    "user_checkins": null,
    "A_init": "dense",
    "in_degree": 3,
    "source_fraction": 0.0,
    "within_community": false,
    "self_excitation": false,
    "pi_alpha": 1.0,
    "pi_draws": 0,
    "theta_alpha": 1.0,
    "theta_draws": 0,
    "eta_alpha": 1.0,
    "proposal": "uniform",
    "proposal_std": 0.0,
    "community": "prior",
    "bound_safety": 1.1
  },
  "synth_recover": {
    "hold_true": ["theta"],
    "use_true_bandwidth": true,
    "variants": ["full", "no_category", "no_influence", "no_base"],
    "recovery_variants": ["full", "no_category"]
  },
  "prediction": {
    "ks": [5, 10, 20, 50],
    "use_prior": true
  },
  "evaluation": {
    "k_cat": [10, 50, 100],
    "soft": false
  },
  "export": {
    "thresholds": [0.5, 0.7, 0.9],
    "formats": ["graphml", "csv"]
  }
})");
}

json merge_config(const json& user) {
  if (!user.is_object()) {
    throw ContractError("config: top level must be a JSON object");
  }
  json merged = default_config();
  merged.merge_patch(user);
  return merged;
}

json load_config(const std::string& path) {
  const std::string text = read_text(path);
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ContractError("config '" + path + "': " + err.what());
  }
  return merge_config(user);
}

HyperParams hyper_from_config(const json& config, const Trace& trace) {
  const json& j = config.at("hyper");
  HyperParams h;
  h.nu = j.at("nu").get<double>();
  h.M = j.at("M").get<int>();
  h.S = j.at("S").get<int>();
  h.kernel = spatial_kernel_from_string(j.at("kernel").get<std::string>());
  h.quadrature_order = j.at("quadrature_order").get<int>();
  h.history_cutoff = j.at("history_cutoff").get<double>();
  h.seed = config.at("seed").get<std::uint64_t>();
  const json& o = j.at("optimizer");
  h.optimizer.learning_rate = o.at("learning_rate").get<double>();
  h.optimizer.epochs = o.at("epochs").get<int>();
  h.optimizer.steps_per_epoch = o.at("steps_per_epoch").get<int>();
  h.optimizer.beta1 = o.at("beta1").get<double>();
  h.optimizer.beta2 = o.at("beta2").get<double>();
  h.optimizer.epsilon = o.at("epsilon").get<double>();
  const json& theta0 = j.at("theta0");
  if (theta0.is_array()) {
    h.theta0 = theta0.get<std::vector<double>>();
  } else {
    h.theta0.assign(static_cast<std::size_t>(trace.n_categories), theta0.get<double>());
  }
  const json& bw = j.at("bandwidth");
  if (bw.is_string()) {
    if (bw.get<std::string>() != "silverman") {
      throw ContractError("config: hyper.bandwidth must be \"silverman\", a number or a per-user list");
    }
    h.h = silverman_bandwidths(trace, global_silverman_bandwidth(trace));
  } else if (bw.is_array()) {
    h.h = bw.get<std::vector<double>>();
  } else {
    h.h.assign(static_cast<std::size_t>(trace.n_users), bw.get<double>());
  }
  h.validate(trace.n_users, trace.n_categories);
  return h;
}

FitOptions fit_options_from_config(const json& j) {
  FitOptions f;
  f.learn_mu = j.at("learn_mu").get<bool>();
  f.learn_eta = j.at("learn_eta").get<bool>();
  f.learn_A = j.at("learn_A").get<bool>();
  f.learn_theta = j.at("learn_theta").get<bool>();
  f.learn_pi = j.at("learn_pi").get<bool>();
  f.learn_phi = j.at("learn_phi").get<bool>();
  f.no_influence = j.at("no_influence").get<bool>();
  f.no_base = j.at("no_base").get<bool>();
  f.no_base_mu = j.at("no_base_mu").get<double>();
  f.no_category = j.at("no_category").get<bool>();
  f.baseline = baseline_kind_from_string(j.at("baseline").get<std::string>());
  f.running_mean_decay = j.at("running_mean_decay").get<double>();
  f.record_elbo = j.at("record_elbo").get<bool>();
  return f;
}

SimConfig sim_config_from_config(const json& config) {
  const json& j = config.at("simulation");
  SimConfig s;
  s.n_events = j.at("n_events").get<int>();
  s.n_users = j.at("n_users").get<int>();
  s.M = j.at("M").get<int>();
  s.V = j.at("V").get<int>();
  s.region = region_from_json(j.at("region"));
  s.seed = config.at("seed").get<std::uint64_t>();
  s.mu_scale = j.at("mu_scale").get<double>();
  if (!j.at("user_checkins").is_null()) {
    s.user_checkins = j.at("user_checkins").get<std::vector<double>>();
  }
  s.A_init = influence_init_from_string(j.at("A_init").get<std::string>());
  s.in_degree = j.at("in_degree").get<int>();
  s.source_fraction = j.at("source_fraction").get<double>();
  s.within_community = j.at("within_community").get<bool>();
  s.self_excitation = j.at("self_excitation").get<bool>();
  s.pi_alpha = j.at("pi_alpha").get<double>();
  s.pi_draws = j.at("pi_draws").get<int>();
  s.theta_alpha = j.at("theta_alpha").get<double>();
  s.theta_draws = j.at("theta_draws").get<int>();
  s.eta_alpha = j.at("eta_alpha").get<double>();
  s.proposal = location_proposal_from_string(j.at("proposal").get<std::string>());
  s.proposal_std = j.at("proposal_std").get<double>();
  s.community = community_sampling_from_string(j.at("community").get<std::string>());
  s.bound_safety = j.at("bound_safety").get<double>();
  const int per_category = j.at("venues_per_category").get<int>();
  if (per_category < 1) {
    throw ContractError("config: simulation.venues_per_category must be positive");
  }
  s.venues = random_venues(s.region, s.V, per_category, s.seed);
  s.validate();
  return s;
}

LoadOptions load_options_from_config(const json& config) {
  const json& d = config.at("data");
  LoadOptions o;
  o.time_scale = d.at("time_scale").get<double>();
  o.shift_to_zero = d.at("shift_to_zero").get<bool>();
  const std::string coords = d.at("coordinates").get<std::string>();
  if (coords == "latlon") {
    o.latlon = true;
  } else if (coords != "planar") {
    throw ContractError("config: data.coordinates must be \"planar\" or \"latlon\"");
  }
  if (!d.at("region").is_null()) {
    o.region = region_from_json(d.at("region"));
  }
  return o;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out << text;
  out.flush();
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace colab
