#include "colab/cli.hpp"

#include "colab/inference.hpp"
#include "colab/io.hpp"
#include "colab/kernels.hpp"
#include "colab/metrics.hpp"
#include "colab/network.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace colab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool deterministic(const json& config) { return config.at("deterministic").get<bool>(); }

fs::path output_dir(const json& config) {
  fs::path dir = config.at("paths").at("output_dir").get<std::string>();
  fs::create_directories(dir);
  return dir;
}

std::string require_path(const json& config, const char* key) {
  const std::string p = config.at("paths").at(key).get<std::string>();
  if (p.empty()) {
    throw ContractError(std::string("config: paths.") + key + " is required for this command");
  }
  if (!fs::exists(p)) {
    throw std::runtime_error(std::string("paths.") + key + ": '" + p + "' does not exist");
  }
  return p;
}

void write_json(const fs::path& path, const json& j) { write_text(path.string(), j.dump(2) + "\n"); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string threshold_tag(double t) { return fixed(t, 2); }

std::string elbo_csv(const std::vector<double>& trace) {
  std::ostringstream out;
  out << "epoch,elbo\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", trace[e]);
    out << e + 1 << ',' << buf << '\n';
  }
  return out.str();
}

std::vector<std::string> string_list(const json& j) { return j.get<std::vector<std::string>>(); }

bool holds(const json& config, const std::string& name) {
  const auto list = string_list(config.at("synth_recover").at("hold_true"));
  return std::find(list.begin(), list.end(), name) != list.end();
}

// Starting point and frozen blocks for the synthetic protocol: quantities in
// `hold_true` start at (and stay at) the generating values.
ModelParams protocol_init(const json& config, const InferenceData& data, const ModelParams& truth,
                          FitOptions& options) {
  ModelParams init = default_init(data, data.hyper().seed);
  if (holds(config, "mu")) {
    init.mu = truth.mu;
    options.learn_mu = false;
  }
  if (holds(config, "eta")) {
    init.eta = truth.eta;
    options.learn_eta = false;
  }
  if (holds(config, "A")) {
    init.A = truth.A;
    options.learn_A = false;
  }
  if (holds(config, "theta")) {
    init.theta = truth.theta;
    options.learn_theta = false;
  }
  if (holds(config, "pi")) {
    init.pi = truth.pi;
    options.learn_pi = false;
  }
  if (holds(config, "phi")) {
    init.phi = truth.phi;
    options.learn_phi = false;
  }
  return init;
}

HyperParams synthetic_hyper(const json& config, const SimConfig& sim, const Trace& trace) {
  json adjusted = config;
  adjusted["hyper"]["M"] = sim.M;
  if (config.at("synth_recover").at("use_true_bandwidth").get<bool>()) {
    adjusted["hyper"]["bandwidth"] = config.at("simulation").at("bandwidth");
  }
  return hyper_from_config(adjusted, trace);
}

struct FittedModel {
  ModelParams params;
  HyperParams hyper;
  Region region;
  IndexMaps maps;
};

FittedModel load_model(const std::string& path) {
  const json j = json::parse(read_text(path));
  FittedModel m;
  m.params = params_from_json(j.at("params"));
  const json& h = j.at("hyper");
  m.hyper.nu = h.at("nu").get<double>();
  m.hyper.h = h.at("h").get<std::vector<double>>();
  m.hyper.theta0 = h.at("theta0").get<std::vector<double>>();
  m.hyper.M = h.at("M").get<int>();
  m.hyper.S = h.at("S").get<int>();
  m.hyper.kernel = spatial_kernel_from_string(h.at("kernel").get<std::string>());
  m.hyper.seed = h.at("seed").get<std::uint64_t>();
  m.hyper.quadrature_order = h.at("quadrature_order").get<int>();
  m.hyper.history_cutoff = h.at("history_cutoff").get<double>();
  m.region = region_from_json(j.at("region"));
  m.maps = maps_from_json(j.at("maps"));
  return m;
}

// Loads the configured trace and checks it against the fitted model's index maps.
LoadedTrace load_trace_for_model(const json& config, const FittedModel& model) {
  LoadedTrace loaded = load_trace(require_path(config, "trace"), load_options_from_config(config));
  for (const auto& w : loaded.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  if (loaded.maps.users != model.maps.users || loaded.maps.venues != model.maps.venues ||
      loaded.maps.categories != model.maps.categories) {
    throw ContractError("trace does not match the index maps stored with the model");
  }
  return loaded;
}

} // namespace

const VariantResult& SynthRecoverResult::variant(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) {
      return v;
    }
  }
  throw ContractError("synth-recover: no variant named '" + name + "'");
}

FitOptions variant_options(const json& config, const std::string& name) {
  FitOptions options = fit_options_from_config(config.at("fit"));
  if (name == "full") {
    return options;
  }
  if (name == "no_category") {
    options.no_category = true;
  } else if (name == "no_influence") {
    options.no_influence = true;
  } else if (name == "no_base") {
    options.no_base = true;
  } else {
    throw ContractError("unknown variant '" + name + "'");
  }
  return options;
}

SynthRecoverResult synth_recover(const json& config) {
  SynthRecoverResult result;
  const SimConfig sim = sim_config_from_config(config);
  HyperParams sim_hyper;
  {
    Trace shape;
    shape.n_users = sim.n_users;
    shape.n_categories = sim.V;
    shape.region = sim.region;
    shape.venues = sim.venues;
    json adjusted = config;
    adjusted["hyper"]["M"] = sim.M;
    adjusted["hyper"]["bandwidth"] = config.at("simulation").at("bandwidth");
    sim_hyper = hyper_from_config(adjusted, shape);
  }
  result.sim = generate_trace(sim, sim_hyper);
  const Trace& trace = result.sim.trace;
  const ModelParams& truth = result.sim.truth;
  result.hyper = synthetic_hyper(config, sim, trace);

  const auto variants = string_list(config.at("synth_recover").at("variants"));
  const auto recovery = string_list(config.at("synth_recover").at("recovery_variants"));
  const double train_fraction = config.at("data").at("train_fraction").get<double>();
  const auto ks = config.at("prediction").at("ks").get<std::vector<int>>();
  ScoringOptions scoring;
  scoring.use_prior = config.at("prediction").at("use_prior").get<bool>();

  const InferenceData full_data(trace, result.hyper);
  auto [train, test] = split_trace(trace, train_fraction);
  const InferenceData train_data(train, result.hyper);

  for (const std::string& name : variants) {
    VariantResult v;
    v.name = name;
    if (std::find(recovery.begin(), recovery.end(), name) != recovery.end()) {
      FitOptions options = variant_options(config, name);
      const ModelParams init = protocol_init(config, full_data, truth, options);
      FitReport report = fit(full_data, init, options);
      v.relerr_A = rel_err(truth.A, report.params.A);
      v.relerr_phi = rel_err(truth.phi, report.params.phi);
      v.elbo_trace = report.elbo_trace;
      if (name == "full") {
        result.fitted = report.params;
      }
    }
    FitOptions options = variant_options(config, name);
    const ModelParams init = protocol_init(config, train_data, truth, options);
    const FitReport report = fit(train_data, init, options);
    v.prediction = evaluate_topk(report.params, result.hyper, train, test, ks, scoring);
    result.variants.push_back(std::move(v));
  }
  return result;
}

void cmd_simulate(const json& config) {
  const fs::path dir = output_dir(config);
  const SimConfig sim = sim_config_from_config(config);
  Trace shape;
  shape.n_users = sim.n_users;
  shape.n_categories = sim.V;
  json adjusted = config;
  adjusted["hyper"]["M"] = sim.M;
  adjusted["hyper"]["bandwidth"] = config.at("simulation").at("bandwidth");
  const HyperParams hyper = hyper_from_config(adjusted, shape);
  const SimResult result = generate_trace(sim, hyper);
  write_json(dir / "config.json", config);
  write_trace_csv((dir / "trace.csv").string(), result.trace, identity_maps(result.trace));
  json truth{{"params", to_json(result.truth)},
             {"hyper", to_json(hyper)},
             {"region", to_json(result.trace.region)},
             {"maps", to_json(identity_maps(result.trace))}};
  write_json(dir / "truth.json", truth);
  std::ostringstream communities;
  communities << "event,community\n";
  for (std::size_t n = 0; n < result.trace.size(); ++n) {
    communities << n << ',' << *result.trace.events[n].community << '\n';
  }
  write_text((dir / "communities.csv").string(), communities.str());
  json stats{{"n_events", result.trace.size()},
             {"proposals", result.stats.proposals},
             {"rejections", result.stats.rejections},
             {"max_bound_ratio", result.stats.max_bound_ratio},
             {"horizon_exhausted", result.stats.horizon_exhausted}};
  write_json(dir / "simulation.json", stats);
  if (result.stats.horizon_exhausted) {
    std::cerr << "warning: horizon reached after " << result.trace.size() << " of " << sim.n_events << " events\n";
  }
}

SynthRecoverResult cmd_synth_recover(const json& config) {
  const fs::path dir = output_dir(config);
  const auto start = std::chrono::steady_clock::now();
  SynthRecoverResult result = synth_recover(config);
  write_json(dir / "config.json", config);
  write_trace_csv((dir / "trace.csv").string(), result.sim.trace, identity_maps(result.sim.trace));
  write_json(dir / "truth.json", {{"params", to_json(result.sim.truth)}, {"region", to_json(result.sim.trace.region)}});
  write_json(dir / "fitted.json", {{"params", to_json(result.fitted)}, {"hyper", to_json(result.hyper)}});

  json recovery = json::object();
  std::ostringstream topk;
  topk << "variant,K,hits,n_test\n";
  for (const VariantResult& v : result.variants) {
    if (v.relerr_A >= 0.0) {
      recovery[v.name] = {{"relerr_A", v.relerr_A}, {"relerr_phi", v.relerr_phi}};
    }
    for (std::size_t k = 0; k < v.prediction.ks.size(); ++k) {
      topk << v.name << ',' << v.prediction.ks[k] << ',' << v.prediction.hits[k] << ',' << v.prediction.n_test << '\n';
    }
  }
  write_json(dir / "recovery.json", recovery);
  write_text((dir / "topk.csv").string(), topk.str());
  for (const VariantResult& v : result.variants) {
    if (!v.elbo_trace.empty()) {
      write_text((dir / ("elbo_" + v.name + ".csv")).string(), elbo_csv(v.elbo_trace));
    }
  }
  json report{{"n_events", result.sim.trace.size()},
              {"proposals", result.sim.stats.proposals},
              {"rejections", result.sim.stats.rejections},
              {"horizon_exhausted", result.sim.stats.horizon_exhausted},
              {"recovery", recovery}};
  if (!deterministic(config)) {
    report["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  write_json(dir / "report.json", report);
  return result;
}

void cmd_fit(const json& config) {
  const fs::path dir = output_dir(config);
  LoadedTrace loaded = load_trace(require_path(config, "trace"), load_options_from_config(config));
  for (const auto& w : loaded.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  auto [train, test] = split_trace(loaded.trace, config.at("data").at("train_fraction").get<double>());
  if (train.size() == 0) {
    throw ContractError("fit: the training split is empty");
  }
  const HyperParams hyper = hyper_from_config(config, train);
  const FitOptions options = fit_options_from_config(config.at("fit"));
  const FitReport report = fit(train, hyper, std::nullopt, options);
  json model{{"params", to_json(report.params)},
             {"hyper", to_json(hyper)},
             {"region", to_json(train.region)},
             {"maps", to_json(loaded.maps)},
             {"n_train", train.size()},
             {"n_test", test.size()}};
  write_json(dir / "model.json", model);
  write_text((dir / "elbo_trace.csv").string(), elbo_csv(report.elbo_trace));
  json summary{{"epochs", report.epochs},
               {"converged", report.converged},
               {"final_elbo", report.elbo_trace.empty() ? json(nullptr) : json(report.elbo_trace.back())}};
  if (!deterministic(config)) {
    summary["wall_seconds"] = report.wall_seconds;
  }
  write_json(dir / "fit_report.json", summary);
  write_json(dir / "config.json", config);
}

void cmd_predict(const json& config) {
  const fs::path dir = output_dir(config);
  const FittedModel model = load_model(require_path(config, "model"));
  const LoadedTrace loaded = load_trace_for_model(config, model);
  auto [train, test] = split_trace(loaded.trace, config.at("data").at("train_fraction").get<double>());
  ScoringOptions scoring;
  scoring.use_prior = config.at("prediction").at("use_prior").get<bool>();
  const PredictionResult result = evaluate_topk(model.params, model.hyper, train, test,
                                                config.at("prediction").at("ks").get<std::vector<int>>(), scoring);
  std::ostringstream csv;
  csv << "K,hits,n_test\n";
  for (std::size_t k = 0; k < result.ks.size(); ++k) {
    csv << result.ks[k] << ',' << result.hits[k] << ',' << result.n_test << '\n';
  }
  write_text((dir / "predictions.csv").string(), csv.str());
  write_json(dir / "config.json", config);
}

void cmd_eval_communities(const json& config) {
  const fs::path dir = output_dir(config);
  const FittedModel model = load_model(require_path(config, "model"));
  const LoadedTrace loaded = load_trace_for_model(config, model);
  const EmbeddingTable embeddings = load_embeddings(require_path(config, "embeddings"));
  auto [train, test] = split_trace(loaded.trace, config.at("data").at("train_fraction").get<double>());
  const auto k_cats = config.at("evaluation").at("k_cat").get<std::vector<int>>();
  const bool soft = config.at("evaluation").at("soft").get<bool>();
  const CommunityReport report =
      community_report(model.params, model.hyper, train, loaded.maps.categories, embeddings, k_cats, soft);
  std::ostringstream cat;
  cat << "K_cat,mean,sum,n_events,n_dropped\n";
  for (const CategoryLoss& c : report.category) {
    cat << c.k_cat << ',' << fixed(c.mean, 9) << ',' << fixed(c.sum, 9) << ',' << c.n_events << ',' << c.n_dropped
        << '\n';
  }
  write_text((dir / "category_loss.csv").string(), cat.str());
  write_text((dir / "location_loss.csv").string(), "L_loc\n" + fixed(report.location, 9) + "\n");
  json communities = json::array();
  for (std::size_t g = 0; g < report.community_sizes.size(); ++g) {
    json top = json::object();
    for (const CategoryLoss& c : report.category) {
      top[std::to_string(c.k_cat)] = c.top_categories[g];
    }
    communities.push_back({{"community", g}, {"events", report.community_sizes[g]}, {"top_categories", top}});
  }
  write_json(dir / "communities.json", {{"soft", soft}, {"communities", communities}});
  write_json(dir / "config.json", config);
}

void cmd_export_network(const json& config) {
  const fs::path dir = output_dir(config);
  const FittedModel model = load_model(require_path(config, "model"));
  const auto thresholds = config.at("export").at("thresholds").get<std::vector<double>>();
  const auto formats = string_list(config.at("export").at("formats"));
  for (double t : thresholds) {
    if (t < 0.0 || t > 1.0) {
      throw ContractError("export: thresholds must lie in [0, 1]");
    }
    const std::vector<Edge> forest = mwsf(model.params.A, t);
    const std::string stem = "network_" + threshold_tag(t);
    for (const std::string& f : formats) {
      if (f == "graphml") {
        write_graphml((dir / (stem + ".graphml")).string(), model.params.n_users(), forest);
      } else if (f == "csv") {
        write_edges_csv((dir / (stem + ".csv")).string(), forest);
      } else {
        throw ContractError("export: unknown format '" + f + "'");
      }
    }
  }
  write_json(dir / "config.json", config);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-community spatio-temporal Hawkes toolkit", "colab"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  bool det = false;
  std::string out_dir;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const json&);
  };
  const std::vector<Command> commands{
      {"simulate", "Generate a synthetic trace", cmd_simulate},
      {"synth-recover", "Simulate, fit and score parameter recovery and top-K prediction",
       [](const json& c) { cmd_synth_recover(c); }},
      {"fit", "Fit the model to a trace CSV", cmd_fit},
      {"predict", "Top-K next-location prediction on the held-out split", cmd_predict},
      {"eval-communities", "Category and location losses of the inferred communities", cmd_eval_communities},
      {"export-network", "Thresholded maximum weighted spanning forests of A", cmd_export_network},
  };
  std::vector<CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--threads", threads, "OpenMP threads (0 = runtime default)");
    sub->add_flag("--deterministic", det, "Reproducible outputs: fixed reductions, no wall-clock");
    sub->add_option("--out", out_dir, "Override paths.output_dir");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    json config = config_path.empty() ? merge_config(json::object()) : load_config(config_path);
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (!subs[k]->parsed()) {
        continue;
      }
      if (subs[k]->count("--seed") > 0) {
        config["seed"] = seed;
      }
      if (subs[k]->count("--threads") > 0) {
        config["threads"] = threads;
      }
      if (det) {
        config["deterministic"] = true;
      }
      if (!out_dir.empty()) {
        config["paths"]["output_dir"] = out_dir;
      }
      ParallelSettings settings;
      settings.threads = config.at("threads").get<int>();
      settings.deterministic = config.at("deterministic").get<bool>();
      configure_parallelism(settings);
      commands[k].run(config);
      out << commands[k].name << ": wrote " << config.at("paths").at("output_dir").get<std::string>() << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

} // namespace colab
