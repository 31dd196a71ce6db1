// Experiment pipelines behind the `colab` command-line tool.
//
// Every command reads a merged JSON config (see io.hpp) and writes its
// reports into `paths.output_dir`. With "deterministic": true the outputs
// are a pure function of config, inputs and seed.
#pragma once

#include "colab/fit.hpp"
#include "colab/prediction.hpp"
#include "colab/simulator.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace colab {

struct VariantResult {
  std::string name;
  /// Recovery on the full trace (present for variants fitted there).
  double relerr_A = -1.0;
  double relerr_phi = -1.0;
  /// Top-K on the held-out split.
  PredictionResult prediction;
  std::vector<double> elbo_trace;
};

struct SynthRecoverResult {
  SimResult sim;
  HyperParams hyper;
  ModelParams fitted;
  std::vector<VariantResult> variants;
  const VariantResult& variant(const std::string& name) const;
};

/// FitOptions for a named variant: "full", "no_category" (the spatio-temporal
/// Hawkes ablation), "no_influence" or "no_base".
FitOptions variant_options(const nlohmann::json& config, const std::string& name);

/// Generates the synthetic trace, fits every configured variant on the full
/// trace (parameter recovery) and on the chronological training split
/// (top-K prediction).
SynthRecoverResult synth_recover(const nlohmann::json& config);

void cmd_simulate(const nlohmann::json& config);
SynthRecoverResult cmd_synth_recover(const nlohmann::json& config);
void cmd_fit(const nlohmann::json& config);
void cmd_predict(const nlohmann::json& config);
void cmd_eval_communities(const nlohmann::json& config);
void cmd_export_network(const nlohmann::json& config);

/// Parses arguments and dispatches. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace colab
