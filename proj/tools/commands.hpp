#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gspn/chem.hpp"
#include "gspn/circuit.hpp"
#include "gspn/model.hpp"
#include "gspn/train.hpp"

namespace gspn::cli {

// Everything a run depends on. Field names follow the command-line flags.
struct RunConfig {
  std::string data;
  int m = 9;
  std::vector<std::string> alphabet{"C", "N", "O", "F"};
  std::string variant = "sort";
  int k = 2;
  int N = 20;
  StructureConfig structure;
  TrainConfig train;
  std::uint64_t perm_seed = 0;
  std::array<double, 3> split{0.9, 0.05, 0.05};
  std::uint64_t split_seed = 0;
  std::uint64_t sample_seed = 0;
  int count = 4000;
  bool correction = true;
  int repeats = 1;
  std::string out = "run";

  Alphabet atoms() const { return Alphabet{alphabet}; }
};

inline const std::vector<std::string> kBondNames{"single", "double", "triple"};

// Loads and splits the corpus, trains, writes model.gspn, trace.tsv and
// load_report.txt into cfg.out. Returns the trained model.
GraphSPNModel cmd_train(const RunConfig& cfg);

// cfg.count draws, corrected when cfg.correction, as canonical SMILES.
std::vector<std::string> sample_smiles(const GraphSPNModel& model, const RunConfig& cfg);
// Writes samples.smi into cfg.out.
void cmd_sample(const RunConfig& cfg, const std::string& model_path);

struct EvaluationRun {
  std::uint64_t seed = 0;
  Metrics corrected;
  Metrics raw;
};

// Metrics against the training split of cfg.data, one run per repeat (seed
// sample_seed + r). Writes metrics.txt into cfg.out.
std::vector<EvaluationRun> cmd_evaluate(const RunConfig& cfg, const std::string& model_path);
std::string metrics_report(const RunConfig& cfg, const std::vector<EvaluationRun>& runs);

// Draws molecules containing the fragment. `slots` anchors fragment atom a
// at slot slots[a] (default 0..n-1). Writes conditional.smi and one
// conditional_<i>.dot per draw into cfg.out; returns the SMILES lines.
std::vector<std::string> cmd_condition(const RunConfig& cfg, const std::string& model_path,
                                       const std::string& fragment, std::vector<int> slots);

struct QueryResult {
  double log_value = 0;
  double value = 0;
};

QueryResult cmd_query(const RunConfig& cfg, const std::string& model_path, const std::string& query_path);

// Process exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

}  // namespace gspn::cli
