#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "gspn/error.hpp"

using namespace gspn;

namespace {

// The effective configuration in the same key = value form --config reads.
void write_run_metadata(const CLI::App& app, const cli::RunConfig& cfg, const std::string& command) {
  std::filesystem::create_directories(cfg.out);
  std::ofstream out(std::filesystem::path(cfg.out) / (command + ".ini"));
  out << "# gspn " << GSPN_VERSION << ", command " << command << "\n";
  out << "# compiler " << __VERSION__ << ", eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
      << EIGEN_MINOR_VERSION << "\n";
  // Options of other subcommands are left out.
  std::istringstream all(app.config_to_str(true, false));
  for (std::string line; std::getline(all, line);) {
    const std::string key = line.substr(0, line.find('='));
    const auto dot = key.find('.');
    if (dot == std::string::npos || key.compare(0, dot, command) == 0) out << line << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph sum-product networks for molecule generation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file with any of the options below");

  cli::RunConfig cfg;
  app.add_option("--data", cfg.data, "corpus, one SMILES per line");
  app.add_option("--m", cfg.m, "node slots")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--alphabet", cfg.alphabet, "atom categories")->delimiter(',')->capture_default_str();
  app.add_option("--variant", cfg.variant, "none, exact, sort, kary or rand")
      ->check(CLI::IsMember({"none", "exact", "sort", "kary", "rand"}))
      ->capture_default_str();
  app.add_option("--k", cfg.k, "sub-graph size (kary)")->capture_default_str();
  app.add_option("--N", cfg.N, "permutations per graph (rand)")->capture_default_str();
  app.add_option("--layers", cfg.structure.n_layers, "region-graph depth")->capture_default_str();
  app.add_option("--sums", cfg.structure.n_sum, "sum units per region")->capture_default_str();
  app.add_option("--inputs", cfg.structure.n_input, "input units per leaf region")->capture_default_str();
  app.add_option("--repetitions", cfg.structure.n_repetitions, "random partitions")->capture_default_str();
  app.add_option("--structure-seed", cfg.structure.structure_seed)->capture_default_str();
  app.add_option("--epochs", cfg.train.epochs)->capture_default_str();
  app.add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
  app.add_option("--step-size", cfg.train.step_size)->capture_default_str();
  app.add_option("--beta1", cfg.train.beta1)->capture_default_str();
  app.add_option("--beta2", cfg.train.beta2)->capture_default_str();
  app.add_option("--shuffle-seed", cfg.train.shuffle_seed)->capture_default_str();
  app.add_option("--threads", cfg.train.threads, "worker threads")
      ->envname("GSPN_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--perm-seed", cfg.perm_seed, "atom shuffles and training orderings")->capture_default_str();
  std::vector<double> split(cfg.split.begin(), cfg.split.end());
  app.add_option("--split", split, "train, valid, test fractions")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  app.add_option("--split-seed", cfg.split_seed)->capture_default_str();
  app.add_option("--seed", cfg.sample_seed, "sampling / query seed")->capture_default_str();
  app.add_option("--count", cfg.count, "molecules to draw")->capture_default_str();
  app.add_option("--correction", cfg.correction, "post-hoc valency correction (true/false)")->capture_default_str();
  app.add_option("--out", cfg.out, "output directory")->capture_default_str();

  std::string model_path;
  std::string fragment;
  std::string query_path;
  std::vector<int> slots;

  auto* train = app.add_subcommand("train", "fit a model on the training split");
  auto* sample = app.add_subcommand("sample", "draw molecules to <out>/samples.smi");
  auto* evaluate = app.add_subcommand("evaluate", "sample and report the four metrics to <out>/metrics.txt");
  auto* condition = app.add_subcommand("condition", "draw molecules containing a fragment");
  auto* query = app.add_subcommand("query", "probability of a sub-graph query");
  for (auto* sub : {sample, evaluate, condition, query}) {
    sub->add_option("--model", model_path, "model file from train")->required()->check(CLI::ExistingFile);
  }
  evaluate->add_option("--repeats", cfg.repeats, "sampling seeds seed, seed+1, ...")->capture_default_str();
  condition->add_option("--fragment", fragment, "kekulized SMILES of the known part")->required();
  condition->add_option("--slots", slots, "slot of each fragment atom")->delimiter(',');
  query->add_option("--query", query_path, "query file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::copy(split.begin(), split.end(), cfg.split.begin());

  try {
    if (train->parsed()) {
      write_run_metadata(app, cfg, "train");
      cli::cmd_train(cfg);
      std::cout << "model written to " << (std::filesystem::path(cfg.out) / "model.gspn").string() << "\n";
    } else if (sample->parsed()) {
      write_run_metadata(app, cfg, "sample");
      cli::cmd_sample(cfg, model_path);
    } else if (evaluate->parsed()) {
      write_run_metadata(app, cfg, "evaluate");
      const auto runs = cli::cmd_evaluate(cfg, model_path);
      std::cout << cli::metrics_report(cfg, runs);
    } else if (condition->parsed()) {
      write_run_metadata(app, cfg, "condition");
      for (const auto& s : cli::cmd_condition(cfg, model_path, fragment, slots)) std::cout << s << "\n";
    } else if (query->parsed()) {
      write_run_metadata(app, cfg, "query");
      const cli::QueryResult r = cli::cmd_query(cfg, model_path, query_path);
      std::cout << std::setprecision(17) << "log_value " << r.log_value << "\nvalue " << r.value << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
  return 0;
}
