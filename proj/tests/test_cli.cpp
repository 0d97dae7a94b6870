#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "gspn/error.hpp"
#include "gspn/invariance.hpp"
#include "gspn/oracle.hpp"
#include "gspn/queries.hpp"
#include "support.hpp"

using namespace gspn;
namespace fs = std::filesystem;

namespace {

const std::string kCorpus = std::string(GSPN_DATA_DIR) + "/qm9_micro.smi";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / "gspn_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

cli::RunConfig small_config(const fs::path& out, const std::string& variant = "sort") {
  cli::RunConfig cfg;
  cfg.data = kCorpus;
  cfg.variant = variant;
  cfg.structure = StructureConfig{2, 4, 4, 3, 1};
  cfg.train.epochs = 3;
  cfg.out = out.string();
  return cfg;
}

// Randomized untrained model saved to dir/model.gspn.
std::string saved_model(const fs::path& dir, Variant v, int m) {
  const Alphabet atoms;
  GraphSPNModel model = make_model(molecule_representation(m, atoms), v, StructureConfig{2, 3, 3, 2, 5}, 2, 4,
                                   atoms.elements, cli::kBondNames);
  Rng rng(5);
  test::randomize(model.circuit, rng, 1.0);
  const std::string path = (dir / "model.gspn").string();
  save_model(model, path);
  return path;
}

std::string write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(GSPN_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Train, DefaultEpochsGiveFortyLineTrace) {
  const fs::path dir = scratch("train40");
  cli::RunConfig cfg = small_config(dir);
  cfg.train.epochs = cli::RunConfig{}.train.epochs;
  cli::cmd_train(cfg);
  EXPECT_EQ(lines_of(dir / "trace.tsv").size(), 40u);
  EXPECT_TRUE(fs::exists(dir / "model.gspn"));
  EXPECT_NE(slurp(dir / "load_report.txt").find("accepted"), std::string::npos);
}

TEST(Train, RerunIsBitIdentical) {
  const fs::path a = scratch("rerun_a");
  const fs::path b = scratch("rerun_b");
  cli::cmd_train(small_config(a));
  cli::cmd_train(small_config(b));
  EXPECT_EQ(slurp(a / "model.gspn"), slurp(b / "model.gspn"));
}

TEST(Train, ExactWithNineSlotsIsRefused) {
  EXPECT_THROW(cli::cmd_train(small_config(scratch("exact"), "exact")), FeasibilityError);
  EXPECT_EQ(run_cli("train --data " + kCorpus + " --variant exact --out " + scratch("exact_cli").string()), 4);
}

TEST(Sample, CountCorrectionAndDeterminism) {
  const fs::path dir = scratch("sample");
  const std::string model = saved_model(dir, Variant::sort, 9);
  cli::RunConfig cfg = small_config(dir);
  cfg.sample_seed = 3;
  cli::cmd_sample(cfg, model);
  const auto lines = lines_of(dir / "samples.smi");
  ASSERT_EQ(lines.size(), 4000u);
  for (const auto& s : lines) ASSERT_TRUE(check_valency(parse_smiles(s)).valid) << s;
  const std::string first = slurp(dir / "samples.smi");
  cli::cmd_sample(cfg, model);
  EXPECT_EQ(slurp(dir / "samples.smi"), first);
  EXPECT_THROW(cli::cmd_sample(cfg, (dir / "missing.gspn").string()), DataError);
}

TEST(Evaluate, ReportHasMetricsCountsAndConfig) {
  const fs::path dir = scratch("evaluate");
  const std::string model = saved_model(dir, Variant::none, 9);
  cli::RunConfig cfg = small_config(dir, "none");
  cfg.count = 300;
  cfg.repeats = 2;
  const auto runs = cli::cmd_evaluate(cfg, model);
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[1].seed, runs[0].seed + 1);
  const std::string report = slurp(dir / "metrics.txt");
  for (const char* key : {"variant none", "count 300", "repeat.0.validity 100.00", "repeat.1.validity_wo_check",
                          "repeat.0.uniqueness", "repeat.0.novelty", "repeat.0.n_valid_raw", "mean.validity 100.00",
                          "repeat.0.raw.uniqueness"}) {
    EXPECT_NE(report.find(key), std::string::npos) << key;
  }
}

TEST(Condition, FullMoleculeFragmentRepeats) {
  const fs::path dir = scratch("condition_full");
  const std::string model = saved_model(dir, Variant::sort, 4);
  cli::RunConfig cfg = small_config(dir);
  cfg.count = 5;
  const auto lines = cli::cmd_condition(cfg, model, "CC(=O)N", {});
  ASSERT_EQ(lines.size(), 5u);
  for (const auto& s : lines) EXPECT_EQ(s, write_smiles(parse_smiles("CC(=O)N")));
}

TEST(Condition, FragmentEmbeddedInEveryDraw) {
  for (Variant v : {Variant::none, Variant::sort, Variant::rand}) {
    const fs::path dir = scratch("condition_" + to_string(v));
    const std::string model = saved_model(dir, v, 6);
    cli::RunConfig cfg = small_config(dir, to_string(v));
    cfg.count = 8;
    cfg.correction = false;
    const auto lines = cli::cmd_condition(cfg, model, "C=CO", {4, 1, 2});
    ASSERT_EQ(lines.size(), 8u);
    for (int i = 0; i < 8; ++i) {
      const std::string dot = slurp(dir / ("conditional_" + std::to_string(i) + ".dot"));
      // Three pinned atoms and their two bonds are drawn bold.
      std::size_t bold = 0;
      for (std::size_t at = dot.find("style=bold"); at != std::string::npos; at = dot.find("style=bold", at + 1)) ++bold;
      EXPECT_EQ(bold, 5u) << dot;
      if (v != Variant::sort) {
        EXPECT_NE(dot.find("n4 [label=\"C\", style=bold]"), std::string::npos);
        EXPECT_NE(dot.find("n2 [label=\"O\", style=bold]"), std::string::npos);
        EXPECT_NE(dot.find("n1 -- n4 [label=\"double\", style=bold]"), std::string::npos);
      }
    }
  }
}

TEST(Condition, Errors) {
  const fs::path dir = scratch("condition_err");
  const std::string model = saved_model(dir, Variant::sort, 4);
  const cli::RunConfig cfg = small_config(dir);
  EXPECT_THROW(cli::cmd_condition(cfg, model, "C=(", {}), SmilesError);
  EXPECT_THROW(cli::cmd_condition(cfg, model, "CCCCC", {}), CapacityError);
  EXPECT_THROW(cli::cmd_condition(cfg, model, "CC", {0}), ConfigError);
  EXPECT_EQ(run_cli("condition --model " + model + " --fragment 'C=(' --out " + dir.string()), 3);
  const std::string kary = saved_model(scratch("condition_kary"), Variant::kary, 4);
  EXPECT_EQ(run_cli("condition --model " + kary + " --fragment C --out " + dir.string()), 5);
}

TEST(Query, MarginalEvidenceAndOracle) {
  const fs::path dir = scratch("query");
  const std::string path = saved_model(dir, Variant::none, 2);
  const GraphSPNModel model = load_model(path);
  const cli::RunConfig cfg = small_config(dir);

  const cli::QueryResult all = cli::cmd_query(cfg, path, write_text(dir / "all.q", "# nothing known\n"));
  EXPECT_NEAR(all.log_value, 0.0, 1e-12);
  EXPECT_NEAR(all.value, 1.0, 1e-12);

  const cli::QueryResult full = cli::cmd_query(
      cfg, path, write_text(dir / "full.q", "node 0 = C\nnode 1 = O\nedge 0 0 = none\nedge 1 1 = none\nedge 0 1 = double\n"));
  const GraphTensor g = mol_to_graph(parse_smiles("C=O"), 2);
  EXPECT_NEAR(full.log_value, logp_none(model, g), 1e-12);

  const std::string text = "node 0 = N\nnode 1 = ?\nedge 0 1 = ?\n";
  const cli::QueryResult part = cli::cmd_query(cfg, path, write_text(dir / "part.q", text));
  const QueryMask q = compile(parse_query(text, model), model.rep);
  EXPECT_NEAR(part.value, oracle::brute_marginal(model.circuit, q), 1e-9);

  const std::string kary = saved_model(scratch("query_kary"), Variant::kary, 3);
  EXPECT_THROW(cli::cmd_query(cfg, kary, (dir / "all.q").string()), UnsupportedQueryError);
  EXPECT_EQ(run_cli("query --model " + kary + " --query " + (dir / "all.q").string() + " --out " + dir.string()), 5);
}

TEST(Cli, ExitCodesAndMetadata) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(run_cli("train --no-such-flag"), 2);
  EXPECT_EQ(run_cli("train --data /nonexistent.smi --out " + dir.string()), 3);
  EXPECT_EQ(run_cli("train --data " + kCorpus + " --split 0.5,0.2,0.2 --out " + dir.string()), 2);
  const std::string model = saved_model(dir, Variant::sort, 9);
  EXPECT_EQ(run_cli("sample --model " + model + " --count 10 --threads 1 --out " + dir.string()), 0);
  const std::string meta = slurp(dir / "sample.ini");
  EXPECT_NE(meta.find("count=10"), std::string::npos);
  EXPECT_NE(meta.find("sample.model="), std::string::npos);
  EXPECT_EQ(meta.find("query.query"), std::string::npos);
}
