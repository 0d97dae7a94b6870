#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gspn/data.hpp"
#include "gspn/error.hpp"
#include "gspn/invariance.hpp"
#include "gspn/queries.hpp"
#include "gspn/rng.hpp"

namespace gspn::cli {

namespace {

std::string path_in(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out);
  return (std::filesystem::path(cfg.out) / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

Alphabet model_alphabet(const GraphSPNModel& model) { return Alphabet{model.node_names}; }

Split load_split(const RunConfig& cfg, LoadReport* report = nullptr) {
  if (cfg.data.empty()) throw ConfigError("no corpus given (--data)");
  const Dataset ds = load_corpus(cfg.data, cfg.m, cfg.atoms(), cfg.perm_seed, report);
  return split(ds, cfg.split, cfg.split_seed, cfg.atoms());
}

std::string fixed2(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << x;
  return os.str();
}

void write_metrics(std::ostream& os, const std::string& prefix, const Metrics& r) {
  os << prefix << "validity " << fixed2(r.validity) << "\n";
  os << prefix << "validity_wo_check " << fixed2(r.validity_wo_check) << "\n";
  os << prefix << "uniqueness " << fixed2(r.uniqueness) << "\n";
  os << prefix << "novelty " << fixed2(r.novelty) << "\n";
  os << prefix << "uniqueness_over_samples " << fixed2(r.uniqueness_over_samples) << "\n";
  os << prefix << "n_samples " << r.n_samples << "\n";
  os << prefix << "n_valid_raw " << r.n_valid_raw << "\n";
  os << prefix << "n_valid " << r.n_valid << "\n";
  os << prefix << "n_unique " << r.n_unique << "\n";
  os << prefix << "n_novel " << r.n_novel << "\n";
  os << prefix << "no_valid " << (r.no_valid ? 1 : 0) << "\n";
}

}  // namespace

GraphSPNModel cmd_train(const RunConfig& cfg) {
  const Variant variant = parse_variant(cfg.variant);
  if (variant == Variant::exact && cfg.m > kExactMaxNodes) {
    throw FeasibilityError("exact invariance with m=" + std::to_string(cfg.m) + " needs " +
                           std::to_string(factorial(cfg.m)) + " circuit passes per molecule; use m <= " +
                           std::to_string(kExactMaxNodes) + " or another variant");
  }
  LoadReport report;
  const Split parts = load_split(cfg, &report);
  write_file(path_in(cfg, "load_report.txt"), report.to_text());
  if (parts.train.graphs.empty()) throw DataError("training split is empty");

  const Alphabet atoms = cfg.atoms();
  GraphSPNModel model = make_model(molecule_representation(cfg.m, atoms), variant, cfg.structure, cfg.k, cfg.N,
                                   atoms.elements, kBondNames);
  const auto& graphs = parts.train.graphs;
  std::ostringstream trace;
  trace << std::setprecision(17);
  fit(
      model.circuit,
      [&](int epoch) { return training_view(model, graphs, Rng::mix(cfg.perm_seed, static_cast<std::uint64_t>(epoch))); },
      cfg.train, [&](int epoch, double nll) { trace << epoch << "\t" << nll << "\n"; });
  write_file(path_in(cfg, "trace.tsv"), trace.str());
  save_model(model, path_in(cfg, "model.gspn"));
  return model;
}

std::vector<std::string> sample_smiles(const GraphSPNModel& model, const RunConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("--count must be positive");
  const Alphabet atoms = model_alphabet(model);
  const GraphSampler sampler(model, std::nullopt, Rng::mix(cfg.sample_seed, 0x5eed));
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    GraphTensor g = sampler.draw(Rng::mix(cfg.sample_seed, static_cast<std::uint64_t>(i)));
    if (cfg.correction) g = correct(g, {}, atoms);
    out.push_back(canonical_smiles(g, atoms));
  }
  return out;
}

void cmd_sample(const RunConfig& cfg, const std::string& model_path) {
  const GraphSPNModel model = load_model(model_path);
  std::string text;
  for (const auto& s : sample_smiles(model, cfg)) text += s + "\n";
  write_file(path_in(cfg, "samples.smi"), text);
}

std::vector<EvaluationRun> cmd_evaluate(const RunConfig& cfg, const std::string& model_path) {
  if (cfg.repeats < 1) throw ConfigError("--repeats must be positive");
  if (cfg.count < 1) throw ConfigError("--count must be positive");
  const GraphSPNModel model = load_model(model_path);
  const Alphabet atoms = model_alphabet(model);
  const Split parts = load_split(cfg);
  std::vector<EvaluationRun> runs;
  for (int r = 0; r < cfg.repeats; ++r) {
    EvaluationRun run;
    run.seed = cfg.sample_seed + static_cast<std::uint64_t>(r);
    const GraphSampler sampler(model, std::nullopt, Rng::mix(run.seed, 0x5eed));
    std::vector<GraphTensor> samples;
    for (int i = 0; i < cfg.count; ++i) samples.push_back(sampler.draw(Rng::mix(run.seed, static_cast<std::uint64_t>(i))));
    MetricsOptions on;
    MetricsOptions off;
    off.correction = false;
    run.corrected = compute_metrics(samples, parts.train.train_canon, on, {}, atoms);
    run.raw = compute_metrics(samples, parts.train.train_canon, off, {}, atoms);
    runs.push_back(run);
  }
  write_file(path_in(cfg, "metrics.txt"), metrics_report(cfg, runs));
  return runs;
}

std::string metrics_report(const RunConfig& cfg, const std::vector<EvaluationRun>& runs) {
  std::ostringstream os;
  os << "variant " << cfg.variant << "\n";
  os << "data " << cfg.data << "\n";
  os << "count " << cfg.count << "\n";
  os << "repeats " << runs.size() << "\n";
  os << "correction 1\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const std::string p = runs.size() == 1 ? "" : "repeat." + std::to_string(r) + ".";
    os << p << "seed " << runs[r].seed << "\n";
    write_metrics(os, p, runs[r].corrected);
    write_metrics(os, p + "raw.", runs[r].raw);
  }
  if (runs.size() > 1) {
    auto mean = [&](auto field) {
      double s = 0;
      for (const auto& run : runs) s += field(run);
      return fixed2(s / static_cast<double>(runs.size()));
    };
    os << "mean.validity " << mean([](const EvaluationRun& e) { return e.corrected.validity; }) << "\n";
    os << "mean.validity_wo_check " << mean([](const EvaluationRun& e) { return e.corrected.validity_wo_check; })
       << "\n";
    os << "mean.uniqueness " << mean([](const EvaluationRun& e) { return e.corrected.uniqueness; }) << "\n";
    os << "mean.novelty " << mean([](const EvaluationRun& e) { return e.corrected.novelty; }) << "\n";
    os << "mean.raw.uniqueness " << mean([](const EvaluationRun& e) { return e.raw.uniqueness; }) << "\n";
    os << "mean.raw.novelty " << mean([](const EvaluationRun& e) { return e.raw.novelty; }) << "\n";
  }
  return os.str();
}

std::vector<std::string> cmd_condition(const RunConfig& cfg, const std::string& model_path,
                                       const std::string& fragment, std::vector<int> slots) {
  if (cfg.count < 1) throw ConfigError("--count must be positive");
  const GraphSPNModel model = load_model(model_path);
  const Alphabet atoms = model_alphabet(model);
  const Molecule mol = parse_smiles(fragment, atoms);
  if (mol.size() > model.rep.m) {
    throw CapacityError("fragment has " + std::to_string(mol.size()) + " atoms, model has " +
                        std::to_string(model.rep.m) + " slots");
  }
  if (slots.empty()) {
    slots.resize(static_cast<std::size_t>(mol.size()));
    std::iota(slots.begin(), slots.end(), 0);
  }
  if (static_cast<int>(slots.size()) != mol.size()) {
    throw ConfigError("--slots lists " + std::to_string(slots.size()) + " anchors for " +
                      std::to_string(mol.size()) + " fragment atoms");
  }
  const KnownPart known{unpad(mol_to_graph(mol, mol.size(), atoms)), slots};
  std::vector<int> placed;
  const std::vector<GraphTensor> draws = conditional_generate(model, known, cfg.count, cfg.sample_seed, &placed);

  std::vector<std::pair<int, int>> locked;
  for (std::size_t a = 0; a < placed.size(); ++a) {
    for (std::size_t b = a + 1; b < placed.size(); ++b) locked.emplace_back(placed[a], placed[b]);
  }
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const GraphTensor g = cfg.correction ? correct(draws[i], {}, atoms, locked) : draws[i];
    lines.push_back(canonical_smiles(g, atoms));
    write_file(path_in(cfg, "conditional_" + std::to_string(i) + ".dot"),
               to_dot(g, model.node_names, model.edge_names, "sample " + std::to_string(i), placed));
  }
  std::string text;
  for (const auto& s : lines) text += s + "\n";
  write_file(path_in(cfg, "conditional.smi"), text);
  return lines;
}

QueryResult cmd_query(const RunConfig& cfg, const std::string& model_path, const std::string& query_path) {
  const GraphSPNModel model = load_model(model_path);
  const SubgraphQuery qu = load_query(query_path, model);
  QueryResult r;
  r.log_value = expectation(model, qu, cfg.sample_seed);
  r.value = std::exp(r.log_value);
  return r;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const CapacityError*>(&e) || dynamic_cast<const IntegrityError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const FeasibilityError*>(&e)) return 4;
  if (dynamic_cast<const ImpossibleEvidenceError*>(&e) || dynamic_cast<const UnsupportedQueryError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return 5;
  }
  return 1;
}

}  // namespace gspn::cli
