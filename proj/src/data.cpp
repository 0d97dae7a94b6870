#include "gspn/data.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gspn/error.hpp"
#include "gspn/rng.hpp"

namespace gspn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Molecule shuffle_atoms(const Molecule& mol, Rng& rng) {
  std::vector<int> order(mol.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<int> where(mol.size());
  for (int a = 0; a < mol.size(); ++a) where[order[a]] = a;
  Molecule out;
  for (int a = 0; a < mol.size(); ++a) out.atoms.push_back(mol.atoms[order[a]]);
  for (const auto& b : mol.bonds) {
    const int i = where[b.i];
    const int j = where[b.j];
    out.bonds.push_back({std::min(i, j), std::max(i, j), b.order});
  }
  return out;
}

}  // namespace

int LoadReport::rejected_total() const {
  int t = 0;
  for (const auto& [reason, n] : rejected) t += n;
  return t;
}

std::string LoadReport::to_text() const {
  std::ostringstream os;
  os << "data_lines " << data_lines << "\n"
     << "accepted " << accepted << "\n"
     << "comment_or_blank_lines " << comment_lines << "\n";
  for (const char* reason : {"not_kekulized", "unsupported_atom", "too_many_atoms", "syntax_error"}) {
    const auto it = rejected.find(reason);
    os << "rejected." << reason << " " << (it == rejected.end() ? 0 : it->second) << "\n";
  }
  return os.str();
}

Dataset load_lines(const std::vector<std::string>& lines, int m, const Alphabet& alphabet,
                   std::uint64_t perm_seed, LoadReport* report) {
  LoadReport rep;
  for (const char* reason : {"not_kekulized", "unsupported_atom", "too_many_atoms", "syntax_error"}) {
    rep.rejected[reason] = 0;
  }
  Dataset ds;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string text = trim(lines[ln]);
    if (text.empty() || text[0] == '#') {
      ++rep.comment_lines;
      continue;
    }
    // Ignore anything after the first whitespace (e.g. an id column).
    if (const auto ws = text.find_first_of(" \t"); ws != std::string::npos) text.erase(ws);
    ++rep.data_lines;
    const int line_no = static_cast<int>(ln) + 1;
    Molecule mol;
    try {
      mol = parse_smiles(text, alphabet);
    } catch (const SmilesError& e) {
      ++rep.rejected[e.reason()];
      continue;
    }
    if (mol.size() > m) {
      ++rep.rejected["too_many_atoms"];
      continue;
    }
    Rng rng(Rng::mix(perm_seed, static_cast<std::uint64_t>(line_no)));
    ds.graphs.push_back(mol_to_graph(shuffle_atoms(mol, rng), m, alphabet));
    ds.source_line.push_back(line_no);
    ++rep.accepted;
  }
  if (report) *report = rep;
  if (ds.graphs.empty()) throw DataError("no molecule in the corpus survived filtering");
  return ds;
}

Dataset load_corpus(const std::string& path, int m, const Alphabet& alphabet, std::uint64_t perm_seed,
                    LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (in.bad()) throw DataError("error while reading corpus " + path);
  return load_lines(lines, m, alphabet, perm_seed, report);
}

Split split(const Dataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed,
            const Alphabet& alphabet) {
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n))));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));

  Split out;
  auto take = [&](Dataset& part, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      part.graphs.push_back(ds.graphs[order[i]]);
      part.source_line.push_back(ds.source_line[order[i]]);
    }
  };
  take(out.train, 0, n_train);
  take(out.valid, n_train, n_train + n_valid);
  take(out.test, n_train + n_valid, n);
  for (const auto& g : out.train.graphs) out.train.train_canon.insert(canonical_smiles(g, alphabet));
  return out;
}

}  // namespace gspn
