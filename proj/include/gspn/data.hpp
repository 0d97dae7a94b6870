#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gspn/chem.hpp"
#include "gspn/graph.hpp"

namespace gspn {

struct Dataset {
  std::vector<GraphTensor> graphs;
  std::vector<int> source_line;  // 1-based line of each graph in the corpus
  std::set<std::string> train_canon;  // filled by split() for the train part

  std::size_t size() const { return graphs.size(); }
};

// Rejections by reason: not_kekulized, unsupported_atom, too_many_atoms,
// syntax_error. data_lines excludes blank and '#' lines.
struct LoadReport {
  int data_lines = 0;
  int accepted = 0;
  int comment_lines = 0;
  std::map<std::string, int> rejected;

  int rejected_total() const;
  std::string to_text() const;
};

// One SMILES per line. Each surviving molecule gets its atoms shuffled with a
// generator seeded from (perm_seed, line). Throws DataError when the file is
// unreadable or nothing survives.
Dataset load_corpus(const std::string& path, int m, const Alphabet& alphabet, std::uint64_t perm_seed,
                    LoadReport* report = nullptr);
// Same, from in-memory lines.
Dataset load_lines(const std::vector<std::string>& lines, int m, const Alphabet& alphabet,
                   std::uint64_t perm_seed, LoadReport* report = nullptr);

struct Split {
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Seeded shuffle, then contiguous train / valid / test parts. Fractions must
// be non-negative and sum to 1 within 1e-9 (ConfigError otherwise). Part
// sizes round the train and valid shares; test takes the rest.
Split split(const Dataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed,
            const Alphabet& alphabet = {});

}  // namespace gspn
