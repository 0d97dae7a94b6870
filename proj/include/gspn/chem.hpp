#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gspn/error.hpp"
#include "gspn/graph.hpp"

namespace gspn {

struct Bond {
  int i = 0;  // i < j
  int j = 0;
  int order = 1;  // 1, 2 or 3

  bool operator==(const Bond&) const = default;
};

// Heavy-atom graph; hydrogens are implicit.
struct Molecule {
  std::vector<std::string> atoms;
  std::vector<Bond> bonds;

  int size() const { return static_cast<int>(atoms.size()); }
};

// Element symbols in category order.
struct Alphabet {
  std::vector<std::string> elements{"C", "N", "O", "F"};

  int size() const { return static_cast<int>(elements.size()); }
  // -1 when absent.
  int index(const std::string& symbol) const;
};

// Thrown by parse_smiles. `reason` is one of "not_kekulized",
// "unsupported_atom", "syntax_error"; `position` is a 0-based offset.
class SmilesError : public FormatError {
 public:
  SmilesError(std::string reason, std::size_t position, const std::string& what);
  const std::string& reason() const { return reason_; }
  std::size_t position() const { return position_; }

 private:
  std::string reason_;
  std::size_t position_;
};

// Kekulized SMILES subset: organic-subset atoms from the alphabet, bonds
// - = #, branches, ring closures 1-9, '.' between components.
Molecule parse_smiles(const std::string& text, const Alphabet& alphabet = {});

// Canonical string: depth-first from the canonical ordering, ring closures
// numbered as they are opened (lowest free digit), components joined by '.'.
std::string write_smiles(const Molecule& mol, const Alphabet& alphabet = {});

// Representation for an alphabet: q = |alphabet|, r = 3 bond orders.
Representation molecule_representation(int m_slots, const Alphabet& alphabet = {});

// Throws CapacityError above m_slots atoms, ConfigError on unknown elements.
GraphTensor mol_to_graph(const Molecule& mol, int m_slots, const Alphabet& alphabet = {});
Molecule graph_to_mol(const GraphTensor& g, const Alphabet& alphabet = {});

// Maximum total bond order per element.
struct ValenceTable {
  std::map<std::string, int> max_order{{"C", 4}, {"N", 3}, {"O", 2}, {"F", 1}};

  // Throws ConfigError for elements without an entry.
  int at(const std::string& element) const;
};

struct ValencyReport {
  bool valid = true;
  std::vector<int> total;   // per atom
  std::vector<int> excess;  // per atom, max(0, total - allowed)
};

ValencyReport check_valency(const Molecule& mol, const ValenceTable& vt = {});

// Repeatedly lowers a bond of the atom with the largest excess (lowest index
// on ties): its highest-order bond, lowest neighbour on ties, stepping
// 3 -> 2 -> 1 -> none. Locked slot pairs are lowered only when an atom has no
// other bond left.
GraphTensor correct(const GraphTensor& g, const ValenceTable& vt = {}, const Alphabet& alphabet = {},
                    const std::vector<std::pair<int, int>>& locked = {});

// Canonical string of a graph's molecule (virtual slots dropped).
std::string canonical_smiles(const GraphTensor& g, const Alphabet& alphabet = {});

struct MetricsOptions {
  bool correction = true;
  // Uniqueness / novelty over corrected molecules (true) or over the raw
  // samples that were already valid (false).
  bool unique_novel_on_corrected = true;
};

struct Metrics {
  double validity = 0;
  double validity_wo_check = 0;
  double uniqueness = 0;
  double novelty = 0;
  // Unique valid molecules over all samples.
  double uniqueness_over_samples = 0;
  int n_samples = 0;
  int n_valid_raw = 0;
  int n_valid = 0;
  int n_unique = 0;
  int n_novel = 0;
  // Set when no sample is valid; uniqueness and novelty are then 0.
  bool no_valid = false;
};

// Throws DataError on an empty sample list.
Metrics compute_metrics(const std::vector<GraphTensor>& samples, const std::set<std::string>& train_canon,
                        const MetricsOptions& opt = {}, const ValenceTable& vt = {},
                        const Alphabet& alphabet = {});

}  // namespace gspn
