#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gspn/graph.hpp"
#include "gspn/model.hpp"

namespace gspn {

// Indicator-product query over the slot variables. A mode is either an
// observed category or std::nullopt (marginal). Edge modes are m x m row-major
// and must agree on both copies of every pair.
struct SubgraphQuery {
  int m = 0;
  std::vector<int> target_nodes;
  std::vector<std::optional<int>> node_mode;
  std::vector<std::optional<int>> edge_mode;

  std::optional<int>& edge(int i, int j) { return edge_mode[static_cast<std::size_t>(i) * m + j]; }
  const std::optional<int>& edge(int i, int j) const {
    return edge_mode[static_cast<std::size_t>(i) * m + j];
  }
};

// Every slot marginal.
SubgraphQuery marginal_query(int m);
// Every slot observed from g.
SubgraphQuery evidence_query(const GraphTensor& g);
// Evidence from g except the target nodes and every edge touching them.
SubgraphQuery marginal_query(const GraphTensor& g, const std::vector<int>& targets);

// Throws DimensionError / IntegrityError on bad indices or categories and
// ConfigError when the two copies of an edge disagree.
QueryMask compile(const SubgraphQuery& qu, const Representation& rep);

// log of the expected indicator product. rand uses `n_perms` orderings (the
// model's N when 0) drawn with rng_seed. kary throws UnsupportedQueryError.
double expectation(const GraphSPNModel& model, const SubgraphQuery& qu, std::uint64_t rng_seed = 0,
                   int n_perms = 0);
double expectation(const GraphSPNModel& model, const QueryMask& q, std::uint64_t rng_seed = 0,
                   int n_perms = 0);

// A known fragment: fragment node a sits at slot slots[a].
struct KnownPart {
  LabeledGraph fragment;
  std::vector<int> slots;
};

// Evidence mask pinning the fragment's nodes and all edges among them. For a
// sort model the fragment is canonicalized first and pinned to slots
// 0..n-1; `placed` (if given) receives the slot of each fragment node.
QueryMask known_part_evidence(const GraphSPNModel& model, const KnownPart& known,
                              std::vector<int>* placed = nullptr);

// `count` draws conditioned on the known part, draw i seeded by
// Rng::mix(rng_seed, i). Throws ImpossibleEvidenceError on zero mass.
std::vector<GraphTensor> conditional_generate(const GraphSPNModel& model, const KnownPart& known,
                                              int count, std::uint64_t rng_seed,
                                              std::vector<int>* placed = nullptr);

// Text query format, one statement per line, '#' starts a comment:
//   node <i> = <category> | ?
//   edge <i> <j> = <category> | ?
// Categories are model names, "virtual" / "none", or integer indices.
// Unlisted variables are marginal. Throws FormatError with the line number.
SubgraphQuery parse_query(const std::string& text, const GraphSPNModel& model);
SubgraphQuery load_query(const std::string& path, const GraphSPNModel& model);

}  // namespace gspn
