#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gspn/circuit.hpp"

namespace gspn {

// Slot count and category counts of the padded representation. Node
// categories are 0..q-1 plus the virtual category q; edge categories are
// 0..r-1 plus "no edge" r.
struct Representation {
  int m = 9;
  int q = 4;
  int r = 3;

  int virtual_node() const { return q; }
  int no_edge() const { return r; }
  // m(m+1) variables: each node followed by its row of edges.
  std::size_t var_count() const { return static_cast<std::size_t>(m) * (m + 1); }
  VariableSpec variable_spec() const;

  bool operator==(const Representation&) const = default;
};

// Variable index of node i / edge (i, j) in the flattened order.
inline std::size_t node_var(int m, int i) { return static_cast<std::size_t>(i) * (m + 1); }
inline std::size_t edge_var(int m, int i, int j) {
  return static_cast<std::size_t>(i) * (m + 1) + 1 + j;
}

// A graph without padding: n nodes over q categories, an n x n symmetric edge
// matrix whose "no edge" entry is r.
struct LabeledGraph {
  std::vector<int> nodes;
  Eigen::MatrixXi edges;

  int size() const { return static_cast<int>(nodes.size()); }
  bool operator==(const LabeledGraph& o) const {
    return nodes == o.nodes && edges.rows() == o.edges.rows() && edges.cols() == o.edges.cols() &&
           edges == o.edges;
  }
};

// Padded graph over m slots.
struct GraphTensor {
  Representation rep;
  std::vector<int> node_cat;
  Eigen::MatrixXi edge_cat;

  int m() const { return rep.m; }
  bool is_virtual(int slot) const { return node_cat[slot] == rep.virtual_node(); }
  // Number of non-virtual slots.
  int real_count() const;
  std::vector<int> real_slots() const;

  bool operator==(const GraphTensor& o) const {
    return rep == o.rep && node_cat == o.node_cat && edge_cat == o.edge_cat;
  }
};

// Index list p with p[new_position] = old_position.
using Permutation = std::vector<int>;

Permutation identity_permutation(int n);
Permutation inverse(const Permutation& p);
// (a then b): applying the result equals permute(permute(g, a), b).
Permutation compose(const Permutation& a, const Permutation& b);
bool is_permutation(const Permutation& p, int n);

// Throws IntegrityError on any invariant violation.
void check_graph(const GraphTensor& g);
void check_graph(const LabeledGraph& g, const Representation& rep);

GraphTensor pad(const LabeledGraph& g, const Representation& rep);
LabeledGraph unpad(const GraphTensor& g);

Assignment flatten(const GraphTensor& g);
GraphTensor unflatten(const Assignment& a, const Representation& rep);

GraphTensor permute(const GraphTensor& g, const Permutation& p);

// Canonical node order by colour refinement with individualisation on ties;
// virtual slots come last. permute(g, canonical_order(g)) is identical for
// every relabeling of g.
Permutation canonical_order(const GraphTensor& g);
GraphTensor canonical_form(const GraphTensor& g);

// Ordered k-tuples of distinct indices from [0, n) in lexicographic order.
void for_each_tuple(int n, int k, const std::function<void(const std::vector<int>&)>& fn);
std::vector<std::vector<int>> enumerate_tuples(int n, int k);
std::uint64_t falling_factorial(int n, int k);
std::uint64_t factorial(int n);

// Induced sub-graph on the slots of t (in tuple order), as a k-slot tensor.
GraphTensor subgraph(const GraphTensor& g, const std::vector<int>& t);

// N distinct uniform permutations of [0, n).
std::vector<Permutation> sample_permutations(int n, std::uint64_t count, std::uint64_t rng_seed);

// Graphviz text; virtual slots are omitted.
// Slots listed in `known` and the edges among them are drawn bold.
std::string to_dot(const GraphTensor& g, const std::vector<std::string>& node_names,
                   const std::vector<std::string>& edge_names, const std::string& title = "G",
                   const std::vector<int>& known = {});

}  // namespace gspn
