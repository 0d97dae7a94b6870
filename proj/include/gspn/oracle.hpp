#pragma once

#include <vector>

#include "gspn/circuit.hpp"
#include "gspn/graph.hpp"

// Brute-force references for tests. Everything here works in linear space,
// walks the layer structures directly and never calls the evaluation code it
// is meant to check.
namespace gspn::oracle {

// Largest enumerated domain.
inline constexpr double kMaxDomain = 1e6;
// Largest real-node count for permutation / tuple enumeration.
inline constexpr int kMaxNodes = 6;

// Circuit value of one complete assignment, linear space.
double naive_density(const Circuit& c, const Assignment& a);

// Sum of the density over every assignment. Throws CapacityError when the
// domain exceeds kMaxDomain.
double brute_total_mass(const Circuit& c);

// Mass of the query: observed variables fixed, marginalized ones summed,
// weighted ones summed with their weights.
double brute_marginal(const Circuit& c, const QueryMask& q);

// Conditional distribution over the non-observed variables.
struct ConditionalTable {
  std::vector<int> free_vars;
  std::vector<Assignment> values;  // one row per joint value of free_vars
  std::vector<double> prob;
};
ConditionalTable brute_conditional_table(const Circuit& c, const QueryMask& q);

// Mean density over all orderings of the real nodes, virtual slots kept at
// the tail.
double brute_janossy(const Circuit& c, const GraphTensor& g);
// Mean density of the k-slot circuit over all ordered k-tuples of real nodes.
double brute_kary(const Circuit& c, const GraphTensor& g, int k);

// Compensated (Neumaier) summation.
class KahanSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace gspn::oracle
