#pragma once

#include <algorithm>
#include <cmath>

#include "gspn/circuit.hpp"
#include "gspn/graph.hpp"
#include "gspn/rng.hpp"

namespace gspn::test {

inline double normal(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Spreads the parameters so sums and leaves are far from uniform.
inline void randomize(Circuit& c, Rng& rng, double scale = 1.5) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(c.parameter_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = scale * normal(rng);
  c.set_parameters(theta);
}

inline VariableSpec random_spec(Rng& rng, int max_vars = 6, int max_cats = 4, int min_vars = 1) {
  VariableSpec spec;
  const int v = min_vars + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_vars - min_vars + 1)));
  for (int i = 0; i < v; ++i) spec.category_sizes.push_back(2 + static_cast<int>(rng.below(max_cats - 1)));
  return spec;
}

inline StructureConfig random_config(Rng& rng, int var_count) {
  StructureConfig cfg;
  int max_levels = 1;
  while ((1 << max_levels) <= var_count) ++max_levels;
  cfg.n_layers = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_levels)));
  cfg.n_sum = 1 + static_cast<int>(rng.below(3));
  cfg.n_input = 1 + static_cast<int>(rng.below(3));
  cfg.n_repetitions = 1 + static_cast<int>(rng.below(3));
  cfg.structure_seed = rng.next();
  return cfg;
}

inline Circuit random_circuit(Rng& rng, int max_vars = 6, int max_cats = 4) {
  const VariableSpec spec = random_spec(rng, max_vars, max_cats);
  Circuit c = build_circuit(spec, random_config(rng, static_cast<int>(spec.var_count())));
  randomize(c, rng);
  return c;
}

inline QueryMask random_mask(const VariableSpec& spec, Rng& rng, bool weighted = false) {
  std::vector<VariableState> st(spec.var_count());
  for (std::size_t v = 0; v < st.size(); ++v) {
    const auto r = rng.below(weighted ? 3 : 2);
    if (r == 0) {
      st[v] = VariableState::observed(static_cast<int>(rng.below(spec.category_sizes[v])));
    } else if (r == 2) {
      Eigen::VectorXd w(spec.category_sizes[v]);
      for (Eigen::Index c = 0; c < w.size(); ++c) w(c) = rng.uniform();
      st[v] = VariableState::weighted(w);
    }
  }
  return QueryMask(std::move(st));
}

// n real nodes in random slots of an m-slot tensor, random symmetric edges.
inline GraphTensor random_graph(const Representation& rep, int n, Rng& rng, bool compact_tail = false) {
  GraphTensor g;
  g.rep = rep;
  g.node_cat.assign(rep.m, rep.virtual_node());
  g.edge_cat = Eigen::MatrixXi::Constant(rep.m, rep.m, rep.no_edge());
  std::vector<int> slots(rep.m);
  for (int i = 0; i < rep.m; ++i) slots[i] = i;
  if (!compact_tail) rng.shuffle(slots);
  slots.resize(n);
  for (int s : slots) g.node_cat[s] = static_cast<int>(rng.below(rep.q));
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const int e = static_cast<int>(rng.below(rep.r + 1));
      g.edge_cat(slots[a], slots[b]) = g.edge_cat(slots[b], slots[a]) = e;
    }
  }
  return g;
}

inline Permutation random_permutation(int n, Rng& rng) {
  Permutation p = identity_permutation(n);
  rng.shuffle(p);
  return p;
}

}  // namespace gspn::test
