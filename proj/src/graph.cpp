#include "gspn/graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "gspn/error.hpp"
#include "gspn/rng.hpp"

namespace gspn {

VariableSpec Representation::variable_spec() const {
  if (m < 1 || q < 1 || r < 1) throw StructureError("representation needs m, q, r >= 1");
  VariableSpec spec;
  spec.category_sizes.reserve(var_count());
  for (int i = 0; i < m; ++i) {
    spec.category_sizes.push_back(q + 1);
    for (int j = 0; j < m; ++j) spec.category_sizes.push_back(r + 1);
  }
  return spec;
}

int GraphTensor::real_count() const {
  return static_cast<int>(std::count_if(node_cat.begin(), node_cat.end(),
                                        [&](int c) { return c != rep.virtual_node(); }));
}

std::vector<int> GraphTensor::real_slots() const {
  std::vector<int> out;
  for (int i = 0; i < m(); ++i) {
    if (!is_virtual(i)) out.push_back(i);
  }
  return out;
}

Permutation identity_permutation(int n) {
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

bool is_permutation(const Permutation& p, int n) {
  if (static_cast<int>(p.size()) != n) return false;
  std::vector<char> seen(p.size(), 0);
  for (int v : p) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

Permutation inverse(const Permutation& p) {
  if (!is_permutation(p, static_cast<int>(p.size()))) throw IntegrityError("index list is not a bijection");
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
  return inv;
}

Permutation compose(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw DimensionError("cannot compose permutations of different sizes");
  Permutation out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[b[i]];
  return out;
}

void check_graph(const GraphTensor& g) {
  const int m = g.m();
  const auto& rep = g.rep;
  if (static_cast<int>(g.node_cat.size()) != m || g.edge_cat.rows() != m || g.edge_cat.cols() != m) {
    throw IntegrityError("graph tensor shape does not match m=" + std::to_string(m));
  }
  for (int i = 0; i < m; ++i) {
    if (g.node_cat[i] < 0 || g.node_cat[i] > rep.q) {
      throw IntegrityError("node category out of range at slot " + std::to_string(i));
    }
  }
  for (int i = 0; i < m; ++i) {
    if (g.edge_cat(i, i) != rep.no_edge()) {
      throw IntegrityError("diagonal edge at slot " + std::to_string(i) + " must be \"no edge\"");
    }
    for (int j = 0; j < m; ++j) {
      const int e = g.edge_cat(i, j);
      if (e < 0 || e > rep.r) {
        throw IntegrityError("edge category out of range at (" + std::to_string(i) + "," +
                             std::to_string(j) + ")");
      }
      if (e != g.edge_cat(j, i)) {
        throw IntegrityError("edge block is not symmetric at (" + std::to_string(i) + "," +
                             std::to_string(j) + ")");
      }
      if (e != rep.no_edge() && (g.is_virtual(i) || g.is_virtual(j))) {
        throw IntegrityError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                             ") touches a virtual node");
      }
    }
  }
}

void check_graph(const LabeledGraph& g, const Representation& rep) {
  const int n = g.size();
  if (g.edges.rows() != n || g.edges.cols() != n) {
    throw IntegrityError("edge matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i] < 0 || g.nodes[i] >= rep.q) {
      throw IntegrityError("node " + std::to_string(i) + " has category outside the alphabet");
    }
    if (g.edges(i, i) != rep.no_edge()) throw IntegrityError("self edge at node " + std::to_string(i));
    for (int j = 0; j < n; ++j) {
      if (g.edges(i, j) < 0 || g.edges(i, j) > rep.r) throw IntegrityError("edge category out of range");
      if (g.edges(i, j) != g.edges(j, i)) throw IntegrityError("edge matrix is not symmetric");
    }
  }
}

GraphTensor pad(const LabeledGraph& g, const Representation& rep) {
  const int n = g.size();
  if (n > rep.m) {
    throw CapacityError("graph has " + std::to_string(n) + " nodes but only " +
                        std::to_string(rep.m) + " slots");
  }
  check_graph(g, rep);
  GraphTensor t;
  t.rep = rep;
  t.node_cat.assign(rep.m, rep.virtual_node());
  t.edge_cat = Eigen::MatrixXi::Constant(rep.m, rep.m, rep.no_edge());
  std::copy(g.nodes.begin(), g.nodes.end(), t.node_cat.begin());
  if (n > 0) t.edge_cat.topLeftCorner(n, n) = g.edges;
  return t;
}

LabeledGraph unpad(const GraphTensor& g) {
  check_graph(g);
  const auto keep = g.real_slots();
  LabeledGraph out;
  const int n = static_cast<int>(keep.size());
  out.edges.resize(n, n);
  for (int a = 0; a < n; ++a) {
    out.nodes.push_back(g.node_cat[keep[a]]);
    for (int b = 0; b < n; ++b) out.edges(a, b) = g.edge_cat(keep[a], keep[b]);
  }
  return out;
}

Assignment flatten(const GraphTensor& g) {
  const int m = g.m();
  Assignment a;
  a.reserve(g.rep.var_count());
  for (int i = 0; i < m; ++i) {
    a.push_back(g.node_cat[i]);
    for (int j = 0; j < m; ++j) a.push_back(g.edge_cat(i, j));
  }
  return a;
}

GraphTensor unflatten(const Assignment& a, const Representation& rep) {
  if (a.size() != rep.var_count()) {
    throw DimensionError("assignment of length " + std::to_string(a.size()) + " cannot hold m=" +
                         std::to_string(rep.m) + " (needs " + std::to_string(rep.var_count()) + ")");
  }
  GraphTensor g;
  g.rep = rep;
  g.node_cat.resize(rep.m);
  g.edge_cat.resize(rep.m, rep.m);
  for (int i = 0; i < rep.m; ++i) {
    g.node_cat[i] = a[node_var(rep.m, i)];
    for (int j = 0; j < rep.m; ++j) g.edge_cat(i, j) = a[edge_var(rep.m, i, j)];
  }
  check_graph(g);
  return g;
}

GraphTensor permute(const GraphTensor& g, const Permutation& p) {
  if (!is_permutation(p, g.m())) throw IntegrityError("permutation is not a bijection on the slots");
  GraphTensor out;
  out.rep = g.rep;
  out.node_cat.resize(g.m());
  out.edge_cat.resize(g.m(), g.m());
  for (int i = 0; i < g.m(); ++i) {
    out.node_cat[i] = g.node_cat[p[i]];
    for (int j = 0; j < g.m(); ++j) out.edge_cat(i, j) = g.edge_cat(p[i], p[j]);
  }
  return out;
}

namespace {

// Maps arbitrary ordered keys to dense ranks 0..k-1.
template <typename Key>
std::vector<int> rank_keys(const std::vector<Key>& keys) {
  std::vector<Key> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), keys[i]) - sorted.begin());
  }
  return out;
}

int distinct(const std::vector<int>& colors) {
  return static_cast<int>(std::set<int>(colors.begin(), colors.end()).size());
}

// Canonical labeling over the real nodes of a graph.
class Canonizer {
 public:
  Canonizer(const GraphTensor& g, std::vector<int> nodes) : g_(g), nodes_(std::move(nodes)) {}

  std::vector<int> run() {
    const int n = static_cast<int>(nodes_.size());
    if (n == 0) return {};
    std::vector<std::pair<int, std::vector<int>>> init(n);
    for (int a = 0; a < n; ++a) {
      init[a].first = g_.node_cat[nodes_[a]];
      for (int b = 0; b < n; ++b) {
        const int e = edge(a, b);
        if (a != b && e != g_.rep.no_edge()) init[a].second.push_back(e);
      }
      std::sort(init[a].second.begin(), init[a].second.end());
    }
    search(rank_keys(init));
    return best_order_;
  }

 private:
  int edge(int a, int b) const { return g_.edge_cat(nodes_[a], nodes_[b]); }

  std::vector<int> refine(std::vector<int> colors) const {
    const int n = static_cast<int>(colors.size());
    int classes = distinct(colors);
    while (true) {
      std::vector<std::pair<int, std::vector<std::pair<int, int>>>> sig(n);
      for (int a = 0; a < n; ++a) {
        sig[a].first = colors[a];
        for (int b = 0; b < n; ++b) {
          const int e = edge(a, b);
          if (a != b && e != g_.rep.no_edge()) sig[a].second.emplace_back(colors[b], e);
        }
        std::sort(sig[a].second.begin(), sig[a].second.end());
      }
      colors = rank_keys(sig);
      const int next = distinct(colors);
      if (next == classes) return colors;
      classes = next;
    }
  }

  bool twins(int a, int b) const {
    if (g_.node_cat[nodes_[a]] != g_.node_cat[nodes_[b]]) return false;
    for (int x = 0; x < static_cast<int>(nodes_.size()); ++x) {
      if (x == a || x == b) continue;
      if (edge(a, x) != edge(b, x)) return false;
    }
    return true;
  }

  void search(std::vector<int> colors) {
    colors = refine(std::move(colors));
    const int n = static_cast<int>(colors.size());
    // First non-singleton cell by colour value (a relabeling-invariant choice).
    std::map<int, std::vector<int>> cells;
    for (int a = 0; a < n; ++a) cells[colors[a]].push_back(a);
    const std::vector<int>* target = nullptr;
    for (const auto& [color, members] : cells) {
      if (members.size() > 1) {
        target = &members;
        break;
      }
    }
    if (!target) {
      leaf(colors);
      return;
    }
    const std::vector<int> cell = *target;
    const bool all_twins = std::all_of(cell.begin() + 1, cell.end(),
                                       [&](int b) { return twins(cell.front(), b); });
    // Swapping twins is an automorphism, so one branch stands for all.
    const std::size_t branches = all_twins ? 1 : cell.size();
    for (std::size_t k = 0; k < branches; ++k) {
      std::vector<int> split(colors.size());
      for (int a = 0; a < n; ++a) split[a] = 2 * colors[a] + 1;
      split[cell[k]] = 2 * colors[cell[k]];
      search(std::move(split));
    }
  }

  void leaf(const std::vector<int>& colors) {
    const int n = static_cast<int>(colors.size());
    std::vector<int> order(n);
    for (int a = 0; a < n; ++a) order[colors[a]] = a;
    std::vector<int> key;
    key.reserve(static_cast<std::size_t>(n) * (n + 1));
    for (int i = 0; i < n; ++i) {
      key.push_back(g_.node_cat[nodes_[order[i]]]);
      for (int j = 0; j < n; ++j) key.push_back(edge(order[i], order[j]));
    }
    if (best_order_.empty() || key < best_key_) {
      best_key_ = std::move(key);
      best_order_ = std::move(order);
    }
  }

  const GraphTensor& g_;
  std::vector<int> nodes_;
  std::vector<int> best_key_;
  std::vector<int> best_order_;
};

}  // namespace

Permutation canonical_order(const GraphTensor& g) {
  std::vector<int> real;
  std::vector<int> virt;
  for (int i = 0; i < g.m(); ++i) (g.is_virtual(i) ? virt : real).push_back(i);
  const std::vector<int> order = Canonizer(g, real).run();
  Permutation p;
  p.reserve(g.m());
  for (int a : order) p.push_back(real[a]);
  p.insert(p.end(), virt.begin(), virt.end());
  return p;
}

GraphTensor canonical_form(const GraphTensor& g) { return permute(g, canonical_order(g)); }

std::uint64_t falling_factorial(int n, int k) {
  std::uint64_t out = 1;
  for (int i = 0; i < k; ++i) out *= static_cast<std::uint64_t>(n - i);
  return out;
}

std::uint64_t factorial(int n) { return falling_factorial(n, n); }

void for_each_tuple(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  if (k < 1 || k > n) {
    throw FeasibilityError("cannot choose ordered " + std::to_string(k) + "-tuples from " +
                           std::to_string(n) + " elements");
  }
  std::vector<int> t;
  std::vector<char> used(n, 0);
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(t.size()) == k) {
      fn(t);
      return;
    }
    for (int v = 0; v < n; ++v) {
      if (used[v]) continue;
      used[v] = 1;
      t.push_back(v);
      self(self);
      t.pop_back();
      used[v] = 0;
    }
  };
  rec(rec);
}

std::vector<std::vector<int>> enumerate_tuples(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k >= 1 && k <= n) out.reserve(falling_factorial(n, k));
  for_each_tuple(n, k, [&](const std::vector<int>& t) { out.push_back(t); });
  return out;
}

GraphTensor subgraph(const GraphTensor& g, const std::vector<int>& t) {
  const int k = static_cast<int>(t.size());
  std::vector<char> seen(g.m(), 0);
  for (int v : t) {
    if (v < 0 || v >= g.m()) throw IntegrityError("sub-graph index " + std::to_string(v) + " out of range");
    if (seen[v]) throw IntegrityError("sub-graph tuple repeats index " + std::to_string(v));
    seen[v] = 1;
  }
  GraphTensor out;
  out.rep = g.rep;
  out.rep.m = k;
  out.node_cat.resize(k);
  out.edge_cat.resize(k, k);
  for (int a = 0; a < k; ++a) {
    out.node_cat[a] = g.node_cat[t[a]];
    for (int b = 0; b < k; ++b) out.edge_cat(a, b) = g.edge_cat(t[a], t[b]);
  }
  return out;
}

std::vector<Permutation> sample_permutations(int n, std::uint64_t count, std::uint64_t rng_seed) {
  // n! overflows past 20; any count fits then.
  const bool small = n <= 20;
  const std::uint64_t total = small ? factorial(n) : UINT64_MAX;
  if (count > total) {
    throw FeasibilityError("cannot draw " + std::to_string(count) + " distinct permutations of " +
                           std::to_string(n) + " elements (only " + std::to_string(total) + " exist)");
  }
  Rng rng(rng_seed);
  std::vector<Permutation> out;
  out.reserve(count);
  if (small && total <= 40320 && count * 2 > total) {
    // Dense request: shuffle the whole group instead of rejecting repeats.
    std::vector<Permutation> all;
    all.reserve(total);
    Permutation p = identity_permutation(n);
    do {
      all.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    rng.shuffle(all);
    all.resize(count);
    return all;
  }
  std::set<Permutation> seen;
  while (out.size() < count) {
    Permutation p = identity_permutation(n);
    rng.shuffle(p);
    if (seen.insert(p).second) out.push_back(std::move(p));
  }
  return out;
}

std::string to_dot(const GraphTensor& g, const std::vector<std::string>& node_names,
                   const std::vector<std::string>& edge_names, const std::string& title,
                   const std::vector<int>& known) {
  auto is_known = [&](int i) { return std::find(known.begin(), known.end(), i) != known.end(); };
  auto name = [](const std::vector<std::string>& names, int c) {
    return c >= 0 && c < static_cast<int>(names.size()) ? names[c] : std::to_string(c);
  };
  std::ostringstream os;
  os << "graph \"" << title << "\" {\n";
  for (int i = 0; i < g.m(); ++i) {
    if (g.is_virtual(i)) continue;
    os << "  n" << i << " [label=\"" << name(node_names, g.node_cat[i]) << "\"" << (is_known(i) ? ", style=bold" : "")
       << "];\n";
  }
  for (int i = 0; i < g.m(); ++i) {
    for (int j = i + 1; j < g.m(); ++j) {
      const int e = g.edge_cat(i, j);
      if (e == g.rep.no_edge() || g.is_virtual(i) || g.is_virtual(j)) continue;
      os << "  n" << i << " -- n" << j << " [label=\"" << name(edge_names, e) << "\""
         << (is_known(i) && is_known(j) ? ", style=bold" : "") << "];\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace gspn
