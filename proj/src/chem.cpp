#include "gspn/chem.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <optional>

namespace gspn {

namespace {

const std::array<std::string, 10> kOrganic{"Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I"};
const std::string kAromatic = "bcnops";

int bond_order(char c) {
  switch (c) {
    case '-': return 1;
    case '=': return 2;
    case '#': return 3;
  }
  return 0;
}

char bond_symbol(int order) { return order == 2 ? '=' : order == 3 ? '#' : '\0'; }

[[noreturn]] void fail(const char* reason, std::size_t pos, const std::string& msg) {
  throw SmilesError(reason, pos, msg + " at position " + std::to_string(pos));
}

}  // namespace

int Alphabet::index(const std::string& symbol) const {
  const auto it = std::find(elements.begin(), elements.end(), symbol);
  return it == elements.end() ? -1 : static_cast<int>(it - elements.begin());
}

SmilesError::SmilesError(std::string reason, std::size_t position, const std::string& what)
    : FormatError(what), reason_(std::move(reason)), position_(position) {}

Molecule parse_smiles(const std::string& text, const Alphabet& alphabet) {
  struct Ring {
    int atom;
    int order;  // 0 when unspecified
  };
  Molecule mol;
  std::vector<int> branches;
  std::array<std::optional<Ring>, 10> rings;
  int prev = -1;
  int pending = 0;
  std::size_t pending_pos = 0;

  auto add_bond = [&](int a, int b, int order, std::size_t pos) {
    if (a == b) fail("syntax_error", pos, "ring closure bonds an atom to itself");
    const int i = std::min(a, b);
    const int j = std::max(a, b);
    for (const auto& bd : mol.bonds) {
      if (bd.i == i && bd.j == j) fail("syntax_error", pos, "duplicate bond");
    }
    mol.bonds.push_back({i, j, order});
  };

  if (text.empty()) fail("syntax_error", 0, "empty SMILES");
  for (std::size_t pos = 0; pos < text.size();) {
    const char c = text[pos];
    if (c == '[') fail("unsupported_atom", pos, "bracket atoms are not supported");
    if (kAromatic.find(c) != std::string::npos) fail("not_kekulized", pos, "aromatic atom; SMILES is not kekulized");
    if (c == ':') fail("not_kekulized", pos, "aromatic bond; SMILES is not kekulized");
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string symbol;
      for (const auto& s : kOrganic) {
        if (text.compare(pos, s.size(), s) == 0) {
          symbol = s;
          break;
        }
      }
      if (symbol.empty()) fail("syntax_error", pos, std::string("unknown atom symbol '") + c + "'");
      if (alphabet.index(symbol) < 0) fail("unsupported_atom", pos, "atom '" + symbol + "' is outside the alphabet");
      const int atom = mol.size();
      mol.atoms.push_back(symbol);
      if (prev >= 0) {
        add_bond(prev, atom, pending ? pending : 1, pos);
      } else if (pending) {
        fail("syntax_error", pending_pos, "bond without a preceding atom");
      }
      pending = 0;
      prev = atom;
      pos += symbol.size();
      continue;
    }
    if (const int order = bond_order(c)) {
      if (pending) fail("syntax_error", pos, "two consecutive bond symbols");
      if (prev < 0) fail("syntax_error", pos, "bond without a preceding atom");
      pending = order;
      pending_pos = pos;
    } else if (c == '(') {
      if (prev < 0) fail("syntax_error", pos, "branch without a preceding atom");
      if (pending) fail("syntax_error", pending_pos, "bond before a branch");
      branches.push_back(prev);
    } else if (c == ')') {
      if (branches.empty()) fail("syntax_error", pos, "unmatched ')'");
      if (pending) fail("syntax_error", pending_pos, "dangling bond");
      if (prev < 0) fail("syntax_error", pos, "empty branch");
      prev = branches.back();
      branches.pop_back();
    } else if (c >= '1' && c <= '9') {
      if (prev < 0) fail("syntax_error", pos, "ring closure without a preceding atom");
      auto& ring = rings[c - '0'];
      if (ring) {
        if (pending && ring->order && pending != ring->order) {
          fail("syntax_error", pos, "ring closure bond orders disagree");
        }
        add_bond(ring->atom, prev, pending ? pending : ring->order ? ring->order : 1, pos);
        ring.reset();
      } else {
        ring = Ring{prev, pending};
      }
      pending = 0;
    } else if (c == '.') {
      if (pending) fail("syntax_error", pending_pos, "dangling bond");
      if (prev < 0) fail("syntax_error", pos, "empty component");
      prev = -1;
    } else if (c == '0' || c == '%') {
      fail("syntax_error", pos, "only ring closure digits 1-9 are supported");
    } else if (c == '/' || c == '\\' || c == '@') {
      fail("syntax_error", pos, "stereochemistry is not supported");
    } else {
      fail("syntax_error", pos, std::string("unexpected character '") + c + "'");
    }
    ++pos;
  }
  if (pending) fail("syntax_error", pending_pos, "dangling bond");
  if (prev < 0) fail("syntax_error", text.size(), "SMILES ends without an atom");
  if (!branches.empty()) fail("syntax_error", text.size(), "unclosed branch");
  for (int d = 1; d <= 9; ++d) {
    if (rings[d]) fail("syntax_error", text.size(), "unclosed ring " + std::to_string(d));
  }
  return mol;
}

Representation molecule_representation(int m_slots, const Alphabet& alphabet) {
  return Representation{m_slots, alphabet.size(), 3};
}

GraphTensor mol_to_graph(const Molecule& mol, int m_slots, const Alphabet& alphabet) {
  const Representation rep = molecule_representation(m_slots, alphabet);
  const int n = mol.size();
  if (n > m_slots) {
    throw CapacityError("molecule has " + std::to_string(n) + " heavy atoms, more than m=" + std::to_string(m_slots));
  }
  LabeledGraph lg;
  lg.nodes.resize(n);
  lg.edges = Eigen::MatrixXi::Constant(n, n, rep.no_edge());
  for (int a = 0; a < n; ++a) {
    lg.nodes[a] = alphabet.index(mol.atoms[a]);
    if (lg.nodes[a] < 0) throw ConfigError("element '" + mol.atoms[a] + "' is not in the alphabet");
  }
  for (const auto& b : mol.bonds) {
    if (b.i < 0 || b.j >= n || b.i >= b.j) throw IntegrityError("bond indices out of range");
    if (b.order < 1 || b.order > 3) throw IntegrityError("bond order must be 1, 2 or 3");
    if (lg.edges(b.i, b.j) != rep.no_edge()) throw IntegrityError("duplicate bond");
    lg.edges(b.i, b.j) = lg.edges(b.j, b.i) = b.order - 1;
  }
  return pad(lg, rep);
}

Molecule graph_to_mol(const GraphTensor& g, const Alphabet& alphabet) {
  if (g.rep.q != alphabet.size()) throw DimensionError("graph has q=" + std::to_string(g.rep.q) +
                                                       " node categories, alphabet has " +
                                                       std::to_string(alphabet.size()));
  const LabeledGraph lg = unpad(g);
  Molecule mol;
  for (int c : lg.nodes) mol.atoms.push_back(alphabet.elements[c]);
  for (int i = 0; i < lg.size(); ++i) {
    for (int j = i + 1; j < lg.size(); ++j) {
      const int e = lg.edges(i, j);
      if (e == g.rep.no_edge()) continue;
      if (e > 2) throw IntegrityError("edge category " + std::to_string(e) + " is not a bond order");
      mol.bonds.push_back({i, j, e + 1});
    }
  }
  return mol;
}

std::string write_smiles(const Molecule& mol, const Alphabet& alphabet) {
  const int n = mol.size();
  if (n == 0) return "";
  const GraphTensor canon = canonical_form(mol_to_graph(mol, n, alphabet));
  const Molecule cm = graph_to_mol(canon, alphabet);

  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, order), neighbours ascending
  for (const auto& b : cm.bonds) {
    adj[b.i].push_back({b.j, b.order});
    adj[b.j].push_back({b.i, b.order});
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  // Spanning forest and ring bonds, visiting neighbours in canonical order.
  std::vector<int> visit(n, -1);
  std::vector<int> parent(n, -1);
  std::vector<std::vector<int>> children(n);
  std::vector<std::vector<std::pair<int, int>>> opens(n);   // (descendant, order)
  std::vector<std::vector<int>> closes(n);                  // ancestor
  int clock = 0;
  std::function<void(int)> dfs = [&](int u) {
    visit[u] = clock++;
    for (const auto& [v, order] : adj[u]) {
      if (visit[v] < 0) {
        parent[v] = u;
        children[u].push_back(v);
        dfs(v);
      } else if (v != parent[u] && visit[v] < visit[u]) {
        opens[v].push_back({u, order});
        closes[u].push_back(v);
      }
    }
  };
  std::vector<int> roots;
  for (int a = 0; a < n; ++a) {
    if (visit[a] < 0) {
      roots.push_back(a);
      dfs(a);
    }
  }
  for (auto& o : opens) {
    std::sort(o.begin(), o.end(), [&](const auto& x, const auto& y) { return visit[x.first] < visit[y.first]; });
  }

  std::string out;
  std::array<bool, 10> used{};
  std::map<std::pair<int, int>, int> digit;  // (ancestor, descendant) -> digit
  std::function<void(int)> emit = [&](int u) {
    out += cm.atoms[u];
    for (int anc : closes[u]) {
      const int d = digit.at({anc, u});
      out += static_cast<char>('0' + d);
      used[d] = false;
    }
    for (const auto& [desc, order] : opens[u]) {
      int d = 1;
      while (d <= 9 && used[d]) ++d;
      if (d > 9) throw CapacityError("more than 9 simultaneously open rings");
      used[d] = true;
      digit[{u, desc}] = d;
      if (const char s = bond_symbol(order)) out += s;
      out += static_cast<char>('0' + d);
    }
    for (std::size_t c = 0; c < children[u].size(); ++c) {
      const int v = children[u][c];
      const bool last = c + 1 == children[u].size();
      if (!last) out += '(';
      int order = 1;
      for (const auto& [w, o] : adj[u]) {
        if (w == v) order = o;
      }
      if (const char s = bond_symbol(order)) out += s;
      emit(v);
      if (!last) out += ')';
    }
  };
  for (std::size_t r = 0; r < roots.size(); ++r) {
    if (r) out += '.';
    emit(roots[r]);
  }
  return out;
}

int ValenceTable::at(const std::string& element) const {
  const auto it = max_order.find(element);
  if (it == max_order.end()) throw ConfigError("no valence entry for element '" + element + "'");
  return it->second;
}

ValencyReport check_valency(const Molecule& mol, const ValenceTable& vt) {
  ValencyReport r;
  const int n = mol.size();
  r.total.assign(n, 0);
  r.excess.assign(n, 0);
  for (const auto& b : mol.bonds) {
    r.total[b.i] += b.order;
    r.total[b.j] += b.order;
  }
  for (int a = 0; a < n; ++a) {
    r.excess[a] = std::max(0, r.total[a] - vt.at(mol.atoms[a]));
    if (r.excess[a] > 0) r.valid = false;
  }
  return r;
}

GraphTensor correct(const GraphTensor& g, const ValenceTable& vt, const Alphabet& alphabet,
                    const std::vector<std::pair<int, int>>& locked) {
  check_graph(g);
  if (g.rep.q != alphabet.size()) throw DimensionError("graph alphabet does not match");
  GraphTensor out = g;
  const int m = g.m();
  const int none = g.rep.no_edge();
  std::vector<char> lock(static_cast<std::size_t>(m) * m, 0);
  for (const auto& [i, j] : locked) {
    if (i < 0 || j < 0 || i >= m || j >= m) throw DimensionError("locked edge out of range");
    lock[static_cast<std::size_t>(i) * m + j] = lock[static_cast<std::size_t>(j) * m + i] = 1;
  }
  std::vector<int> allowed(m, 0);
  for (int i = 0; i < m; ++i) {
    if (!out.is_virtual(i)) allowed[i] = vt.at(alphabet.elements[out.node_cat[i]]);
  }
  auto total = [&](int i) {
    int t = 0;
    for (int j = 0; j < m; ++j) {
      if (out.edge_cat(i, j) != none) t += out.edge_cat(i, j) + 1;
    }
    return t;
  };
  for (;;) {
    int worst = -1;
    int worst_excess = 0;
    for (int i = 0; i < m; ++i) {
      if (out.is_virtual(i)) continue;
      const int e = total(i) - allowed[i];
      if (e > worst_excess) {
        worst = i;
        worst_excess = e;
      }
    }
    if (worst < 0) return out;
    int pick = -1;
    for (const bool use_locked : {false, true}) {
      for (int j = 0; j < m; ++j) {
        if (out.edge_cat(worst, j) == none) continue;
        if (!use_locked && lock[static_cast<std::size_t>(worst) * m + j]) continue;
        if (pick < 0 || out.edge_cat(worst, j) > out.edge_cat(worst, pick)) pick = j;
      }
      if (pick >= 0) break;
    }
    const int c = out.edge_cat(worst, pick);
    const int lowered = c == 0 ? none : c - 1;
    out.edge_cat(worst, pick) = out.edge_cat(pick, worst) = lowered;
  }
}

std::string canonical_smiles(const GraphTensor& g, const Alphabet& alphabet) {
  return write_smiles(graph_to_mol(g, alphabet), alphabet);
}

Metrics compute_metrics(const std::vector<GraphTensor>& samples, const std::set<std::string>& train_canon,
                        const MetricsOptions& opt, const ValenceTable& vt, const Alphabet& alphabet) {
  if (samples.empty()) throw DataError("no samples to evaluate");
  Metrics r;
  r.n_samples = static_cast<int>(samples.size());
  std::vector<std::string> pool;
  for (const auto& g : samples) {
    const bool raw_ok = check_valency(graph_to_mol(g, alphabet), vt).valid;
    if (raw_ok) ++r.n_valid_raw;
    if (opt.correction) {
      ++r.n_valid;
      if (opt.unique_novel_on_corrected) {
        pool.push_back(canonical_smiles(correct(g, vt, alphabet), alphabet));
      } else if (raw_ok) {
        pool.push_back(canonical_smiles(g, alphabet));
      }
    } else if (raw_ok) {
      ++r.n_valid;
      pool.push_back(canonical_smiles(g, alphabet));
    }
  }
  const double n = r.n_samples;
  r.validity_wo_check = 100.0 * r.n_valid_raw / n;
  r.validity = 100.0 * r.n_valid / n;
  const std::set<std::string> distinct(pool.begin(), pool.end());
  r.n_unique = static_cast<int>(distinct.size());
  for (const auto& s : pool) {
    if (!train_canon.count(s)) ++r.n_novel;
  }
  if (pool.empty()) {
    r.no_valid = true;
    return r;
  }
  const double v = static_cast<double>(pool.size());
  r.uniqueness = 100.0 * r.n_unique / v;
  r.novelty = 100.0 * r.n_novel / v;
  r.uniqueness_over_samples = 100.0 * r.n_unique / n;
  return r;
}

}  // namespace gspn
