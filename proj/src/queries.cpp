#include "gspn/queries.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "gspn/error.hpp"
#include "gspn/invariance.hpp"
#include "gspn/rng.hpp"

namespace gspn {

namespace {

SubgraphQuery blank(int m) {
  SubgraphQuery qu;
  qu.m = m;
  qu.node_mode.assign(m, std::nullopt);
  qu.edge_mode.assign(static_cast<std::size_t>(m) * m, std::nullopt);
  return qu;
}

std::string mode_text(const std::optional<int>& v) { return v ? std::to_string(*v) : "?"; }

}  // namespace

SubgraphQuery marginal_query(int m) {
  if (m < 1) throw DimensionError("query needs at least one slot");
  return blank(m);
}

SubgraphQuery evidence_query(const GraphTensor& g) {
  check_graph(g);
  SubgraphQuery qu = blank(g.m());
  for (int i = 0; i < g.m(); ++i) {
    qu.node_mode[i] = g.node_cat[i];
    for (int j = 0; j < g.m(); ++j) qu.edge(i, j) = g.edge_cat(i, j);
  }
  return qu;
}

SubgraphQuery marginal_query(const GraphTensor& g, const std::vector<int>& targets) {
  SubgraphQuery qu = evidence_query(g);
  qu.target_nodes = targets;
  for (int a : targets) {
    if (a < 0 || a >= g.m()) throw DimensionError("target node " + std::to_string(a) + " out of range");
    qu.node_mode[a].reset();
    for (int j = 0; j < g.m(); ++j) {
      qu.edge(a, j).reset();
      qu.edge(j, a).reset();
    }
  }
  return qu;
}

QueryMask compile(const SubgraphQuery& qu, const Representation& rep) {
  const int m = qu.m;
  if (m != rep.m) {
    throw DimensionError("query has " + std::to_string(m) + " slots, representation has " + std::to_string(rep.m));
  }
  if (qu.node_mode.size() != static_cast<std::size_t>(m) ||
      qu.edge_mode.size() != static_cast<std::size_t>(m) * m) {
    throw DimensionError("query mode tables do not match m=" + std::to_string(m));
  }
  for (int a : qu.target_nodes) {
    if (a < 0 || a >= m) throw DimensionError("target node " + std::to_string(a) + " out of range");
  }
  std::vector<VariableState> states(rep.var_count());
  for (int i = 0; i < m; ++i) {
    if (const auto& v = qu.node_mode[i]) {
      if (*v < 0 || *v > rep.q) {
        throw IntegrityError("node " + std::to_string(i) + " category " + std::to_string(*v) + " out of range");
      }
      states[node_var(m, i)] = VariableState::observed(*v);
    }
    for (int j = 0; j < m; ++j) {
      const auto& v = qu.edge(i, j);
      if (v != qu.edge(j, i)) {
        throw ConfigError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") has conflicting modes " +
                          mode_text(v) + " and " + mode_text(qu.edge(j, i)));
      }
      if (v) {
        if (*v < 0 || *v > rep.r) {
          throw IntegrityError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") category " +
                               std::to_string(*v) + " out of range");
        }
        states[edge_var(m, i, j)] = VariableState::observed(*v);
      }
    }
  }
  return QueryMask(std::move(states));
}

double expectation(const GraphSPNModel& model, const QueryMask& q, std::uint64_t rng_seed, int n_perms) {
  if (model.variant == Variant::kary) {
    throw UnsupportedQueryError(
        "kary models do not support marginal queries: averaging over k-node sub-graphs does not give a smooth "
        "circuit over the full graph");
  }
  if (q.size() != model.rep.var_count()) {
    throw DimensionError("query mask length " + std::to_string(q.size()) + " does not match m(m+1)=" +
                         std::to_string(model.rep.var_count()));
  }
  if (model.variant == Variant::none || model.variant == Variant::sort) return log_query(model.circuit, q);
  return averaged_log_query(model, q, rng_seed, n_perms);
}

double expectation(const GraphSPNModel& model, const SubgraphQuery& qu, std::uint64_t rng_seed, int n_perms) {
  if (model.variant == Variant::kary) return expectation(model, QueryMask(), rng_seed, n_perms);
  return expectation(model, compile(qu, model.rep), rng_seed, n_perms);
}

QueryMask known_part_evidence(const GraphSPNModel& model, const KnownPart& known, std::vector<int>* placed) {
  const Representation& rep = model.rep;
  const int n = known.fragment.size();
  check_graph(known.fragment, rep);
  if (static_cast<int>(known.slots.size()) != n) {
    throw DimensionError("known part has " + std::to_string(n) + " nodes but " +
                         std::to_string(known.slots.size()) + " slots");
  }
  if (n > rep.m) throw CapacityError("known part has more nodes than the " + std::to_string(rep.m) + " slots");
  std::vector<char> used(rep.m, 0);
  for (int s : known.slots) {
    if (s < 0 || s >= rep.m) throw DimensionError("slot " + std::to_string(s) + " out of range");
    if (used[s]) throw DimensionError("slot " + std::to_string(s) + " used twice");
    used[s] = 1;
  }

  std::vector<int> where = known.slots;
  LabeledGraph frag = known.fragment;
  if (model.variant == Variant::sort && n > 0) {
    // Canonical coordinates: fragment node order[a] goes to slot a.
    const GraphTensor padded = pad(frag, Representation{n, rep.q, rep.r});
    const Permutation order = canonical_order(padded);
    for (int a = 0; a < n; ++a) where[order[a]] = a;
  }
  if (placed) *placed = where;

  const int m = rep.m;
  std::vector<VariableState> states(rep.var_count());
  for (int a = 0; a < n; ++a) {
    states[node_var(m, where[a])] = VariableState::observed(frag.nodes[a]);
    for (int b = 0; b < n; ++b) {
      states[edge_var(m, where[a], where[b])] = VariableState::observed(a == b ? rep.no_edge() : frag.edges(a, b));
    }
  }
  return QueryMask(std::move(states));
}

std::vector<GraphTensor> conditional_generate(const GraphSPNModel& model, const KnownPart& known, int count,
                                              std::uint64_t rng_seed, std::vector<int>* placed) {
  if (count < 0) throw ConfigError("sample count must be non-negative");
  QueryMask evidence = known_part_evidence(model, known, placed);
  const GraphSampler sampler(model, std::move(evidence), Rng::mix(rng_seed, 0x5eed));
  std::vector<GraphTensor> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sampler.draw(Rng::mix(rng_seed, static_cast<std::uint64_t>(i))));
  return out;
}

namespace {

int parse_category(const std::string& tok, const std::vector<std::string>& names, const std::string& extra,
                   int extra_index, int line) {
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == tok) return static_cast<int>(c);
  }
  if (tok == extra) return extra_index;
  if (!tok.empty() && std::all_of(tok.begin(), tok.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
    const int v = std::stoi(tok);
    if (v <= extra_index) return v;
  }
  throw FormatError("line " + std::to_string(line) + ": unknown category '" + tok + "'");
}

int parse_slot(const std::string& tok, int m, int line) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
    throw FormatError("line " + std::to_string(line) + ": expected a slot index, got '" + tok + "'");
  }
  const long v = std::stol(tok);
  if (v >= m) throw FormatError("line " + std::to_string(line) + ": slot " + tok + " out of range (m=" +
                                std::to_string(m) + ")");
  return static_cast<int>(v);
}

void assign(std::optional<int>& slot, std::optional<int> v, bool& seen, int line) {
  if (seen && slot != v) throw FormatError("line " + std::to_string(line) + ": conflicting mode for the same variable");
  slot = v;
  seen = true;
}

}  // namespace

SubgraphQuery parse_query(const std::string& text, const GraphSPNModel& model) {
  const int m = model.rep.m;
  SubgraphQuery qu = blank(m);
  std::vector<char> node_seen(m, 0);
  std::vector<char> edge_seen(static_cast<std::size_t>(m) * m, 0);
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "node") {
      if (tok.size() != 4 || tok[2] != "=") {
        throw FormatError("line " + std::to_string(line) + ": expected 'node <i> = <category>|?'");
      }
      const int i = parse_slot(tok[1], m, line);
      std::optional<int> v;
      if (tok[3] != "?") v = parse_category(tok[3], model.node_names, "virtual", model.rep.virtual_node(), line);
      bool seen = node_seen[i];
      assign(qu.node_mode[i], v, seen, line);
      node_seen[i] = 1;
    } else if (tok[0] == "edge") {
      if (tok.size() != 5 || tok[3] != "=") {
        throw FormatError("line " + std::to_string(line) + ": expected 'edge <i> <j> = <category>|?'");
      }
      const int i = parse_slot(tok[1], m, line);
      const int j = parse_slot(tok[2], m, line);
      std::optional<int> v;
      if (tok[4] != "?") v = parse_category(tok[4], model.edge_names, "none", model.rep.no_edge(), line);
      const std::size_t ij = static_cast<std::size_t>(i) * m + j;
      const std::size_t ji = static_cast<std::size_t>(j) * m + i;
      bool seen = edge_seen[ij];
      assign(qu.edge(i, j), v, seen, line);
      seen = edge_seen[ji];
      assign(qu.edge(j, i), v, seen, line);
      edge_seen[ij] = edge_seen[ji] = 1;
    } else {
      throw FormatError("line " + std::to_string(line) + ": unknown statement '" + tok[0] + "'");
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!qu.node_mode[i]) qu.target_nodes.push_back(i);
  }
  return qu;
}

SubgraphQuery load_query(const std::string& path, const GraphSPNModel& model) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open query file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_query(ss.str(), model);
}

}  // namespace gspn
