#include "gspn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "gspn/error.hpp"

namespace gspn::oracle {

namespace {

std::vector<double> normalized_row(const Eigen::MatrixXd& logits, int row, bool normalize) {
  std::vector<double> p(logits.cols());
  double top = -INFINITY;
  for (int c = 0; c < logits.cols(); ++c) top = std::max(top, logits(row, c));
  double z = 0.0;
  for (int c = 0; c < logits.cols(); ++c) {
    p[c] = normalize ? std::exp(logits(row, c) - top) : std::exp(logits(row, c));
    z += p[c];
  }
  if (normalize) {
    for (double& x : p) x /= z;
  }
  return p;
}

// Linear-space probabilities of every table, computed once per oracle call.
struct Tables {
  // Input layers: prob[l][v][u][x]; sum layers: weights[l][u][i].
  std::vector<std::vector<std::vector<std::vector<double>>>> prob;
  std::vector<std::vector<std::vector<double>>> weights;

  explicit Tables(const Circuit& c) : prob(c.layers().size()), weights(c.layers().size()) {
    for (std::size_t l = 0; l < c.layers().size(); ++l) {
      if (const auto* in = std::get_if<InputLayer>(&c.layers()[l])) {
        for (std::size_t v = 0; v < in->scope.size(); ++v) {
          prob[l].emplace_back();
          for (int u = 0; u < in->units; ++u) prob[l][v].push_back(normalized_row(in->logits[v], u, in->normalized));
        }
      } else if (const auto* sl = std::get_if<SumLayer>(&c.layers()[l])) {
        for (int u = 0; u < sl->logits.rows(); ++u) weights[l].push_back(normalized_row(sl->logits, u, true));
      }
    }
  }
};

std::vector<double> eval_input(const InputLayer& in, const std::vector<std::vector<std::vector<double>>>& prob,
                               const Assignment& a) {
  std::vector<double> out(in.units, 1.0);
  for (std::size_t v = 0; v < in.scope.size(); ++v) {
    for (int u = 0; u < in.units; ++u) out[u] *= prob[v][u][a[in.scope[v]]];
  }
  return out;
}

std::vector<double> eval_product(const ProductLayer& pl, const std::vector<std::vector<double>>& vals) {
  if (pl.kind == ProductKind::hadamard) {
    std::vector<double> out = vals[pl.children.front()];
    for (std::size_t c = 1; c < pl.children.size(); ++c) {
      const auto& v = vals[pl.children[c]];
      for (std::size_t u = 0; u < out.size(); ++u) out[u] *= v[u];
    }
    return out;
  }
  std::vector<double> out{1.0};
  for (int child : pl.children) {
    const auto& v = vals[child];
    std::vector<double> next;
    for (double x : out) {
      for (double y : v) next.push_back(x * y);
    }
    out = std::move(next);
  }
  return out;
}

std::vector<double> eval_sum(const SumLayer& sl, const std::vector<std::vector<double>>& w,
                             const std::vector<std::vector<double>>& vals) {
  std::vector<double> in;
  for (int child : sl.children) in.insert(in.end(), vals[child].begin(), vals[child].end());
  std::vector<double> out(w.size(), 0.0);
  for (std::size_t u = 0; u < w.size(); ++u) {
    KahanSum s;
    for (std::size_t i = 0; i < in.size(); ++i) s.add(w[u][i] * in[i]);
    out[u] = s.value();
  }
  return out;
}

double density(const Circuit& c, const Tables& t, const Assignment& a) {
  if (a.size() != c.var_count()) throw DimensionError("assignment length mismatch");
  std::vector<std::vector<double>> vals(c.layers().size());
  for (std::size_t l = 0; l < c.layers().size(); ++l) {
    const Layer& layer = c.layers()[l];
    if (const auto* in = std::get_if<InputLayer>(&layer)) {
      vals[l] = eval_input(*in, t.prob[l], a);
    } else if (const auto* pl = std::get_if<ProductLayer>(&layer)) {
      vals[l] = eval_product(*pl, vals);
    } else {
      vals[l] = eval_sum(std::get<SumLayer>(layer), t.weights[l], vals);
    }
  }
  return vals.back().front();
}

double domain_size(const Circuit& c, const std::vector<int>& vars) {
  double d = 1.0;
  for (int v : vars) d *= c.spec().category_sizes[v];
  return d;
}

// Calls fn for every joint value of vars (last variable fastest).
void enumerate(const Circuit& c, const std::vector<int>& vars, Assignment base,
               const std::function<void(const Assignment&)>& fn) {
  if (domain_size(c, vars) > kMaxDomain) {
    throw CapacityError("oracle enumeration over more than 1e6 assignments");
  }
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == vars.size()) {
      fn(base);
      return;
    }
    for (int x = 0; x < c.spec().category_sizes[vars[i]]; ++x) {
      base[vars[i]] = x;
      rec(i + 1);
    }
  };
  rec(0);
}

double state_weight(const VariableState& st, int x) {
  switch (st.kind) {
    case VariableState::Kind::observed: return st.category == x ? 1.0 : 0.0;
    case VariableState::Kind::marginalized: return 1.0;
    case VariableState::Kind::weighted: return st.weights(x);
  }
  return 0.0;
}

GraphTensor reorder(const GraphTensor& g, const std::vector<int>& slots) {
  GraphTensor out;
  out.rep = g.rep;
  out.rep.m = static_cast<int>(slots.size());
  out.node_cat.resize(slots.size());
  out.edge_cat.resize(out.rep.m, out.rep.m);
  for (int a = 0; a < out.rep.m; ++a) {
    out.node_cat[a] = g.node_cat[slots[a]];
    for (int b = 0; b < out.rep.m; ++b) out.edge_cat(a, b) = g.edge_cat(slots[a], slots[b]);
  }
  return out;
}

Assignment to_assignment(const GraphTensor& g) {
  const int m = g.m();
  Assignment a;
  for (int i = 0; i < m; ++i) {
    a.push_back(g.node_cat[i]);
    for (int j = 0; j < m; ++j) a.push_back(g.edge_cat(i, j));
  }
  return a;
}

void split_slots(const GraphTensor& g, std::vector<int>& real, std::vector<int>& virt) {
  for (int i = 0; i < g.m(); ++i) (g.node_cat[i] == g.rep.q ? virt : real).push_back(i);
  if (static_cast<int>(real.size()) > kMaxNodes) {
    throw CapacityError("oracle permutation enumeration limited to " + std::to_string(kMaxNodes) + " nodes");
  }
}

}  // namespace

void KahanSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

double naive_density(const Circuit& c, const Assignment& a) { return density(c, Tables(c), a); }

double brute_total_mass(const Circuit& c) {
  const Tables tables(c);
  std::vector<int> vars(c.var_count());
  std::iota(vars.begin(), vars.end(), 0);
  KahanSum s;
  enumerate(c, vars, Assignment(c.var_count(), 0), [&](const Assignment& a) { s.add(density(c, tables, a)); });
  return s.value();
}

double brute_marginal(const Circuit& c, const QueryMask& q) {
  const Tables tables(c);
  if (q.size() != c.var_count()) throw DimensionError("mask length mismatch");
  std::vector<int> free;
  Assignment base(c.var_count(), 0);
  for (std::size_t v = 0; v < q.size(); ++v) {
    if (q[v].is_observed()) {
      base[v] = q[v].category;
    } else {
      free.push_back(static_cast<int>(v));
    }
  }
  KahanSum s;
  enumerate(c, free, base, [&](const Assignment& a) {
    double w = 1.0;
    for (int v : free) w *= state_weight(q[v], a[v]);
    if (w != 0.0) s.add(w * density(c, tables, a));
  });
  return s.value();
}

ConditionalTable brute_conditional_table(const Circuit& c, const QueryMask& q) {
  const Tables tables(c);
  if (q.size() != c.var_count()) throw DimensionError("mask length mismatch");
  ConditionalTable t;
  Assignment base(c.var_count(), 0);
  for (std::size_t v = 0; v < q.size(); ++v) {
    if (q[v].is_observed()) {
      base[v] = q[v].category;
    } else {
      t.free_vars.push_back(static_cast<int>(v));
    }
  }
  KahanSum z;
  enumerate(c, t.free_vars, base, [&](const Assignment& a) {
    double w = 1.0;
    for (int v : t.free_vars) w *= state_weight(q[v], a[v]);
    const double p = w == 0.0 ? 0.0 : w * density(c, tables, a);
    Assignment row;
    for (int v : t.free_vars) row.push_back(a[v]);
    t.values.push_back(std::move(row));
    t.prob.push_back(p);
    z.add(p);
  });
  if (!(z.value() > 0.0)) throw ImpossibleEvidenceError("evidence has zero mass");
  for (double& p : t.prob) p /= z.value();
  return t;
}

double brute_janossy(const Circuit& c, const GraphTensor& g) {
  const Tables tables(c);
  std::vector<int> real;
  std::vector<int> virt;
  split_slots(g, real, virt);
  std::sort(real.begin(), real.end());
  KahanSum s;
  long count = 0;
  do {
    std::vector<int> slots = real;
    slots.insert(slots.end(), virt.begin(), virt.end());
    s.add(density(c, tables, to_assignment(reorder(g, slots))));
    ++count;
  } while (std::next_permutation(real.begin(), real.end()));
  return s.value() / static_cast<double>(count);
}

double brute_kary(const Circuit& c, const GraphTensor& g, int k) {
  const Tables tables(c);
  std::vector<int> real;
  std::vector<int> virt;
  split_slots(g, real, virt);
  const int n = static_cast<int>(real.size());
  if (k < 1 || k > n) throw FeasibilityError("k out of range for the oracle");
  KahanSum s;
  long count = 0;
  std::vector<int> tuple(k);
  std::vector<char> used(n, 0);
  std::function<void(int)> rec = [&](int pos) {
    if (pos == k) {
      std::vector<int> slots(k);
      for (int i = 0; i < k; ++i) slots[i] = real[tuple[i]];
      s.add(density(c, tables, to_assignment(reorder(g, slots))));
      ++count;
      return;
    }
    for (int v = 0; v < n; ++v) {
      if (used[v]) continue;
      used[v] = 1;
      tuple[pos] = v;
      rec(pos + 1);
      used[v] = 0;
    }
  };
  rec(0);
  return s.value() / static_cast<double>(count);
}

}  // namespace gspn::oracle
