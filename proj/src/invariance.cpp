#include "gspn/invariance.hpp"

#include <algorithm>
#include <cmath>

#include "gspn/error.hpp"
#include "gspn/logspace.hpp"
#include "gspn/rng.hpp"

namespace gspn {

namespace {

void check_input(const GraphSPNModel& model, const GraphTensor& g) {
  if (!(g.rep == model.rep)) {
    throw DimensionError("graph representation (m=" + std::to_string(g.rep.m) + ", q=" +
                         std::to_string(g.rep.q) + ", r=" + std::to_string(g.rep.r) +
                         ") does not match the model (m=" + std::to_string(model.rep.m) + ", q=" +
                         std::to_string(model.rep.q) + ", r=" + std::to_string(model.rep.r) + ")");
  }
  check_graph(g);
}

void require_full_scope(const GraphSPNModel& model) {
  if (model.variant == Variant::kary) {
    throw DimensionError("a kary model's circuit only covers k-node sub-graphs");
  }
}

// Slot permutation applying `order` (over positions of `slots`) while every
// other slot stays put.
Permutation lift(const std::vector<int>& slots, const Permutation& order, int m) {
  Permutation p = identity_permutation(m);
  for (std::size_t i = 0; i < slots.size(); ++i) p[slots[i]] = slots[order[i]];
  return p;
}

std::vector<Permutation> all_orderings(int n) {
  std::vector<Permutation> out;
  Permutation p = identity_permutation(n);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<int> active_slots(const GraphSPNModel& model, const QueryMask& q) {
  std::vector<int> out;
  const int m = model.rep.m;
  for (int i = 0; i < m; ++i) {
    const auto& st = q[node_var(m, i)];
    if (!(st.is_observed() && st.category == model.rep.virtual_node())) out.push_back(i);
  }
  return out;
}

double averaged_log_query_with(const GraphSPNModel& model, const QueryMask& q,
                               const std::vector<Permutation>& perms) {
  const int m = model.rep.m;
  Eigen::VectorXd terms;
  if (q.fully_observed()) {
    // Same arithmetic as log_query on observed masks, on the cheaper path.
    const Assignment base = q.observed_values();
    std::vector<Assignment> batch;
    batch.reserve(perms.size());
    for (const auto& p : perms) batch.push_back(permute_assignment(base, m, p));
    terms = log_density(model.circuit, batch);
  } else {
    std::vector<QueryMask> batch;
    batch.reserve(perms.size());
    for (const auto& p : perms) batch.push_back(permute_mask(q, m, p));
    terms = log_query(model.circuit, batch);
  }
  return logmeanexp(terms);
}

QueryMask observed_mask(const GraphTensor& g) { return QueryMask::from_assignment(flatten(g)); }

}  // namespace

GraphTensor compact(const GraphTensor& g) {
  Permutation p = g.real_slots();
  for (int i = 0; i < g.m(); ++i) {
    if (g.is_virtual(i)) p.push_back(i);
  }
  return permute(g, p);
}

Assignment permute_assignment(const Assignment& a, int m, const Permutation& p) {
  Assignment out(a.size());
  for (int i = 0; i < m; ++i) {
    out[node_var(m, i)] = a[node_var(m, p[i])];
    for (int j = 0; j < m; ++j) out[edge_var(m, i, j)] = a[edge_var(m, p[i], p[j])];
  }
  return out;
}

QueryMask permute_mask(const QueryMask& q, int m, const Permutation& p) {
  std::vector<VariableState> out(q.size());
  for (int i = 0; i < m; ++i) {
    out[node_var(m, i)] = q[node_var(m, p[i])];
    for (int j = 0; j < m; ++j) out[edge_var(m, i, j)] = q[edge_var(m, p[i], p[j])];
  }
  return QueryMask(std::move(out));
}

double logp_none(const GraphSPNModel& model, const GraphTensor& g) {
  require_full_scope(model);
  check_input(model, g);
  return log_density(model.circuit, flatten(g));
}

std::vector<Permutation> averaging_permutations(const GraphSPNModel& model, const QueryMask& q,
                                                std::uint64_t rng_seed, int n_perms) {
  if (q.size() != model.rep.var_count()) {
    throw DimensionError("query mask length " + std::to_string(q.size()) + " does not match m(m+1)=" +
                         std::to_string(model.rep.var_count()));
  }
  const std::vector<int> slots = active_slots(model, q);
  const int n = static_cast<int>(slots.size());
  std::vector<Permutation> orders;
  if (model.variant == Variant::exact) {
    if (n > kExactMaxNodes) {
      throw FeasibilityError("exact invariance over " + std::to_string(n) + " nodes needs " +
                             std::to_string(factorial(n)) + " circuit passes (limit " +
                             std::to_string(kExactMaxNodes) + " nodes)");
    }
    orders = all_orderings(n);
  } else if (model.variant == Variant::rand) {
    const int count = n_perms > 0 ? n_perms : model.N;
    orders = sample_permutations(n, static_cast<std::uint64_t>(count), rng_seed);
  } else {
    throw UnsupportedQueryError("permutation averaging applies to exact and rand models only");
  }
  // Active slots are reordered into the leading positions, the observed
  // virtual slots follow in their original order.
  std::vector<int> tail;
  for (int i = 0, a = 0; i < model.rep.m; ++i) {
    if (a < n && slots[a] == i) {
      ++a;
    } else {
      tail.push_back(i);
    }
  }
  std::vector<Permutation> out;
  out.reserve(orders.size());
  for (const auto& o : orders) {
    Permutation p(model.rep.m);
    for (int i = 0; i < n; ++i) p[i] = slots[o[i]];
    for (std::size_t j = 0; j < tail.size(); ++j) p[n + j] = tail[j];
    out.push_back(std::move(p));
  }
  return out;
}

double averaged_log_query(const GraphSPNModel& model, const QueryMask& q, std::uint64_t rng_seed,
                          int n_perms) {
  return averaged_log_query_with(model, q, averaging_permutations(model, q, rng_seed, n_perms));
}

double logp_exact(const GraphSPNModel& model, const GraphTensor& g) {
  require_full_scope(model);
  check_input(model, g);
  const QueryMask q = observed_mask(compact(g));
  const int n = g.real_count();
  if (n > kExactMaxNodes) {
    throw FeasibilityError("exact invariance over " + std::to_string(n) + " nodes needs " +
                           std::to_string(factorial(n)) + " circuit passes (limit " +
                           std::to_string(kExactMaxNodes) + " nodes)");
  }
  std::vector<int> slots(n);
  for (int i = 0; i < n; ++i) slots[i] = i;
  std::vector<Permutation> perms;
  for (const auto& o : all_orderings(n)) perms.push_back(lift(slots, o, model.rep.m));
  return averaged_log_query_with(model, q, perms);
}

double logp_sort(const GraphSPNModel& model, const GraphTensor& g) {
  require_full_scope(model);
  check_input(model, g);
  return log_density(model.circuit, flatten(canonical_form(g)));
}

double logp_kary(const GraphSPNModel& model, const GraphTensor& g) {
  check_input(model, g);
  if (model.variant != Variant::kary) throw DimensionError("logp_kary needs a kary model");
  const std::vector<int> real = g.real_slots();
  const int n = static_cast<int>(real.size());
  if (model.k > n) {
    throw FeasibilityError("kary with k=" + std::to_string(model.k) + " needs at least k real nodes, graph has " +
                           std::to_string(n));
  }
  std::vector<Assignment> batch;
  batch.reserve(falling_factorial(n, model.k));
  for_each_tuple(n, model.k, [&](const std::vector<int>& t) {
    std::vector<int> slots(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) slots[i] = real[t[i]];
    batch.push_back(flatten(subgraph(g, slots)));
  });
  return logmeanexp(log_density(model.circuit, batch));
}

double logp_rand(const GraphSPNModel& model, const GraphTensor& g, std::uint64_t rng_seed) {
  require_full_scope(model);
  check_input(model, g);
  const int n = g.real_count();
  const auto orders = sample_permutations(n, static_cast<std::uint64_t>(model.N), rng_seed);
  std::vector<int> slots(n);
  for (int i = 0; i < n; ++i) slots[i] = i;
  std::vector<Permutation> perms;
  perms.reserve(orders.size());
  for (const auto& o : orders) perms.push_back(lift(slots, o, model.rep.m));
  return averaged_log_query_with(model, observed_mask(compact(g)), perms);
}

double logp(const GraphSPNModel& model, const GraphTensor& g, std::uint64_t rng_seed) {
  switch (model.variant) {
    case Variant::none: return logp_none(model, g);
    case Variant::exact: return logp_exact(model, g);
    case Variant::sort: return logp_sort(model, g);
    case Variant::kary: return logp_kary(model, g);
    case Variant::rand: return logp_rand(model, g, rng_seed);
  }
  return neg_inf<double>();
}

std::vector<TrainingExample> training_view(const GraphSPNModel& model,
                                           std::span<const GraphTensor> dataset,
                                           std::uint64_t epoch_seed) {
  std::vector<TrainingExample> out;
  out.reserve(dataset.size());
  const int m = model.rep.m;
  for (std::size_t idx = 0; idx < dataset.size(); ++idx) {
    const GraphTensor& g = dataset[idx];
    check_input(model, g);
    TrainingExample ex;
    switch (model.variant) {
      case Variant::none:
        ex.terms.push_back(flatten(g));
        break;
      case Variant::sort:
        ex.terms.push_back(flatten(canonical_form(g)));
        break;
      case Variant::rand: {
        const GraphTensor base = compact(g);
        const int n = base.real_count();
        const auto order = sample_permutations(n, 1, Rng::mix(epoch_seed, idx)).front();
        std::vector<int> slots(n);
        for (int i = 0; i < n; ++i) slots[i] = i;
        ex.terms.push_back(flatten(permute(base, lift(slots, order, m))));
        break;
      }
      case Variant::exact: {
        const GraphTensor base = compact(g);
        const int n = base.real_count();
        if (n > kExactMaxNodes) {
          throw FeasibilityError("exact invariance over " + std::to_string(n) + " nodes needs " +
                                 std::to_string(factorial(n)) + " circuit passes per example (limit " +
                                 std::to_string(kExactMaxNodes) + " nodes)");
        }
        const Assignment a = flatten(base);
        std::vector<int> slots(n);
        for (int i = 0; i < n; ++i) slots[i] = i;
        for (const auto& o : all_orderings(n)) ex.terms.push_back(permute_assignment(a, m, lift(slots, o, m)));
        break;
      }
      case Variant::kary: {
        const std::vector<int> real = g.real_slots();
        const int n = static_cast<int>(real.size());
        if (model.k > n) {
          throw FeasibilityError("training example " + std::to_string(idx) + " has " + std::to_string(n) +
                                 " real nodes, fewer than k=" + std::to_string(model.k));
        }
        for_each_tuple(n, model.k, [&](const std::vector<int>& t) {
          std::vector<int> slots(t.size());
          for (std::size_t i = 0; i < t.size(); ++i) slots[i] = real[t[i]];
          ex.terms.push_back(flatten(subgraph(g, slots)));
        });
        break;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Assignment sanitize(Assignment a, const Representation& rep) {
  const int m = rep.m;
  for (int i = 0; i < m; ++i) {
    a[edge_var(m, i, i)] = rep.no_edge();
    for (int j = 0; j < i; ++j) a[edge_var(m, j, i)] = a[edge_var(m, i, j)];
  }
  for (int i = 0; i < m; ++i) {
    if (a[node_var(m, i)] != rep.virtual_node()) continue;
    for (int j = 0; j < m; ++j) {
      a[edge_var(m, i, j)] = rep.no_edge();
      a[edge_var(m, j, i)] = rep.no_edge();
    }
  }
  return a;
}

GraphSampler::GraphSampler(const GraphSPNModel& model, std::optional<QueryMask> evidence,
                           std::uint64_t perm_seed)
    : model_(&model), has_evidence_(evidence.has_value()) {
  model.check();
  if (model.variant == Variant::kary) {
    if (evidence) {
      throw UnsupportedQueryError("kary models do not support conditional sampling (not a smooth circuit)");
    }
    samplers_.emplace_back(model.circuit, QueryMask::all_marginalized(model.circuit.var_count()));
    return;
  }
  QueryMask q = evidence ? std::move(*evidence) : QueryMask::all_marginalized(model.rep.var_count());
  if (q.size() != model.rep.var_count()) {
    throw DimensionError("evidence length " + std::to_string(q.size()) + " does not match m(m+1)=" +
                         std::to_string(model.rep.var_count()));
  }
  const bool averaged = model.variant == Variant::exact || model.variant == Variant::rand;
  if (averaged && has_evidence_) {
    // Posterior over mixture components: each ordering weighted by the
    // evidence mass it receives.
    perms_ = averaging_permutations(model, q, perm_seed);
    perm_log_weights_.resize(static_cast<Eigen::Index>(perms_.size()));
    for (std::size_t i = 0; i < perms_.size(); ++i) {
      QueryMask pq = permute_mask(q, model.rep.m, perms_[i]);
      perm_log_weights_(static_cast<Eigen::Index>(i)) = log_query(model.circuit, pq);
      if (perm_log_weights_(static_cast<Eigen::Index>(i)) > neg_inf<double>()) {
        samplers_.emplace_back(model.circuit, std::move(pq));
      } else {
        samplers_.emplace_back(model.circuit, QueryMask::all_marginalized(model.rep.var_count()));
      }
    }
    if (!(logsumexp(perm_log_weights_) > neg_inf<double>())) {
      throw ImpossibleEvidenceError("evidence has zero probability under the model");
    }
    return;
  }
  samplers_.emplace_back(model.circuit, std::move(q));
}

GraphTensor GraphSampler::draw(std::uint64_t rng_seed) const {
  const GraphSPNModel& model = *model_;
  Rng rng(rng_seed);
  if (model.variant == Variant::kary) {
    const int k = model.k;
    const int m = model.rep.m;
    const Representation sub = model.circuit_rep();
    GraphTensor g;
    g.rep = model.rep;
    g.node_cat.assign(m, model.rep.virtual_node());
    g.edge_cat = Eigen::MatrixXi::Constant(m, m, model.rep.no_edge());
    for (int start = 0; start < m; start += k) {
      const GraphTensor block = unflatten(sanitize(samplers_.front().draw(rng), sub), sub);
      const int width = std::min(k, m - start);
      for (int a = 0; a < width; ++a) {
        g.node_cat[start + a] = block.node_cat[a];
        for (int b = 0; b < width; ++b) g.edge_cat(start + a, start + b) = block.edge_cat(a, b);
      }
    }
    return g;
  }
  const bool averaged = model.variant == Variant::exact || model.variant == Variant::rand;
  if (averaged && has_evidence_) {
    const double top = perm_log_weights_.maxCoeff();
    const Eigen::VectorXd w = (perm_log_weights_.array() - top).exp();
    double u = rng.uniform() * w.sum();
    std::size_t pick = 0;
    for (; pick + 1 < perms_.size(); ++pick) {
      if (u < w(static_cast<Eigen::Index>(pick))) break;
      u -= w(static_cast<Eigen::Index>(pick));
    }
    while (w(static_cast<Eigen::Index>(pick)) == 0.0 && pick > 0) --pick;
    const Assignment y = sanitize(samplers_[pick].draw(rng), model.rep);
    return permute(unflatten(y, model.rep), inverse(perms_[pick]));
  }
  GraphTensor g = unflatten(sanitize(samplers_.front().draw(rng), model.rep), model.rep);
  if (averaged) {
    // Janossy sampling: a uniformly random relabeling of the real nodes.
    g = compact(g);
    const int n = g.real_count();
    Permutation order = identity_permutation(n);
    rng.shuffle(order);
    std::vector<int> slots(n);
    for (int i = 0; i < n; ++i) slots[i] = i;
    g = permute(g, lift(slots, order, model.rep.m));
  }
  return g;
}

GraphTensor sample_graph(const GraphSPNModel& model, std::uint64_t rng_seed,
                         const std::optional<QueryMask>& evidence) {
  return GraphSampler(model, evidence, Rng::mix(rng_seed, 0x5eed)).draw(rng_seed);
}

}  // namespace gspn
