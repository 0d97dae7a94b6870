#include "gspn/circuit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gspn/error.hpp"
#include "gspn/logspace.hpp"

namespace gspn {

namespace {

std::atomic<std::uint64_t> g_passes{0};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<Eigen::MatrixXd> leaf_log_probs(const InputLayer& in) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(in.logits.size());
  for (const auto& l : in.logits) {
    out.push_back(in.normalized ? log_softmax_rows(l) : l);
  }
  return out;
}

// Log-contribution of one scope variable to every unit of an input layer.
void add_leaf_term(const Eigen::MatrixXd& logp, const VariableState& st,
                   Eigen::Ref<Eigen::VectorXd> acc, bool normalized) {
  switch (st.kind) {
    case VariableState::Kind::observed:
      acc += logp.col(st.category);
      break;
    case VariableState::Kind::marginalized:
      // Normalized rows carry unit mass.
      if (!normalized) {
        for (Eigen::Index u = 0; u < logp.rows(); ++u) acc(u) += logsumexp(logp.row(u));
      }
      break;
    case VariableState::Kind::weighted: {
      const Eigen::RowVectorXd logw = st.weights.transpose().array().log();
      for (Eigen::Index u = 0; u < logp.rows(); ++u) {
        acc(u) += logsumexp((logp.row(u) + logw).eval());
      }
      break;
    }
  }
}

// Activations of one batched upward pass.
struct Pass {
  std::vector<Eigen::MatrixXd> values;   // log values, units x B
  std::vector<Eigen::MatrixXd> scaled;   // sum layers: exp(input - colmax)
  std::vector<Eigen::MatrixXd> mixed;    // sum layers: W * scaled
  std::vector<Eigen::MatrixXd> weights;  // sum layers: row-normalized W
  std::vector<std::vector<Eigen::MatrixXd>> leaf;
};

// Gathers the concatenated children of a sum layer into one matrix.
Eigen::MatrixXd stack_children(const Circuit& c, std::size_t layer, const SumLayer& s,
                               const std::vector<Eigen::MatrixXd>& values, Eigen::Index batch) {
  if (s.children.size() == 1) return values[s.children.front()];
  const auto& offs = c.child_offsets(layer);
  Eigen::MatrixXd in(s.logits.cols(), batch);
  for (std::size_t k = 0; k < s.children.size(); ++k) {
    const int ch = s.children[k];
    in.middleRows(offs[k], c.units(ch)) = values[ch];
  }
  return in;
}

void forward_sum(const Circuit& c, std::size_t layer, const SumLayer& s, Pass& p,
                 Eigen::Index batch) {
  p.weights[layer] = softmax_rows(s.logits);
  Eigen::MatrixXd in = stack_children(c, layer, s, p.values, batch);
  Eigen::RowVectorXd colmax = in.colwise().maxCoeff();
  for (Eigen::Index b = 0; b < batch; ++b) {
    if (colmax(b) == neg_inf<double>()) {
      in.col(b).setZero();
    } else {
      in.col(b) = (in.col(b).array() - colmax(b)).exp();
    }
  }
  Eigen::MatrixXd mixed = p.weights[layer] * in;
  Eigen::MatrixXd out(mixed.rows(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    if (colmax(b) == neg_inf<double>()) {
      out.col(b).setConstant(neg_inf<double>());
    } else {
      out.col(b) = mixed.col(b).array().log() + colmax(b);
    }
  }
  p.values[layer] = std::move(out);
  p.scaled[layer] = std::move(in);
  p.mixed[layer] = std::move(mixed);
}

void forward_product(const Circuit& c, std::size_t layer, const ProductLayer& pr, Pass& p,
                     Eigen::Index batch) {
  if (pr.kind == ProductKind::hadamard) {
    Eigen::MatrixXd acc = p.values[pr.children.front()];
    for (std::size_t k = 1; k < pr.children.size(); ++k) acc += p.values[pr.children[k]];
    p.values[layer] = std::move(acc);
    return;
  }
  // Kronecker: the first child is the most significant index.
  Eigen::MatrixXd acc = p.values[pr.children.front()];
  for (std::size_t k = 1; k < pr.children.size(); ++k) {
    const Eigen::MatrixXd& next = p.values[pr.children[k]];
    const Eigen::Index nn = next.rows();
    Eigen::MatrixXd grown(acc.rows() * nn, batch);
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
      grown.middleRows(i * nn, nn) = next.rowwise() + acc.row(i);
    }
    acc = std::move(grown);
  }
  (void)c;
  p.values[layer] = std::move(acc);
}

// Input layers under a batch of assignments or masks. Both paths add the same
// per-variable terms in scope order, so a fully observed mask reproduces the
// assignment path bit for bit.
template <typename Evidence>
void forward_input(const InputLayer& in, std::size_t layer, Pass& p, std::span<const Evidence> batch);

template <>
void forward_input<Assignment>(const InputLayer& in, std::size_t layer, Pass& p,
                               std::span<const Assignment> batch) {
  const auto& logp = p.leaf[layer];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.units, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t s = 0; s < in.scope.size(); ++s) {
    const int var = in.scope[s];
    for (std::size_t b = 0; b < batch.size(); ++b) {
      out.col(static_cast<Eigen::Index>(b)) += logp[s].col(batch[b][var]);
    }
  }
  p.values[layer] = std::move(out);
}

template <>
void forward_input<QueryMask>(const InputLayer& in, std::size_t layer, Pass& p,
                              std::span<const QueryMask> batch) {
  const auto& logp = p.leaf[layer];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.units, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t s = 0; s < in.scope.size(); ++s) {
    const int var = in.scope[s];
    for (std::size_t b = 0; b < batch.size(); ++b) {
      add_leaf_term(logp[s], batch[b][var], out.col(static_cast<Eigen::Index>(b)), in.normalized);
    }
  }
  p.values[layer] = std::move(out);
}

void check_assignment(const Circuit& c, const Assignment& a) {
  if (a.size() != c.var_count()) {
    throw DimensionError("assignment has " + std::to_string(a.size()) +
                         " variables, circuit expects " + std::to_string(c.var_count()));
  }
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (a[v] < 0 || a[v] >= c.spec().category_sizes[v]) {
      throw DimensionError("category " + std::to_string(a[v]) + " out of range for variable " +
                           std::to_string(v));
    }
  }
}

void check_mask(const Circuit& c, const QueryMask& q) {
  if (q.size() != c.var_count()) {
    throw DimensionError("query mask has " + std::to_string(q.size()) +
                         " variables, circuit expects " + std::to_string(c.var_count()));
  }
  for (std::size_t v = 0; v < q.size(); ++v) {
    const auto& st = q[v];
    const int k = c.spec().category_sizes[v];
    if (st.kind == VariableState::Kind::observed && (st.category < 0 || st.category >= k)) {
      throw DimensionError("observed category " + std::to_string(st.category) +
                           " out of range for variable " + std::to_string(v));
    }
    if (st.kind == VariableState::Kind::weighted &&
        (st.weights.size() != k || (st.weights.array() < 0.0).any())) {
      throw DimensionError("weight table for variable " + std::to_string(v) +
                           " must hold " + std::to_string(k) + " non-negative entries");
    }
  }
}

template <typename Evidence>
Pass upward(const Circuit& c, std::span<const Evidence> batch) {
  const std::size_t n = c.layers().size();
  const auto cols = static_cast<Eigen::Index>(batch.size());
  Pass p;
  p.values.resize(n);
  p.scaled.resize(n);
  p.mixed.resize(n);
  p.weights.resize(n);
  p.leaf.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    std::visit(overloaded{
                   [&](const InputLayer& in) {
                     p.leaf[l] = leaf_log_probs(in);
                     forward_input<Evidence>(in, l, p, batch);
                   },
                   [&](const ProductLayer& pr) { forward_product(c, l, pr, p, cols); },
                   [&](const SumLayer& s) { forward_sum(c, l, s, p, cols); },
               },
               c.layers()[l]);
  }
  g_passes.fetch_add(batch.size(), std::memory_order_relaxed);
  return p;
}

std::size_t draw_index(const Eigen::Ref<const Eigen::VectorXd>& log_weights, Rng& rng) {
  const double top = log_weights.maxCoeff();
  Eigen::VectorXd w = (log_weights.array() - top).exp();
  const double total = w.sum();
  double u = rng.uniform() * total;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (u < w(k)) return static_cast<std::size_t>(k);
    u -= w(k);
  }
  // Rounding left u at the tail; return the last index with mass.
  for (Eigen::Index k = w.size() - 1; k >= 0; --k) {
    if (w(k) > 0.0) return static_cast<std::size_t>(k);
  }
  return 0;
}

}  // namespace

void VariableSpec::validate() const {
  if (category_sizes.empty()) throw StructureError("variable spec must have at least one variable");
  for (std::size_t i = 0; i < category_sizes.size(); ++i) {
    if (category_sizes[i] < 2) {
      throw StructureError("variable " + std::to_string(i) + " needs at least 2 categories");
    }
  }
}

QueryMask QueryMask::all_marginalized(std::size_t n) {
  return QueryMask(std::vector<VariableState>(n));
}

QueryMask QueryMask::from_assignment(const Assignment& a) {
  std::vector<VariableState> st;
  st.reserve(a.size());
  for (int v : a) st.push_back(VariableState::observed(v));
  return QueryMask(std::move(st));
}

bool QueryMask::fully_observed() const {
  return std::all_of(states_.begin(), states_.end(),
                     [](const VariableState& s) { return s.is_observed(); });
}

Assignment QueryMask::observed_values() const {
  Assignment a(states_.size(), -1);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].is_observed()) a[i] = states_[i].category;
  }
  return a;
}

Circuit::Circuit(VariableSpec spec, std::vector<Layer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  spec_.validate();
  index();
}

void Circuit::index() {
  if (layers_.empty()) throw StructureError("circuit has no layers");
  const std::size_t n = layers_.size();
  units_.assign(n, 0);
  offsets_.assign(n, {});
  param_offsets_.assign(n, 0);
  param_count_ = 0;
  auto check_children = [&](std::size_t l, const std::vector<int>& children) {
    if (children.empty()) throw StructureError("layer " + std::to_string(l) + " has no children");
    for (int ch : children) {
      if (ch < 0 || static_cast<std::size_t>(ch) >= l) {
        throw StructureError("layer " + std::to_string(l) + " refers to layer " +
                             std::to_string(ch) + ", which does not precede it");
      }
    }
  };
  for (std::size_t l = 0; l < n; ++l) {
    param_offsets_[l] = param_count_;
    std::visit(
        overloaded{
            [&](const InputLayer& in) {
              if (in.units < 1) throw StructureError("input layer " + std::to_string(l) + " has no units");
              if (in.scope.empty()) throw StructureError("input layer " + std::to_string(l) + " has empty scope");
              if (in.logits.size() != in.scope.size()) {
                throw StructureError("input layer " + std::to_string(l) +
                                     " needs one logit table per scope variable");
              }
              for (std::size_t s = 0; s < in.scope.size(); ++s) {
                const int var = in.scope[s];
                if (var < 0 || static_cast<std::size_t>(var) >= spec_.var_count()) {
                  throw StructureError("input layer " + std::to_string(l) + " scope variable " +
                                       std::to_string(var) + " out of range");
                }
                const auto& t = in.logits[s];
                if (t.rows() != in.units || t.cols() != spec_.category_sizes[var]) {
                  throw StructureError("input layer " + std::to_string(l) +
                                       " logit table has the wrong shape");
                }
                param_count_ += static_cast<std::size_t>(t.size());
              }
              units_[l] = in.units;
            },
            [&](const ProductLayer& pr) {
              check_children(l, pr.children);
              if (pr.kind == ProductKind::hadamard) {
                const int u = units_[pr.children.front()];
                for (int ch : pr.children) {
                  if (units_[ch] != u) {
                    throw StructureError("hadamard layer " + std::to_string(l) +
                                         " children differ in width");
                  }
                }
                units_[l] = u;
              } else {
                long long u = 1;
                for (int ch : pr.children) u *= units_[ch];
                if (u > (1LL << 28)) throw StructureError("kronecker layer too wide");
                units_[l] = static_cast<int>(u);
              }
            },
            [&](const SumLayer& s) {
              check_children(l, s.children);
              int width = 0;
              for (int ch : s.children) {
                offsets_[l].push_back(width);
                width += units_[ch];
              }
              if (s.logits.cols() != width || s.logits.rows() < 1) {
                throw StructureError("sum layer " + std::to_string(l) + " weight matrix is " +
                                     std::to_string(s.logits.rows()) + "x" +
                                     std::to_string(s.logits.cols()) + ", children provide " +
                                     std::to_string(width) + " inputs");
              }
              units_[l] = static_cast<int>(s.logits.rows());
              param_count_ += static_cast<std::size_t>(s.logits.size());
            },
        },
        layers_[l]);
  }
  if (units_.back() != 1) throw StructureError("root layer must have exactly one unit");
}

Eigen::VectorXd Circuit::parameters() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(param_count_));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto off = static_cast<Eigen::Index>(param_offsets_[l]);
    if (const auto* in = std::get_if<InputLayer>(&layers_[l])) {
      for (const auto& t : in->logits) {
        theta.segment(off, t.size()) = t.reshaped();
        off += t.size();
      }
    } else if (const auto* s = std::get_if<SumLayer>(&layers_[l])) {
      theta.segment(off, s->logits.size()) = s->logits.reshaped();
    }
  }
  return theta;
}

void Circuit::set_parameters(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != param_count_) {
    throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                         " entries, circuit has " + std::to_string(param_count_));
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto off = static_cast<Eigen::Index>(param_offsets_[l]);
    if (auto* in = std::get_if<InputLayer>(&layers_[l])) {
      for (auto& t : in->logits) {
        t.reshaped() = theta.segment(off, t.size());
        off += t.size();
      }
    } else if (auto* s = std::get_if<SumLayer>(&layers_[l])) {
      s->logits.reshaped() = theta.segment(off, s->logits.size());
    }
  }
}

Circuit build_circuit(const VariableSpec& spec, const StructureConfig& cfg) {
  spec.validate();
  if (cfg.n_layers < 1 || cfg.n_sum < 1 || cfg.n_input < 1 || cfg.n_repetitions < 1) {
    throw StructureError("structure sizes must be positive");
  }
  const std::size_t vars = spec.var_count();
  // n_layers region levels need 2^(n_layers-1) non-empty leaf regions.
  if (cfg.n_layers > 1 && (cfg.n_layers - 1 >= 63 || (std::size_t{1} << (cfg.n_layers - 1)) > vars)) {
    throw StructureError("n_layers=" + std::to_string(cfg.n_layers) + " exceeds log2(" +
                         std::to_string(vars) + ")+1 for this variable count");
  }

  Rng rng(cfg.structure_seed);
  std::vector<Layer> layers;
  std::vector<int> tops;

  auto make_leaf = [&](std::vector<int> scope) {
    std::sort(scope.begin(), scope.end());
    InputLayer in;
    in.units = cfg.n_input;
    for (int var : scope) {
      Eigen::MatrixXd t(cfg.n_input, spec.category_sizes[var]);
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = rng.uniform(-0.01, 0.01);
      }
      in.logits.push_back(std::move(t));
    }
    in.scope = std::move(scope);
    layers.emplace_back(std::move(in));
    return static_cast<int>(layers.size() - 1);
  };

  auto random_weights = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = std::log(rng.uniform(0.01, 1.0));
    }
    return w;
  };

  auto width_of = [&](int layer) -> Eigen::Index {
    if (const auto* in = std::get_if<InputLayer>(&layers[layer])) return in->units;
    return std::get<SumLayer>(layers[layer]).logits.rows();
  };

  // Builds the region subtree over vars[lo, hi) at `level`; returns its layer.
  auto build_region = [&](auto&& self, const std::vector<int>& order, std::size_t lo,
                          std::size_t hi, int level) -> int {
    if (level == cfg.n_layers - 1) {
      return make_leaf(std::vector<int>(order.begin() + lo, order.begin() + hi));
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const int left = self(self, order, lo, mid, level + 1);
    const int right = self(self, order, mid, hi, level + 1);
    layers.emplace_back(ProductLayer{{left, right}, ProductKind::kronecker});
    const int prod = static_cast<int>(layers.size() - 1);
    const Eigen::Index width = width_of(left) * width_of(right);
    layers.emplace_back(SumLayer{{prod}, random_weights(cfg.n_sum, width)});
    return static_cast<int>(layers.size() - 1);
  };

  for (int r = 0; r < cfg.n_repetitions; ++r) {
    std::vector<int> order(vars);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    tops.push_back(build_region(build_region, order, 0, vars, 0));
  }

  Eigen::Index width = 0;
  for (int t : tops) width += width_of(t);
  layers.emplace_back(SumLayer{tops, random_weights(1, width)});
  return Circuit(spec, std::move(layers));
}

std::vector<std::vector<int>> layer_scopes(const Circuit& c) {
  std::vector<std::vector<int>> scopes(c.layers().size());
  for (std::size_t l = 0; l < c.layers().size(); ++l) {
    std::visit(overloaded{
                   [&](const InputLayer& in) {
                     scopes[l] = in.scope;
                     std::sort(scopes[l].begin(), scopes[l].end());
                   },
                   [&](const ProductLayer& pr) {
                     std::vector<int> u;
                     for (int ch : pr.children) u.insert(u.end(), scopes[ch].begin(), scopes[ch].end());
                     std::sort(u.begin(), u.end());
                     u.erase(std::unique(u.begin(), u.end()), u.end());
                     scopes[l] = std::move(u);
                   },
                   [&](const SumLayer& s) { scopes[l] = scopes[s.children.front()]; },
               },
               c.layers()[l]);
  }
  return scopes;
}

namespace {

std::string scope_text(const std::vector<int>& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

}  // namespace

ValidationReport validate_structure(const Circuit& c) {
  ValidationReport report;
  const auto scopes = layer_scopes(c);
  for (std::size_t l = 0; l < c.layers().size(); ++l) {
    std::visit(
        overloaded{
            [&](const InputLayer& in) {
              auto s = in.scope;
              std::sort(s.begin(), s.end());
              if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
                report.violations.push_back({Violation::Kind::input_scope, l,
                                             "input layer " + std::to_string(l) +
                                                 " repeats a scope variable"});
              }
              for (std::size_t k = 0; k < in.logits.size(); ++k) {
                const Eigen::MatrixXd lp = in.normalized ? log_softmax_rows(in.logits[k]) : in.logits[k];
                for (Eigen::Index u = 0; u < lp.rows(); ++u) {
                  const double mass = logsumexp(lp.row(u));
                  if (!(std::abs(mass) <= 1e-12)) {
                    report.violations.push_back(
                        {Violation::Kind::leaf_normalization, l,
                         "input layer " + std::to_string(l) + " unit " + std::to_string(u) +
                             " variable " + std::to_string(in.scope[k]) + " has log-mass " +
                             std::to_string(mass)});
                    break;
                  }
                }
              }
            },
            [&](const ProductLayer& pr) {
              for (std::size_t a = 0; a < pr.children.size(); ++a) {
                for (std::size_t b = a + 1; b < pr.children.size(); ++b) {
                  const auto& sa = scopes[pr.children[a]];
                  const auto& sb = scopes[pr.children[b]];
                  std::vector<int> common;
                  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                        std::back_inserter(common));
                  if (!common.empty()) {
                    report.violations.push_back(
                        {Violation::Kind::decomposability, l,
                         "product layer " + std::to_string(l) + " children " +
                             std::to_string(pr.children[a]) + scope_text(sa) + " and " +
                             std::to_string(pr.children[b]) + scope_text(sb) + " overlap"});
                  }
                }
              }
            },
            [&](const SumLayer& s) {
              const auto& first = scopes[s.children.front()];
              for (std::size_t k = 1; k < s.children.size(); ++k) {
                if (scopes[s.children[k]] != first) {
                  report.violations.push_back(
                      {Violation::Kind::smoothness, l,
                       "sum layer " + std::to_string(l) + " mixes scope " + scope_text(first) +
                           " with " + scope_text(scopes[s.children[k]])});
                }
              }
            },
        },
        c.layers()[l]);
  }
  std::vector<int> all(c.var_count());
  std::iota(all.begin(), all.end(), 0);
  if (scopes.back() != all) {
    report.violations.push_back({Violation::Kind::root_scope, c.root(),
                                 "root scope " + scope_text(scopes.back()) +
                                     " is not the full variable set"});
  }
  return report;
}

Eigen::VectorXd log_density(const Circuit& c, std::span<const Assignment> batch) {
  for (const auto& a : batch) check_assignment(c, a);
  if (batch.empty()) return {};
  Pass p = upward<Assignment>(c, batch);
  return p.values[c.root()].row(0).transpose();
}

Eigen::VectorXd log_query(const Circuit& c, std::span<const QueryMask> batch) {
  for (const auto& q : batch) check_mask(c, q);
  if (batch.empty()) return {};
  Pass p = upward<QueryMask>(c, batch);
  return p.values[c.root()].row(0).transpose();
}

double log_density(const Circuit& c, const Assignment& a) {
  return log_density(c, std::span<const Assignment>(&a, 1))(0);
}

double log_query(const Circuit& c, const QueryMask& q) {
  return log_query(c, std::span<const QueryMask>(&q, 1))(0);
}

Eigen::VectorXd log_density_gradient(const Circuit& c, std::span<const Assignment> batch,
                                     const Eigen::VectorXd& coeffs, Eigen::VectorXd* log_values) {
  if (static_cast<std::size_t>(coeffs.size()) != batch.size()) {
    throw DimensionError("one coefficient per assignment required");
  }
  return log_density_gradient(c, batch, [&](const Eigen::VectorXd& lv) {
    if (log_values) *log_values = lv;
    return coeffs;
  });
}

Eigen::VectorXd log_density_gradient(const Circuit& c, std::span<const Assignment> batch,
                                     const CoefficientFn& coeff_fn) {
  for (const auto& a : batch) check_assignment(c, a);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.parameter_count()));
  if (batch.empty()) return grad;
  const auto cols = static_cast<Eigen::Index>(batch.size());
  Pass p = upward<Assignment>(c, batch);
  const Eigen::VectorXd coeffs = coeff_fn(p.values[c.root()].row(0).transpose());
  if (static_cast<std::size_t>(coeffs.size()) != batch.size()) {
    throw DimensionError("one coefficient per assignment required");
  }

  const std::size_t n = c.layers().size();
  std::vector<Eigen::MatrixXd> g(n);
  g[c.root()] = coeffs.transpose();
  auto accumulate = [&](int layer, const auto& block) {
    if (g[layer].size() == 0) {
      g[layer] = block;
    } else {
      g[layer] += block;
    }
  };

  for (std::size_t li = n; li-- > 0;) {
    if (g[li].size() == 0) continue;
    const Eigen::MatrixXd& up = g[li];
    std::visit(
        overloaded{
            [&](const InputLayer& in) {
              auto off = static_cast<Eigen::Index>(c.parameter_offset(li));
              const Eigen::VectorXd total = up.rowwise().sum();
              for (std::size_t s = 0; s < in.scope.size(); ++s) {
                const int var = in.scope[s];
                const Eigen::Index k = in.logits[s].cols();
                Eigen::MatrixXd d = Eigen::MatrixXd::Zero(in.units, k);
                for (Eigen::Index b = 0; b < cols; ++b) d.col(batch[b][var]) += up.col(b);
                if (in.normalized) {
                  d.array() -= p.leaf[li][s].array().exp().colwise() * total.array();
                }
                grad.segment(off, d.size()) += d.reshaped();
                off += d.size();
              }
            },
            [&](const ProductLayer& pr) {
              if (pr.kind == ProductKind::hadamard) {
                for (int ch : pr.children) accumulate(ch, up);
                return;
              }
              // Strides of the mixed-radix kronecker index.
              const std::size_t r = pr.children.size();
              std::vector<Eigen::Index> stride(r, 1);
              for (std::size_t k = r - 1; k-- > 0;) stride[k] = stride[k + 1] * c.units(pr.children[k + 1]);
              for (std::size_t k = 0; k < r; ++k) {
                const int ch = pr.children[k];
                const Eigen::Index width = c.units(ch);
                Eigen::MatrixXd d = Eigen::MatrixXd::Zero(width, cols);
                for (Eigen::Index o = 0; o < up.rows(); ++o) d.row((o / stride[k]) % width) += up.row(o);
                accumulate(ch, d);
              }
            },
            [&](const SumLayer& s) {
              const Eigen::MatrixXd& w = p.weights[li];
              const Eigen::MatrixXd& scaled = p.scaled[li];
              const Eigen::MatrixXd& mixed = p.mixed[li];
              Eigen::MatrixXd ratio(up.rows(), cols);
              for (Eigen::Index b = 0; b < cols; ++b) {
                for (Eigen::Index u = 0; u < up.rows(); ++u) {
                  ratio(u, b) = mixed(u, b) > 0.0 ? up(u, b) / mixed(u, b) : 0.0;
                }
              }
              const auto off = static_cast<Eigen::Index>(c.parameter_offset(li));
              Eigen::MatrixXd dw = w.cwiseProduct(ratio * scaled.transpose());
              dw.array() -= w.array().colwise() * up.rowwise().sum().array();
              grad.segment(off, dw.size()) += dw.reshaped();
              const Eigen::MatrixXd din = scaled.cwiseProduct(w.transpose() * ratio);
              const auto& offs = c.child_offsets(li);
              for (std::size_t k = 0; k < s.children.size(); ++k) {
                const int ch = s.children[k];
                accumulate(ch, din.middleRows(offs[k], c.units(ch)));
              }
            },
        },
        c.layers()[li]);
    g[li].resize(0, 0);
  }
  return grad;
}

Sampler::Sampler(const Circuit& c, QueryMask evidence) : circuit_(&c), evidence_(std::move(evidence)) {
  check_mask(c, evidence_);
  Pass p = upward<QueryMask>(c, std::span<const QueryMask>(&evidence_, 1));
  values_.resize(c.layers().size());
  for (std::size_t l = 0; l < values_.size(); ++l) values_[l] = p.values[l].col(0);
  weights_ = std::move(p.weights);
  leaf_log_probs_ = std::move(p.leaf);
  log_evidence_ = values_[c.root()](0);
  if (!(log_evidence_ > neg_inf<double>())) {
    throw ImpossibleEvidenceError("evidence has zero probability under the circuit");
  }
}

Assignment Sampler::draw(std::uint64_t rng_seed) const {
  Rng rng(rng_seed);
  return draw(rng);
}

Assignment Sampler::draw(Rng& rng) const {
  const Circuit& c = *circuit_;
  Assignment out = evidence_.observed_values();
  struct Item {
    std::size_t layer;
    Eigen::Index unit;
  };
  std::vector<Item> stack{{c.root(), 0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    std::visit(
        overloaded{
            [&](const InputLayer& in) {
              for (std::size_t s = 0; s < in.scope.size(); ++s) {
                const int var = in.scope[s];
                const VariableState& st = evidence_[var];
                if (st.is_observed()) continue;
                Eigen::VectorXd lw = leaf_log_probs_[it.layer][s].row(it.unit).transpose();
                if (st.kind == VariableState::Kind::weighted) lw.array() += st.weights.array().log();
                out[var] = static_cast<int>(draw_index(lw, rng));
              }
            },
            [&](const ProductLayer& pr) {
              if (pr.kind == ProductKind::hadamard) {
                for (int ch : pr.children) stack.push_back({static_cast<std::size_t>(ch), it.unit});
                return;
              }
              Eigen::Index rest = it.unit;
              for (std::size_t k = pr.children.size(); k-- > 0;) {
                const int ch = pr.children[k];
                stack.push_back({static_cast<std::size_t>(ch), rest % c.units(ch)});
                rest /= c.units(ch);
              }
            },
            [&](const SumLayer& s) {
              const auto& offs = c.child_offsets(it.layer);
              Eigen::VectorXd lw(s.logits.cols());
              for (std::size_t k = 0; k < s.children.size(); ++k) {
                const int ch = s.children[k];
                lw.segment(offs[k], c.units(ch)) = values_[ch];
              }
              lw.array() += weights_[it.layer].row(it.unit).transpose().array().log();
              const auto pick = static_cast<int>(draw_index(lw, rng));
              const auto pos = std::upper_bound(offs.begin(), offs.end(), pick) - offs.begin() - 1;
              stack.push_back({static_cast<std::size_t>(s.children[pos]), pick - offs[pos]});
            },
        },
        c.layers()[it.layer]);
  }
  return out;
}

Assignment sample(const Circuit& c, const QueryMask& evidence, std::uint64_t rng_seed) {
  return Sampler(c, evidence).draw(rng_seed);
}

std::uint64_t PassCounter::value() { return g_passes.load(); }
void PassCounter::reset() { g_passes.store(0); }
void PassCounter::add(std::uint64_t n) { g_passes.fetch_add(n); }

}  // namespace gspn
