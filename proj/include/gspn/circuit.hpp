#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gspn/rng.hpp"

namespace gspn {

// Categorical domain of every circuit variable.
struct VariableSpec {
  std::vector<int> category_sizes;

  std::size_t var_count() const { return category_sizes.size(); }
  // Throws StructureError unless non-empty and every size is >= 2.
  void validate() const;

  bool operator==(const VariableSpec&) const = default;
};

// EinSum-style architecture knobs.
struct StructureConfig {
  int n_layers = 2;
  int n_sum = 40;
  int n_input = 40;
  int n_repetitions = 40;
  std::uint64_t structure_seed = 0;

  bool operator==(const StructureConfig&) const = default;
};

using Assignment = std::vector<int>;

// What a query knows about one variable: an observed category, nothing
// (summed out), or a non-negative weight per category (the general
// single-argument factor; observed/marginalized are indicator special cases).
struct VariableState {
  enum class Kind { observed, marginalized, weighted };

  Kind kind = Kind::marginalized;
  int category = -1;
  Eigen::VectorXd weights;

  static VariableState observed(int c) { return {Kind::observed, c, {}}; }
  static VariableState marginalized() { return {}; }
  static VariableState weighted(Eigen::VectorXd w) {
    return {Kind::weighted, -1, std::move(w)};
  }

  bool is_observed() const { return kind == Kind::observed; }
  bool is_marginalized() const { return kind == Kind::marginalized; }
};

class QueryMask {
 public:
  QueryMask() = default;
  explicit QueryMask(std::vector<VariableState> states) : states_(std::move(states)) {}

  static QueryMask all_marginalized(std::size_t n);
  static QueryMask from_assignment(const Assignment& a);

  std::size_t size() const { return states_.size(); }
  const VariableState& operator[](std::size_t i) const { return states_[i]; }
  VariableState& operator[](std::size_t i) { return states_[i]; }
  std::span<const VariableState> states() const { return states_; }

  bool fully_observed() const;
  // Observed categories; marginalized / weighted slots get -1.
  Assignment observed_values() const;

 private:
  std::vector<VariableState> states_;
};

// Units over `scope`, each a fully factorized product of categoricals, one
// per scope variable. logits[v] is units x category_sizes[scope[v]].
struct InputLayer {
  std::vector<int> scope;
  int units = 0;
  std::vector<Eigen::MatrixXd> logits;
  // When false the logits are used as raw log-masses (no per-row
  // normalization). Only meant for hand-built test circuits.
  bool normalized = true;
};

enum class ProductKind { hadamard, kronecker };

struct ProductLayer {
  std::vector<int> children;
  ProductKind kind = ProductKind::kronecker;
};

// Mixes the concatenated outputs of `children`. logits is units x (sum of
// child units); rows pass through a softmax on use.
struct SumLayer {
  std::vector<int> children;
  Eigen::MatrixXd logits;
};

using Layer = std::variant<InputLayer, ProductLayer, SumLayer>;

// Layered sum-product circuit. Layers are stored in topological order
// (children strictly before parents); the last layer is the root and must
// have exactly one unit. Scope properties (smoothness, decomposability) are
// not enforced here; see validate_structure.
class Circuit {
 public:
  Circuit() = default;
  // Throws StructureError on shape problems: unknown child refs, weight
  // shapes that disagree with child unit counts, multi-unit root, ...
  Circuit(VariableSpec spec, std::vector<Layer> layers);

  const VariableSpec& spec() const { return spec_; }
  std::size_t var_count() const { return spec_.var_count(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t root() const { return layers_.size() - 1; }
  int units(std::size_t layer) const { return units_[layer]; }
  // Offset of each child's block inside a sum layer's concatenated input.
  const std::vector<int>& child_offsets(std::size_t layer) const { return offsets_[layer]; }

  // All unconstrained parameters, flattened in layer order (input logits per
  // scope variable column-major, then sum logits column-major).
  std::size_t parameter_count() const { return param_count_; }
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  std::size_t parameter_offset(std::size_t layer) const { return param_offsets_[layer]; }

  // Mutable access for hand-edited circuits in tests; shapes must not change.
  InputLayer& input_layer(std::size_t layer) { return std::get<InputLayer>(layers_[layer]); }
  SumLayer& sum_layer(std::size_t layer) { return std::get<SumLayer>(layers_[layer]); }

 private:
  void index();

  VariableSpec spec_;
  std::vector<Layer> layers_;
  std::vector<int> units_;
  std::vector<std::vector<int>> offsets_;
  std::vector<std::size_t> param_offsets_;
  std::size_t param_count_ = 0;
};

// Random balanced binary region splits, n_repetitions of them, each
// n_layers region levels deep, merged by one root sum unit.
Circuit build_circuit(const VariableSpec& spec, const StructureConfig& cfg);

struct Violation {
  enum class Kind { smoothness, decomposability, root_scope, input_scope, leaf_normalization };
  Kind kind;
  std::size_t layer;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_structure(const Circuit& c);

// Scope of every layer as a sorted variable list (sum layers take their first
// child's scope).
std::vector<std::vector<int>> layer_scopes(const Circuit& c);

double log_density(const Circuit& c, const Assignment& a);
double log_query(const Circuit& c, const QueryMask& q);

// Batched variants; one entry per column.
Eigen::VectorXd log_density(const Circuit& c, std::span<const Assignment> batch);
Eigen::VectorXd log_query(const Circuit& c, std::span<const QueryMask> batch);

// Gradient of sum_b coeffs[b] * log p(batch[b]) with respect to
// Circuit::parameters(). Returns the per-sample log-densities through
// `log_values` when non-null.
Eigen::VectorXd log_density_gradient(const Circuit& c, std::span<const Assignment> batch,
                                     const Eigen::VectorXd& coeffs,
                                     Eigen::VectorXd* log_values = nullptr);

// Same, with the coefficients computed from the forward log-densities (one
// upward pass in total).
using CoefficientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& log_values)>;
Eigen::VectorXd log_density_gradient(const Circuit& c, std::span<const Assignment> batch,
                                     const CoefficientFn& coeffs);

// Conditional ancestral sampler. The evidence-conditioned upward pass runs
// once at construction; draws reuse it.
class Sampler {
 public:
  Sampler(const Circuit& c, QueryMask evidence);

  // log of the evidence mass.
  double log_evidence() const { return log_evidence_; }
  Assignment draw(std::uint64_t rng_seed) const;
  Assignment draw(Rng& rng) const;

 private:
  const Circuit* circuit_;
  QueryMask evidence_;
  std::vector<Eigen::VectorXd> values_;   // per layer, log values under evidence
  std::vector<Eigen::MatrixXd> weights_;  // normalized sum weights (empty for non-sum)
  std::vector<std::vector<Eigen::MatrixXd>> leaf_log_probs_;
  double log_evidence_;
};

// One-shot conditional sample; throws ImpossibleEvidenceError on zero mass.
Assignment sample(const Circuit& c, const QueryMask& evidence, std::uint64_t rng_seed);

// Counts full circuit passes (one per evaluated column); used to check the
// pass counts of the invariance operators.
struct PassCounter {
  static std::uint64_t value();
  static void reset();
  static void add(std::uint64_t n);
};

}  // namespace gspn
