#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gspn/graph.hpp"
#include "gspn/model.hpp"
#include "gspn/train.hpp"

namespace gspn {

// Largest real-node count for which the exact n!-term average is evaluated.
inline constexpr int kExactMaxNodes = 8;

// log p_spn(flatten(g)); no invariance.
double logp_none(const GraphSPNModel& model, const GraphTensor& g);
// Janossy average over all n! orderings of the real nodes (virtual slots at
// the tail). Throws FeasibilityError above kExactMaxNodes.
double logp_exact(const GraphSPNModel& model, const GraphTensor& g);
// One pass on the canonical ordering.
double logp_sort(const GraphSPNModel& model, const GraphTensor& g);
// Average of the k-slot circuit over all ordered k-node induced sub-graphs of
// the real nodes. A score, not a normalized log-density over full graphs.
double logp_kary(const GraphSPNModel& model, const GraphTensor& g);
// Average over N distinct random orderings drawn with rng_seed.
double logp_rand(const GraphSPNModel& model, const GraphTensor& g, std::uint64_t rng_seed);

// Dispatches on model.variant; rng_seed only matters for rand.
double logp(const GraphSPNModel& model, const GraphTensor& g, std::uint64_t rng_seed = 0);

// Moves the real slots to the front (stable), virtual slots to the tail.
GraphTensor compact(const GraphTensor& g);

// Reorders the slots of a flattened graph / query mask, p[new] = old.
Assignment permute_assignment(const Assignment& a, int m, const Permutation& p);
QueryMask permute_mask(const QueryMask& q, int m, const Permutation& p);

// Slot permutations used by the averaging variants for a mask: orderings of
// the "active" slots (those not observed as virtual) placed in front, the
// observed virtual slots after them.
// exact: every ordering; rand: n_perms (model.N when 0) distinct draws under
// rng_seed.
std::vector<Permutation> averaging_permutations(const GraphSPNModel& model, const QueryMask& q,
                                                std::uint64_t rng_seed, int n_perms = 0);

// log of the permutation-averaged query mass for exact / rand models.
double averaged_log_query(const GraphSPNModel& model, const QueryMask& q, std::uint64_t rng_seed,
                          int n_perms = 0);

// Per-epoch training data for circuit fitting, matching the variant.
std::vector<TrainingExample> training_view(const GraphSPNModel& model,
                                           std::span<const GraphTensor> dataset,
                                           std::uint64_t epoch_seed);

// Draws one graph. Evidence (over the m(m+1) slot variables) is honored for
// none / sort / exact / rand; kary rejects evidence.
GraphTensor sample_graph(const GraphSPNModel& model, std::uint64_t rng_seed,
                         const std::optional<QueryMask>& evidence = std::nullopt);

// Reusable sampler for many draws under the same evidence.
class GraphSampler {
 public:
  GraphSampler(const GraphSPNModel& model, std::optional<QueryMask> evidence,
               std::uint64_t perm_seed = 0);
  GraphTensor draw(std::uint64_t rng_seed) const;

 private:
  const GraphSPNModel* model_;
  bool has_evidence_;
  std::vector<Permutation> perms_;       // conditional Janossy mixture components
  Eigen::VectorXd perm_log_weights_;     // their evidence masses
  std::vector<Sampler> samplers_;        // one per component (or one)
};

// Makes a raw circuit draw a valid graph: mirrors the lower triangle onto the
// upper, clears the diagonal and every edge touching a virtual node.
Assignment sanitize(Assignment a, const Representation& rep);

}  // namespace gspn
