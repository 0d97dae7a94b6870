#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gspn/error.hpp"
#include "gspn/invariance.hpp"
#include "gspn/oracle.hpp"
#include "support.hpp"

using namespace gspn;

namespace {

const Representation kRep{5, 3, 2};

GraphSPNModel model(Variant v, int k = 2, int N = 4, std::uint64_t seed = 1) {
  const int vars = v == Variant::kary ? k * (k + 1) : static_cast<int>(kRep.var_count());
  const int levels = vars >= 4 ? 3 : 2;
  GraphSPNModel m = make_model(kRep, v, StructureConfig{levels, 3, 3, 3, seed}, k, N);
  Rng rng(seed + 100);
  test::randomize(m.circuit, rng, 1.0);
  return m;
}

std::vector<Permutation> all_perms(int m) {
  std::vector<Permutation> out;
  Permutation p = identity_permutation(m);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace

TEST(Compact, RealSlotsFirstStable) {
  GraphTensor g;
  g.rep = kRep;
  g.node_cat = {3, 1, 3, 0, 2};
  g.edge_cat = Eigen::MatrixXi::Constant(5, 5, 2);
  g.edge_cat(1, 3) = g.edge_cat(3, 1) = 0;
  const GraphTensor c = compact(g);
  EXPECT_EQ(c.node_cat, (std::vector<int>{1, 0, 2, 3, 3}));
  EXPECT_EQ(c.edge_cat(0, 1), 0);
}

TEST(Invariance, SortIsExactlyInvariant) {
  Rng rng(2);
  const GraphSPNModel m = model(Variant::sort);
  for (int t = 0; t < 10; ++t) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const GraphTensor g = test::random_graph(kRep, n, rng);
    const double ref = logp_sort(m, g);
    for (const auto& p : all_perms(5)) EXPECT_EQ(logp_sort(m, permute(g, p)), ref);
  }
}

TEST(Invariance, ExactMatchesJanossyOracleAndIsInvariant) {
  Rng rng(3);
  const GraphSPNModel m = model(Variant::exact);
  for (int t = 0; t < 10; ++t) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const GraphTensor g = test::random_graph(kRep, n, rng);
    const double ref = logp_exact(m, g);
    const double brute = oracle::brute_janossy(m.circuit, g);
    EXPECT_NEAR(std::exp(ref) / brute, 1.0, 1e-12);
    for (const auto& p : all_perms(5)) EXPECT_NEAR(logp_exact(m, permute(g, p)), ref, 1e-9);
  }
}

TEST(Invariance, ExactWithOneNodeIsPlainDensityOfCompactForm) {
  Rng rng(4);
  const GraphSPNModel m = model(Variant::exact);
  const GraphTensor g = test::random_graph(kRep, 1, rng);
  EXPECT_NEAR(logp_exact(m, g), log_density(m.circuit, flatten(compact(g))), 1e-12);
}

TEST(Invariance, KaryMatchesOracleAndIsInvariant) {
  Rng rng(5);
  for (int k : {1, 2, 3}) {
    const GraphSPNModel m = model(Variant::kary, k);
    for (int t = 0; t < 6; ++t) {
      const int n = k + static_cast<int>(rng.below(5 - k));
      const GraphTensor g = test::random_graph(kRep, n, rng);
      const double ref = logp_kary(m, g);
      EXPECT_NEAR(std::exp(ref) / oracle::brute_kary(m.circuit, g, k), 1.0, 1e-12);
      for (const auto& p : all_perms(5)) EXPECT_NEAR(logp_kary(m, permute(g, p)), ref, 1e-9);
    }
  }
}

TEST(Invariance, KaryWithKOneAveragesSingleNodes) {
  Rng rng(6);
  const GraphSPNModel m = model(Variant::kary, 1);
  const GraphTensor g = test::random_graph(kRep, 4, rng);
  double sum = 0.0;
  for (int s : g.real_slots()) sum += std::exp(log_density(m.circuit, {g.node_cat[s], kRep.no_edge()}));
  EXPECT_NEAR(logp_kary(m, g), std::log(sum / 4.0), 1e-12);
}

TEST(Invariance, KaryNeedsEnoughNodes) {
  Rng rng(7);
  const GraphSPNModel m = model(Variant::kary, 3);
  EXPECT_THROW(logp_kary(m, test::random_graph(kRep, 2, rng)), FeasibilityError);
}

TEST(Invariance, RandWithAllOrderingsEqualsExact) {
  Rng rng(8);
  for (int n = 1; n <= 4; ++n) {
    GraphSPNModel r = model(Variant::rand, 2, static_cast<int>(factorial(n)));
    const GraphTensor g = test::random_graph(kRep, n, rng);
    EXPECT_NEAR(logp_rand(r, g, 17), logp_exact(r, g), 1e-9);
    r.N = static_cast<int>(factorial(n)) + 1;
    EXPECT_THROW(logp_rand(r, g, 17), FeasibilityError);
  }
}

TEST(Invariance, RandWithOneOrderingIsOnePermutedDensity) {
  Rng rng(9);
  const GraphSPNModel r = model(Variant::rand, 2, 1);
  const GraphTensor g = test::random_graph(kRep, 4, rng);
  Permutation p = sample_permutations(4, 1, 23).front();
  p.push_back(4);
  EXPECT_NEAR(logp_rand(r, g, 23), log_density(r.circuit, flatten(permute(compact(g), p))), 1e-12);
}

TEST(Invariance, RandSeedAverageApproachesJanossyMean) {
  // n = 3, N = 2: the seed average of exp(logp_rand) is the Janossy mean.
  const GraphSPNModel r = model(Variant::rand, 2, 2, 4);
  Rng rng(10);
  const GraphTensor g = test::random_graph(kRep, 3, rng);
  double acc = 0.0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) acc += std::exp(logp_rand(r, g, static_cast<std::uint64_t>(s)));
  const double brute = oracle::brute_janossy(r.circuit, g);
  EXPECT_NEAR(acc / seeds / brute, 1.0, 0.01);
}

TEST(Invariance, ExactGuardAboveEightNodes) {
  const Representation rep{9, 2, 1};
  GraphSPNModel m = make_model(rep, Variant::exact, StructureConfig{2, 1, 1, 1, 0});
  Rng rng(11);
  EXPECT_THROW(logp_exact(m, test::random_graph(rep, 9, rng)), FeasibilityError);
  std::vector<GraphTensor> data{test::random_graph(rep, 9, rng)};
  EXPECT_THROW(training_view(m, data, 0), FeasibilityError);
}

TEST(PassCounts, MatchVariantCost) {
  Rng rng(12);
  const int n = 4;
  const GraphTensor g = test::random_graph(kRep, n, rng);
  struct Case {
    GraphSPNModel m;
    std::uint64_t expected;
  };
  std::vector<Case> cases;
  cases.push_back({model(Variant::exact), factorial(n)});
  cases.push_back({model(Variant::sort), 1});
  cases.push_back({model(Variant::none), 1});
  cases.push_back({model(Variant::kary, 2), falling_factorial(n, 2)});
  cases.push_back({model(Variant::kary, 3), falling_factorial(n, 3)});
  cases.push_back({model(Variant::rand, 2, 7), 7});
  for (const auto& c : cases) {
    PassCounter::reset();
    logp(c.m, g, 5);
    EXPECT_EQ(PassCounter::value(), c.expected) << to_string(c.m.variant);
  }
}

TEST(TrainingView, MatchesVariant) {
  Rng rng(13);
  const GraphTensor g = test::random_graph(kRep, 4, rng);
  const Permutation p = test::random_permutation(5, rng);
  const std::vector<GraphTensor> a{g};
  const std::vector<GraphTensor> b{permute(g, p)};

  const GraphSPNModel s = model(Variant::sort);
  EXPECT_EQ(training_view(s, a, 0)[0].terms, training_view(s, b, 0)[0].terms);

  const GraphSPNModel e = model(Variant::exact);
  const auto ev = training_view(e, a, 0)[0].terms;
  EXPECT_EQ(ev.size(), 24u);
  EXPECT_LE(std::set<Assignment>(ev.begin(), ev.end()).size(), 24u);

  const GraphSPNModel r = model(Variant::rand);
  const auto r0 = training_view(r, a, 1)[0].terms;
  ASSERT_EQ(r0.size(), 1u);
  bool differs = false;
  for (std::uint64_t epoch = 2; epoch < 6; ++epoch) differs |= training_view(r, a, epoch)[0].terms != r0;
  EXPECT_TRUE(differs);
  EXPECT_EQ(training_view(r, a, 1)[0].terms, r0);

  const GraphSPNModel none = model(Variant::none);
  EXPECT_EQ(training_view(none, a, 0)[0].terms.front(), flatten(g));
}

TEST(TrainingView, KaryOverNineNodesHasSeventyTwoTerms) {
  const Representation rep;
  GraphSPNModel m = make_model(rep, Variant::kary, StructureConfig{2, 1, 1, 1, 0}, 2);
  Rng rng(14);
  const std::vector<GraphTensor> data{test::random_graph(rep, 9, rng)};
  const auto view = training_view(m, data, 0);
  EXPECT_EQ(view[0].terms.size(), 72u);
  EXPECT_EQ(view[0].terms[0].size(), 6u);
}

TEST(SampleGraph, ProducesValidTensors) {
  for (Variant v : {Variant::none, Variant::sort, Variant::exact, Variant::rand, Variant::kary}) {
    const GraphSPNModel m = model(v);
    for (std::uint64_t s = 0; s < 30; ++s) {
      const GraphTensor g = sample_graph(m, s);
      EXPECT_NO_THROW(check_graph(g)) << to_string(v);
    }
  }
}

TEST(SampleGraph, KaryAssemblesBlocks) {
  const Representation rep;
  GraphSPNModel m = make_model(rep, Variant::kary, StructureConfig{2, 2, 2, 2, 0}, 2);
  Rng rng(15);
  test::randomize(m.circuit, rng);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const GraphTensor g = sample_graph(m, s);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) {
        if (i / 2 != j / 2) {
          EXPECT_EQ(g.edge_cat(i, j), rep.no_edge());
        }
      }
    }
  }
  QueryMask q = QueryMask::all_marginalized(rep.var_count());
  EXPECT_THROW(sample_graph(m, 0, q), UnsupportedQueryError);
}

TEST(SampleGraph, EvidenceIsHonored) {
  Rng rng(16);
  for (Variant v : {Variant::none, Variant::sort, Variant::exact, Variant::rand}) {
    const GraphSPNModel m = model(v);
    const GraphTensor known = test::random_graph(kRep, 3, rng, true);
    QueryMask q = QueryMask::all_marginalized(kRep.var_count());
    for (int a = 0; a < 2; ++a) {
      q[node_var(5, a)] = VariableState::observed(known.node_cat[a]);
      for (int b = 0; b < 2; ++b) q[edge_var(5, a, b)] = VariableState::observed(known.edge_cat(a, b));
    }
    const GraphSampler sampler(m, q, 3);
    for (std::uint64_t s = 0; s < 40; ++s) {
      const GraphTensor g = sampler.draw(s);
      check_graph(g);
      for (int a = 0; a < 2; ++a) {
        EXPECT_EQ(g.node_cat[a], known.node_cat[a]) << to_string(v);
        for (int b = 0; b < 2; ++b) EXPECT_EQ(g.edge_cat(a, b), known.edge_cat(a, b));
      }
    }
  }
}

TEST(Sanitize, MirrorsLowerTriangle) {
  const Representation rep{3, 2, 2};
  Assignment a(rep.var_count(), 0);
  a[node_var(3, 2)] = rep.virtual_node();
  a[edge_var(3, 1, 0)] = 1;
  a[edge_var(3, 0, 1)] = 0;
  const GraphTensor g = unflatten(sanitize(a, rep), rep);
  EXPECT_EQ(g.edge_cat(0, 1), 1);
  EXPECT_EQ(g.edge_cat(0, 0), rep.no_edge());
  EXPECT_EQ(g.edge_cat(0, 2), rep.no_edge());
  EXPECT_NO_THROW(check_graph(g));
}
