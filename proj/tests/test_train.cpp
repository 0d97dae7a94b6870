#include <gtest/gtest.h>

#include "gspn/error.hpp"
#include "gspn/train.hpp"
#include "support.hpp"

using namespace gspn;

namespace {

// Data from a random "teacher" circuit.
std::vector<Assignment> teacher_data(const VariableSpec& spec, int n, std::uint64_t seed) {
  Rng rng(seed);
  Circuit teacher = build_circuit(spec, StructureConfig{2, 3, 3, 2, seed});
  test::randomize(teacher, rng, 2.5);
  const Sampler s(teacher, QueryMask::all_marginalized(spec.var_count()));
  std::vector<Assignment> out;
  for (int i = 0; i < n; ++i) out.push_back(s.draw(rng));
  return out;
}

}  // namespace

TEST(Fit, LowersNegativeLogLikelihood) {
  const VariableSpec spec{{3, 3, 2, 4}};
  const auto data = teacher_data(spec, 600, 1);
  Circuit c = build_circuit(spec, StructureConfig{2, 4, 4, 3, 2});
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 64;
  const FitReport r = fit(c, data, cfg);
  ASSERT_EQ(r.epoch_nll.size(), 15u);
  EXPECT_LT(r.epoch_nll.back(), r.epoch_nll.front());
  EXPECT_TRUE(validate_structure(c).ok());
}

TEST(Fit, DeterministicAndThreadCountIndependent) {
  const VariableSpec spec{{2, 3, 2}};
  const auto data = teacher_data(spec, 300, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 50;
  cfg.shuffle_seed = 9;
  Circuit a = build_circuit(spec, StructureConfig{2, 3, 3, 2, 4});
  Circuit b = a;
  Circuit d = a;
  fit(a, data, cfg);
  fit(b, data, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
  cfg.threads = 3;
  fit(d, data, cfg);
  // Thread slices change the summation grouping only.
  EXPECT_TRUE(a.parameters().isApprox(d.parameters(), 1e-9));
  Circuit e = build_circuit(spec, StructureConfig{2, 3, 3, 2, 4});
  fit(e, data, cfg);
  EXPECT_EQ(d.parameters(), e.parameters());
}

TEST(Fit, CompositeTermsAverageInsideTheLog) {
  const VariableSpec spec{{2, 2}};
  Circuit c = build_circuit(spec, StructureConfig{2, 2, 2, 1, 0});
  std::vector<TrainingExample> ex{{{{0, 1}, {1, 0}}}, {{{1, 1}}}};
  const double expected =
      0.5 * (std::log(0.5 * (std::exp(log_density(c, {0, 1})) + std::exp(log_density(c, {1, 0})))) +
             log_density(c, {1, 1}));
  EXPECT_NEAR(mean_log_likelihood(c, ex), expected, 1e-12);
}

TEST(Fit, RejectsEmptyDataAndBadSettings) {
  Circuit c = build_circuit(VariableSpec{{2, 2}}, StructureConfig{2, 1, 1, 1, 0});
  EXPECT_THROW(fit(c, std::vector<Assignment>{}, TrainConfig{}), TrainingError);
  TrainConfig bad;
  bad.beta2 = 1.0;
  EXPECT_THROW(fit(c, std::vector<Assignment>{{0, 0}}, bad), TrainingError);
}

TEST(Fit, NonFiniteLossIsReported) {
  Circuit c = build_circuit(VariableSpec{{2, 2}}, StructureConfig{1, 1, 1, 1, 0});
  // A leaf with zero mass on category 1 makes {1, *} impossible.
  for (std::size_t l = 0; l < c.layers().size(); ++l) {
    if (std::holds_alternative<InputLayer>(c.layers()[l])) {
      auto& in = c.input_layer(l);
      in.logits[0](0, 1) = -std::numeric_limits<double>::infinity();
    }
  }
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    fit(c, std::vector<Assignment>{{0, 0}, {1, 0}}, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}
