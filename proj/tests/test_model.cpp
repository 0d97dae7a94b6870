#include <gtest/gtest.h>

#include <sstream>

#include "gspn/error.hpp"
#include "gspn/model.hpp"
#include "support.hpp"

using namespace gspn;

namespace {

GraphSPNModel small_model(Variant v, std::uint64_t seed = 3) {
  Rng rng(seed);
  GraphSPNModel m = make_model(Representation{4, 3, 2}, v, StructureConfig{2, 3, 3, 2, seed}, 2, 5,
                               {"C", "N", "O"}, {"single", "double"});
  test::randomize(m.circuit, rng);
  return m;
}

}  // namespace

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::none, Variant::exact, Variant::sort, Variant::kary, Variant::rand}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("sorted"), ConfigError);
}

TEST(MakeModel, ScopeFollowsVariant) {
  EXPECT_EQ(small_model(Variant::sort).circuit.var_count(), 20u);
  EXPECT_EQ(small_model(Variant::kary).circuit.var_count(), 6u);
  EXPECT_THROW(make_model(Representation{4, 3, 2}, Variant::kary, StructureConfig{1, 1, 1, 1, 0}, 5),
               ConfigError);
}

TEST(Serialize, ReloadEvaluatesBitIdentically) {
  Rng rng(4);
  for (Variant v : {Variant::sort, Variant::kary, Variant::rand}) {
    const GraphSPNModel m = small_model(v);
    const std::string text = serialize(m);
    const GraphSPNModel r = deserialize(text);
    EXPECT_EQ(r.variant, m.variant);
    EXPECT_EQ(r.k, m.k);
    EXPECT_EQ(r.N, m.N);
    EXPECT_EQ(r.rep, m.rep);
    EXPECT_EQ(r.structure, m.structure);
    EXPECT_EQ(r.node_names, m.node_names);
    EXPECT_EQ(r.circuit.parameters(), m.circuit.parameters());
    EXPECT_EQ(serialize(r), text);
    for (int t = 0; t < 10; ++t) {
      Assignment a;
      for (int k : m.circuit.spec().category_sizes) a.push_back(static_cast<int>(rng.below(k)));
      EXPECT_EQ(log_density(r.circuit, a), log_density(m.circuit, a));
    }
  }
}

TEST(Serialize, RejectsOtherVersions) {
  std::string text = serialize(small_model(Variant::sort));
  text.replace(0, 6, "GSPN 7");
  try {
    deserialize(text);
    FAIL() << "expected VersionError";
  } catch (const VersionError& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

TEST(Serialize, RejectsTruncationAndGarbage) {
  const std::string text = serialize(small_model(Variant::sort));
  for (std::size_t cut : {std::size_t{3}, text.size() / 3, text.size() / 2, text.size() - 5}) {
    EXPECT_THROW(deserialize(text.substr(0, cut)), FormatError) << cut;
  }
  EXPECT_THROW(deserialize(std::string("hello world")), FormatError);
}

TEST(Serialize, RejectsUnnormalizableWeights) {
  std::string text = serialize(small_model(Variant::sort));
  // Poison the first number of the last sum layer.
  const auto pos = text.rfind("sum ");
  ASSERT_NE(pos, std::string::npos);
  const auto line_end = text.find('\n', pos);
  const auto num_end = text.find_first_of(" \n", line_end + 1);
  text.replace(line_end + 1, num_end - line_end - 1, "nan");
  EXPECT_THROW(deserialize(text), FormatError);
}

TEST(Serialize, FileRoundTrip) {
  const GraphSPNModel m = small_model(Variant::none);
  const std::string path = ::testing::TempDir() + "/model.gspn";
  save_model(m, path);
  EXPECT_EQ(serialize(load_model(path)), serialize(m));
  EXPECT_THROW(load_model(path + ".missing"), Error);
}

TEST(Serialize, BareCircuitRoundTrip) {
  Rng rng(8);
  const Circuit c = test::random_circuit(rng);
  std::ostringstream os;
  serialize_circuit(c, os);
  std::istringstream is(os.str());
  const Circuit back = deserialize_circuit(is);
  EXPECT_EQ(back.parameters(), c.parameters());
  std::istringstream wrong(serialize(small_model(Variant::sort)));
  EXPECT_THROW(deserialize_circuit(wrong), FormatError);
  EXPECT_THROW(load_circuit("/nonexistent.gspc"), DataError);
}

TEST(Serialize, BundledCircuitLoads) {
  const Circuit c = load_circuit(std::string(GSPN_DATA_DIR) + "/tiny3.gspc");
  EXPECT_EQ(c.var_count(), 3u);
  EXPECT_TRUE(validate_structure(c).ok());
}
