#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "gspn/data.hpp"
#include "gspn/error.hpp"

using namespace gspn;

namespace {

const Alphabet kAlphabet;

Dataset numbered(int count) {
  // Chains of growing length wrap around; provenance lines are unique.
  std::vector<std::string> lines;
  for (int i = 0; i < count; ++i) lines.push_back(std::string(1 + i % 5, 'C'));
  return load_lines(lines, 5, kAlphabet, 3);
}

}  // namespace

TEST(LoadCorpus, SmallFile) {
  LoadReport rep;
  const Dataset ds = load_lines({"CCO", "C#N"}, 4, kAlphabet, 1, &rep);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(rep.accepted, 2);
  EXPECT_EQ(rep.rejected_total(), 0);
  EXPECT_EQ(ds.graphs[0].real_count(), 3);
  EXPECT_EQ(ds.graphs[1].real_count(), 2);
  EXPECT_EQ(ds.source_line, (std::vector<int>{1, 2}));
}

TEST(LoadCorpus, RejectionsByReason) {
  LoadReport rep;
  const Dataset ds = load_lines({"# header", "c1ccccc1", "CCS", "CCCCCC", "C(", "", "CO extra"}, 4, kAlphabet,
                                1, &rep);
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.source_line, (std::vector<int>{7}));
  EXPECT_EQ(rep.rejected.at("not_kekulized"), 1);
  EXPECT_EQ(rep.rejected.at("unsupported_atom"), 1);
  EXPECT_EQ(rep.rejected.at("too_many_atoms"), 1);
  EXPECT_EQ(rep.rejected.at("syntax_error"), 1);
  EXPECT_EQ(rep.accepted + rep.rejected_total(), rep.data_lines);
  EXPECT_NE(rep.to_text().find("rejected.not_kekulized 1"), std::string::npos);
  EXPECT_THROW(load_lines({"c1ccccc1"}, 4, kAlphabet, 1), DataError);
}

TEST(LoadCorpus, DeterministicAndPermuted) {
  const std::vector<std::string> lines(30, "CC(=O)N");
  const Dataset a = load_lines(lines, 6, kAlphabet, 9);
  const Dataset b = load_lines(lines, 6, kAlphabet, 9);
  EXPECT_EQ(a.graphs, b.graphs);
  std::set<std::vector<int>> orders;
  for (const auto& g : a.graphs) {
    orders.insert(g.node_cat);
    EXPECT_EQ(canonical_form(g), canonical_form(a.graphs[0]));
  }
  EXPECT_GT(orders.size(), 1u);
}

TEST(LoadCorpus, ReportCountsCoverBundledFile) {
  LoadReport rep;
  const Dataset ds = load_corpus(std::string(GSPN_DATA_DIR) + "/qm9_micro.smi", 9, kAlphabet, 0, &rep);
  EXPECT_EQ(static_cast<int>(ds.size()), rep.accepted);
  EXPECT_EQ(rep.accepted + rep.rejected_total(), rep.data_lines);
  EXPECT_GT(rep.accepted, 500);
  for (const auto& g : ds.graphs) EXPECT_EQ(g.m(), 9);
  EXPECT_THROW(load_corpus("/nonexistent/corpus.smi", 9, kAlphabet, 0), DataError);
}

TEST(Split, SizesAndDisjointness) {
  const Dataset ds = numbered(100);
  const Split s = split(ds, {0.8, 0.1, 0.1}, 4);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.valid.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::set<int> seen;
  for (const Dataset* part : {&s.train, &s.valid, &s.test}) {
    for (int line : part->source_line) EXPECT_TRUE(seen.insert(line).second);
  }
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(s.train.train_canon.size(), 5u);
  const Split again = split(ds, {0.8, 0.1, 0.1}, 4);
  EXPECT_EQ(again.train.source_line, s.train.source_line);
}

TEST(Split, WholeTrainAndBadFractions) {
  const Dataset ds = numbered(20);
  const Split s = split(ds, {1.0, 0.0, 0.0}, 4);
  EXPECT_EQ(std::multiset<int>(s.train.source_line.begin(), s.train.source_line.end()),
            std::multiset<int>(ds.source_line.begin(), ds.source_line.end()));
  EXPECT_TRUE(s.valid.graphs.empty());
  EXPECT_THROW(split(ds, {0.5, 0.2, 0.2}, 4), ConfigError);
  EXPECT_THROW(split(ds, {1.2, -0.1, -0.1}, 4), ConfigError);
}
