#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "skelcap/decompose.hpp"
#include "skelcap/treebank.hpp"
#include "random_trees.hpp"

using namespace skelcap;
using Words = std::vector<std::string>;

TEST(Decompose, CompoundNoun) {
  auto d = decompose(parse_bracketed("(NP (NN coffee) (NN cup))"));
  ASSERT_EQ(d.skeleton.size(), 1u);
  EXPECT_EQ(d.skeleton[0].surface, "cup");
  EXPECT_TRUE(d.skeleton[0].is_np_head);
  EXPECT_EQ(d.skeleton[0].attributes, Words{"coffee"});
}

TEST(Decompose, SentenceWithPrepositionalPhrase) {
  auto d = decompose(parse_bracketed("(S (NP (DT a) (NN man)) (PP (IN in) (NP (DT a) (JJ red) (NN hat))))"));
  EXPECT_EQ(d.skeleton_words(), (Words{"man", "in", "hat"}));
  EXPECT_EQ(d.skeleton[0].attributes, Words{"a"});
  EXPECT_TRUE(d.skeleton[1].attributes.empty());
  EXPECT_FALSE(d.skeleton[1].is_np_head);
  EXPECT_EQ(d.skeleton[2].attributes, (Words{"a", "red"}));
  EXPECT_EQ(d.original_length, 6u);
}

TEST(Decompose, SingleWordNp) {
  auto d = decompose(parse_bracketed("(NP (NN man))"));
  ASSERT_EQ(d.skeleton.size(), 1u);
  EXPECT_TRUE(d.skeleton[0].is_np_head);
  EXPECT_TRUE(d.skeleton[0].attributes.empty());
}

TEST(Decompose, OnlyLowestNpsContribute) {
  // the outer NP is not lowest; "of" stays in the skeleton
  auto d = decompose(parse_bracketed("(NP (NP (DT a) (NN cup)) (PP (IN of) (NP (JJ hot) (NN tea))))"));
  EXPECT_EQ(d.skeleton_words(), (Words{"cup", "of", "tea"}));
  EXPECT_EQ(d.skeleton[2].attributes, Words{"hot"});
}

TEST(Fuse, Examples) {
  DecomposedCaption d;
  d.skeleton = {{"cup", true, {"coffee"}}};
  EXPECT_EQ(fuse(d), (Words{"coffee", "cup"}));

  d.skeleton = {{"man", true, {"a"}}, {"in", false, {}}, {"hat", true, {"a", "red"}}};
  EXPECT_EQ(fuse(d), (Words{"a", "man", "in", "a", "red", "hat"}));

  d.skeleton = {{"dogs", true, {}}, {"run", false, {}}};
  EXPECT_EQ(fuse(d), (Words{"dogs", "run"}));
}

TEST(FusePredicted, Examples) {
  EXPECT_EQ(fuse_predicted({"man", "in", "hat", "riding", "horse"}, {{}, {}, {"red"}, {}, {}}),
            (Words{"man", "in", "red", "hat", "riding", "horse"}));
  EXPECT_TRUE(fuse_predicted({}, {}).empty());
  EXPECT_THROW(fuse_predicted({"dog"}, {{"a"}, {"big"}}), std::invalid_argument);
}

TEST(DecompositionDump, FormatAndReparse) {
  auto d = decompose(parse_bracketed("(S (NP (DT a) (NN man)) (PP (IN in) (NP (DT a) (JJ red) (NN hat))))"));
  auto line = format_decomposition(d);
  EXPECT_EQ(line, "man{a} in hat{a red}");
  auto back = parse_decomposition(line);
  EXPECT_EQ(format_decomposition(back), line);
  EXPECT_EQ(fuse(back), fuse(d));
  EXPECT_THROW(parse_decomposition("man{a"), std::invalid_argument);
  EXPECT_THROW(parse_decomposition("man{}"), std::invalid_argument);
}

namespace {

// Leaf-index spans [begin, end) of the given nodes.
void spans(const ParseNode& n, const std::vector<const ParseNode*>& of, std::size_t& pos,
           std::vector<std::pair<std::size_t, std::size_t>>& out) {
  std::size_t begin = pos;
  if (n.is_leaf()) ++pos;
  for (const auto& c : n.children()) spans(c, of, pos, out);
  for (const auto* p : of)
    if (p == &n) out.emplace_back(begin, pos);
}

}  // namespace

TEST(DecomposeProperty, RoundtripAndInvariantsOnRandomTrees) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    ParseTree t(testing_trees::random_node(rng, 0), "");
    auto d = decompose(t);
    ASSERT_EQ(fuse(d), leaves(t)) << serialize(t);

    std::size_t total = d.skeleton.size();
    for (const auto& tok : d.skeleton) {
      total += tok.attributes.size();
      if (!tok.attributes.empty()) EXPECT_TRUE(tok.is_np_head);
      EXPECT_EQ(tok.surface.find(' '), std::string::npos);
    }
    EXPECT_EQ(total, d.original_length);

    // no non-final word of a lowest NP reaches the skeleton
    std::vector<std::size_t> kept;
    std::size_t at = 0;
    for (const auto& tok : d.skeleton) {
      at += tok.attributes.size();
      kept.push_back(at++);
    }
    std::vector<std::pair<std::size_t, std::size_t>> nps;
    std::size_t pos = 0;
    spans(t.root(), lowest_nps(t), pos, nps);
    for (auto [b, e] : nps)
      for (std::size_t k : kept) EXPECT_FALSE(k >= b && k + 1 < e);

    EXPECT_EQ(decompose(parse_bracketed(serialize(t))), d);
    // the dump keeps words and attributes; head flags survive only where attributes exist
    auto back = parse_decomposition(format_decomposition(d));
    EXPECT_EQ(format_decomposition(back), format_decomposition(d));
    EXPECT_EQ(fuse(back), fuse(d));
  }
}
