#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "skelcap/treebank.hpp"

using namespace skelcap;

namespace {

std::string tmp_path(const std::string& name) { return ::testing::TempDir() + name; }

}  // namespace

TEST(Treebank, ParsesNestedTree) {
  auto t = parse_bracketed("(S (NP (DT a) (NN man)) (VP (VBG riding)))");
  EXPECT_EQ(t.root().label(), "S");
  ASSERT_EQ(t.root().children().size(), 2u);
  const auto& np = t.root().children()[0];
  EXPECT_EQ(np.label(), "NP");
  EXPECT_TRUE(np.children()[1].is_leaf());
  EXPECT_EQ(np.children()[1].token(), "man");
  EXPECT_EQ(leaves(t), (std::vector<std::string>{"a", "man", "riding"}));
}

TEST(Treebank, ToleratesIrregularWhitespace) {
  auto a = parse_bracketed("(NP(DT a)\t(NN  dog ))");
  auto b = parse_bracketed("(NP (DT a) (NN dog))");
  EXPECT_TRUE(a.same_structure(b));
}

TEST(Treebank, UnwrapsUnlabeledRoot) {
  auto t = parse_bracketed("( (NP (NN dog)) )");
  EXPECT_EQ(t.root().label(), "NP");
}

TEST(Treebank, SerializeRoundtrip) {
  const char* lines[] = {"(NP (NN coffee) (NN cup))",
                         "(S (NP (DT a) (NN man)) (PP (IN in) (NP (DT a) (JJ red) (NN hat))))",
                         "(ROOT (S (NP-SBJ (PRP it)) (VP (VBZ is))))"};
  for (const char* line : lines) {
    auto t = parse_bracketed(line);
    auto again = parse_bracketed(serialize(t));
    EXPECT_TRUE(t.same_structure(again)) << line;
    EXPECT_EQ(serialize(again), serialize(t));
  }
  EXPECT_EQ(serialize(parse_bracketed("(NP  (DT a)(NN dog))")), "(NP (DT a) (NN dog))");
}

TEST(Treebank, MalformedInputReportsOffset) {
  struct Case {
    const char* text;
    std::size_t offset;
  };
  const Case cases[] = {{"", 0}, {"(NP (DT a)", 10}, {"(NP (DT a)))", 11}, {"NP dog", 0}, {"(NP ())", 4}};
  for (const auto& c : cases) {
    try {
      parse_bracketed(c.text);
      ADD_FAILURE() << "accepted: " << c.text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.offset(), c.offset) << c.text << ": " << e.what();
    }
  }
  EXPECT_THROW(parse_bracketed("(NP (NN dog cat))"), ParseError);
  EXPECT_THROW(parse_bracketed("(NP dog (NN cat))"), ParseError);
  EXPECT_THROW(parse_bracketed("(NP)"), ParseError);
}

TEST(Treebank, LowestNps) {
  auto t = parse_bracketed("(S (NP (NP (DT a) (NN man)) (PP (IN in) (NP (NN hat)))) (VP (VBZ sits)))");
  auto nps = lowest_nps(t);
  ASSERT_EQ(nps.size(), 2u);
  EXPECT_EQ(leaves(*nps[0]), (std::vector<std::string>{"a", "man"}));
  EXPECT_EQ(leaves(*nps[1]), (std::vector<std::string>{"hat"}));
}

TEST(Treebank, FunctionalSuffixesCountAsNp) {
  auto t = parse_bracketed("(S (NP-SBJ (DT the) (NN dog)) (NP=2 (NN park)))");
  EXPECT_EQ(lowest_nps(t).size(), 2u);
  EXPECT_EQ(t.root().children()[0].base_label(), "NP");
  // NNP, NPS and friends are not noun phrases
  EXPECT_TRUE(lowest_nps(parse_bracketed("(S (NNP Rex) (NPX (NN dog)))")).empty());
}

TEST(Treebank, ReadTreeFileSkipsCommentsAndNamesLine) {
  auto path = tmp_path("trees_ok.txt");
  {
    std::ofstream f(path);
    f << "# comment\n(NP (NN dog))\n\n(NP (DT a) (NN cat))\n";
  }
  auto trees = read_tree_file(path);
  ASSERT_EQ(trees.size(), 2u);
  EXPECT_EQ(trees[0].line_number, 2u);
  EXPECT_EQ(trees[1].line_number, 4u);

  auto bad = tmp_path("trees_bad.txt");
  {
    std::ofstream f(bad);
    f << "(NP (NN dog))\n(NP (NN cat)\n";
  }
  try {
    read_tree_file(bad);
    ADD_FAILURE();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
  std::remove(bad.c_str());
  EXPECT_THROW(read_tree_file(tmp_path("missing_trees.txt")), std::runtime_error);
}
