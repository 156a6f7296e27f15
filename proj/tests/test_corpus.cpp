#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "skelcap/corpus.hpp"
#include "skelcap/decompose.hpp"
#include "skelcap/features.hpp"
#include "skelcap/synth.hpp"

using namespace skelcap;
using Words = std::vector<std::string>;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Preprocess, Examples) {
  EXPECT_EQ(preprocess("A Man, riding."), (Words{"a", "man", "riding"}));
  EXPECT_EQ(preprocess("dog"), Words{"dog"});
  EXPECT_FALSE(preprocess("!!!").has_value());
  EXPECT_FALSE(preprocess("   ").has_value());
  EXPECT_EQ(preprocess("it's\tA  dog's-life"), (Words{"its", "a", "dogslife"}));
}

TEST(StripArticle, ExamplesAndIdempotence) {
  EXPECT_EQ(strip_article({"a", "man", "on", "a", "horse"}), (Words{"man", "on", "horse"}));
  EXPECT_TRUE(strip_article({"a"}).empty());
  EXPECT_EQ(strip_article({"cat"}), Words{"cat"});
  Words w{"a", "an", "the", "a", "A"};
  EXPECT_EQ(strip_article(strip_article(w)), strip_article(w));
  EXPECT_EQ(strip_article(w), (Words{"an", "the", "A"}));
}

TEST(Vocabulary, ThresholdMapsRareTokensToUnk) {
  std::vector<Words> corpus{{"a", "a", "a", "b"}, {"a", "a", "b"}};
  auto v = Vocabulary::build(corpus, 3);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.encode("b"), Vocabulary::kUnk);
  EXPECT_EQ(v.size(), 4u);

  auto all = Vocabulary::build(corpus, 1);
  EXPECT_TRUE(all.contains("a"));
  EXPECT_TRUE(all.contains("b"));
  EXPECT_EQ(all.size(), 5u);

  EXPECT_THROW(Vocabulary::build({}, 1), std::invalid_argument);
  EXPECT_THROW(Vocabulary::build(corpus, 0), std::invalid_argument);
}

TEST(Vocabulary, SpecialsAndBijection) {
  auto v = Vocabulary::build({{"dog", "cat", "dog", "red"}}, 1);
  EXPECT_EQ(v.encode(v.decode(Vocabulary::kBos)), Vocabulary::kBos);
  EXPECT_EQ(v.encode(v.decode(Vocabulary::kEos)), Vocabulary::kEos);
  EXPECT_EQ(v.encode(v.decode(Vocabulary::kUnk)), Vocabulary::kUnk);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.encode(v.decode(static_cast<int>(i))), static_cast<int>(i));
  for (const char* w : {"dog", "cat", "red"}) {
    EXPECT_EQ(v.decode(v.encode(w)), w);
    EXPECT_GE(v.count(w), v.threshold());
  }
  EXPECT_THROW(v.decode(static_cast<int>(v.size())), std::out_of_range);
}

TEST(Vocabulary, SaveLoadAndHash) {
  auto v = Vocabulary::build({{"dog", "cat", "dog"}}, 1);
  auto path = (fresh_dir("vocab") / "v.txt").string();
  v.save(path);
  auto back = Vocabulary::load(path);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.hash(), v.hash());
  EXPECT_NE(Vocabulary::build({{"dog", "cow"}}, 1).hash(), v.hash());
}

TEST(Vocabulary, SkeletonAndAttributeSplit) {
  std::vector<DecomposedCaption> caps;
  for (const char* t : {"(S (NP (DT a) (JJ red) (NN dog)) (PP (IN on) (NP (DT a) (NN mat))))",
                        "(NP (DT a) (NN dog))"})
    caps.push_back(decompose(parse_bracketed(t)));
  auto skel = Vocabulary::build_skeleton(caps, 1);
  auto attr = Vocabulary::build_attribute(caps, 1);
  EXPECT_TRUE(skel.contains("dog"));
  EXPECT_TRUE(skel.contains("on"));
  EXPECT_FALSE(skel.contains("red"));
  EXPECT_TRUE(attr.contains("red"));
  EXPECT_TRUE(attr.contains("a"));
  EXPECT_FALSE(attr.contains("dog"));
  EXPECT_TRUE(skel.is_nounlike(skel.encode("dog")));
  EXPECT_FALSE(skel.is_nounlike(skel.encode("on")));
  EXPECT_EQ(skel.np_head_count("dog"), 2u);
}

TEST(Features, FileRoundtrip) {
  FeatureGrid a(2, 3), b(2, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n;
  for (float& x : a.values()) x = n(rng);
  for (float& x : b.values()) x = n(rng);
  auto path = (fresh_dir("features") / "f.bin").string();
  write_features(path, {{"img-a", &a}, {"img-b", &b}});
  auto table = read_features(path);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.at("img-a"), a);
  EXPECT_EQ(table.at("img-b"), b);
  EXPECT_EQ(fs::file_size(path), 2 * (4 + 5 + 8 + 2 * 2 * 3 * 4));
}

TEST(Synth, NoiselessSingleObject) {
  SynthConfig c;
  c.noise = 0.0;
  Scene scene{{"dog", 1, 2, {"red"}}};
  std::mt19937_64 rng(1);
  auto grid = render(c, scene, rng);
  for (std::size_t i = 0; i < c.grid; ++i)
    for (std::size_t j = 0; j < c.grid; ++j) {
      bool any = false;
      for (float x : grid.at(i, j)) any = any || x != 0.0f;
      EXPECT_EQ(any, i == 1 && j == 2);
    }
  auto cell = grid.at(1, 2);
  EXPECT_EQ(cell[0], 1.0f);                                    // dog
  EXPECT_EQ(cell[c.objects.size() + 2], 1.0f);                  // red
  EXPECT_EQ(cell[c.objects.size() + c.attributes.size() + 1], 1.0f);           // row 1
  EXPECT_EQ(cell[c.objects.size() + c.attributes.size() + c.grid + 2], 1.0f);  // column 2

  auto [tokens, tree] = describe(c, scene);
  EXPECT_EQ(tokens, (Words{"a", "red", "dog"}));
  EXPECT_EQ(serialize(tree), "(NP (DT a) (JJ red) (NN dog))");
}

TEST(Synth, RelationFollowsGeometry) {
  SynthConfig c;
  SceneObject a{"dog", 0, 1, {}}, same_row{"cat", 0, 3, {}}, same_col{"cup", 2, 1, {}}, other{"car", 3, 0, {}};
  EXPECT_EQ(relation_between(c, a, same_row), "beside");
  EXPECT_EQ(relation_between(c, a, same_col), "above");
  EXPECT_EQ(relation_between(c, a, other), "near");
  auto [tokens, tree] = describe(c, {other, a});
  EXPECT_EQ(tokens, (Words{"a", "dog", "near", "a", "car"}));
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.dim = c.one_hot_width() - 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.objects.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.grid = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(SynthConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Synth, DeterministicFiles) {
  SynthConfig c;
  c.train_count = 50;
  c.test_count = 10;
  auto d1 = fresh_dir("synth1"), d2 = fresh_dir("synth2"), d3 = fresh_dir("synth3");
  write_synth_dataset(synth_generate(c, 7), d1.string());
  write_synth_dataset(synth_generate(c, 7), d2.string());
  write_synth_dataset(synth_generate(c, 8), d3.string());
  for (const char* f : {"captions.tsv", "trees.txt", "features.bin", "manifest.json"})
    EXPECT_EQ(read_all(d1 / f), read_all(d2 / f)) << f;
  EXPECT_NE(read_all(d1 / "features.bin"), read_all(d3 / "features.bin"));
  // samples are addressable independently of the split sizes
  EXPECT_EQ(synth_sample(c, 7, "train", 3).raw, synth_generate(c, 7).samples[3].raw);
}

TEST(Synth, GroundTruthMatchesDecomposition) {
  SynthConfig c;
  c.train_count = 2000;
  auto data = synth_generate(c, 3);
  std::map<std::size_t, std::size_t> sizes;
  for (const auto& s : data.samples) {
    ASSERT_GE(s.scene.size(), 1u);
    ASSERT_LE(s.scene.size(), 3u);
    ++sizes[s.scene.size()];
    auto d = decompose(s.tree);
    EXPECT_EQ(fuse(d), s.tokens);
    auto truth = ordered(s.scene);
    std::vector<const SkeletonToken*> heads;
    for (const auto& t : d.skeleton)
      if (t.is_np_head) heads.push_back(&t);
    ASSERT_EQ(heads.size(), truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) {
      EXPECT_EQ(heads[k]->surface, truth[k].word);
      Words expected{"a"};
      expected.insert(expected.end(), truth[k].attributes.begin(), truth[k].attributes.end());
      EXPECT_EQ(heads[k]->attributes, expected);
    }
    // distinct cells and classes
    for (std::size_t i = 0; i < s.scene.size(); ++i)
      for (std::size_t j = i + 1; j < s.scene.size(); ++j) {
        EXPECT_NE(s.scene[i].word, s.scene[j].word);
        EXPECT_FALSE(s.scene[i].row == s.scene[j].row && s.scene[i].col == s.scene[j].col);
      }
  }
  EXPECT_EQ(sizes.size(), 3u);
}

TEST(Synth, ClassBalance) {
  SynthConfig c;
  c.train_count = 10000;
  auto data = synth_generate(c, 11);
  std::map<std::string, double> counts;
  double total = 0;
  for (const auto& s : data.samples)
    for (const auto& o : s.scene) {
      counts[o.word] += 1;
      total += 1;
    }
  ASSERT_EQ(counts.size(), c.objects.size());
  double uniform = total / static_cast<double>(c.objects.size());
  for (const auto& [w, n] : counts) {
    EXPECT_GT(n, 0.8 * uniform) << w;
    EXPECT_LT(n, 1.2 * uniform) << w;
  }
}

TEST(Dataset, LoadsSynthManifest) {
  SynthConfig c;
  c.train_count = 30;
  c.val_count = 5;
  c.test_count = 5;
  auto dir = fresh_dir("dataset");
  auto manifest = write_synth_dataset(synth_generate(c, 2), dir.string());
  auto data = load_dataset(manifest);
  EXPECT_EQ(data.records.size(), 40u);
  EXPECT_EQ(data.split("train").size(), 30u);
  EXPECT_EQ(data.split("val").size(), 5u);
  EXPECT_EQ(data.manifest.seed.value(), 2u);
  for (const auto& r : data.records) {
    EXPECT_EQ(r.tokens, leaves(r.tree));
    EXPECT_EQ(r.decomposition, decompose(r.tree));
    EXPECT_EQ(data.features_of(r.image_id).side(), c.grid);
  }
  EXPECT_EQ(data.manifest.scenes.size(), 40u);
}

TEST(Dataset, MismatchedTreeIsDropped) {
  auto dir = fresh_dir("corpus");
  {
    std::ofstream caps(dir / "c.tsv"), trees(dir / "t.txt");
    caps << "img1\tA red dog.\nimg2\tA cat\nimg3\t!!!\n";
    trees << "(NP (DT a) (JJ red) (NN dog))\n(NP (DT a) (NN dog))\n(NP (NN x))\n";
  }
  auto load = load_corpus((dir / "c.tsv").string(), (dir / "t.txt").string());
  ASSERT_EQ(load.records.size(), 1u);
  EXPECT_EQ(load.records[0].image_id, "img1");
  EXPECT_EQ(load.dropped, 2u);
}
