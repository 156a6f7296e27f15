#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "skelcap/pipeline.hpp"

using namespace skelcap;

namespace {

using Prefix = std::vector<int>;

auto toy_step(const oracle::ToyLanguage& lang) {
  return [&lang](const Prefix& prefix, int prev) {
    Prefix next = prefix;
    if (prev != Vocabulary::kBos) next.push_back(prev);
    return std::make_pair(next, lang.logprobs(next));
  };
}

std::size_t non_eos(const std::vector<int>& t) {
  return static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](int w) { return w != Vocabulary::kEos; }));
}

}  // namespace

TEST(ScoreAdjust, Examples) {
  EXPECT_DOUBLE_EQ(score_adjust(-5.0, 3, 1.5), -0.5);
  EXPECT_DOUBLE_EQ(score_adjust(-3.25, 7, 0.0), -3.25);
  EXPECT_DOUBLE_EQ(score_adjust(-2.0, 0, 10.0), -2.0);
}

TEST(BeamConfig, Validation) {
  EXPECT_THROW((BeamConfig{0, 0.0, 5}.validate()), std::invalid_argument);
  EXPECT_THROW((BeamConfig{1, 0.0, 0}.validate()), std::invalid_argument);
  oracle::ToyLanguage lang;
  EXPECT_THROW(beam_search(toy_step(lang), Prefix{}, BeamConfig{0, 0.0, 4}), std::invalid_argument);
}

TEST(BeamSearch, BeamOfOneIsGreedy) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    oracle::ToyLanguage lang{5, seed};
    auto beam = beam_search(toy_step(lang), Prefix{}, BeamConfig{1, 0.0, 6});
    auto greedy = greedy_decode(toy_step(lang), Prefix{}, 6);
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].tokens, greedy.tokens) << seed;
    EXPECT_DOUBLE_EQ(beam[0].raw, greedy.raw);
  }
}

TEST(BeamSearch, FullWidthFindsExhaustiveArgmax) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    oracle::ToyLanguage lang{5, seed};
    auto all = oracle::enumerate(lang, 5);
    for (double gamma : {-2.0, -0.5, 0.0, 0.7, 2.0}) {
      auto best = all[oracle::argmax(all, gamma)];
      auto got = beam_search(toy_step(lang), Prefix{}, BeamConfig{all.size(), gamma, 5});
      EXPECT_EQ(got.front().tokens, best.tokens) << seed << " " << gamma;
    }
  }
}

TEST(BeamSearch, LengthGrowsWithGammaUnderExhaustiveSearch) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    oracle::ToyLanguage lang{4, seed};
    auto all = oracle::enumerate(lang, 6);
    std::size_t last = 0;
    for (int k = -20; k <= 20; ++k) {
      double gamma = k / 10.0;
      auto top = beam_search(toy_step(lang), Prefix{}, BeamConfig{all.size(), gamma, 6}).front();
      std::size_t len = non_eos(top.tokens);
      EXPECT_GE(len, last) << seed << " " << gamma;
      last = len;
    }
  }
}

TEST(BeamSearch, EosExemptionAndRescoring) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    oracle::ToyLanguage lang{5, seed};
    for (double gamma : {-1.0, 0.0, 1.5}) {
      auto hyps = beam_search(toy_step(lang), Prefix{}, BeamConfig{3, gamma, 6});
      ASSERT_FALSE(hyps.empty());
      EXPECT_LE(hyps.size(), 3u);
      for (std::size_t i = 0; i < hyps.size(); ++i) {
        const auto& h = hyps[i];
        EXPECT_TRUE(h.finished);
        EXPECT_TRUE(h.ended_by_eos(Vocabulary::kEos) || h.tokens.size() == 6);
        EXPECT_EQ(h.adjusted, score_adjust(h.raw, non_eos(h.tokens), gamma));
        EXPECT_NEAR(h.adjusted - h.raw, gamma * static_cast<double>(non_eos(h.tokens)), 1e-12);
        double raw = 0;
        Prefix p;
        for (int t : h.tokens) {
          raw += lang.logprobs(p)[static_cast<std::size_t>(t)];
          p.push_back(t);
        }
        EXPECT_NEAR(raw, h.raw, 1e-5);
        EXPECT_EQ(std::count(h.tokens.begin(), h.tokens.end(), Vocabulary::kBos), 0);
        if (i) EXPECT_FALSE(hypothesis_before(hyps[i], hyps[i - 1]));
      }
    }
  }
}

TEST(BeamSearch, TiesPreferShorterThenLexicographic) {
  // two equally likely words; after two words only EOS remains, so every
  // sentence ends with EOS and same-length sentences tie (scores exact in binary)
  const double ninf = -std::numeric_limits<double>::infinity();
  auto step = [ninf](const Prefix& p, int prev) {
    Prefix n = p;
    if (prev != Vocabulary::kBos) n.push_back(prev);
    if (n.size() == 2) return std::make_pair(n, std::vector<double>{ninf, -1.0, ninf, ninf});
    return std::make_pair(n, std::vector<double>{ninf, -1.0, -2.0, -2.0});
  };
  // gamma = 2 gives every sentence the score -1; the shortest wins
  auto hyps = beam_search(step, Prefix{}, BeamConfig{16, 2.0, 4});
  EXPECT_EQ(hyps.front().tokens, (std::vector<int>{Vocabulary::kEos}));
  auto longer = beam_search(step, Prefix{}, BeamConfig{16, 5.0, 4});
  EXPECT_EQ(longer.front().tokens, (std::vector<int>{2, 2, Vocabulary::kEos}));
}

namespace {

struct TinyModels {
  Vocabulary skel_vocab = Vocabulary::build_skeleton(
      {decompose(parse_bracketed("(S (NP (DT a) (JJ red) (NN dog)) (PP (IN near) (NP (DT a) (NN cat))))"))}, 1);
  Vocabulary attr_vocab = Vocabulary::build_attribute(
      {decompose(parse_bracketed("(S (NP (DT a) (JJ red) (NN dog)) (PP (IN near) (NP (DT a) (NN cat))))"))}, 1);
  SkelNet skel;
  AttrNet attr;

  static SkelConfig skel_config(std::size_t q) {
    SkelConfig c;
    c.vocab_size = q;
    c.grid = 2;
    c.feature_dim = 4;
    c.embed = 3;
    c.hidden = 5;
    c.attention_width = 4;
    return c;
  }
  static AttrConfig attr_config(std::size_t q) {
    AttrConfig c;
    c.vocab_size = q;
    c.feature_dim = 4;
    c.skel_embed = 3;
    c.skel_hidden = 5;
    c.fuse_width = 4;
    c.embed = 3;
    c.hidden = 4;
    return c;
  }
  TinyModels() : skel(skel_config(skel_vocab.size()), 1), attr(attr_config(attr_vocab.size()), 2) {}
};

FeatureGrid grid2x2() {
  FeatureGrid g(2, 4);
  for (std::size_t i = 0; i < g.values().size(); ++i) g.values()[i] = static_cast<float>(i % 5) * 0.3f - 0.5f;
  return g;
}

}  // namespace

TEST(Captioner, AttributeModelForcedToEosLeavesSkeleton) {
  TinyModels m;
  auto& out_w = m.attr.params().get("attr/out_w").value.values();
  std::fill(out_w.begin(), out_w.end(), 0.0f);
  m.attr.params().get("attr/out_b").value[Vocabulary::kEos] = 30.0f;
  // skeleton: "dog", cut at one token
  auto& sw = m.skel.params().get("skel/out_w").value.values();
  std::fill(sw.begin(), sw.end(), 0.0f);
  auto& sb = m.skel.params().get("skel/out_b").value;
  sb[static_cast<std::size_t>(m.skel_vocab.encode("dog"))] = 5.0f;
  sb[Vocabulary::kEos] = 4.0f;

  Captioner cap{m.skel, m.attr, m.skel_vocab, m.attr_vocab, {}};
  cap.config.skel = {2, 0.0, 1};
  auto grid = grid2x2();
  auto r = cap.caption(grid);
  EXPECT_EQ(r.skeleton, (std::vector<std::string>{"dog"}));
  EXPECT_EQ(r.caption, r.skeleton);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(r.trace[0].attributes_invoked);
  ASSERT_TRUE(r.trace[0].alpha_post.has_value());
  double s = 0;
  for (float a : *r.trace[0].alpha_post) s += a;
  EXPECT_NEAR(s, 1.0, 1e-6);

  auto again = cap.caption(grid);
  EXPECT_EQ(again.caption, r.caption);
  EXPECT_EQ(again.trace[0].alpha, r.trace[0].alpha);

  cap.config.attr.max_len = 0;
  auto cond = attr_conditioning(m.skel, m.attr.config(), grid, cap.decode_skeleton(grid).state.history, 0,
                                m.skel_vocab.encode("dog"));
  EXPECT_TRUE(cap.decode_attributes(cond).empty());
}

TEST(Captioner, EmptySkeletonIsFlagged) {
  TinyModels m;
  auto& sw = m.skel.params().get("skel/out_w").value.values();
  std::fill(sw.begin(), sw.end(), 0.0f);
  m.skel.params().get("skel/out_b").value[Vocabulary::kEos] = 30.0f;
  Captioner cap{m.skel, m.attr, m.skel_vocab, m.attr_vocab, {}};
  auto r = cap.caption(grid2x2());
  EXPECT_TRUE(r.empty_skeleton);
  EXPECT_TRUE(r.caption.empty());
  std::ostringstream out;
  write_trace(out, "img", r, 2);
  EXPECT_EQ(out.str(), "image img\nwarning empty-skeleton\nskeleton \ncaption \nend\n");
}

TEST(Captioner, ConditioningHonoursFlags) {
  TinyModels m;
  auto grid = grid2x2();
  std::vector<int> gold{m.skel_vocab.encode("dog"), m.skel_vocab.encode("near"), m.skel_vocab.encode("cat")};
  auto history = record_gold(m.skel, grid, gold);
  ASSERT_EQ(history.size(), 4u);

  auto cfg = m.attr.config();
  cfg.use_post_word_alpha = false;
  auto pre = attr_conditioning(m.skel, cfg, grid, history, 2, gold[2]);
  EXPECT_FALSE(pre.alpha_post.has_value());
  EXPECT_EQ(pre.alpha, history[2].alpha);
  EXPECT_EQ(pre.z, history[2].context);
  EXPECT_EQ(pre.h, history[2].after.h);

  cfg.use_post_word_alpha = true;
  cfg.hidden_source = HiddenSource::previous;
  auto post = attr_conditioning(m.skel, cfg, grid, history, 2, gold[2]);
  ASSERT_TRUE(post.alpha_post.has_value());
  EXPECT_EQ(post.alpha, *post.alpha_post);
  EXPECT_EQ(post.z, context_vector(grid, post.alpha));
  EXPECT_EQ(post.h, history[2].before.h);
  cfg.hidden_source = HiddenSource::final;
  EXPECT_EQ(attr_conditioning(m.skel, cfg, grid, history, 0, gold[0]).h, history.back().after.h);

  auto row = m.skel.params().get("skel/embed").value.row_span(static_cast<std::size_t>(gold[2]));
  EXPECT_TRUE(std::equal(row.begin(), row.end(), post.s.begin()));
  EXPECT_THROW(attr_conditioning(m.skel, cfg, grid, history, 9, gold[0]), std::out_of_range);
}

TEST(Trace, FormatsMaps) {
  CaptionResult r;
  r.skeleton = {"dog", "near"};
  r.attributes = {{"red"}, {}};
  r.caption = {"red", "dog", "near"};
  TokenTrace a;
  a.word = "dog";
  a.attributes_invoked = true;
  a.attributes = {"red"};
  a.alpha = {0.5f, 0.25f, 0.125f, 0.125f};
  a.alpha_post = std::vector<float>{1, 0, 0, 0};
  TokenTrace b;
  b.word = "near";
  b.alpha = {0.25f, 0.25f, 0.25f, 0.25f};
  b.post_fallback = true;
  r.trace = {a, b};
  std::ostringstream out;
  write_trace(out, "x", r, 2);
  EXPECT_EQ(out.str(),
            "image x\nskeleton dog near\ncaption red dog near\n"
            "token 0 dog attributes red\nalpha 0\n0.5000 0.2500\n0.1250 0.1250\n"
            "alpha_post 0\n1.0000 0.0000\n0.0000 0.0000\n"
            "token 1 near attributes (skipped)\nalpha 1\n0.2500 0.2500\n0.2500 0.2500\n"
            "alpha_post 1 fallback\nend\n");
}
