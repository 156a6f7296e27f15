#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <filesystem>
#include <random>

#include "skelcap/checkpoint.hpp"
#include "skelcap/gradcheck.hpp"
#include "skelcap/graph.hpp"
#include "skelcap/params.hpp"
#include "skelcap/tensor.hpp"

using namespace skelcap::nn;

namespace {

Tensor filled(std::size_t r, std::size_t c, std::vector<float> v) { return Tensor({r, c}, std::move(v)); }

BasicTensor<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.7);
  BasicTensor<double> t({r, c});
  for (auto& x : t.values()) x = n(rng);
  return t;
}

}  // namespace

TEST(Ops, SoftmaxOfConstantsIsUniform) {
  Graph g(false);
  auto p = g.softmax(g.constant(filled(1, 3, {0, 0, 0})));
  for (float x : g.value(p).values()) EXPECT_NEAR(x, 1.0f / 3.0f, 1e-7);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n(0.0f, 5.0f);
  Graph g(false);
  Tensor x({7, 11});
  for (auto& v : x.values()) v = n(rng);
  auto p = g.value(g.softmax(g.constant(x)));
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0;
    for (float v : p.row_span(r)) {
      EXPECT_GE(v, 0.0f);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  auto q = g.value(g.softmax(g.constant(x), 0));
  for (std::size_t c = 0; c < 11; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < 7; ++r) s += q(r, c);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Ops, MatmulIdentity) {
  Graph g(false);
  auto x = filled(2, 3, {1, 2, 3, 4, 5, 6});
  auto y = g.matmul(g.constant(filled(2, 2, {1, 0, 0, 1})), g.constant(x));
  EXPECT_EQ(g.value(y), x);
}

TEST(Ops, CrossEntropyUniform) {
  Graph g(false);
  std::vector<int> target{0};
  auto l = g.cross_entropy(g.constant(filled(1, 2, {0, 0})), target);
  EXPECT_NEAR(g.value(l)[0], std::log(2.0), 1e-6);
}

TEST(Ops, ShapeErrorsNameBothShapes) {
  Graph g;
  auto a = g.constant(Tensor({2, 3}));
  auto b = g.constant(Tensor({2, 3}));
  try {
    g.matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    std::string m = e.what();
    EXPECT_NE(m.find("[2,3]"), std::string::npos) << m;
  }
  EXPECT_THROW(g.add(a, g.constant(Tensor({3, 2}))), ShapeError);
  EXPECT_THROW(g.backward(a), ShapeError);
  std::vector<int> bad{5, 0};
  EXPECT_THROW(g.cross_entropy(a, bad), std::out_of_range);
}

TEST(Ops, NonFiniteTrips) {
  Graph g;
  EXPECT_THROW(g.scale(g.constant(filled(1, 1, {std::numeric_limits<float>::infinity()})), 1.0f),
               NonFiniteError);
  auto big = g.constant(filled(1, 1, {3e38f}));
  EXPECT_THROW(g.mul(big, big), NonFiniteError);
}

TEST(Backward, SumAndSquare) {
  std::mt19937_64 rng(1);
  ParameterStore store;
  auto& x = store.add("x", filled(1, 3, {1, 2, 3}));
  {
    Graph g;
    g.backward(g.sum(g.parameter(x)));
    for (float v : x.grad) EXPECT_EQ(v, 1.0f);
  }
  auto& y = store.add("y", filled(1, 1, {3}));
  Graph g;
  auto v = g.parameter(y);
  g.backward(g.mul(v, v));
  EXPECT_FLOAT_EQ(y.grad[0], 6.0f);
}

TEST(Backward, GradientsAccumulateAcrossGraphs) {
  ParameterStore store;
  auto& x = store.add("x", filled(1, 2, {1, 1}));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(g.sum(g.parameter(x)));
  }
  EXPECT_EQ(x.grad[0], 2.0f);
  store.zero_grad();
  EXPECT_EQ(x.grad[0], 0.0f);
}

TEST(GradCheck, ThreeLayerNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  BasicParameterStore<double> store;
  store.add("w1", random_matrix(5, 6, rng));
  store.add("b1", random_matrix(1, 6, rng));
  store.add("w2", random_matrix(6, 4, rng));
  store.add("w3", random_matrix(4, 3, rng));
  auto x = random_matrix(3, 5, rng);
  std::vector<int> targets{0, 2, 1};
  auto loss = [&](BasicGraph<double>& g) {
    auto h1 = g.tanh(g.affine(g.constant(x), g.parameter(store.get("w1")), g.parameter(store.get("b1"))));
    auto h2 = g.sigmoid(g.matmul(h1, g.parameter(store.get("w2"))));
    auto gate = g.mul(h2, g.softmax(h2));
    auto cat = g.concat({gate, g.slice_cols(h1, 0, 2)});
    auto logits = g.matmul(g.slice_cols(cat, 0, 4), g.parameter(store.get("w3")));
    return g.add(g.cross_entropy(logits, targets), g.mean(cat));
  };
  GradCheckOptions o;
  o.step = 1e-3;
  o.tolerance = 1e-4;
  auto r = grad_check<double>(loss, store, o);
  EXPECT_TRUE(r.passed) << r.worst_parameter << " " << r.max_rel_error;
  EXPECT_EQ(r.checked, store.element_count());
}

TEST(GradCheck, LinearMapIsExact) {
  std::mt19937_64 rng(2);
  BasicParameterStore<double> store;
  store.add("w", random_matrix(4, 3, rng));
  auto x = random_matrix(2, 4, rng);
  auto r = grad_check<double>(
      [&](BasicGraph<double>& g) { return g.sum(g.matmul(g.constant(x), g.parameter(store.get("w")))); }, store);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(GradCheck, PoolingAndGroupOps) {
  std::mt19937_64 rng(6);
  BasicParameterStore<double> store;
  store.add("v", random_matrix(6, 3, rng));   // B=2, K=3
  store.add("a", random_matrix(2, 3, rng));
  store.add("e", random_matrix(4, 3, rng));
  std::vector<int> idx{3, 0};
  auto loss = [&](BasicGraph<double>& g) {
    auto v = g.parameter(store.get("v"));
    auto alpha = g.softmax(g.parameter(store.get("a")));
    auto pooled = g.weighted_pool(alpha, v);
    auto rows = g.lookup(g.parameter(store.get("e")), idx);
    auto mixed = g.add_grouped(v, g.mul(pooled, rows), 3);
    return g.sum(g.tanh(g.add(g.group_mean(mixed, 3), g.reshape(g.sub(pooled, rows), 2, 3))));
  };
  auto r = grad_check<double>(loss, store);
  EXPECT_TRUE(r.passed) << r.worst_parameter << " " << r.max_rel_error;
}

TEST(Adagrad, FormulaExamples) {
  ParameterStore store;
  auto& w = store.add("w", filled(1, 2, {0, 0}));
  w.grad = {1, 0};
  adagrad_step(store, 0.1, 1e-8);
  EXPECT_NEAR(w.value[0], -0.1, 1e-6);
  EXPECT_EQ(w.value[1], 0.0f);
  w.grad = {1, 0};
  adagrad_step(store, 0.1, 1e-8);
  EXPECT_NEAR(w.value[0], -0.1 - 0.1 / std::sqrt(2.0), 1e-6);
  EXPECT_EQ(store.step(), 2u);
}

TEST(Adagrad, AccumulatorsNeverDecreaseAndMissingGradThrows) {
  std::mt19937_64 rng(3);
  ParameterStore store;
  auto& w = store.add("w", {3, 3}, Init::glorot, rng);
  std::normal_distribution<float> n;
  std::vector<float> prev(9, 0.0f);
  for (int s = 0; s < 5; ++s) {
    w.grad.assign(9, 0.0f);
    for (auto& g : w.grad) g = n(rng);
    adagrad_step(store, 0.05);
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_GE(w.accum[i], prev[i]);
      prev[i] = w.accum[i];
    }
  }
  store.add("fresh", filled(1, 1, {0}));
  store.clear_grad();
  EXPECT_THROW(adagrad_step(store, 0.1), std::logic_error);
}

TEST(Params, InitAndClipping) {
  std::mt19937_64 rng(8);
  ParameterStore store;
  auto& w = store.add("w", {10, 30}, Init::glorot, rng);
  const float r = std::sqrt(6.0f / 40.0f);
  for (float v : w.value.values()) EXPECT_LE(std::fabs(v), r);
  auto& b = store.add("b", {1, 8}, Init::forget_one, rng);
  EXPECT_EQ(b.value.values(), (std::vector<float>{0, 0, 1, 1, 0, 0, 0, 0}));
  w.grad.assign(300, 1.0f);
  b.grad.assign(8, 0.0f);
  double before = store.clip_grad_norm(5.0);
  EXPECT_NEAR(before, std::sqrt(300.0), 1e-4);
  EXPECT_NEAR(store.grad_norm(), 5.0, 1e-4);
}

TEST(Checkpoint, Roundtrip) {
  std::mt19937_64 rng(12);
  ParameterStore store;
  store.add("skel/a", {3, 4}, Init::glorot, rng);
  auto& b = store.add("skel/b", {1, 8}, Init::forget_one, rng);
  b.accum.assign(8, 0.25f);
  store.set_step(17);
  auto dir = (std::filesystem::path(::testing::TempDir()) / "ckpt").string();
  std::filesystem::remove_all(dir);
  CheckpointMeta meta{"skel", {{"skeleton", "abc123"}}, R"({"hidden":4})"};
  save_checkpoint(dir, store, meta);
  auto loaded = load_checkpoint(dir);
  EXPECT_EQ(loaded.store.step(), 17u);
  EXPECT_EQ(loaded.meta.kind, "skel");
  EXPECT_EQ(loaded.meta.vocab_hashes.at("skeleton"), "abc123");
  EXPECT_EQ(loaded.meta.config_json, meta.config_json);
  for (const auto* p : store.all()) {
    EXPECT_EQ(loaded.store.get(p->name).value, p->value) << p->name;
  }
  EXPECT_EQ(loaded.store.get("skel/b").accum, b.accum);
  EXPECT_THROW(load_checkpoint(dir + "-missing"), std::runtime_error);
}

TEST(Determinism, FixedBatchLossIsBitReproducible) {
  auto run = [] {
    std::mt19937_64 rng(21);
    ParameterStore store;
    store.add("w", {6, 4}, Init::glorot, rng);
    store.add("b", {1, 4}, Init::zeros, rng);
    Tensor x({5, 6});
    std::normal_distribution<float> n;
    for (auto& v : x.values()) v = n(rng);
    std::vector<int> t{0, 1, 2, 3, 1};
    std::vector<float> losses;
    for (int s = 0; s < 20; ++s) {
      Graph g;
      auto l = g.cross_entropy(g.affine(g.constant(x), g.parameter(store.get("w")), g.parameter(store.get("b"))), t);
      g.backward(l);
      losses.push_back(g.value(l)[0]);
      adagrad_step(store, 0.1);
      store.zero_grad();
    }
    return losses;
  };
  auto a = run(), b = run();
  EXPECT_EQ(a, b);
  EXPECT_LT(a.back(), a.front());
}
