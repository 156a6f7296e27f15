#include "skelcap/modelcheck.hpp"

#include <random>

#include "skelcap/attrnet.hpp"
#include "skelcap/skelnet.hpp"

namespace skelcap {

namespace {

FeatureGrid random_grid(std::size_t side, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(side * side * dim);
  for (auto& x : v) x = n(rng);
  return FeatureGrid(side, dim, std::move(v));
}

nn::GradCheckReport check_skel(bool attention, std::uint64_t seed, const nn::GradCheckOptions& options) {
  SkelConfig c;
  c.vocab_size = 7;
  c.grid = 2;
  c.feature_dim = 8;
  c.embed = 6;
  c.hidden = 16;
  c.attention_width = 10;
  c.attention = attention;
  BasicSkelNet<double> net(c, seed);
  std::mt19937_64 rng(seed + 1);
  FeatureGrid a = random_grid(2, 8, rng), b = random_grid(2, 8, rng);
  std::vector<const FeatureGrid*> grids{&a, &b};
  std::vector<std::vector<int>> gold{{3, 4, 6}, {5}};
  auto loss = [&](nn::BasicGraph<double>& g) {
    auto bound = net.bind(g);
    return net.teacher_forced(g, bound, grids, gold).loss;
  };
  return nn::grad_check<double>(loss, net.params(), options);
}

nn::GradCheckReport check_attr(std::uint64_t seed, const nn::GradCheckOptions& options) {
  AttrConfig c;
  c.vocab_size = 6;
  c.feature_dim = 8;
  c.skel_embed = 6;
  c.skel_hidden = 16;
  c.fuse_width = 10;
  c.embed = 6;
  c.hidden = 12;
  BasicAttrNet<double> net(c, seed);
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> n(0.0, 1.0);
  auto random = [&](std::size_t rows, std::size_t cols) {
    auto t = nn::BasicTensor<double>::matrix(rows, cols);
    for (auto& x : t.values()) x = n(rng);
    return t;
  };
  auto z = random(3, 8), s = random(3, 6), h = random(3, 16);
  std::vector<std::vector<int>> gold{{3, 4}, {}, {5}};
  auto loss = [&](nn::BasicGraph<double>& g) {
    auto bound = net.bind(g);
    return net.teacher_forced(g, bound, g.constant(z), g.constant(s), g.constant(h), gold).loss;
  };
  return nn::grad_check<double>(loss, net.params(), options);
}

}  // namespace

ModelGradChecks check_model_gradients(std::uint64_t seed, const nn::GradCheckOptions& options) {
  ModelGradChecks r;
  r.skel = check_skel(true, seed, options);
  r.skel_no_attention = check_skel(false, seed, options);
  r.attr = check_attr(seed, options);
  return r;
}

}  // namespace skelcap
