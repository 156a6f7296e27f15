#include "skelcap/skelnet.hpp"

#include <algorithm>
#include <stdexcept>
#include <type_traits>

#include <json.hpp>

namespace skelcap {

using nn::Var;

void SkelConfig::validate() const {
  if (vocab_size < 4) throw std::invalid_argument("skel config: vocabulary too small");
  if (grid == 0 || feature_dim == 0) throw std::invalid_argument("skel config: empty feature grid");
  if (embed == 0 || hidden == 0 || attention_width == 0)
    throw std::invalid_argument("skel config: dimensions must be positive");
}

std::string SkelConfig::to_json() const {
  nlohmann::json j{{"vocab_size", vocab_size}, {"grid", grid},
                   {"feature_dim", feature_dim}, {"embed", embed},
                   {"hidden", hidden},         {"attention_width", attention_width},
                   {"attention", attention},   {"full_rerun_per_location", full_rerun_per_location}};
  return j.dump();
}

SkelConfig SkelConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  SkelConfig c;
  c.vocab_size = j.at("vocab_size");
  c.grid = j.at("grid");
  c.feature_dim = j.at("feature_dim");
  c.embed = j.at("embed");
  c.hidden = j.at("hidden");
  c.attention_width = j.at("attention_width");
  c.attention = j.at("attention");
  c.full_rerun_per_location = j.value("full_rerun_per_location", false);
  return c;
}

template <typename T>
BasicSkelNet<T>::BasicSkelNet(SkelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto Q = config_.vocab_size, D = config_.feature_dim, m = config_.embed,
             n = config_.hidden, A = config_.attention_width;
  using nn::Init;
  params_.add("skel/embed", {Q, m}, Init::glorot, rng);
  params_.add("skel/init_h_w", {D, n}, Init::glorot, rng);
  params_.add("skel/init_h_b", {1, n}, Init::zeros, rng);
  params_.add("skel/init_c_w", {D, n}, Init::glorot, rng);
  params_.add("skel/init_c_b", {1, n}, Init::zeros, rng);
  if (config_.attention) {
    params_.add("skel/att_u", {D, A}, Init::glorot, rng);
    params_.add("skel/att_v", {n, A}, Init::glorot, rng);
    params_.add("skel/att_b", {1, A}, Init::zeros, rng);
    params_.add("skel/att_w", {A, 1}, Init::glorot, rng);
  }
  params_.add("skel/lstm_w", {m + D + n, 4 * n}, Init::glorot, rng);
  params_.add("skel/lstm_b", {1, 4 * n}, Init::forget_one, rng);
  params_.add("skel/out_w", {n, Q}, Init::glorot, rng);
  params_.add("skel/out_b", {1, Q}, Init::zeros, rng);
}

template <typename T>
BasicSkelNet<T>::BasicSkelNet(SkelConfig config, Store params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto Q = config_.vocab_size, D = config_.feature_dim, m = config_.embed,
             n = config_.hidden, A = config_.attention_width;
  auto expect = [&](const char* name, nn::Shape shape) {
    if (!params_.contains(name)) throw std::invalid_argument(std::string("skel model: missing ") + name);
    if (params_.get(name).value.shape() != shape)
      throw nn::ShapeError(std::string("skel model: ") + name + " has shape " +
                           nn::shape_string(params_.get(name).value.shape()) + ", expected " +
                           nn::shape_string(shape));
  };
  expect("skel/embed", {Q, m});
  expect("skel/init_h_w", {D, n});
  expect("skel/init_h_b", {1, n});
  expect("skel/init_c_w", {D, n});
  expect("skel/init_c_b", {1, n});
  if (config_.attention) {
    expect("skel/att_u", {D, A});
    expect("skel/att_v", {n, A});
    expect("skel/att_b", {1, A});
    expect("skel/att_w", {A, 1});
  }
  expect("skel/lstm_w", {m + D + n, 4 * n});
  expect("skel/lstm_b", {1, 4 * n});
  expect("skel/out_w", {n, Q});
  expect("skel/out_b", {1, Q});
}

namespace {

template <typename G, typename S, typename B>
B bind_impl(G& g, S& params, bool attention, bool frozen) {
  auto p = [&](const char* name) {
    if (frozen) return g.frozen(params.get(name));
    if constexpr (std::is_const_v<S>) {
      return g.frozen(params.get(name));
    } else {
      return g.parameter(params.get(name));
    }
  };
  B b;
  b.embed = p("skel/embed");
  b.init_h_w = p("skel/init_h_w");
  b.init_h_b = p("skel/init_h_b");
  b.init_c_w = p("skel/init_c_w");
  b.init_c_b = p("skel/init_c_b");
  if (attention) {
    b.att_u = p("skel/att_u");
    b.att_v = p("skel/att_v");
    b.att_b = p("skel/att_b");
    b.att_w = p("skel/att_w");
  }
  b.lstm_w = p("skel/lstm_w");
  b.lstm_b = p("skel/lstm_b");
  b.out_w = p("skel/out_w");
  b.out_b = p("skel/out_b");
  return b;
}

template <typename T>
std::vector<T> to_vec(const nn::BasicTensor<T>& t) {
  return t.values();
}

}  // namespace

template <typename T>
typename BasicSkelNet<T>::Bound BasicSkelNet<T>::bind(Graph& g) {
  return bind_impl<Graph, Store, Bound>(g, params_, config_.attention, false);
}

template <typename T>
typename BasicSkelNet<T>::Bound BasicSkelNet<T>::bind(Graph& g) const {
  return bind_impl<Graph, const Store, Bound>(g, params_, config_.attention, true);
}

template <typename T>
void BasicSkelNet<T>::check_word(int w) const {
  if (w < 0 || static_cast<std::size_t>(w) >= config_.vocab_size)
    throw std::out_of_range("skeleton word index " + std::to_string(w) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
}

template <typename T>
typename BasicSkelNet<T>::Encoded BasicSkelNet<T>::encode(Graph& g, const Bound& b,
                                                          const std::vector<const FeatureGrid*>& grids) const {
  const std::size_t K = config_.locations(), D = config_.feature_dim;
  nn::BasicTensor<T> feats = nn::BasicTensor<T>::matrix(grids.size() * K, D);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& grid = *grids[i];
    if (grid.side() != config_.grid || grid.dim() != D)
      throw nn::ShapeError("skel model expects " + std::to_string(config_.grid) + "x" +
                           std::to_string(config_.grid) + "x" + std::to_string(D) +
                           " features, got " + std::to_string(grid.side()) + "x" +
                           std::to_string(grid.side()) + "x" + std::to_string(grid.dim()));
    for (std::size_t k = 0; k < K * D; ++k) feats[i * K * D + k] = static_cast<T>(grid.values()[k]);
  }
  Encoded e;
  e.batch = grids.size();
  e.features = g.constant(std::move(feats));
  e.mean = g.group_mean(e.features, K);
  if (config_.attention) e.keys = g.matmul(e.features, b.att_u);
  return e;
}

template <typename T>
std::pair<Var, Var> BasicSkelNet<T>::initial_state(Graph& g, const Bound& b, const Encoded& e) const {
  return {g.affine(e.mean, b.init_h_w, b.init_h_b), g.affine(e.mean, b.init_c_w, b.init_c_b)};
}

template <typename T>
Var BasicSkelNet<T>::attend(Graph& g, const Bound& b, const Encoded& e, Var h_prev) const {
  const std::size_t K = config_.locations();
  Var query = g.matmul(h_prev, b.att_v);
  Var hidden = g.tanh(g.add(g.add_grouped(e.keys, query, K), b.att_b));
  Var scores = g.reshape(g.matmul(hidden, b.att_w), e.batch, K);
  return g.softmax(scores, 1);
}

template <typename T>
typename BasicSkelNet<T>::StepVars BasicSkelNet<T>::transition(Graph& g, const Bound& b, Var context,
                                                              Var h_prev, Var c_prev,
                                                              const std::vector<int>& prev_words) const {
  for (int w : prev_words) check_word(w);
  const std::size_t n = config_.hidden;
  Var emb = g.lookup(b.embed, prev_words);
  Var gates = g.affine(g.concat({emb, context, h_prev}), b.lstm_w, b.lstm_b);
  Var in = g.sigmoid(g.slice_cols(gates, 0, n));
  Var forget = g.sigmoid(g.slice_cols(gates, n, 2 * n));
  Var out = g.sigmoid(g.slice_cols(gates, 2 * n, 3 * n));
  Var cand = g.tanh(g.slice_cols(gates, 3 * n, 4 * n));
  StepVars s;
  s.context = context;
  s.c = g.add(g.mul(forget, c_prev), g.mul(in, cand));
  s.h = g.mul(out, g.tanh(s.c));
  s.logits = g.affine(s.h, b.out_w, b.out_b);
  return s;
}

template <typename T>
typename BasicSkelNet<T>::StepVars BasicSkelNet<T>::step(Graph& g, const Bound& b, const Encoded& e,
                                                        Var h_prev, Var c_prev,
                                                        const std::vector<int>& prev_words) const {
  if (prev_words.size() != e.batch)
    throw nn::ShapeError("skel step: " + std::to_string(prev_words.size()) + " words for batch of " +
                         std::to_string(e.batch));
  Var alpha;
  Var context;
  if (config_.attention) {
    alpha = attend(g, b, e, h_prev);
    context = g.weighted_pool(alpha, e.features);
  } else {
    context = e.mean;
  }
  StepVars s = transition(g, b, context, h_prev, c_prev, prev_words);
  s.alpha = alpha;
  return s;
}

template <typename T>
typename BasicSkelNet<T>::Unrolled BasicSkelNet<T>::teacher_forced(
    Graph& g, const Bound& b, const std::vector<const FeatureGrid*>& grids,
    const std::vector<std::vector<int>>& gold) const {
  if (grids.size() != gold.size() || grids.empty())
    throw std::invalid_argument("teacher_forced: need one gold sequence per image");
  Encoded e = encode(g, b, grids);
  auto [h, c] = initial_state(g, b, e);
  std::size_t steps = 0;
  for (const auto& s : gold) steps = std::max(steps, s.size() + 1);
  Unrolled u;
  std::vector<Var> losses;
  std::vector<int> prev(gold.size(), 2 /*unused*/), targets(gold.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const auto& s = gold[i];
      prev[i] = t == 0 ? 0 : (t - 1 < s.size() ? s[t - 1] : 1);
      if (t < s.size()) {
        targets[i] = s[t];
      } else if (t == s.size()) {
        targets[i] = 1;
      } else {
        targets[i] = -1;
      }
      if (targets[i] >= 0) ++u.tokens;
    }
    u.states_before.emplace_back(h, c);
    StepVars sv = step(g, b, e, h, c, prev);
    losses.push_back(g.cross_entropy(sv.logits, targets));
    h = sv.h;
    c = sv.c;
    u.steps.push_back(sv);
  }
  u.loss = losses.size() == 1 ? losses[0] : g.sum(g.concat(losses, 0));
  return u;
}

template <typename T>
SkelState<T> BasicSkelNet<T>::start(const FeatureGrid& grid) const {
  Graph g(false);
  Bound b = bind(g);
  Encoded e = encode(g, b, {&grid});
  auto [h, c] = initial_state(g, b, e);
  return SkelState<T>{to_vec(g.value(h)), to_vec(g.value(c)), 0};
}

template <typename T>
SkelStepOutput<T> BasicSkelNet<T>::step(const SkelState<T>& state, int prev_word,
                                        const FeatureGrid& grid) const {
  Graph g(false);
  Bound b = bind(g);
  Encoded e = encode(g, b, {&grid});
  Var h = g.constant(nn::BasicTensor<T>::row(state.h));
  Var c = g.constant(nn::BasicTensor<T>::row(state.c));
  StepVars s = step(g, b, e, h, c, {prev_word});
  SkelStepOutput<T> out;
  out.state = SkelState<T>{to_vec(g.value(s.h)), to_vec(g.value(s.c)), state.t + 1};
  out.probs = to_vec(g.value(g.softmax(s.logits, 1)));
  out.context = to_vec(g.value(s.context));
  if (config_.attention) {
    out.alpha = to_vec(g.value(s.alpha));
  } else {
    out.alpha.assign(config_.locations(), T(1) / static_cast<T>(config_.locations()));
  }
  return out;
}

template <typename T>
std::vector<std::vector<T>> BasicSkelNet<T>::per_location_distributions(const SkelState<T>& state,
                                                                        int prev_word,
                                                                        const FeatureGrid& grid) const {
  const std::size_t K = config_.locations(), n = config_.hidden;
  Graph g(false);
  Bound b = bind(g);
  Encoded e = encode(g, b, {&grid});
  nn::BasicTensor<T> hs = nn::BasicTensor<T>::matrix(K, n), cs = nn::BasicTensor<T>::matrix(K, n);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      hs(k, j) = state.h[j];
      cs(k, j) = state.c[j];
    }
  StepVars s = transition(g, b, e.features, g.constant(std::move(hs)), g.constant(std::move(cs)),
                          std::vector<int>(K, prev_word));
  const auto& probs = g.value(g.softmax(s.logits, 1));
  std::vector<std::vector<T>> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto r = probs.row_span(k);
    out[k].assign(r.begin(), r.end());
  }
  return out;
}

template <typename T>
std::vector<std::vector<T>> BasicSkelNet<T>::per_location_distributions_rerun(
    const std::vector<int>& inputs, const FeatureGrid& grid) const {
  if (inputs.empty()) throw std::invalid_argument("per_location_distributions_rerun: empty prefix");
  const std::size_t K = config_.locations();
  Graph g(false);
  Bound b = bind(g);
  Encoded e = encode(g, b, {&grid});
  auto [h0, c0] = initial_state(g, b, e);
  // Repeat the single-image state across K rows.
  std::vector<Var> hs(K, h0), cs(K, c0);
  Var h = g.concat(hs, 0), c = g.concat(cs, 0);
  StepVars s;
  for (int w : inputs) {
    s = transition(g, b, e.features, h, c, std::vector<int>(K, w));
    h = s.h;
    c = s.c;
  }
  const auto& probs = g.value(g.softmax(s.logits, 1));
  std::vector<std::vector<T>> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto r = probs.row_span(k);
    out[k].assign(r.begin(), r.end());
  }
  return out;
}

template <typename T>
std::optional<std::vector<T>> refine_attention(const std::vector<T>& p_attend,
                                               const std::vector<std::vector<T>>& p_grid) {
  std::vector<double> sims(p_grid.size());
  double z = 0.0;
  for (std::size_t k = 0; k < p_grid.size(); ++k) {
    if (p_grid[k].size() != p_attend.size())
      throw nn::ShapeError("refine_attention: distribution sizes differ");
    double s = 0.0;
    for (std::size_t w = 0; w < p_attend.size(); ++w)
      s += static_cast<double>(p_attend[w]) * static_cast<double>(p_grid[k][w]);
    sims[k] = s;
    z += s;
  }
  if (!(z > 0.0)) return std::nullopt;
  std::vector<T> out(p_grid.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<T>(sims[k] / z);
  return out;
}

std::vector<float> context_vector(const FeatureGrid& grid, const std::vector<float>& alpha) {
  if (alpha.size() != grid.locations())
    throw nn::ShapeError("context_vector: " + std::to_string(alpha.size()) + " weights for " +
                         std::to_string(grid.locations()) + " locations");
  std::vector<double> z(grid.dim(), 0.0);
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    auto v = grid.location(k);
    for (std::size_t d = 0; d < z.size(); ++d) z[d] += static_cast<double>(alpha[k]) * v[d];
  }
  return std::vector<float>(z.begin(), z.end());
}

template class BasicSkelNet<float>;
template class BasicSkelNet<double>;
template std::optional<std::vector<float>> refine_attention<float>(const std::vector<float>&,
                                                                   const std::vector<std::vector<float>>&);
template std::optional<std::vector<double>> refine_attention<double>(
    const std::vector<double>&, const std::vector<std::vector<double>>&);

}  // namespace skelcap
