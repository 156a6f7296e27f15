#include "skelcap/attrnet.hpp"

#include <algorithm>
#include <stdexcept>
#include <type_traits>

#include <json.hpp>

namespace skelcap {

using nn::Var;

std::string to_string(HiddenSource s) {
  switch (s) {
    case HiddenSource::previous: return "previous";
    case HiddenSource::current: return "current";
    case HiddenSource::final: return "final";
  }
  return "current";
}

HiddenSource hidden_source_from_string(const std::string& s) {
  if (s == "previous") return HiddenSource::previous;
  if (s == "current") return HiddenSource::current;
  if (s == "final") return HiddenSource::final;
  throw std::invalid_argument("unknown skel hidden source '" + s + "' (previous|current|final)");
}

void AttrConfig::validate() const {
  if (vocab_size < 4) throw std::invalid_argument("attr config: vocabulary too small");
  if (feature_dim == 0 || skel_embed == 0 || skel_hidden == 0)
    throw std::invalid_argument("attr config: conditioning dimensions must be positive");
  if (fuse_width == 0 || embed == 0 || hidden == 0)
    throw std::invalid_argument("attr config: dimensions must be positive");
}

std::string AttrConfig::to_json() const {
  nlohmann::json j{{"vocab_size", vocab_size},
                   {"feature_dim", feature_dim},
                   {"skel_embed", skel_embed},
                   {"skel_hidden", skel_hidden},
                   {"fuse_width", fuse_width},
                   {"embed", embed},
                   {"hidden", hidden},
                   {"use_post_word_alpha", use_post_word_alpha},
                   {"invoke_on_all_tokens", invoke_on_all_tokens},
                   {"skel_hidden_source", to_string(hidden_source)}};
  return j.dump();
}

AttrConfig AttrConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  AttrConfig c;
  c.vocab_size = j.at("vocab_size");
  c.feature_dim = j.at("feature_dim");
  c.skel_embed = j.at("skel_embed");
  c.skel_hidden = j.at("skel_hidden");
  c.fuse_width = j.at("fuse_width");
  c.embed = j.at("embed");
  c.hidden = j.at("hidden");
  c.use_post_word_alpha = j.at("use_post_word_alpha");
  c.invoke_on_all_tokens = j.at("invoke_on_all_tokens");
  c.hidden_source = hidden_source_from_string(j.at("skel_hidden_source"));
  return c;
}

namespace {

struct Shapes {
  std::vector<std::pair<const char*, nn::Shape>> list;
};

Shapes expected_shapes(const AttrConfig& c) {
  const auto Q = c.vocab_size, na = c.fuse_width, e = c.embed, n = c.hidden;
  return Shapes{{{"attr/w_i", {c.feature_dim, na}},
                 {"attr/w_t", {c.skel_embed, na}},
                 {"attr/w_h", {c.skel_hidden, na}},
                 {"attr/fuse_b", {1, na}},
                 {"attr/mlp_w", {na, e}},
                 {"attr/mlp_b", {1, e}},
                 {"attr/embed", {Q, e}},
                 {"attr/lstm_w", {e + n, 4 * n}},
                 {"attr/lstm_b", {1, 4 * n}},
                 {"attr/out_w", {n, Q}},
                 {"attr/out_b", {1, Q}}}};
}

}  // namespace

template <typename T>
BasicAttrNet<T>::BasicAttrNet(AttrConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : expected_shapes(config_).list) {
    std::string s(name);
    nn::Init init = nn::Init::glorot;
    if (shape[0] == 1) init = s == "attr/lstm_b" ? nn::Init::forget_one : nn::Init::zeros;
    params_.add(s, shape, init, rng);
  }
}

template <typename T>
BasicAttrNet<T>::BasicAttrNet(AttrConfig config, Store params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  for (const auto& [name, shape] : expected_shapes(config_).list) {
    if (!params_.contains(name)) throw std::invalid_argument(std::string("attr model: missing ") + name);
    if (params_.get(name).value.shape() != shape)
      throw nn::ShapeError(std::string("attr model: ") + name + " has shape " +
                           nn::shape_string(params_.get(name).value.shape()) + ", expected " +
                           nn::shape_string(shape));
  }
}

namespace {

template <typename G, typename S, typename B>
B bind_attr(G& g, S& params) {
  auto p = [&](const char* name) {
    if constexpr (std::is_const_v<S>) {
      return g.frozen(params.get(name));
    } else {
      return g.parameter(params.get(name));
    }
  };
  B b;
  b.w_i = p("attr/w_i");
  b.w_t = p("attr/w_t");
  b.w_h = p("attr/w_h");
  b.fuse_b = p("attr/fuse_b");
  b.mlp_w = p("attr/mlp_w");
  b.mlp_b = p("attr/mlp_b");
  b.embed = p("attr/embed");
  b.lstm_w = p("attr/lstm_w");
  b.lstm_b = p("attr/lstm_b");
  b.out_w = p("attr/out_w");
  b.out_b = p("attr/out_b");
  return b;
}

}  // namespace

template <typename T>
typename BasicAttrNet<T>::Bound BasicAttrNet<T>::bind(Graph& g) {
  return bind_attr<Graph, Store, Bound>(g, params_);
}

template <typename T>
typename BasicAttrNet<T>::Bound BasicAttrNet<T>::bind(Graph& g) const {
  return bind_attr<Graph, const Store, Bound>(g, params_);
}

template <typename T>
void BasicAttrNet<T>::check_word(int w) const {
  if (w < 0 || static_cast<std::size_t>(w) >= config_.vocab_size)
    throw std::out_of_range("attribute word index " + std::to_string(w) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
}

template <typename T>
Var BasicAttrNet<T>::init_input(Graph& g, const Bound& b, Var z, Var s, Var h) const {
  Var u = g.add(g.add(g.add(g.matmul(z, b.w_i), g.matmul(s, b.w_t)), g.matmul(h, b.w_h)), b.fuse_b);
  return g.tanh(g.affine(u, b.mlp_w, b.mlp_b));
}

template <typename T>
typename BasicAttrNet<T>::Cell BasicAttrNet<T>::cell(Graph& g, const Bound& b, Var x, Var h,
                                                    Var c) const {
  const std::size_t n = config_.hidden;
  Var gates = g.affine(g.concat({x, h}), b.lstm_w, b.lstm_b);
  Var in = g.sigmoid(g.slice_cols(gates, 0, n));
  Var forget = g.sigmoid(g.slice_cols(gates, n, 2 * n));
  Var out = g.sigmoid(g.slice_cols(gates, 2 * n, 3 * n));
  Var cand = g.tanh(g.slice_cols(gates, 3 * n, 4 * n));
  Cell r;
  r.c = g.add(g.mul(forget, c), g.mul(in, cand));
  r.h = g.mul(out, g.tanh(r.c));
  r.logits = g.affine(r.h, b.out_w, b.out_b);
  return r;
}

template <typename T>
typename BasicAttrNet<T>::Loss BasicAttrNet<T>::teacher_forced(
    Graph& g, const Bound& b, Var z, Var s, Var h, const std::vector<std::vector<int>>& gold) const {
  const std::size_t B = gold.size();
  if (B == 0) throw std::invalid_argument("attr teacher_forced: empty batch");
  if (g.value(z).rows() != B || g.value(s).rows() != B || g.value(h).rows() != B)
    throw nn::ShapeError("attr teacher_forced: conditioning rows differ from batch size");
  for (const auto& seq : gold)
    for (int w : seq) check_word(w);

  Var x = init_input(g, b, z, s, h);
  Var zero = g.constant(nn::BasicTensor<T>::matrix(B, config_.hidden));
  Cell st = cell(g, b, x, zero, zero);
  Var hs = st.h, cs = st.c;

  std::size_t steps = 0;
  for (const auto& seq : gold) steps = std::max(steps, seq.size() + 1);
  Loss out;
  std::vector<Var> losses;
  std::vector<int> prev(B), targets(B);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < B; ++i) {
      const auto& seq = gold[i];
      prev[i] = t == 0 ? 0 : (t - 1 < seq.size() ? seq[t - 1] : 1);
      targets[i] = t < seq.size() ? seq[t] : (t == seq.size() ? 1 : -1);
      if (targets[i] >= 0) ++out.tokens;
    }
    Cell c = cell(g, b, g.lookup(b.embed, prev), hs, cs);
    losses.push_back(g.cross_entropy(c.logits, targets));
    hs = c.h;
    cs = c.c;
  }
  out.loss = losses.size() == 1 ? losses[0] : g.sum(g.concat(losses, 0));
  return out;
}

template <typename T>
AttrState<T> BasicAttrNet<T>::start(const std::vector<T>& z, const std::vector<T>& s,
                                    const std::vector<T>& h) const {
  if (z.size() != config_.feature_dim || s.size() != config_.skel_embed || h.size() != config_.skel_hidden)
    throw nn::ShapeError("attr start: conditioning sizes " + std::to_string(z.size()) + "/" +
                         std::to_string(s.size()) + "/" + std::to_string(h.size()) + ", expected " +
                         std::to_string(config_.feature_dim) + "/" + std::to_string(config_.skel_embed) +
                         "/" + std::to_string(config_.skel_hidden));
  Graph g(false);
  Bound b = bind(g);
  Var x = init_input(g, b, g.constant(nn::BasicTensor<T>::row(z)), g.constant(nn::BasicTensor<T>::row(s)),
                     g.constant(nn::BasicTensor<T>::row(h)));
  Var zero = g.constant(nn::BasicTensor<T>::matrix(1, config_.hidden));
  Cell c = cell(g, b, x, zero, zero);
  return AttrState<T>{g.value(c.h).values(), g.value(c.c).values(), 0};
}

template <typename T>
std::pair<AttrState<T>, std::vector<T>> BasicAttrNet<T>::step(const AttrState<T>& state,
                                                              int prev_word) const {
  check_word(prev_word);
  Graph g(false);
  Bound b = bind(g);
  std::vector<int> w{prev_word};
  Cell c = cell(g, b, g.lookup(b.embed, w), g.constant(nn::BasicTensor<T>::row(state.h)),
                g.constant(nn::BasicTensor<T>::row(state.c)));
  Var p = g.softmax(c.logits, 1);
  return {AttrState<T>{g.value(c.h).values(), g.value(c.c).values(), state.t + 1}, g.value(p).values()};
}

template class BasicAttrNet<float>;
template class BasicAttrNet<double>;

}  // namespace skelcap
