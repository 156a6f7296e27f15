#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skelcap/graph.hpp"
#include "skelcap/params.hpp"

namespace skelcap {

// Which Skel-LSTM hidden state conditions the attribute decoder for skeleton
// token T: h_{T-1}, h_T (the state that emitted the token), or the state at
// the end of the sentence.
enum class HiddenSource { previous, current, final };

std::string to_string(HiddenSource s);
HiddenSource hidden_source_from_string(const std::string& s);

struct AttrConfig {
  std::size_t vocab_size = 0;   // attribute vocabulary
  std::size_t feature_dim = 0;  // D
  std::size_t skel_embed = 0;   // m_s
  std::size_t skel_hidden = 0;  // n_s
  std::size_t fuse_width = 128; // n_a
  std::size_t embed = 64;
  std::size_t hidden = 128;
  bool use_post_word_alpha = true;
  bool invoke_on_all_tokens = true;
  HiddenSource hidden_source = HiddenSource::current;

  void validate() const;
  std::string to_json() const;
  static AttrConfig from_json(const std::string& text);
};

template <typename T>
struct AttrState {
  std::vector<T> h;
  std::vector<T> c;
  std::size_t t = 0;
};

// Attribute decoder. The first input is
//   x_{-1} = tanh(M (W_I z + W_t s + W_h h + b) + b_m),
// fed from a zero state; BOS and the attribute words follow.
template <typename T>
class BasicAttrNet {
 public:
  using Graph = nn::BasicGraph<T>;
  using Store = nn::BasicParameterStore<T>;

  BasicAttrNet(AttrConfig config, std::uint64_t seed);
  BasicAttrNet(AttrConfig config, Store params);

  const AttrConfig& config() const { return config_; }
  Store& params() { return params_; }
  const Store& params() const { return params_; }

  struct Bound {
    nn::Var w_i, w_t, w_h, fuse_b, mlp_w, mlp_b;
    nn::Var embed, lstm_w, lstm_b, out_w, out_b;
  };
  Bound bind(Graph& g);
  Bound bind(Graph& g) const;

  // z [B,D], s [B,m_s], h [B,n_s] -> x_{-1} [B,embed]
  nn::Var init_input(Graph& g, const Bound& b, nn::Var z, nn::Var s, nn::Var h) const;

  struct Cell {
    nn::Var h, c, logits;
  };
  Cell cell(Graph& g, const Bound& b, nn::Var x, nn::Var h, nn::Var c) const;

  // Summed cross-entropy over every attribute and the closing EOS.
  struct Loss {
    nn::Var loss;
    std::size_t tokens = 0;
  };
  Loss teacher_forced(Graph& g, const Bound& b, nn::Var z, nn::Var s, nn::Var h,
                      const std::vector<std::vector<int>>& gold) const;

  // Single-instance inference.
  AttrState<T> start(const std::vector<T>& z, const std::vector<T>& s, const std::vector<T>& h) const;
  std::pair<AttrState<T>, std::vector<T>> step(const AttrState<T>& state, int prev_word) const;

 private:
  void check_word(int w) const;

  AttrConfig config_;
  Store params_;
};

using AttrNet = BasicAttrNet<float>;

}  // namespace skelcap
