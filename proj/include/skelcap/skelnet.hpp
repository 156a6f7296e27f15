#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skelcap/features.hpp"
#include "skelcap/graph.hpp"
#include "skelcap/params.hpp"

namespace skelcap {

struct SkelConfig {
  std::size_t vocab_size = 0;   // Q
  std::size_t grid = 0;         // L
  std::size_t feature_dim = 0;  // D
  std::size_t embed = 64;       // m_s
  std::size_t hidden = 128;     // n_s
  std::size_t attention_width = 128;
  // Off: the context is the mean feature vector at every step.
  bool attention = true;
  // Per-location distributions by re-running the whole prefix with v_ij as
  // context instead of substituting it at the final step only.
  bool full_rerun_per_location = false;

  std::size_t locations() const { return grid * grid; }
  void validate() const;
  std::string to_json() const;
  static SkelConfig from_json(const std::string& text);
};

// Recurrent state of the skeleton decoder.
template <typename T>
struct SkelState {
  std::vector<T> h;
  std::vector<T> c;
  std::size_t t = 0;
};

// Everything one decoding step produces.
template <typename T>
struct SkelStepOutput {
  SkelState<T> state;      // after the step
  std::vector<T> probs;    // P_attend over the skeleton vocabulary
  std::vector<T> alpha;    // pre-word attention, L*L row-major
  std::vector<T> context;  // z_t
};

// Soft-attention LSTM that generates skeleton sentences.
//
// Step t: alpha_t = softmax_ij(w . tanh(U v_ij + V h_{t-1} + b)),
// z_t = sum_ij alpha_t(ij) v_ij, (h_t, c_t) = LSTM([E y_{t-1}; z_t], h_{t-1}, c_{t-1}),
// P_attend = softmax(W_o h_t + b_o). The initial h, c are affine maps of
// the mean feature vector.
template <typename T>
class BasicSkelNet {
 public:
  using Graph = nn::BasicGraph<T>;
  using Store = nn::BasicParameterStore<T>;

  BasicSkelNet(SkelConfig config, std::uint64_t seed);
  BasicSkelNet(SkelConfig config, Store params);

  const SkelConfig& config() const { return config_; }
  Store& params() { return params_; }
  const Store& params() const { return params_; }

  // Parameter handles bound into one graph.
  struct Bound {
    nn::Var embed, init_h_w, init_h_b, init_c_w, init_c_b;
    nn::Var att_u, att_v, att_b, att_w;
    nn::Var lstm_w, lstm_b, out_w, out_b;
  };
  Bound bind(Graph& g);
  Bound bind(Graph& g) const;

  // Batched image encoding shared by every step.
  struct Encoded {
    nn::Var features;  // [B*K, D]
    nn::Var mean;      // [B, D]
    nn::Var keys;      // [B*K, A] = V U (attention only)
    std::size_t batch = 0;
  };
  Encoded encode(Graph& g, const Bound& b, const std::vector<const FeatureGrid*>& grids) const;

  struct StepVars {
    nn::Var alpha;  // [B, K] (invalid when attention is off)
    nn::Var context, h, c, logits;
  };
  std::pair<nn::Var, nn::Var> initial_state(Graph& g, const Bound& b, const Encoded& e) const;
  nn::Var attend(Graph& g, const Bound& b, const Encoded& e, nn::Var h_prev) const;
  StepVars step(Graph& g, const Bound& b, const Encoded& e, nn::Var h_prev, nn::Var c_prev,
                const std::vector<int>& prev_words) const;
  // LSTM transition and output for an explicit context vector.
  StepVars transition(Graph& g, const Bound& b, nn::Var context, nn::Var h_prev, nn::Var c_prev,
                      const std::vector<int>& prev_words) const;

  // Teacher-forced pass over gold skeletons (indices without BOS/EOS); the
  // loss is the summed cross-entropy over every target including EOS.
  struct Unrolled {
    nn::Var loss;
    std::size_t tokens = 0;
    std::vector<StepVars> steps;           // steps[t] predicts gold[t] (or EOS)
    std::vector<std::pair<nn::Var, nn::Var>> states_before;  // (h, c) entering step t
  };
  Unrolled teacher_forced(Graph& g, const Bound& b, const std::vector<const FeatureGrid*>& grids,
                          const std::vector<std::vector<int>>& gold) const;

  // Single-image inference helpers (no gradients).
  SkelState<T> start(const FeatureGrid& grid) const;
  SkelStepOutput<T> step(const SkelState<T>& state, int prev_word, const FeatureGrid& grid) const;

  // P_ij for every location: the step from `state` with the context replaced
  // by v_ij (substitution variant).
  std::vector<std::vector<T>> per_location_distributions(const SkelState<T>& state, int prev_word,
                                                         const FeatureGrid& grid) const;
  // Full re-run variant: inputs[0] is BOS, inputs.back() the word fed at the
  // final step; every step uses v_ij as its context.
  std::vector<std::vector<T>> per_location_distributions_rerun(const std::vector<int>& inputs,
                                                               const FeatureGrid& grid) const;

 private:
  void check_word(int w) const;

  SkelConfig config_;
  Store params_;
};

using SkelNet = BasicSkelNet<float>;

// alpha_post(ij) proportional to <P_attend, P_ij>. Returns nullopt when every
// similarity is zero (callers fall back to the pre-word map).
template <typename T>
std::optional<std::vector<T>> refine_attention(const std::vector<T>& p_attend,
                                               const std::vector<std::vector<T>>& p_grid);

// z = sum_k alpha_k v_k.
std::vector<float> context_vector(const FeatureGrid& grid, const std::vector<float>& alpha);

}  // namespace skelcap
