#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skelcap/attrnet.hpp"
#include "skelcap/corpus.hpp"
#include "skelcap/features.hpp"
#include "skelcap/skelnet.hpp"

namespace skelcap {

// log P_hat = log P + gamma * l
inline double score_adjust(double raw_logp, std::size_t length, double gamma) {
  return raw_logp + gamma * static_cast<double>(length);
}

struct BeamConfig {
  std::size_t beam_size = 3;
  double gamma = 0.0;
  std::size_t max_len = 16;  // generated tokens, EOS included

  void validate() const {
    if (beam_size < 1) throw std::invalid_argument("beam_size must be at least 1");
    if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
    if (!std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite");
  }
};

template <typename State>
struct Hypothesis {
  std::vector<int> tokens;  // generated tokens; ends with EOS when finished by EOS
  double adjusted = 0.0;
  double raw = 0.0;
  State state{};
  bool finished = false;

  bool ended_by_eos(int eos) const { return !tokens.empty() && tokens.back() == eos; }
  // Tokens without the closing EOS.
  std::vector<int> words(int eos) const {
    std::vector<int> w = tokens;
    if (ended_by_eos(eos)) w.pop_back();
    return w;
  }
};

// Ranking used for both the beam and the finished pool: higher adjusted
// score first, then shorter, then lexicographically smaller.
template <typename State>
bool hypothesis_before(const Hypothesis<State>& a, const Hypothesis<State>& b) {
  if (a.adjusted != b.adjusted) return a.adjusted > b.adjusted;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

// Beam search with a per-word length bonus. `step_fn(state, prev_token)`
// returns {next_state, log-probabilities over the vocabulary}. Every
// candidate word except EOS gets +gamma; BOS is never generated. The search
// keeps the best `beam_size` candidates over all live hypotheses; those that
// emit EOS or reach max_len move to the finished pool (capped at beam_size).
template <typename State, typename StepFn>
std::vector<Hypothesis<State>> beam_search(StepFn&& step_fn, State init, const BeamConfig& config,
                                           int bos = Vocabulary::kBos, int eos = Vocabulary::kEos) {
  config.validate();
  using Hyp = Hypothesis<State>;
  std::vector<Hyp> live(1);
  live[0].state = std::move(init);
  std::vector<Hyp> finished;

  struct Candidate {
    std::size_t parent;
    int word;
    double adjusted;
    double raw;
  };

  auto worse = [&](const Candidate& a, const Candidate& b) {
    // true when a ranks before b
    if (a.adjusted != b.adjusted) return a.adjusted > b.adjusted;
    const auto& ta = live[a.parent].tokens;
    const auto& tb = live[b.parent].tokens;
    if (ta != tb) return ta < tb;
    return a.word < b.word;
  };

  for (std::size_t len = 1; len <= config.max_len && !live.empty(); ++len) {
    std::vector<State> next_states;
    next_states.reserve(live.size());
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      int prev = live[h].tokens.empty() ? bos : live[h].tokens.back();
      auto [next, logp] = step_fn(live[h].state, prev);
      next_states.push_back(std::move(next));
      for (std::size_t w = 0; w < logp.size(); ++w) {
        if (static_cast<int>(w) == bos) continue;
        double lp = static_cast<double>(logp[w]);
        if (!(lp > -std::numeric_limits<double>::infinity())) continue;
        // live hypotheses hold no EOS, so every earlier token earns the bonus
        std::size_t words = live[h].tokens.size() + (static_cast<int>(w) == eos ? 0 : 1);
        double raw = live[h].raw + lp;
        cands.push_back({h, static_cast<int>(w), score_adjust(raw, words, config.gamma), raw});
      }
    }
    std::size_t keep = std::min(config.beam_size, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), worse);
    cands.resize(keep);

    std::vector<Hyp> next_live;
    for (const auto& c : cands) {
      Hyp n;
      n.tokens = live[c.parent].tokens;
      n.tokens.push_back(c.word);
      n.adjusted = c.adjusted;
      n.raw = c.raw;
      n.state = next_states[c.parent];
      if (c.word == eos || len == config.max_len) {
        n.finished = true;
        finished.push_back(std::move(n));
      } else {
        next_live.push_back(std::move(n));
      }
    }
    std::sort(finished.begin(), finished.end(), hypothesis_before<State>);
    if (finished.size() > config.beam_size) finished.resize(config.beam_size);
    live = std::move(next_live);

    if (finished.size() == config.beam_size && !live.empty()) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.adjusted);
      double bound = best_live + static_cast<double>(config.max_len - len) * std::max(config.gamma, 0.0);
      if (bound < finished.back().adjusted) break;
    }
  }
  return finished;
}

// Greedy decoding: the most probable non-BOS word at each step.
template <typename State, typename StepFn>
Hypothesis<State> greedy_decode(StepFn&& step_fn, State init, std::size_t max_len,
                                int bos = Vocabulary::kBos, int eos = Vocabulary::kEos) {
  Hypothesis<State> h;
  h.state = std::move(init);
  for (std::size_t len = 1; len <= max_len; ++len) {
    int prev = h.tokens.empty() ? bos : h.tokens.back();
    auto [next, logp] = step_fn(h.state, prev);
    int best = -1;
    for (std::size_t w = 0; w < logp.size(); ++w) {
      if (static_cast<int>(w) == bos) continue;
      if (best < 0 || logp[w] > logp[static_cast<std::size_t>(best)]) best = static_cast<int>(w);
    }
    h.tokens.push_back(best);
    h.raw += static_cast<double>(logp[static_cast<std::size_t>(best)]);
    h.state = std::move(next);
    if (best == eos) break;
  }
  h.adjusted = h.raw;
  h.finished = true;
  return h;
}

// One recorded Skel-LSTM step of a decoded hypothesis.
struct SkelStepRecord {
  int prev_word = 0;
  SkelState<float> before;    // (h_{t-1}, c_{t-1})
  SkelState<float> after;     // (h_t, c_t)
  std::vector<float> probs;   // P_attend
  std::vector<float> alpha;   // pre-word alpha
  std::vector<float> context; // z_t under pre-word alpha
};

struct SkelDecodeState {
  SkelState<float> state;
  std::vector<SkelStepRecord> history;
};

// Conditioning for the attribute decoder at one skeleton position.
struct AttrConditioning {
  std::vector<float> z, s, h;
  std::vector<float> alpha;                 // map used for z
  std::optional<std::vector<float>> alpha_post;
  bool post_fallback = false;                // refinement degenerate, pre-word map used
};

// Builds (z_T, s_T, h_T) for skeleton position T of a decoded or
// teacher-forced sequence whose steps are recorded in `history` (history[T]
// emitted token T; the last entry emitted EOS or was the final step).
AttrConditioning attr_conditioning(const SkelNet& skel, const AttrConfig& attr_config,
                                   const FeatureGrid& grid, const std::vector<SkelStepRecord>& history,
                                   std::size_t position, int word);

// Teacher-forced step records for a gold skeleton (indices, no BOS/EOS).
std::vector<SkelStepRecord> record_gold(const SkelNet& skel, const FeatureGrid& grid,
                                        const std::vector<int>& gold);

struct CaptionConfig {
  BeamConfig skel{3, 0.0, 16};
  BeamConfig attr{2, 0.0, 6};
};

struct TokenTrace {
  std::string word;
  bool attributes_invoked = false;
  std::vector<std::string> attributes;
  std::vector<float> alpha;
  std::optional<std::vector<float>> alpha_post;
  bool post_fallback = false;
};

struct CaptionResult {
  std::vector<std::string> skeleton;
  std::vector<std::vector<std::string>> attributes;
  std::vector<std::string> caption;
  std::vector<TokenTrace> trace;
  double skel_raw = 0.0;
  double skel_adjusted = 0.0;
  bool empty_skeleton = false;
};

struct Captioner {
  const SkelNet& skel;
  const AttrNet& attr;
  const Vocabulary& skel_vocab;
  const Vocabulary& attr_vocab;
  CaptionConfig config;

  // Skeleton decoding only (best hypothesis).
  Hypothesis<SkelDecodeState> decode_skeleton(const FeatureGrid& grid) const;
  std::vector<int> decode_attributes(const AttrConditioning& cond) const;
  CaptionResult caption(const FeatureGrid& grid) const;
};

// Structured text block: skeleton, per-token attributes, and alpha maps as
// L x L matrices with 4 decimals.
void write_trace(std::ostream& out, const std::string& image_id, const CaptionResult& result,
                 std::size_t grid_side);

}  // namespace skelcap
