#include "skelcap/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "skelcap/decompose.hpp"
#include "skelcap/logging.hpp"

namespace skelcap {

namespace {

std::vector<double> log_probs(const std::vector<float>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    out[i] = p[i] > 0.0f ? std::log(static_cast<double>(p[i])) : -std::numeric_limits<double>::infinity();
  return out;
}

SkelStepRecord record_step(const SkelNet& skel, const SkelState<float>& state, int prev,
                           const FeatureGrid& grid) {
  auto out = skel.step(state, prev, grid);
  SkelStepRecord r;
  r.prev_word = prev;
  r.before = state;
  r.after = out.state;
  r.probs = std::move(out.probs);
  r.alpha = std::move(out.alpha);
  r.context = std::move(out.context);
  return r;
}

}  // namespace

std::vector<SkelStepRecord> record_gold(const SkelNet& skel, const FeatureGrid& grid,
                                        const std::vector<int>& gold) {
  std::vector<SkelStepRecord> history;
  SkelState<float> state = skel.start(grid);
  int prev = Vocabulary::kBos;
  for (std::size_t t = 0; t <= gold.size(); ++t) {
    history.push_back(record_step(skel, state, prev, grid));
    state = history.back().after;
    if (t < gold.size()) prev = gold[t];
  }
  return history;
}

AttrConditioning attr_conditioning(const SkelNet& skel, const AttrConfig& attr_config,
                                   const FeatureGrid& grid, const std::vector<SkelStepRecord>& history,
                                   std::size_t position, int word) {
  if (position >= history.size())
    throw std::out_of_range("attr_conditioning: position " + std::to_string(position) +
                            " beyond recorded steps");
  const auto& rec = history[position];
  const auto& sc = skel.config();
  AttrConditioning c;
  c.alpha = rec.alpha;
  c.z = rec.context;
  if (sc.attention && attr_config.use_post_word_alpha) {
    std::vector<std::vector<float>> grid_probs;
    if (sc.full_rerun_per_location) {
      std::vector<int> inputs;
      for (std::size_t k = 0; k <= position; ++k) inputs.push_back(history[k].prev_word);
      grid_probs = skel.per_location_distributions_rerun(inputs, grid);
    } else {
      grid_probs = skel.per_location_distributions(rec.before, rec.prev_word, grid);
    }
    c.alpha_post = refine_attention(rec.probs, grid_probs);
    if (c.alpha_post) {
      c.alpha = *c.alpha_post;
      c.z = context_vector(grid, c.alpha);
    } else {
      c.post_fallback = true;
      log::warning("post-word attention degenerate at position " + std::to_string(position) +
                   "; using the pre-word map");
    }
  }
  const auto& embed = skel.params().get("skel/embed").value;
  if (word < 0 || static_cast<std::size_t>(word) >= embed.rows())
    throw std::out_of_range("attr_conditioning: skeleton word index out of range");
  auto row = embed.row_span(static_cast<std::size_t>(word));
  c.s.assign(row.begin(), row.end());
  switch (attr_config.hidden_source) {
    case HiddenSource::previous: c.h = rec.before.h; break;
    case HiddenSource::current: c.h = rec.after.h; break;
    case HiddenSource::final: c.h = history.back().after.h; break;
  }
  return c;
}

Hypothesis<SkelDecodeState> Captioner::decode_skeleton(const FeatureGrid& grid) const {
  SkelDecodeState init{skel.start(grid), {}};
  auto step_fn = [&](const SkelDecodeState& st, int prev) {
    SkelDecodeState next;
    next.history = st.history;
    next.history.push_back(record_step(skel, st.state, prev, grid));
    next.state = next.history.back().after;
    auto lp = log_probs(next.history.back().probs);
    return std::make_pair(std::move(next), std::move(lp));
  };
  auto results = beam_search(step_fn, std::move(init), config.skel);
  return results.front();
}

std::vector<int> Captioner::decode_attributes(const AttrConditioning& cond) const {
  if (config.attr.max_len == 0) return {};
  auto init = attr.start(cond.z, cond.s, cond.h);
  auto step_fn = [&](const AttrState<float>& st, int prev) {
    auto [next, probs] = attr.step(st, prev);
    return std::make_pair(std::move(next), log_probs(probs));
  };
  auto results = beam_search(step_fn, std::move(init), config.attr);
  return results.front().words(Vocabulary::kEos);
}

CaptionResult Captioner::caption(const FeatureGrid& grid) const {
  CaptionResult r;
  auto best = decode_skeleton(grid);
  r.skel_raw = best.raw;
  r.skel_adjusted = best.adjusted;
  auto words = best.words(Vocabulary::kEos);
  if (words.empty()) {
    r.empty_skeleton = true;
    log::warning("empty skeleton decoded; returning an empty caption");
    return r;
  }
  const auto& history = best.state.history;
  for (std::size_t t = 0; t < words.size(); ++t) {
    TokenTrace tt;
    tt.word = skel_vocab.decode(words[t]);
    tt.alpha = history[t].alpha;
    tt.attributes_invoked = attr.config().invoke_on_all_tokens || skel_vocab.is_nounlike(words[t]);
    if (tt.attributes_invoked) {
      auto cond = attr_conditioning(skel, attr.config(), grid, history, t, words[t]);
      tt.alpha_post = cond.alpha_post;
      tt.post_fallback = cond.post_fallback;
      tt.attributes = attr_vocab.decode(decode_attributes(cond));
    }
    r.skeleton.push_back(tt.word);
    r.attributes.push_back(tt.attributes);
    r.trace.push_back(std::move(tt));
  }
  r.caption = fuse_predicted(r.skeleton, r.attributes);
  return r;
}

namespace {

void write_map(std::ostream& out, const std::vector<float>& alpha, std::size_t side) {
  char buf[32];
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(alpha[i * side + j]));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
  return s;
}

}  // namespace

void write_trace(std::ostream& out, const std::string& image_id, const CaptionResult& result,
                 std::size_t grid_side) {
  out << "image " << image_id << '\n';
  if (result.empty_skeleton) out << "warning empty-skeleton\n";
  out << "skeleton " << join(result.skeleton) << '\n';
  out << "caption " << join(result.caption) << '\n';
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    const auto& tt = result.trace[t];
    out << "token " << t << ' ' << tt.word << " attributes ";
    if (!tt.attributes_invoked) {
      out << "(skipped)";
    } else if (tt.attributes.empty()) {
      out << "(none)";
    } else {
      out << join(tt.attributes);
    }
    out << '\n';
    out << "alpha " << t << '\n';
    write_map(out, tt.alpha, grid_side);
    if (tt.alpha_post) {
      out << "alpha_post " << t << '\n';
      write_map(out, *tt.alpha_post, grid_side);
    } else if (tt.post_fallback) {
      out << "alpha_post " << t << " fallback\n";
    }
  }
  out << "end\n";
}

}  // namespace skelcap
