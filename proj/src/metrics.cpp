#include "skelcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "skelcap/corpus.hpp"
#include "skelcap/logging.hpp"

namespace skelcap {

namespace {

using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i),
                                                                t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

void check_pairs(const std::vector<EvalPair>& pairs, const char* metric) {
  if (pairs.empty()) throw std::invalid_argument(std::string(metric) + ": no evaluation pairs");
  for (const auto& p : pairs)
    if (p.references.empty()) throw std::invalid_argument(std::string(metric) + ": pair without references");
}

}  // namespace

std::vector<double> bleu(const std::vector<EvalPair>& pairs, std::size_t max_n) {
  check_pairs(pairs, "bleu");
  if (max_n == 0) throw std::invalid_argument("bleu: max_n must be positive");
  std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (const auto& p : pairs) {
    const auto c = p.candidate.size();
    cand_len += static_cast<double>(c);
    std::size_t best = p.references.front().size();
    for (const auto& r : p.references) {
      auto d = [&](std::size_t x) { return x > c ? x - c : c - x; };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= max_n; ++n) {
      auto cand = ngrams(p.candidate, n);
      NgramCounts max_ref;
      for (const auto& r : p.references)
        for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
      for (const auto& [g, k] : cand) {
        auto it = max_ref.find(g);
        matched[n - 1] += static_cast<double>(std::min(k, it == max_ref.end() ? 0 : it->second));
        total[n - 1] += static_cast<double>(k);
      }
    }
  }
  std::vector<double> out(max_n, 0.0);
  if (cand_len == 0.0) return out;
  double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (matched[n] == 0.0 || total[n] == 0.0) break;
    log_sum += std::log(matched[n] / total[n]);
    out[n] = bp * std::exp(log_sum / static_cast<double>(n + 1));
  }
  return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<double> rouge_l_per_image(const std::vector<EvalPair>& pairs, double beta) {
  check_pairs(pairs, "rouge_l");
  std::vector<double> out;
  out.reserve(pairs.size());
  const double b2 = beta * beta;
  for (const auto& p : pairs) {
    double best = 0.0;
    for (const auto& r : p.references) {
      if (p.candidate.empty() || r.empty()) continue;
      auto l = static_cast<double>(lcs_length(p.candidate, r));
      if (l == 0.0) continue;
      double prec = l / static_cast<double>(p.candidate.size());
      double rec = l / static_cast<double>(r.size());
      best = std::max(best, (1.0 + b2) * prec * rec / (rec + b2 * prec));
    }
    out.push_back(best);
  }
  return out;
}

double rouge_l(const std::vector<EvalPair>& pairs, double beta) {
  auto v = rouge_l_per_image(pairs, beta);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> cider_per_image(const std::vector<EvalPair>& pairs, const CiderOptions& options) {
  check_pairs(pairs, "cider");
  if (options.max_n == 0 || !(options.sigma > 0.0))
    throw std::invalid_argument("cider: max_n and sigma must be positive");
  if (pairs.size() == 1) log::warning("cider: single-image corpus, every idf weight is zero");
  const std::size_t N = options.max_n;
  // document frequency: number of images whose references contain the n-gram
  std::map<Tokens, double> df;
  for (const auto& p : pairs) {
    std::set<Tokens> seen;
    for (const auto& r : p.references)
      for (std::size_t n = 1; n <= N; ++n)
        for (const auto& [g, _] : ngrams(r, n)) seen.insert(g);
    for (const auto& g : seen) df[g] += 1.0;
  }
  const double log_docs = std::log(static_cast<double>(pairs.size()));

  struct Vec {
    std::vector<std::map<Tokens, double>> w;
    std::vector<double> norm;
    std::size_t length = 0;
  };
  auto vectorize = [&](const Tokens& t) {
    Vec v;
    v.w.resize(N);
    v.norm.assign(N, 0.0);
    v.length = t.size();
    for (std::size_t n = 1; n <= N; ++n) {
      for (const auto& [g, k] : ngrams(t, n)) {
        auto it = df.find(g);
        double d = it == df.end() ? 0.0 : it->second;
        double x = static_cast<double>(k) * (log_docs - std::log(std::max(1.0, d)));
        v.w[n - 1][g] = x;
        v.norm[n - 1] += x * x;
      }
      v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
    }
    return v;
  };

  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Vec hyp = vectorize(p.candidate);
    double sum = 0.0;
    for (const auto& r : p.references) {
      Vec ref = vectorize(r);
      double delta = static_cast<double>(hyp.length) - static_cast<double>(ref.length);
      double penalty = std::exp(-(delta * delta) / (2.0 * options.sigma * options.sigma));
      for (std::size_t n = 0; n < N; ++n) {
        double dot = 0.0;
        for (const auto& [g, x] : hyp.w[n]) {
          auto it = ref.w[n].find(g);
          if (it != ref.w[n].end()) dot += std::min(x, it->second) * it->second;
        }
        if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) sum += penalty * dot / (hyp.norm[n] * ref.norm[n]);
      }
    }
    out.push_back(sum / static_cast<double>(N) / static_cast<double>(p.references.size()) * options.scale);
  }
  return out;
}

double cider(const std::vector<EvalPair>& pairs, const CiderOptions& options) {
  auto v = cider_per_image(pairs, options);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<EvalPair> without_a(std::vector<EvalPair> pairs) {
  for (auto& p : pairs) {
    p.candidate = strip_article(std::move(p.candidate));
    for (auto& r : p.references) r = strip_article(std::move(r));
  }
  return pairs;
}

Uniqueness uniqueness_stats(const std::vector<Tokens>& generated, const std::optional<std::set<Tokens>>& training) {
  if (generated.empty()) throw std::invalid_argument("uniqueness_stats: no generated captions");
  std::set<Tokens> distinct(generated.begin(), generated.end());
  Uniqueness u;
  const auto n = static_cast<double>(generated.size());
  u.percent_unique = 100.0 * static_cast<double>(distinct.size()) / n;
  if (training) {
    std::size_t seen = 0;
    for (const auto& g : generated) seen += training->count(g);
    u.percent_seen = 100.0 * static_cast<double>(seen) / n;
  }
  return u;
}

EvalReport evaluate(const std::vector<EvalPair>& pairs, bool strip_a, const CiderOptions& cider_options) {
  EvalReport r;
  r.without_a = strip_a;
  const auto used = strip_a ? without_a(pairs) : pairs;
  r.pairs = used.size();
  r.bleu = bleu(used);
  r.per_image_rouge_l = rouge_l_per_image(used);
  r.per_image_cider = cider_per_image(used, cider_options);
  for (double x : r.per_image_rouge_l) r.rouge_l += x;
  for (double x : r.per_image_cider) r.cider += x;
  r.rouge_l /= static_cast<double>(used.size());
  r.cider /= static_cast<double>(used.size());
  return r;
}

std::string EvalReport::to_text() const {
  std::string s;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-12s %zu%s\n", "pairs", pairs, without_a ? "  (w/o a)" : "");
  s += buf;
  for (std::size_t n = 0; n < bleu.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%-12s %.4f\n", ("BLEU-" + std::to_string(n + 1)).c_str(), bleu[n]);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "%-12s %.4f\n%-12s %.4f\n", "ROUGE-L", rouge_l, "CIDEr", cider);
  s += buf;
  std::snprintf(buf, sizeof buf, "%-12s %s\n%-12s %s\n", "METEOR", "unsupported", "SPICE", "unsupported");
  s += buf;
  if (uniqueness) {
    std::snprintf(buf, sizeof buf, "%-12s %.2f%%\n", "unique", uniqueness->percent_unique);
    s += buf;
    if (uniqueness->percent_seen) {
      std::snprintf(buf, sizeof buf, "%-12s %.2f%%\n", "seen-train", *uniqueness->percent_seen);
      s += buf;
    }
  }
  return s;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["pairs"] = pairs;
  j["without_a"] = without_a;
  for (std::size_t n = 0; n < bleu.size(); ++n) j["BLEU-" + std::to_string(n + 1)] = bleu[n];
  j["ROUGE-L"] = rouge_l;
  j["CIDEr"] = cider;
  j["METEOR"] = "unsupported";
  j["SPICE"] = "unsupported";
  if (uniqueness) {
    j["percent_unique"] = uniqueness->percent_unique;
    j["percent_seen_in_training"] =
        uniqueness->percent_seen ? nlohmann::ordered_json(*uniqueness->percent_seen) : nlohmann::ordered_json(nullptr);
  }
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < per_image_cider.size(); ++i) {
    nlohmann::ordered_json e;
    if (i < image_ids.size()) e["image_id"] = image_ids[i];
    e["ROUGE-L"] = per_image_rouge_l[i];
    e["CIDEr"] = per_image_cider[i];
    per.push_back(e);
  }
  j["per_image"] = per;
  return j.dump(2);
}

}  // namespace skelcap
