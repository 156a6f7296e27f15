#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

struct Pair {
  Tokens candidate;
  std::vector<Tokens> references;
};

// n-gram multiset as a flat list of (gram, count), linear lookup.
using Bag = std::vector<std::pair<Tokens, double>>;

inline double& slot(Bag& bag, const Tokens& g) {
  for (auto& [k, v] : bag)
    if (k == g) return v;
  bag.emplace_back(g, 0.0);
  return bag.back().second;
}

inline double lookup(const Bag& bag, const Tokens& g) {
  for (const auto& [k, v] : bag)
    if (k == g) return v;
  return 0.0;
}

inline Bag grams(const Tokens& t, std::size_t n) {
  Bag bag;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    Tokens g;
    for (std::size_t j = 0; j < n; ++j) g.push_back(t[i + j]);
    slot(bag, g) += 1.0;
  }
  return bag;
}

inline std::vector<double> bleu(const std::vector<Pair>& pairs, std::size_t max_n = 4) {
  double c = 0, r = 0;
  std::vector<double> hit(max_n), tot(max_n);
  for (const auto& p : pairs) {
    c += static_cast<double>(p.candidate.size());
    // closest reference length, shorter on ties
    double best = 1e300, best_len = 0;
    for (const auto& ref : p.references) {
      double d = std::fabs(static_cast<double>(ref.size()) - static_cast<double>(p.candidate.size()));
      if (d < best || (d == best && static_cast<double>(ref.size()) < best_len)) {
        best = d;
        best_len = static_cast<double>(ref.size());
      }
    }
    r += best_len;
    for (std::size_t n = 1; n <= max_n; ++n) {
      for (const auto& [g, k] : grams(p.candidate, n)) {
        double m = 0;
        for (const auto& ref : p.references) m = std::max(m, lookup(grams(ref, n), g));
        hit[n - 1] += std::min(k, m);
        tot[n - 1] += k;
      }
    }
  }
  std::vector<double> out(max_n, 0.0);
  if (c == 0) return out;
  double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  for (std::size_t n = 1; n <= max_n; ++n) {
    double prod = 1.0;
    bool zero = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (hit[k] == 0 || tot[k] == 0) zero = true;
      else prod *= hit[k] / tot[k];
    }
    out[n - 1] = zero ? 0.0 : bp * std::pow(prod, 1.0 / static_cast<double>(n));
  }
  return out;
}

inline bool is_subsequence(const Tokens& s, const Tokens& t) {
  std::size_t j = 0;
  for (const auto& w : t)
    if (j < s.size() && s[j] == w) ++j;
  return j == s.size();
}

// Longest subsequence of `a` (enumerated exhaustively) that also occurs in `b`.
inline std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  const std::uint32_t limit = 1u << a.size();
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    Tokens s;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) s.push_back(a[i]);
    if (s.size() > best && is_subsequence(s, b)) best = s.size();
  }
  return best;
}

inline double rouge_l(const std::vector<Pair>& pairs, double beta = 1.2) {
  double total = 0;
  for (const auto& p : pairs) {
    double best = 0;
    for (const auto& ref : p.references) {
      double l = static_cast<double>(lcs(p.candidate, ref));
      if (l == 0) continue;
      double prec = l / static_cast<double>(p.candidate.size());
      double rec = l / static_cast<double>(ref.size());
      best = std::max(best, (1 + beta * beta) * prec * rec / (rec + beta * beta * prec));
    }
    total += best;
  }
  return total / static_cast<double>(pairs.size());
}

inline std::vector<double> cider_per_image(const std::vector<Pair>& pairs, double sigma = 6.0) {
  const std::size_t N = 4;
  const double images = static_cast<double>(pairs.size());
  auto df = [&](const Tokens& g) {
    double d = 0;
    for (const auto& p : pairs) {
      bool found = false;
      for (const auto& ref : p.references) found = found || lookup(grams(ref, g.size()), g) > 0;
      d += found ? 1.0 : 0.0;
    }
    return d;
  };
  auto tfidf = [&](const Tokens& t, std::size_t n) {
    Bag v = grams(t, n);
    for (auto& [g, x] : v) x *= std::log(images) - std::log(std::max(1.0, df(g)));
    return v;
  };
  auto norm = [](const Bag& v) {
    double s = 0;
    for (const auto& [g, x] : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<double> out;
  for (const auto& p : pairs) {
    double score = 0;
    for (std::size_t n = 1; n <= N; ++n) {
      Bag h = tfidf(p.candidate, n);
      double per_n = 0;
      for (const auto& ref : p.references) {
        Bag r = tfidf(ref, n);
        double dot = 0;
        for (const auto& [g, x] : h) {
          double y = lookup(r, g);
          dot += std::min(x, y) * y;
        }
        double nh = norm(h), nr = norm(r);
        double val = (nh == 0 || nr == 0) ? 0.0 : dot / (nh * nr);
        double delta = static_cast<double>(p.candidate.size()) - static_cast<double>(ref.size());
        per_n += val * std::exp(-delta * delta / (2 * sigma * sigma));
      }
      score += per_n / static_cast<double>(p.references.size());
    }
    out.push_back(score / static_cast<double>(N) * 10.0);
  }
  return out;
}

inline double cider(const std::vector<Pair>& pairs) {
  auto v = cider_per_image(pairs);
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Random evaluation corpus over a small alphabet so n-grams collide often.
inline std::vector<Pair> random_corpus(std::mt19937_64& rng, std::size_t max_images = 6,
                                       std::size_t max_len = 8) {
  const char* alphabet[] = {"a", "dog", "red", "on", "cat"};
  std::uniform_int_distribution<std::size_t> images(1, max_images), refs(1, 4), len(0, max_len), word(0, 4);
  std::vector<Pair> out(images(rng));
  for (auto& p : out) {
    for (std::size_t i = len(rng); i > 0; --i) p.candidate.push_back(alphabet[word(rng)]);
    p.references.resize(refs(rng));
    for (auto& r : p.references) {
      std::size_t n = std::max<std::size_t>(1, len(rng));
      for (std::size_t i = 0; i < n; ++i) r.push_back(alphabet[word(rng)]);
    }
  }
  return out;
}

// Toy language: log-probabilities of the next token are a fixed pseudo-random
// function of the prefix. Token 0 is BOS, token 1 is EOS.
struct ToyLanguage {
  int vocab = 5;
  std::uint64_t seed = 1;

  std::vector<double> logprobs(const std::vector<int>& prefix) const {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ull;
    for (int t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 0x100000001B3ull;
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(static_cast<std::size_t>(vocab));
    double z = 0;
    for (int k = 1; k < vocab; ++k) z += (w[static_cast<std::size_t>(k)] = u(rng));
    std::vector<double> lp(w.size());
    lp[0] = -std::numeric_limits<double>::infinity();  // BOS is never produced
    for (int k = 1; k < vocab; ++k) lp[static_cast<std::size_t>(k)] = std::log(w[static_cast<std::size_t>(k)] / z);
    return lp;
  }
};

struct Sentence {
  std::vector<int> tokens;  // ends with EOS unless cut at max_len
  double raw = 0;
  std::size_t words = 0;    // non-EOS tokens
};

// Every complete sentence of the toy language up to max_len tokens.
inline std::vector<Sentence> enumerate(const ToyLanguage& lang, std::size_t max_len) {
  std::vector<Sentence> out;
  std::vector<Sentence> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Sentence> next;
    for (const auto& s : frontier) {
      auto lp = lang.logprobs(s.tokens);
      for (int w = 1; w < lang.vocab; ++w) {
        Sentence n = s;
        n.tokens.push_back(w);
        n.raw += lp[static_cast<std::size_t>(w)];
        if (w != 1) ++n.words;
        if (w == 1 || len == max_len) out.push_back(n);
        else next.push_back(n);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

// Index of the best sentence under raw + gamma * words, with the beam's
// tie-breaking (shorter, then lexicographically smaller).
inline std::size_t argmax(const std::vector<Sentence>& all, double gamma) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < all.size(); ++i) {
    double a = all[i].raw + gamma * static_cast<double>(all[i].words);
    double b = all[best].raw + gamma * static_cast<double>(all[best].words);
    if (a > b || (a == b && (all[i].tokens.size() < all[best].tokens.size() ||
                             (all[i].tokens.size() == all[best].tokens.size() &&
                              all[i].tokens < all[best].tokens))))
      best = i;
  }
  return best;
}

}  // namespace oracle
