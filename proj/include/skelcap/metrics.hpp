#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace skelcap {

using Tokens = std::vector<std::string>;

struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;  // at least one
};

// Corpus BLEU-1..max_n: clipped n-gram precision, uniform weights, brevity
// penalty against the closest reference length (shorter wins ties).
std::vector<double> bleu(const std::vector<EvalPair>& pairs, std::size_t max_n = 4);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

// Per image: LCS F-measure (beta 1.2) maximised over references; corpus
// score is the mean over images.
std::vector<double> rouge_l_per_image(const std::vector<EvalPair>& pairs, double beta = 1.2);
double rouge_l(const std::vector<EvalPair>& pairs, double beta = 1.2);

struct CiderOptions {
  std::size_t max_n = 4;
  double sigma = 6.0;
  double scale = 10.0;
};

// CIDEr-D: tf-idf n-gram vectors (document frequency over the images'
// reference sets), clipped similarity, Gaussian length penalty on token
// counts, averaged over n and references, times `scale`.
std::vector<double> cider_per_image(const std::vector<EvalPair>& pairs, const CiderOptions& options = {});
double cider(const std::vector<EvalPair>& pairs, const CiderOptions& options = {});

std::vector<EvalPair> without_a(std::vector<EvalPair> pairs);

struct Uniqueness {
  double percent_unique = 0.0;
  std::optional<double> percent_seen;  // only with a training caption set
};
Uniqueness uniqueness_stats(const std::vector<Tokens>& generated,
                            const std::optional<std::set<Tokens>>& training = std::nullopt);

struct EvalReport {
  std::size_t pairs = 0;
  bool without_a = false;
  std::vector<double> bleu;
  double rouge_l = 0.0;
  double cider = 0.0;
  std::vector<std::string> image_ids;
  std::vector<double> per_image_rouge_l;
  std::vector<double> per_image_cider;
  std::optional<Uniqueness> uniqueness;

  std::string to_text() const;
  std::string to_json() const;
};

EvalReport evaluate(const std::vector<EvalPair>& pairs, bool strip_a = false,
                    const CiderOptions& cider_options = {});

}  // namespace skelcap
