#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skelcap/decompose.hpp"
#include "skelcap/features.hpp"
#include "skelcap/treebank.hpp"

namespace skelcap {

// Lowercases ASCII letters, deletes ASCII punctuation and splits on
// whitespace. Returns nullopt when nothing is left.
std::optional<std::vector<std::string>> preprocess(std::string_view raw);

// Removes every token exactly equal to "a".
std::vector<std::string> strip_article(std::vector<std::string> tokens);

class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kNumSpecials = 3;

  // Tokens seen fewer than `threshold` times map to UNK. Throws on an
  // empty corpus or threshold 0.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sequences,
                          std::size_t threshold);

  // Skeleton vocabulary: also records how often each word was an NP head,
  // which drives the nounlike filter for attribute generation.
  static Vocabulary build_skeleton(const std::vector<DecomposedCaption>& captions,
                                   std::size_t threshold);
  static Vocabulary build_attribute(const std::vector<DecomposedCaption>& captions,
                                    std::size_t threshold);

  int encode(std::string_view token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  const std::string& decode(int index) const;
  std::vector<std::string> decode(const std::vector<int>& indices) const;

  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  std::size_t threshold() const { return threshold_; }
  std::size_t count(std::string_view token) const;
  std::size_t np_head_count(std::string_view token) const;
  // Words that were NP heads in at least half of their occurrences.
  bool is_nounlike(int index) const;

  // FNV-1a over the ordered token list, hex encoded.
  std::string hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_ && threshold_ == other.threshold_;
  }

 private:
  Vocabulary() = default;
  void add(const std::string& token, std::size_t count, std::size_t head_count);

  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
  std::map<std::string, std::size_t, std::less<>> counts_;
  std::map<std::string, std::size_t, std::less<>> head_counts_;
  std::size_t threshold_ = 1;
};

struct CaptionRecord {
  std::string image_id;
  std::string raw;
  std::vector<std::string> tokens;
  ParseTree tree;
  DecomposedCaption decomposition;
};

// Ground truth kept by the synthetic generator for each image.
struct SceneObject {
  std::string word;
  std::size_t row = 0;
  std::size_t col = 0;
  std::vector<std::string> attributes;
};

struct DatasetManifest {
  std::string directory;  // paths below are relative to this
  std::string corpus = "captions.tsv";
  std::string trees = "trees.txt";
  std::string features = "features.bin";
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::vector<std::string>> splits;  // split -> image ids
  std::map<std::string, std::vector<SceneObject>> scenes;  // synthetic only
  std::string generator_config;                            // JSON text, synthetic only

  std::string path_of(const std::string& relative) const;
  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

// Reads `image_id<TAB>caption` lines and the aligned tree file. Records
// that fail preprocessing or whose tokens disagree with the tree leaves are
// dropped with a warning; the count of dropped records is returned.
struct CorpusLoad {
  std::vector<CaptionRecord> records;
  std::size_t dropped = 0;
};
CorpusLoad load_corpus(const std::string& corpus_path, const std::string& trees_path);

struct Dataset {
  DatasetManifest manifest;
  std::vector<CaptionRecord> records;
  FeatureTable features;

  // Records of one split, in manifest order.
  std::vector<const CaptionRecord*> split(const std::string& name) const;
  const FeatureGrid& features_of(const std::string& image_id) const;
};

Dataset load_dataset(const std::string& manifest_path);

// Reads `image_id<TAB>caption` lines (no trees). Multiple lines may share
// an image id.
std::vector<std::pair<std::string, std::string>> read_caption_lines(const std::string& path);

}  // namespace skelcap
