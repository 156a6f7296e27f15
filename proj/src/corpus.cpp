#include "skelcap/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "skelcap/logging.hpp"

namespace skelcap {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<std::vector<std::string>> preprocess(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : raw) {
    auto u = static_cast<unsigned char>(ch);
    if (u < 0x80 && std::ispunct(u)) continue;
    if (u < 0x80 && std::isspace(u)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur += (u < 0x80) ? static_cast<char>(std::tolower(u)) : ch;
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  if (out.empty()) return std::nullopt;
  return out;
}

std::vector<std::string> strip_article(std::vector<std::string> tokens) {
  std::erase(tokens, std::string("a"));
  return tokens;
}

// ---------------------------------------------------------------- Vocabulary

void Vocabulary::add(const std::string& token, std::size_t count, std::size_t head_count) {
  if (index_.count(token)) throw std::invalid_argument("duplicate vocabulary token: " + token);
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
  counts_[token] = count;
  if (head_count) head_counts_[token] = head_count;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sequences,
                             std::size_t threshold) {
  if (threshold == 0) throw std::invalid_argument("vocabulary threshold must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sequences)
    for (const auto& t : s) ++counts[t];
  if (counts.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, c] : counts)
    if (c >= threshold) kept.emplace_back(tok, c);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.threshold_ = threshold;
  v.add("<bos>", 0, 0);
  v.add("<eos>", 0, 0);
  v.add("<unk>", 0, 0);
  for (const auto& [tok, c] : kept) {
    if (tok == "<bos>" || tok == "<eos>" || tok == "<unk>") continue;
    v.add(tok, c, 0);
  }
  return v;
}

Vocabulary Vocabulary::build_skeleton(const std::vector<DecomposedCaption>& captions,
                                      std::size_t threshold) {
  std::vector<std::vector<std::string>> seqs;
  seqs.reserve(captions.size());
  std::map<std::string, std::size_t> heads;
  for (const auto& d : captions) {
    seqs.push_back(d.skeleton_words());
    for (const auto& t : d.skeleton)
      if (t.is_np_head) ++heads[t.surface];
  }
  Vocabulary v = build(seqs, threshold);
  for (const auto& [tok, c] : heads)
    if (v.contains(tok)) v.head_counts_[tok] = c;
  return v;
}

Vocabulary Vocabulary::build_attribute(const std::vector<DecomposedCaption>& captions,
                                       std::size_t threshold) {
  std::vector<std::vector<std::string>> seqs;
  for (const auto& d : captions)
    for (const auto& t : d.skeleton)
      if (!t.attributes.empty()) seqs.push_back(t.attributes);
  return build(seqs, threshold);
}

int Vocabulary::encode(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(encode(t));
  return out;
}

const std::string& Vocabulary::decode(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size())
    throw std::out_of_range("vocabulary index out of range: " + std::to_string(index));
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& indices) const {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(decode(i));
  return out;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(token) > 0; }

std::size_t Vocabulary::count(std::string_view token) const {
  auto it = counts_.find(token);
  return it == counts_.end() ? 0 : it->second;
}

std::size_t Vocabulary::np_head_count(std::string_view token) const {
  auto it = head_counts_.find(token);
  return it == head_counts_.end() ? 0 : it->second;
}

bool Vocabulary::is_nounlike(int index) const {
  const auto& tok = decode(index);
  std::size_t c = count(tok);
  return c > 0 && 2 * np_head_count(tok) >= c;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : tokens_) {
    for (unsigned char ch : t) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
  out << "# skelcap-vocab 1 threshold " << threshold_ << '\n';
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    out << i << '\t' << tokens_[i] << '\t' << count(tokens_[i]) << '\t'
        << np_head_count(tokens_[i]) << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string hash_mark, magic, version, kw;
  std::size_t threshold = 0;
  hs >> hash_mark >> magic >> version >> kw >> threshold;
  if (magic != "skelcap-vocab" || version != "1" || kw != "threshold" || threshold == 0)
    throw std::runtime_error("not a skelcap vocabulary file: " + path);
  Vocabulary v;
  v.threshold_ = threshold;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t idx = 0, count = 0, heads = 0;
    std::string tok;
    if (!(ls >> idx >> tok >> count >> heads) || idx != v.tokens_.size())
      throw std::runtime_error("malformed vocabulary line in " + path + ": " + line);
    v.add(tok, count, heads);
  }
  if (v.size() < kNumSpecials || v.decode(kBos) != "<bos>" || v.decode(kEos) != "<eos>" ||
      v.decode(kUnk) != "<unk>")
    throw std::runtime_error("vocabulary is missing special tokens: " + path);
  return v;
}

// ------------------------------------------------------------------ Manifest

std::string DatasetManifest::path_of(const std::string& relative) const {
  fs::path p(relative);
  if (p.is_absolute() || directory.empty()) return p.string();
  return (fs::path(directory) / p).string();
}

void DatasetManifest::save(const std::string& path) const {
  json j;
  j["format"] = "skelcap-manifest";
  j["version"] = 1;
  j["corpus"] = corpus;
  j["trees"] = trees;
  j["features"] = features;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["splits"] = splits;
  if (!generator_config.empty()) j["generator"] = json::parse(generator_config);
  if (!scenes.empty()) {
    json sc = json::object();
    for (const auto& [id, objs] : scenes) {
      json arr = json::array();
      for (const auto& o : objs)
        arr.push_back({{"word", o.word}, {"cell", {o.row, o.col}}, {"attributes", o.attributes}});
      sc[id] = arr;
    }
    j["scenes"] = sc;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(1) << '\n';
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + path + ": " + e.what());
  }
  if (j.value("format", "") != "skelcap-manifest" || j.value("version", 0) != 1)
    throw std::runtime_error("not a skelcap manifest: " + path);
  DatasetManifest m;
  m.directory = fs::path(path).parent_path().string();
  m.corpus = j.at("corpus").get<std::string>();
  m.trees = j.at("trees").get<std::string>();
  m.features = j.at("features").get<std::string>();
  if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
  m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  if (j.contains("generator")) m.generator_config = j["generator"].dump();
  if (j.contains("scenes")) {
    for (const auto& [id, arr] : j["scenes"].items()) {
      std::vector<SceneObject> objs;
      for (const auto& o : arr)
        objs.push_back({o.at("word").get<std::string>(), o.at("cell").at(0).get<std::size_t>(),
                        o.at("cell").at(1).get<std::size_t>(),
                        o.at("attributes").get<std::vector<std::string>>()});
      m.scenes.emplace(id, std::move(objs));
    }
  }
  std::map<std::string, std::string> owner;
  for (const auto& [name, ids] : m.splits)
    for (const auto& id : ids) {
      auto [it, fresh] = owner.emplace(id, name);
      if (!fresh && it->second != name)
        throw std::runtime_error("image " + id + " appears in splits " + it->second + " and " +
                                 name);
    }
  return m;
}

// -------------------------------------------------------------------- Corpus

std::vector<std::pair<std::string, std::string>> read_caption_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open caption file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(number) +
                               ": expected image_id<TAB>caption");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

CorpusLoad load_corpus(const std::string& corpus_path, const std::string& trees_path) {
  auto lines = read_caption_lines(corpus_path);
  auto trees = read_tree_file(trees_path);
  if (lines.size() != trees.size())
    throw std::runtime_error("corpus has " + std::to_string(lines.size()) +
                             " captions but tree file has " + std::to_string(trees.size()) +
                             " trees");
  CorpusLoad out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto& [id, raw] = lines[i];
    auto tokens = preprocess(raw);
    if (!tokens) {
      log::warning("dropping " + id + ": caption is empty after preprocessing");
      ++out.dropped;
      continue;
    }
    auto& tree = trees[i].tree;
    if (leaves(tree) != *tokens) {
      log::warning("dropping " + id + ": tree leaves disagree with preprocessed caption");
      ++out.dropped;
      continue;
    }
    auto d = decompose(tree);
    if (d.skeleton.empty()) {
      log::warning("dropping " + id + ": empty skeleton");
      ++out.dropped;
      continue;
    }
    out.records.push_back({id, raw, std::move(*tokens), std::move(tree), std::move(d)});
  }
  return out;
}

std::vector<const CaptionRecord*> Dataset::split(const std::string& name) const {
  auto it = manifest.splits.find(name);
  if (it == manifest.splits.end()) return {};
  std::multimap<std::string_view, const CaptionRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.image_id, &r);
  std::vector<const CaptionRecord*> out;
  for (const auto& id : it->second) {
    auto [lo, hi] = by_id.equal_range(id);
    for (auto p = lo; p != hi; ++p) out.push_back(p->second);
  }
  return out;
}

const FeatureGrid& Dataset::features_of(const std::string& image_id) const {
  auto it = features.find(image_id);
  if (it == features.end()) throw std::runtime_error("no features for image " + image_id);
  return it->second;
}

Dataset load_dataset(const std::string& manifest_path) {
  Dataset ds;
  ds.manifest = DatasetManifest::load(manifest_path);
  auto loaded = load_corpus(ds.manifest.path_of(ds.manifest.corpus),
                            ds.manifest.path_of(ds.manifest.trees));
  ds.records = std::move(loaded.records);
  ds.features = read_features(ds.manifest.path_of(ds.manifest.features));
  return ds;
}

}  // namespace skelcap
