#include "skelcap/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace skelcap {

using nlohmann::json;

std::size_t SynthConfig::one_hot_width() const {
  return objects.size() + attributes.size() + 2 * grid;
}

void SynthConfig::validate() const {
  if (objects.empty() || attributes.empty() || relations.empty())
    throw std::invalid_argument("synth: object, attribute and relation inventories must be non-empty");
  if (grid < 2) throw std::invalid_argument("synth: grid size must be >= 2");
  if (dim < one_hot_width())
    throw std::invalid_argument("synth: feature dim " + std::to_string(dim) +
                                " is smaller than the one-hot width " +
                                std::to_string(one_hot_width()));
  if (max_objects == 0 || max_objects > grid * grid || max_objects > objects.size())
    throw std::invalid_argument("synth: max_objects must be in [1, min(cells, objects)]");
  if (max_attributes > attributes.size())
    throw std::invalid_argument("synth: max_attributes exceeds attribute inventory");
  if (!(noise >= 0.0)) throw std::invalid_argument("synth: noise must be >= 0");
  if (train_count == 0) throw std::invalid_argument("synth: train count must be >= 1");
  auto check_words = [](const std::vector<std::string>& words) {
    for (const auto& w : words)
      if (w.empty() || w == "a" || w.find_first_of(" \t(){}") != std::string::npos)
        throw std::invalid_argument("synth: unusable inventory word '" + w + "'");
  };
  check_words(objects);
  check_words(attributes);
  check_words(relations);
}

std::string SynthConfig::to_json() const {
  json j{{"grid", grid},
         {"dim", dim},
         {"objects", objects},
         {"attributes", attributes},
         {"relations", relations},
         {"noise", noise},
         {"max_objects", max_objects},
         {"max_attributes", max_attributes},
         {"train_count", train_count},
         {"val_count", val_count},
         {"test_count", test_count}};
  return j.dump();
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  auto j = json::parse(text);
  SynthConfig c;
  c.grid = j.value("grid", c.grid);
  c.dim = j.value("dim", c.dim);
  c.objects = j.value("objects", c.objects);
  c.attributes = j.value("attributes", c.attributes);
  c.relations = j.value("relations", c.relations);
  c.noise = j.value("noise", c.noise);
  c.max_objects = j.value("max_objects", c.max_objects);
  c.max_attributes = j.value("max_attributes", c.max_attributes);
  c.train_count = j.value("train_count", c.train_count);
  c.val_count = j.value("val_count", c.val_count);
  c.test_count = j.value("test_count", c.test_count);
  return c;
}

const std::string& relation_between(const SynthConfig& config, const SceneObject& from,
                                    const SceneObject& to) {
  std::size_t kind = 2;
  if (from.row == to.row)
    kind = 0;
  else if (from.col == to.col)
    kind = 1;
  return config.relations[kind % config.relations.size()];
}

Scene ordered(Scene scene) {
  std::sort(scene.begin(), scene.end(), [](const SceneObject& a, const SceneObject& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  return scene;
}

namespace {

ParseNode noun_phrase(const SceneObject& o) {
  std::vector<ParseNode> kids;
  kids.push_back(ParseNode::leaf("DT", "a"));
  for (const auto& a : o.attributes) kids.push_back(ParseNode::leaf("JJ", a));
  kids.push_back(ParseNode::leaf("NN", o.word));
  return ParseNode::phrase("NP", std::move(kids));
}

std::size_t index_of(const std::vector<std::string>& v, const std::string& w) {
  auto it = std::find(v.begin(), v.end(), w);
  if (it == v.end()) throw std::invalid_argument("synth: unknown inventory word " + w);
  return static_cast<std::size_t>(it - v.begin());
}

}  // namespace

std::pair<std::vector<std::string>, ParseTree> describe(const SynthConfig& config,
                                                        const Scene& scene_in) {
  if (scene_in.empty()) throw std::invalid_argument("synth: empty scene");
  Scene scene = ordered(scene_in);
  ParseNode root = noun_phrase(scene.front());
  if (scene.size() > 1) {
    std::vector<ParseNode> kids;
    kids.push_back(std::move(root));
    for (std::size_t k = 1; k < scene.size(); ++k) {
      std::vector<ParseNode> pp;
      pp.push_back(ParseNode::leaf("IN", relation_between(config, scene[k - 1], scene[k])));
      pp.push_back(noun_phrase(scene[k]));
      kids.push_back(ParseNode::phrase("PP", std::move(pp)));
    }
    root = ParseNode::phrase("S", std::move(kids));
  }
  std::string text = serialize(root);
  auto tokens = leaves(root);
  return {std::move(tokens), ParseTree(std::move(root), std::move(text))};
}

FeatureGrid render(const SynthConfig& config, const Scene& scene, std::mt19937_64& rng) {
  FeatureGrid grid(config.grid, config.dim);
  const std::size_t n_obj = config.objects.size();
  const std::size_t n_attr = config.attributes.size();
  for (const auto& o : scene) {
    if (o.row >= config.grid || o.col >= config.grid)
      throw std::invalid_argument("synth: object cell outside the grid");
    auto cell = grid.at(o.row, o.col);
    cell[index_of(config.objects, o.word)] += 1.0f;
    for (const auto& a : o.attributes) cell[n_obj + index_of(config.attributes, a)] += 1.0f;
    cell[n_obj + n_attr + o.row] += 1.0f;
    cell[n_obj + n_attr + config.grid + o.col] += 1.0f;
  }
  if (config.noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, config.noise);
    for (float& v : grid.values()) v += static_cast<float>(gauss(rng));
  }
  return grid;
}

Scene sample_scene(const SynthConfig& config, std::mt19937_64& rng) {
  const std::size_t cells = config.grid * config.grid;
  std::uniform_int_distribution<std::size_t> count_dist(1, config.max_objects);
  std::size_t n = count_dist(rng);

  std::vector<std::size_t> cell_ids(cells);
  std::iota(cell_ids.begin(), cell_ids.end(), 0);
  std::vector<std::size_t> object_ids(config.objects.size());
  std::iota(object_ids.begin(), object_ids.end(), 0);
  // Partial Fisher-Yates draws without replacement.
  auto draw = [&rng](std::vector<std::size_t>& pool, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
  };
  draw(cell_ids, n);
  draw(object_ids, n);

  std::uniform_int_distribution<std::size_t> attr_count(0, config.max_attributes);
  Scene scene;
  for (std::size_t k = 0; k < n; ++k) {
    SceneObject o;
    o.word = config.objects[object_ids[k]];
    o.row = cell_ids[k] / config.grid;
    o.col = cell_ids[k] % config.grid;
    std::vector<std::size_t> attr_ids(config.attributes.size());
    std::iota(attr_ids.begin(), attr_ids.end(), 0);
    std::size_t m = attr_count(rng);
    draw(attr_ids, m);
    attr_ids.resize(m);
    std::sort(attr_ids.begin(), attr_ids.end());
    for (auto a : attr_ids) o.attributes.push_back(config.attributes[a]);
    scene.push_back(std::move(o));
  }
  return ordered(std::move(scene));
}

namespace {

std::string format_id(const std::string& split, std::size_t index) {
  std::string num = std::to_string(index);
  if (num.size() < 6) num.insert(0, 6 - num.size(), '0');
  return "syn-" + split + "-" + num;
}

std::uint64_t split_tag(const std::string& split) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : split) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string raw_caption(const std::vector<std::string>& tokens) {
  std::string raw;
  for (const auto& t : tokens) {
    if (!raw.empty()) raw += ' ';
    raw += t;
  }
  if (!raw.empty()) raw[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(raw[0])));
  return raw + ".";
}

}  // namespace

SynthSample synth_sample(const SynthConfig& config, std::uint64_t seed, const std::string& split,
                         std::size_t index) {
  std::uint64_t tag = split_tag(split);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  Scene scene = sample_scene(config, rng);
  FeatureGrid grid = render(config, scene, rng);
  auto [tokens, tree] = describe(config, scene);
  return SynthSample{format_id(split, index), std::move(scene), std::move(grid),
                     raw_caption(tokens), std::move(tokens), std::move(tree)};
}

SynthDataset synth_generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  SynthDataset out;
  out.manifest.seed = seed;
  out.manifest.generator_config = config.to_json();
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", config.train_count}, {"val", config.val_count}, {"test", config.test_count}};
  for (const auto& [name, count] : splits) {
    auto& ids = out.manifest.splits[name];
    for (std::size_t i = 0; i < count; ++i) {
      auto s = synth_sample(config, seed, name, i);
      ids.push_back(s.image_id);
      out.manifest.scenes[s.image_id] = s.scene;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

std::string write_synth_dataset(const SynthDataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  DatasetManifest m = data.manifest;
  m.directory = dir;
  {
    std::ofstream caps(m.path_of(m.corpus));
    std::ofstream trees(m.path_of(m.trees));
    if (!caps || !trees) throw std::runtime_error("cannot write dataset files in " + dir);
    for (const auto& s : data.samples) {
      caps << s.image_id << '\t' << s.raw << '\n';
      trees << serialize(s.tree) << '\n';
    }
  }
  std::vector<std::pair<std::string, const FeatureGrid*>> feats;
  feats.reserve(data.samples.size());
  for (const auto& s : data.samples) feats.emplace_back(s.image_id, &s.features);
  write_features(m.path_of(m.features), feats);
  std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  m.save(manifest_path);
  return manifest_path;
}

}  // namespace skelcap
