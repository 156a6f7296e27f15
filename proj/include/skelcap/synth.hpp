#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "skelcap/corpus.hpp"
#include "skelcap/features.hpp"
#include "skelcap/treebank.hpp"

namespace skelcap {

// Template-grammar scene generator used in place of CNN features.
//
// A scene holds 1..max_objects distinct object classes in distinct grid
// cells. Each object gets 0..max_attributes distinct attributes, written in
// inventory order. Objects are mentioned in row-major cell order and joined
// by a relation word chosen from the geometry of consecutive objects: the
// first relation for the same row, the second for the same column, the
// third otherwise (cycled when fewer relations are configured).
//
// An occupied cell's feature vector is one-hot(object) followed by the sum of
// attribute one-hots, a one-hot of the row and a one-hot of the column;
// empty cells are zero. Gaussian noise with standard deviation `noise` is added everywhere.
struct SynthConfig {
  std::size_t grid = 4;
  std::size_t dim = 32;
  std::vector<std::string> objects{"dog", "cat",  "horse", "bird",  "car",
                                   "boat", "tree", "ball", "chair", "cup"};
  std::vector<std::string> attributes{"small", "big", "red", "green", "blue", "white"};
  std::vector<std::string> relations{"beside", "above", "near"};
  double noise = 0.1;
  std::size_t max_objects = 3;
  std::size_t max_attributes = 2;
  std::size_t train_count = 1000;
  std::size_t val_count = 0;
  std::size_t test_count = 0;

  // objects + attributes + row and column codes
  std::size_t one_hot_width() const;
  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
};

using Scene = std::vector<SceneObject>;

struct SynthSample {
  std::string image_id;
  Scene scene;
  FeatureGrid features;
  std::string raw;
  std::vector<std::string> tokens;
  ParseTree tree;
};

// Relation word linking `from` to the next mentioned object `to`.
const std::string& relation_between(const SynthConfig& config, const SceneObject& from,
                                    const SceneObject& to);

// Canonical mention order (row-major by cell).
Scene ordered(Scene scene);

// Caption tokens and gold tree for a scene.
std::pair<std::vector<std::string>, ParseTree> describe(const SynthConfig& config,
                                                        const Scene& scene);

FeatureGrid render(const SynthConfig& config, const Scene& scene, std::mt19937_64& rng);

Scene sample_scene(const SynthConfig& config, std::mt19937_64& rng);

// Sample `index` of split `split` is a pure function of (config, seed, split, index).
SynthSample synth_sample(const SynthConfig& config, std::uint64_t seed, const std::string& split,
                         std::size_t index);

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<SynthSample> samples;
};

SynthDataset synth_generate(const SynthConfig& config, std::uint64_t seed);

// Writes captions.tsv, trees.txt, features.bin and manifest.json into `dir`.
// Returns the manifest path.
std::string write_synth_dataset(const SynthDataset& data, const std::string& dir);

}  // namespace skelcap
