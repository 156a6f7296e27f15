#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skelcap/attrnet.hpp"
#include "skelcap/corpus.hpp"
#include "skelcap/skelnet.hpp"

namespace skelcap {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double clip_norm = 5.0;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::string train_split = "train";
  std::string val_split = "val";
  // 0 keeps every training caption.
  std::size_t max_train = 0;
};

// Optimizer bookkeeping persisted next to the weights.
struct TrainState {
  double learning_rate = 0.0;
  bool halved = false;
  std::optional<double> best_val;
  std::size_t epochs_done = 0;

  std::string to_json() const;
  static TrainState from_json(const std::string& text);
};

struct TrainReport {
  std::vector<std::pair<std::size_t, double>> curve;  // (step, per-token loss)
  std::vector<double> epoch_loss;                      // per-token training loss
  std::vector<double> val_loss;                        // per-token, empty without a val split
  TrainState state;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, std::optional<double> val_loss)>;

// Skeleton indices of every record in a split.
struct SkelExample {
  const FeatureGrid* grid;
  std::vector<int> gold;
};
std::vector<SkelExample> skel_examples(const Dataset& data, const std::string& split,
                                       const Vocabulary& skel_vocab, std::size_t limit = 0);

// Per-token loss of a frozen model over examples, batched.
double skel_eval_loss(const SkelNet& net, const std::vector<SkelExample>& examples,
                      std::size_t batch_size);

TrainReport train_skel(SkelNet& net, const std::vector<SkelExample>& train,
                       const std::vector<SkelExample>& val, const TrainOptions& options,
                       TrainState state, const EpochCallback& on_epoch = {});

// Attribute-decoder training instances with conditioning precomputed from a
// frozen, teacher-forced skeleton model.
struct AttrExamples {
  std::vector<float> z, s, h;  // row-major [N, D], [N, m_s], [N, n_s]
  std::vector<std::vector<int>> gold;
  std::size_t size() const { return gold.size(); }
};
AttrExamples attr_examples(const Dataset& data, const std::string& split, const SkelNet& skel,
                           const Vocabulary& skel_vocab, const Vocabulary& attr_vocab,
                           const AttrConfig& config, std::size_t limit = 0);

double attr_eval_loss(const AttrNet& net, const AttrExamples& examples, std::size_t batch_size);

TrainReport train_attr(AttrNet& net, const AttrExamples& train, const AttrExamples& val,
                       const TrainOptions& options, TrainState state, const EpochCallback& on_epoch = {});

// A model directory: checkpoint (manifest.txt, weights.bin), vocabularies
// and optimizer state.
struct SkelModel {
  SkelNet net;
  Vocabulary vocab;
  TrainState state;
};
struct AttrModel {
  AttrNet net;
  Vocabulary vocab;
  std::string skel_vocab_hash;
  TrainState state;
};

void save_skel_model(const std::string& dir, const SkelNet& net, const Vocabulary& vocab,
                     const TrainState& state);
SkelModel load_skel_model(const std::string& dir);
void save_attr_model(const std::string& dir, const AttrNet& net, const Vocabulary& vocab,
                     const Vocabulary& skel_vocab, const TrainState& state);
AttrModel load_attr_model(const std::string& dir);

void write_loss_curve(const std::string& path, const std::vector<std::pair<std::size_t, double>>& curve,
                      bool append = false);

}  // namespace skelcap
