#include "skelcap/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "skelcap/checkpoint.hpp"
#include "skelcap/logging.hpp"
#include "skelcap/pipeline.hpp"

namespace skelcap {

namespace fs = std::filesystem;
using nn::Var;

std::string TrainState::to_json() const {
  nlohmann::json j{{"learning_rate", learning_rate}, {"halved", halved}, {"epochs_done", epochs_done}};
  j["best_val"] = best_val ? nlohmann::json(*best_val) : nlohmann::json(nullptr);
  return j.dump();
}

TrainState TrainState::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  TrainState s;
  s.learning_rate = j.at("learning_rate");
  s.halved = j.at("halved");
  s.epochs_done = j.at("epochs_done");
  if (!j.at("best_val").is_null()) s.best_val = j.at("best_val").get<double>();
  return s;
}

namespace {

struct BatchLoss {
  double loss = 0.0;
  std::size_t tokens = 0;
};

// Shared epoch loop: shuffles with a per-epoch seed, clips, applies Adagrad,
// and halves the learning rate once when validation loss stops improving.
template <typename Store, typename LossFn, typename ValFn>
TrainReport run_training(Store& store, std::size_t n, LossFn&& batch_loss, ValFn&& val_loss,
                         const TrainOptions& options, TrainState state, const EpochCallback& on_epoch) {
  if (n == 0) throw std::invalid_argument("no training examples");
  if (options.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(options.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (state.learning_rate <= 0.0) state.learning_rate = options.learning_rate;
  auto started = std::chrono::steady_clock::now();
  TrainReport report;
  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < options.epochs; ++e) {
    const std::size_t epoch = state.epochs_done;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t begin = 0; begin < n; begin += options.batch_size) {
      std::size_t end = std::min(n, begin + options.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      store.zero_grad();
      BatchLoss bl = batch_loss(idx);
      store.clip_grad_norm(options.clip_norm);
      nn::adagrad_step(store, state.learning_rate, options.epsilon);
      total += bl.loss;
      tokens += bl.tokens;
      report.curve.emplace_back(store.step(), bl.loss / static_cast<double>(std::max<std::size_t>(bl.tokens, 1)));
    }
    double train_loss = total / static_cast<double>(std::max<std::size_t>(tokens, 1));
    report.epoch_loss.push_back(train_loss);
    std::optional<double> val = val_loss();
    if (val) {
      report.val_loss.push_back(*val);
      if (state.best_val && !(*val < *state.best_val) && !state.halved) {
        state.learning_rate /= 2.0;
        state.halved = true;
        log::info("validation loss stopped improving; learning rate halved to " +
                  std::to_string(state.learning_rate));
      }
      if (!state.best_val || *val < *state.best_val) state.best_val = *val;
    }
    ++state.epochs_done;
    if (on_epoch) on_epoch(state.epochs_done, train_loss, val);
  }
  report.state = state;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<const FeatureGrid*> grids_of(const std::vector<SkelExample>& ex, const std::vector<std::size_t>& idx) {
  std::vector<const FeatureGrid*> out;
  for (auto i : idx) out.push_back(ex[i].grid);
  return out;
}

std::vector<std::vector<int>> golds_of(const std::vector<SkelExample>& ex, const std::vector<std::size_t>& idx) {
  std::vector<std::vector<int>> out;
  for (auto i : idx) out.push_back(ex[i].gold);
  return out;
}

nn::Tensor rows_of(const std::vector<float>& data, std::size_t width, const std::vector<std::size_t>& idx) {
  nn::Tensor t = nn::Tensor::matrix(idx.size(), width);
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[r] * width), width, t.data() + r * width);
  return t;
}

}  // namespace

std::vector<SkelExample> skel_examples(const Dataset& data, const std::string& split,
                                       const Vocabulary& skel_vocab, std::size_t limit) {
  std::vector<SkelExample> out;
  for (const auto* r : data.split(split)) {
    if (limit && out.size() >= limit) break;
    out.push_back({&data.features_of(r->image_id), skel_vocab.encode(r->decomposition.skeleton_words())});
  }
  return out;
}

double skel_eval_loss(const SkelNet& net, const std::vector<SkelExample>& examples, std::size_t batch_size) {
  if (examples.empty()) throw std::invalid_argument("skel_eval_loss: no examples");
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(examples.size(), begin + batch_size); ++i) idx.push_back(i);
    nn::Graph g(false);
    auto b = net.bind(g);
    auto u = net.teacher_forced(g, b, grids_of(examples, idx), golds_of(examples, idx));
    total += g.value(u.loss)[0];
    tokens += u.tokens;
  }
  return total / static_cast<double>(tokens);
}

TrainReport train_skel(SkelNet& net, const std::vector<SkelExample>& train,
                       const std::vector<SkelExample>& val, const TrainOptions& options, TrainState state,
                       const EpochCallback& on_epoch) {
  auto batch = [&](const std::vector<std::size_t>& idx) {
    nn::Graph g;
    auto b = net.bind(g);
    auto u = net.teacher_forced(g, b, grids_of(train, idx), golds_of(train, idx));
    g.backward(g.scale(u.loss, 1.0f / static_cast<float>(idx.size())));
    return BatchLoss{g.value(u.loss)[0], u.tokens};
  };
  auto validate = [&]() -> std::optional<double> {
    if (val.empty()) return std::nullopt;
    return skel_eval_loss(net, val, options.batch_size);
  };
  return run_training(net.params(), train.size(), batch, validate, options, std::move(state), on_epoch);
}

AttrExamples attr_examples(const Dataset& data, const std::string& split, const SkelNet& skel,
                           const Vocabulary& skel_vocab, const Vocabulary& attr_vocab,
                           const AttrConfig& config, std::size_t limit) {
  AttrExamples out;
  std::size_t records = 0;
  for (const auto* r : data.split(split)) {
    if (limit && records >= limit) break;
    ++records;
    const auto& grid = data.features_of(r->image_id);
    auto gold = skel_vocab.encode(r->decomposition.skeleton_words());
    auto history = record_gold(skel, grid, gold);
    for (std::size_t t = 0; t < gold.size(); ++t) {
      if (!config.invoke_on_all_tokens && !skel_vocab.is_nounlike(gold[t])) continue;
      auto cond = attr_conditioning(skel, config, grid, history, t, gold[t]);
      out.z.insert(out.z.end(), cond.z.begin(), cond.z.end());
      out.s.insert(out.s.end(), cond.s.begin(), cond.s.end());
      out.h.insert(out.h.end(), cond.h.begin(), cond.h.end());
      out.gold.push_back(attr_vocab.encode(r->decomposition.skeleton[t].attributes));
    }
  }
  return out;
}

namespace {

template <typename G, typename Net, typename B>
typename Net::Loss attr_batch(G& g, const Net& net, const B& b, const AttrExamples& ex,
                              const std::vector<std::size_t>& idx) {
  const auto& c = net.config();
  Var z = g.constant(rows_of(ex.z, c.feature_dim, idx));
  Var s = g.constant(rows_of(ex.s, c.skel_embed, idx));
  Var h = g.constant(rows_of(ex.h, c.skel_hidden, idx));
  std::vector<std::vector<int>> gold;
  for (auto i : idx) gold.push_back(ex.gold[i]);
  return net.teacher_forced(g, b, z, s, h, gold);
}

}  // namespace

double attr_eval_loss(const AttrNet& net, const AttrExamples& examples, std::size_t batch_size) {
  if (examples.size() == 0) throw std::invalid_argument("attr_eval_loss: no examples");
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(examples.size(), begin + batch_size); ++i) idx.push_back(i);
    nn::Graph g(false);
    auto b = net.bind(g);
    auto l = attr_batch(g, net, b, examples, idx);
    total += g.value(l.loss)[0];
    tokens += l.tokens;
  }
  return total / static_cast<double>(tokens);
}

TrainReport train_attr(AttrNet& net, const AttrExamples& train, const AttrExamples& val,
                       const TrainOptions& options, TrainState state, const EpochCallback& on_epoch) {
  auto batch = [&](const std::vector<std::size_t>& idx) {
    nn::Graph g;
    auto b = net.bind(g);
    auto l = attr_batch(g, net, b, train, idx);
    g.backward(g.scale(l.loss, 1.0f / static_cast<float>(idx.size())));
    return BatchLoss{g.value(l.loss)[0], l.tokens};
  };
  auto validate = [&]() -> std::optional<double> {
    if (val.size() == 0) return std::nullopt;
    return attr_eval_loss(net, val, options.batch_size);
  };
  return run_training(net.params(), train.size(), batch, validate, options, std::move(state), on_epoch);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_hash(const nn::CheckpointMeta& meta, const std::string& role, const Vocabulary& vocab,
                const std::string& dir) {
  auto it = meta.vocab_hashes.find(role);
  if (it == meta.vocab_hashes.end())
    throw std::runtime_error("checkpoint " + dir + " records no " + role + " vocabulary hash");
  if (it->second != vocab.hash())
    throw std::runtime_error("checkpoint " + dir + ": " + role + " vocabulary hash mismatch (" + it->second +
                             " vs " + vocab.hash() + ")");
}

}  // namespace

void save_skel_model(const std::string& dir, const SkelNet& net, const Vocabulary& vocab,
                     const TrainState& state) {
  nn::CheckpointMeta meta{"skel", {{"skeleton", vocab.hash()}}, net.config().to_json()};
  nn::save_checkpoint(dir, net.params(), meta);
  vocab.save((fs::path(dir) / "skel_vocab.txt").string());
  write_text(fs::path(dir) / "train_state.json", state.to_json());
}

SkelModel load_skel_model(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest.txt")) throw std::runtime_error("skeleton checkpoint not found: " + dir);
  auto ck = nn::load_checkpoint(dir);
  if (ck.meta.kind != "skel")
    throw std::runtime_error(dir + " holds a '" + ck.meta.kind + "' checkpoint, expected 'skel'");
  auto vocab = Vocabulary::load((fs::path(dir) / "skel_vocab.txt").string());
  check_hash(ck.meta, "skeleton", vocab, dir);
  auto config = SkelConfig::from_json(ck.meta.config_json);
  if (config.vocab_size != vocab.size())
    throw std::runtime_error("checkpoint " + dir + ": vocabulary size differs from model output size");
  TrainState state = TrainState::from_json(read_text(fs::path(dir) / "train_state.json"));
  return SkelModel{SkelNet(config, std::move(ck.store)), std::move(vocab), state};
}

void save_attr_model(const std::string& dir, const AttrNet& net, const Vocabulary& vocab,
                     const Vocabulary& skel_vocab, const TrainState& state) {
  nn::CheckpointMeta meta{"attr", {{"attribute", vocab.hash()}, {"skeleton", skel_vocab.hash()}},
                          net.config().to_json()};
  nn::save_checkpoint(dir, net.params(), meta);
  vocab.save((fs::path(dir) / "attr_vocab.txt").string());
  write_text(fs::path(dir) / "train_state.json", state.to_json());
}

AttrModel load_attr_model(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest.txt")) throw std::runtime_error("attribute checkpoint not found: " + dir);
  auto ck = nn::load_checkpoint(dir);
  if (ck.meta.kind != "attr")
    throw std::runtime_error(dir + " holds a '" + ck.meta.kind + "' checkpoint, expected 'attr'");
  auto vocab = Vocabulary::load((fs::path(dir) / "attr_vocab.txt").string());
  check_hash(ck.meta, "attribute", vocab, dir);
  auto skel_hash = ck.meta.vocab_hashes.count("skeleton") ? ck.meta.vocab_hashes.at("skeleton") : "";
  auto config = AttrConfig::from_json(ck.meta.config_json);
  if (config.vocab_size != vocab.size())
    throw std::runtime_error("checkpoint " + dir + ": vocabulary size differs from model output size");
  TrainState state = TrainState::from_json(read_text(fs::path(dir) / "train_state.json"));
  return AttrModel{AttrNet(config, std::move(ck.store)), std::move(vocab), skel_hash, state};
}

void write_loss_curve(const std::string& path, const std::vector<std::pair<std::size_t, double>>& curve,
                      bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write loss curve " + path);
  char buf[64];
  for (const auto& [step, loss] : curve) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\n", step, loss);
    out << buf;
  }
}

}  // namespace skelcap
