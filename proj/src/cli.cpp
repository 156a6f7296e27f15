#include "skelcap/cli.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "skelcap/corpus.hpp"
#include "skelcap/decompose.hpp"
#include "skelcap/logging.hpp"
#include "skelcap/metrics.hpp"
#include "skelcap/modelcheck.hpp"
#include "skelcap/pipeline.hpp"
#include "skelcap/synth.hpp"
#include "skelcap/train.hpp"
#include "skelcap/treebank.hpp"

namespace skelcap {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

ojson default_config() {
  ojson c;
  c["seed"] = 1;
  c["workers"] = 1;
  c["log_level"] = "info";
  c["synth"] = ojson::parse(SynthConfig{}.to_json());
  c["vocab"] = {{"skeleton_threshold", 5}, {"attribute_threshold", 3}};
  c["skel"] = {{"embed", 64},
               {"hidden", 128},
               {"attention_width", 128},
               {"attention", true},
               {"full_rerun_per_location", false}};
  c["attr"] = {{"fuse_width", 128},
               {"embed", 64},
               {"hidden", 128},
               {"use_post_word_alpha", true},
               {"invoke_on_all_tokens", true},
               {"skel_hidden_source", "current"}};
  c["train_skel"] = {{"epochs", 10}, {"batch_size", 32}, {"learning_rate", 0.01}, {"clip_norm", 5.0}, {"max_train", 0}};
  c["train_attr"] = {{"epochs", 10}, {"batch_size", 64}, {"learning_rate", 0.003}, {"clip_norm", 5.0}, {"max_train", 0}};
  c["decode"] = {{"beam_skel", 3},     {"beam_attr", 2},    {"gamma_skel", 0.0},
                 {"gamma_attr", 0.0},  {"max_len_skel", 16}, {"max_len_attr", 6}};
  return c;
}

namespace {

// Data or contract problems detected by a command (exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_known_keys(const ojson& defaults, const ojson& given, const std::string& path) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!defaults.contains(it.key())) throw DataError("unknown config key " + path + "/" + it.key());
    const auto& d = defaults.at(it.key());
    if (d.is_object()) {
      if (!it.value().is_object()) throw DataError("config key " + path + "/" + it.key() + " must be an object");
      check_known_keys(d, it.value(), path + "/" + it.key());
    }
  }
}

ojson load_config_layers(const std::string& path) {
  ojson config = default_config();
  std::string file = path;
  if (file.empty())
    if (const char* env = std::getenv(kConfigEnv)) file = env;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read config file " + file);
    ojson given;
    try {
      given = ojson::parse(in);
    } catch (const ojson::parse_error& e) {
      throw DataError("config file " + file + ": " + e.what());
    }
    if (!given.is_object()) throw DataError("config file " + file + " must hold a JSON object");
    check_known_keys(config, given, "");
    config.merge_patch(given);
  }
  return config;
}

// Command-line flags that override config entries.
struct Overrides {
  std::vector<std::function<void(ojson&)>> apply;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& desc) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, desc + " [" + pointer.substr(1) + "]");
    apply.push_back([opt, value, pointer](ojson& j) {
      if (opt->count()) j[ojson::json_pointer(pointer)] = *value;
    });
    return opt;
  }
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void echo_config(const fs::path& path, const ojson& config) { write_file(path, config.dump(2) + "\n"); }

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::debug;
  if (s == "info") return log::Level::info;
  if (s == "warning") return log::Level::warning;
  if (s == "error") return log::Level::error;
  if (s == "quiet") return log::Level::quiet;
  throw DataError("unknown log level '" + s + "'");
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
  return s;
}

TrainOptions train_options(const ojson& section, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = section.at("epochs");
  o.batch_size = section.at("batch_size");
  o.learning_rate = section.at("learning_rate");
  o.clip_norm = section.at("clip_norm");
  o.max_train = section.at("max_train");
  o.seed = seed;
  if (o.batch_size == 0) throw DataError("batch_size must be positive");
  return o;
}

void require_exists(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw DataError(what + " not found: " + path);
}

// ---- synth ----

int cmd_synth(const ojson& config, const std::string& out_dir, std::ostream& out) {
  SynthConfig sc = SynthConfig::from_json(config.at("synth").dump());
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  auto data = synth_generate(sc, config.at("seed").get<std::uint64_t>());
  auto manifest = write_synth_dataset(data, out_dir);
  echo_config(fs::path(out_dir) / "effective_config.json", config);
  out << "wrote " << data.samples.size() << " samples (" << sc.train_count << " train, " << sc.val_count
      << " val, " << sc.test_count << " test) to " << manifest << '\n';
  return kExitOk;
}

// ---- decompose ----

int cmd_decompose(const std::string& trees_path, const std::string& out_path, std::ostream& out,
                  std::ostream& err) {
  require_exists(trees_path, "tree file");
  auto lines = read_tree_file(trees_path);
  std::ostringstream dump;
  std::size_t skeleton_tokens = 0, heads = 0, attributes = 0;
  for (const auto& tl : lines) {
    auto d = decompose(tl.tree);
    if (fuse(d) != leaves(tl.tree))
      throw DataError("roundtrip violation at line " + std::to_string(tl.line_number));
    std::string line = format_decomposition(d);
    auto back = parse_decomposition(line);
    if (format_decomposition(back) != line || fuse(back) != fuse(d))
      throw DataError("dump does not reparse at line " + std::to_string(tl.line_number));
    dump << line << '\n';
    skeleton_tokens += d.skeleton.size();
    for (const auto& t : d.skeleton)
      if (t.is_np_head) {
        ++heads;
        attributes += t.attributes.size();
      }
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "captions %zu\nmean_skeleton_length %.4f\nnp_heads %zu\nmean_attributes_per_np_head %.4f\n",
                lines.size(), lines.empty() ? 0.0 : static_cast<double>(skeleton_tokens) / static_cast<double>(lines.size()),
                heads, heads ? static_cast<double>(attributes) / static_cast<double>(heads) : 0.0);
  if (out_path.empty()) {
    out << dump.str();
    err << buf;
  } else {
    write_file(out_path, dump.str());
    out << buf;
  }
  return kExitOk;
}

// ---- training ----

SkelConfig skel_config_from(const ojson& c, std::size_t vocab, const Dataset& data) {
  if (data.features.empty()) throw DataError("dataset has no features");
  const auto& g = data.features.begin()->second;
  SkelConfig s;
  s.vocab_size = vocab;
  s.grid = g.side();
  s.feature_dim = g.dim();
  s.embed = c.at("embed");
  s.hidden = c.at("hidden");
  s.attention_width = c.at("attention_width");
  s.attention = c.at("attention");
  s.full_rerun_per_location = c.at("full_rerun_per_location");
  return s;
}

AttrConfig attr_config_from(const ojson& c, std::size_t vocab, const SkelConfig& skel) {
  AttrConfig a;
  a.vocab_size = vocab;
  a.feature_dim = skel.feature_dim;
  a.skel_embed = skel.embed;
  a.skel_hidden = skel.hidden;
  a.fuse_width = c.at("fuse_width");
  a.embed = c.at("embed");
  a.hidden = c.at("hidden");
  a.use_post_word_alpha = c.at("use_post_word_alpha");
  a.invoke_on_all_tokens = c.at("invoke_on_all_tokens");
  a.hidden_source = hidden_source_from_string(c.at("skel_hidden_source"));
  return a;
}

std::vector<DecomposedCaption> decompositions(const Dataset& data, const std::string& split) {
  std::vector<DecomposedCaption> out;
  for (const auto* r : data.split(split)) out.push_back(r->decomposition);
  if (out.empty()) throw DataError("split '" + split + "' is empty");
  return out;
}

EpochCallback progress(const std::string& what) {
  return [what](std::size_t epoch, double train, std::optional<double> val) {
    char buf[160];
    if (val)
      std::snprintf(buf, sizeof buf, "%s epoch %zu: train %.4f val %.4f", what.c_str(), epoch, train, *val);
    else
      std::snprintf(buf, sizeof buf, "%s epoch %zu: train %.4f", what.c_str(), epoch, train);
    log::info(buf);
  };
}

int cmd_train_skel(const ojson& config, const std::string& data_path, const std::string& out_dir, bool resume,
                   std::ostream& out) {
  require_exists(data_path, "dataset manifest");
  Dataset data = load_dataset(data_path);
  auto options = train_options(config.at("train_skel"), config.at("seed"));
  std::optional<SkelModel> model;
  if (resume) {
    model.emplace(load_skel_model(out_dir));
  } else {
    auto vocab = Vocabulary::build_skeleton(decompositions(data, "train"),
                                            config.at("vocab").at("skeleton_threshold"));
    auto sc = skel_config_from(config.at("skel"), vocab.size(), data);
    model.emplace(SkelModel{SkelNet(sc, config.at("seed").get<std::uint64_t>()), std::move(vocab), TrainState{}});
  }
  auto train = skel_examples(data, "train", model->vocab, options.max_train);
  auto val = skel_examples(data, "val", model->vocab);
  auto report = train_skel(model->net, train, val, options, model->state, progress("skel"));
  save_skel_model(out_dir, model->net, model->vocab, report.state);
  write_loss_curve((fs::path(out_dir) / "loss.tsv").string(), report.curve, resume);
  echo_config(fs::path(out_dir) / "effective_config.json", config);
  out << "skeleton model: " << report.state.epochs_done << " epochs, step " << model->net.params().step()
      << ", vocabulary " << model->vocab.size() << ", final train loss "
      << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()) << '\n';
  return kExitOk;
}

int cmd_train_attr(const ojson& config, const std::string& data_path, const std::string& skel_dir,
                   const std::string& out_dir, bool resume, std::ostream& out) {
  require_exists(data_path, "dataset manifest");
  Dataset data = load_dataset(data_path);
  SkelModel skel = load_skel_model(skel_dir);
  auto options = train_options(config.at("train_attr"), config.at("seed"));
  std::optional<AttrModel> model;
  if (resume) {
    model.emplace(load_attr_model(out_dir));
    if (model->skel_vocab_hash != skel.vocab.hash())
      throw DataError("attribute checkpoint was trained against a different skeleton vocabulary");
  } else {
    auto vocab = Vocabulary::build_attribute(decompositions(data, "train"),
                                             config.at("vocab").at("attribute_threshold"));
    auto ac = attr_config_from(config.at("attr"), vocab.size(), skel.net.config());
    model.emplace(AttrModel{AttrNet(ac, config.at("seed").get<std::uint64_t>() + 1), std::move(vocab),
                            skel.vocab.hash(), TrainState{}});
  }
  const auto& ac = model->net.config();
  auto train = attr_examples(data, "train", skel.net, skel.vocab, model->vocab, ac, options.max_train);
  auto val = attr_examples(data, "val", skel.net, skel.vocab, model->vocab, ac);
  auto report = train_attr(model->net, train, val, options, model->state, progress("attr"));
  save_attr_model(out_dir, model->net, model->vocab, skel.vocab, report.state);
  write_loss_curve((fs::path(out_dir) / "loss.tsv").string(), report.curve, resume);
  echo_config(fs::path(out_dir) / "effective_config.json", config);
  out << "attribute model: " << report.state.epochs_done << " epochs, step " << model->net.params().step()
      << ", vocabulary " << model->vocab.size() << ", " << train.size() << " training tokens\n";
  return kExitOk;
}

// ---- caption ----

struct CaptionFlags {
  std::string data, skel, attr, out, split = "test", ids = "all", trace;
};

int cmd_caption(const ojson& config, const CaptionFlags& f, std::ostream& out) {
  require_exists(f.data, "dataset manifest");
  Dataset data = load_dataset(f.data);
  SkelModel skel = load_skel_model(f.skel);
  AttrModel attr = load_attr_model(f.attr);
  if (attr.skel_vocab_hash != skel.vocab.hash())
    throw DataError("attribute checkpoint was trained against a different skeleton vocabulary");

  // Decode-time attribute switches come from the config layers.
  AttrConfig ac = attr.net.config();
  const auto& cattr = config.at("attr");
  ac.use_post_word_alpha = cattr.at("use_post_word_alpha");
  ac.invoke_on_all_tokens = cattr.at("invoke_on_all_tokens");
  ac.hidden_source = hidden_source_from_string(cattr.at("skel_hidden_source"));
  AttrNet attr_net(ac, attr.net.params());

  const auto& d = config.at("decode");
  CaptionConfig cc;
  cc.skel = BeamConfig{d.at("beam_skel"), d.at("gamma_skel"), d.at("max_len_skel")};
  cc.attr = BeamConfig{d.at("beam_attr"), d.at("gamma_attr"), d.at("max_len_attr")};
  try {
    cc.skel.validate();
    cc.attr.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  std::vector<std::string> ids;
  if (f.ids == "all") {
    auto it = data.manifest.splits.find(f.split);
    if (it == data.manifest.splits.end() || it->second.empty())
      throw DataError("split '" + f.split + "' is empty or missing");
    ids = it->second;
  } else {
    std::stringstream ss(f.ids);
    std::string id;
    while (std::getline(ss, id, ','))
      if (!id.empty()) ids.push_back(id);
  }
  for (const auto& id : ids)
    if (!data.features.count(id)) throw DataError("no features for image " + id);

  Captioner captioner{skel.net, attr_net, skel.vocab, attr.vocab, cc};
  std::vector<CaptionResult> results(ids.size());
  std::size_t workers = std::max<std::size_t>(1, config.at("workers").get<std::size_t>());
  workers = std::min(workers, ids.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < ids.size();) {
      try {
        results[i] = captioner.caption(data.features.at(ids[i]));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = ids.size();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::ostringstream captions, trace;
  std::size_t empty = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    captions << ids[i] << '\t' << join(results[i].caption) << '\n';
    if (results[i].empty_skeleton) ++empty;
    if (!f.trace.empty()) write_trace(trace, ids[i], results[i], skel.net.config().grid);
  }
  write_file(f.out, captions.str());
  if (!f.trace.empty()) write_file(f.trace, trace.str());
  echo_config(f.out + ".config.json", config);
  out << "captioned " << ids.size() << " images into " << f.out;
  if (empty) out << " (" << empty << " empty skeletons)";
  out << '\n';
  return kExitOk;
}

// ---- eval ----

std::vector<std::pair<std::string, Tokens>> read_tokenized(const std::string& path, bool keep_empty) {
  require_exists(path, "caption file");
  std::vector<std::pair<std::string, Tokens>> out;
  for (auto& [id, raw] : read_caption_lines(path)) {
    auto t = preprocess(raw);
    if (!t && !keep_empty) {
      log::warning("skipping caption with no tokens for " + id + " in " + path);
      continue;
    }
    out.emplace_back(id, t ? std::move(*t) : Tokens{});
  }
  return out;
}

struct EvalFlags {
  std::string candidates, references, train, json_out, out;
  bool without_a = false;
  bool uniqueness = false;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  auto cands = read_tokenized(f.candidates, true);
  auto refs = read_tokenized(f.references, false);
  std::map<std::string, std::vector<Tokens>> by_id;
  for (auto& [id, t] : refs) by_id[id].push_back(std::move(t));
  std::vector<EvalPair> pairs;
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (auto& [id, t] : cands) {
    if (!seen.insert(id).second) throw DataError("duplicate candidate for image " + id);
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("no reference captions for image " + id);
    pairs.push_back({t, it->second});
    ids.push_back(id);
  }
  if (pairs.empty()) throw DataError("no candidate captions to evaluate");
  EvalReport report = evaluate(pairs, f.without_a);
  report.image_ids = ids;
  if (f.uniqueness || !f.train.empty()) {
    std::vector<Tokens> generated;
    for (const auto& p : pairs) generated.push_back(f.without_a ? strip_article(p.candidate) : p.candidate);
    std::optional<std::set<Tokens>> training;
    if (!f.train.empty()) {
      training.emplace();
      for (auto& [id, t] : read_tokenized(f.train, false)) training->insert(f.without_a ? strip_article(t) : t);
    }
    report.uniqueness = uniqueness_stats(generated, training);
  }
  if (f.out.empty())
    out << report.to_text();
  else
    write_file(f.out, report.to_text());
  if (!f.json_out.empty()) write_file(f.json_out, report.to_json() + "\n");
  return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(std::uint64_t seed, double tolerance, std::ostream& out) {
  nn::GradCheckOptions options;
  options.tolerance = tolerance;
  auto r = check_model_gradients(seed, options);
  auto line = [&](const char* name, const nn::GradCheckReport& g) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-18s %s max_rel_error %.3e over %zu coordinates (worst %s[%zu])\n", name,
                  g.passed ? "PASS" : "FAIL", g.max_rel_error, g.checked, g.worst_parameter.c_str(),
                  g.worst_index);
    out << buf;
  };
  line("skel", r.skel);
  line("skel-no-attention", r.skel_no_attention);
  line("attr", r.attr);
  return r.passed() ? kExitOk : kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coarse-to-fine captioning: skeleton/attribute decomposition, two-stage decoding, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, std::string("Layered JSON config (default: $") + kConfigEnv + ")");
  Overrides ov;
  ov.add<std::uint64_t>(&app, "--seed", "/seed", "Random seed");
  ov.add<std::string>(&app, "--log-level", "/log_level", "debug|info|warning|error|quiet");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene-caption dataset");
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  ov.add<std::size_t>(synth, "--train", "/synth/train_count", "Training samples");
  ov.add<std::size_t>(synth, "--val", "/synth/val_count", "Validation samples");
  ov.add<std::size_t>(synth, "--test", "/synth/test_count", "Test samples");
  ov.add<double>(synth, "--noise", "/synth/noise", "Gaussian feature noise");
  ov.add<std::size_t>(synth, "--grid", "/synth/grid", "Grid side L");
  ov.add<std::size_t>(synth, "--dim", "/synth/dim", "Feature dimension D");
  ov.add<std::size_t>(synth, "--max-objects", "/synth/max_objects", "Objects per scene");
  ov.add<std::size_t>(synth, "--max-attributes", "/synth/max_attributes", "Attributes per object");

  // decompose
  auto* dec = app.add_subcommand("decompose", "Dump skeleton/attribute decompositions of a tree file");
  std::string dec_trees, dec_out;
  dec->add_option("--trees", dec_trees, "Tree file, one bracketed tree per line")->required();
  dec->add_option("--out", dec_out, "Dump file (default: stdout)");

  // train-skel
  auto* ts = app.add_subcommand("train-skel", "Train the skeleton decoder");
  std::string ts_data, ts_out;
  bool ts_resume = false;
  ts->add_option("--data", ts_data, "Dataset manifest")->required();
  ts->add_option("--out", ts_out, "Model directory")->required();
  ts->add_flag("--resume", ts_resume, "Continue from the checkpoint in --out");
  ov.add<std::size_t>(ts, "--epochs", "/train_skel/epochs", "Epochs");
  ov.add<std::size_t>(ts, "--batch-size", "/train_skel/batch_size", "Batch size");
  ov.add<double>(ts, "--lr", "/train_skel/learning_rate", "Adagrad learning rate");
  ov.add<std::size_t>(ts, "--max-train", "/train_skel/max_train", "Use at most this many training captions");
  ov.add<std::size_t>(ts, "--hidden", "/skel/hidden", "LSTM hidden size");
  ov.add<std::size_t>(ts, "--embed", "/skel/embed", "Word embedding size");
  ov.add<bool>(ts, "--attention", "/skel/attention", "Spatial attention on/off");
  ov.add<std::size_t>(ts, "--threshold", "/vocab/skeleton_threshold", "Vocabulary count threshold");

  // train-attr
  auto* ta = app.add_subcommand("train-attr", "Train the attribute decoder against a frozen skeleton model");
  std::string ta_data, ta_skel, ta_out;
  bool ta_resume = false;
  ta->add_option("--data", ta_data, "Dataset manifest")->required();
  ta->add_option("--skel", ta_skel, "Skeleton model directory")->required();
  ta->add_option("--out", ta_out, "Model directory")->required();
  ta->add_flag("--resume", ta_resume, "Continue from the checkpoint in --out");
  ov.add<std::size_t>(ta, "--epochs", "/train_attr/epochs", "Epochs");
  ov.add<std::size_t>(ta, "--batch-size", "/train_attr/batch_size", "Batch size");
  ov.add<double>(ta, "--lr", "/train_attr/learning_rate", "Adagrad learning rate");
  ov.add<std::size_t>(ta, "--max-train", "/train_attr/max_train", "Use at most this many training captions");
  ov.add<std::size_t>(ta, "--hidden", "/attr/hidden", "LSTM hidden size");
  ov.add<bool>(ta, "--post-word-alpha", "/attr/use_post_word_alpha", "Condition on post-word attention");
  ov.add<bool>(ta, "--all-tokens", "/attr/invoke_on_all_tokens", "Train on every skeleton token");
  ov.add<std::string>(ta, "--hidden-source", "/attr/skel_hidden_source", "previous|current|final");
  ov.add<std::size_t>(ta, "--threshold", "/vocab/attribute_threshold", "Vocabulary count threshold");

  // caption
  auto* cap = app.add_subcommand("caption", "Generate captions with both decoders");
  CaptionFlags cf;
  cap->add_option("--data", cf.data, "Dataset manifest")->required();
  cap->add_option("--skel", cf.skel, "Skeleton model directory")->required();
  cap->add_option("--attr", cf.attr, "Attribute model directory")->required();
  cap->add_option("--out", cf.out, "Caption file (image_id<TAB>caption)")->required();
  cap->add_option("--split", cf.split, "Split to caption when --ids is all");
  cap->add_option("--ids", cf.ids, "Comma-separated image ids, or all");
  cap->add_option("--trace", cf.trace, "Trace file with skeletons, attributes and attention maps");
  ov.add<double>(cap, "--gamma-skel", "/decode/gamma_skel", "Skeleton length factor");
  ov.add<double>(cap, "--gamma-attr", "/decode/gamma_attr", "Attribute length factor");
  ov.add<std::size_t>(cap, "--beam-skel", "/decode/beam_skel", "Skeleton beam size");
  ov.add<std::size_t>(cap, "--beam-attr", "/decode/beam_attr", "Attribute beam size");
  ov.add<std::size_t>(cap, "--max-len-skel", "/decode/max_len_skel", "Skeleton length limit (EOS included)");
  ov.add<std::size_t>(cap, "--max-len-attr", "/decode/max_len_attr", "Attribute length limit (EOS included)");
  ov.add<bool>(cap, "--post-word-alpha", "/attr/use_post_word_alpha", "Condition attributes on post-word attention");
  ov.add<bool>(cap, "--all-tokens", "/attr/invoke_on_all_tokens", "Decode attributes for every skeleton token");
  ov.add<std::size_t>(cap, "--workers", "/workers", "Worker threads");

  // eval
  auto* ev = app.add_subcommand("eval", "Score captions against references");
  EvalFlags ef;
  ev->add_option("--candidates", ef.candidates, "Candidate captions (image_id<TAB>caption)")->required();
  ev->add_option("--references", ef.references, "Reference captions, several lines per image allowed")->required();
  ev->add_flag("--without-a", ef.without_a, "Remove every 'a' before scoring");
  ev->add_flag("--uniqueness", ef.uniqueness, "Report the share of distinct captions");
  ev->add_option("--uniqueness-train", ef.train, "Training captions for the seen-in-training share");
  ev->add_option("--json", ef.json_out, "Machine-readable report");
  ev->add_option("--out", ef.out, "Text report (default: stdout)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of both decoders");
  double tolerance = 1e-4;
  gc->add_option("--tolerance", tolerance, "Maximum relative error");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ojson config = load_config_layers(config_path);
    for (auto& f : ov.apply) f(config);
    log::set_level(parse_level(config.at("log_level")));
    if (synth->parsed()) return cmd_synth(config, synth_out, out);
    if (dec->parsed()) return cmd_decompose(dec_trees, dec_out, out, err);
    if (ts->parsed()) return cmd_train_skel(config, ts_data, ts_out, ts_resume, out);
    if (ta->parsed()) return cmd_train_attr(config, ta_data, ta_skel, ta_out, ta_resume, out);
    if (cap->parsed()) return cmd_caption(config, cf, out);
    if (ev->parsed()) return cmd_eval(ef, out);
    if (gc->parsed()) return cmd_gradcheck(config.at("seed"), tolerance, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace skelcap
