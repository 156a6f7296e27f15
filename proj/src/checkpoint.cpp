#include "skelcap/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace skelcap::nn {

namespace fs = std::filesystem;

namespace {
const char* kAccumPrefix = "adagrad/";
}

void save_checkpoint(const std::string& dir, const ParameterStore& store, const CheckpointMeta& meta) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  std::ofstream payload(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!manifest || !payload) throw std::runtime_error("cannot write checkpoint in " + dir);

  manifest << "skelcap-checkpoint " << kCheckpointVersion << '\n';
  manifest << "kind " << meta.kind << '\n';
  manifest << "step " << store.step() << '\n';
  for (const auto& [role, hash] : meta.vocab_hashes) manifest << "vocab " << role << ' ' << hash << '\n';
  if (!meta.config_json.empty()) manifest << "config " << meta.config_json << '\n';

  std::size_t offset = 0;
  auto emit = [&](const std::string& name, const Shape& shape, const float* data, std::size_t n) {
    manifest << "tensor " << name << ' ' << shape.size();
    for (auto d : shape) manifest << ' ' << d;
    manifest << ' ' << offset << '\n';
    payload.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
    offset += n * sizeof(float);
  };
  for (const auto* p : store.all()) emit(p->name, p->value.shape(), p->value.data(), p->value.size());
  for (const auto* p : store.all())
    emit(kAccumPrefix + p->name, p->value.shape(), p->accum.data(), p->accum.size());
  if (!manifest || !payload) throw std::runtime_error("failed writing checkpoint in " + dir);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("checkpoint not found: " + dir);
  std::ifstream payload(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!payload) throw std::runtime_error("checkpoint payload missing: " + dir);
  std::vector<char> bytes((std::istreambuf_iterator<char>(payload)), std::istreambuf_iterator<char>());

  LoadedCheckpoint out;
  std::string line;
  std::getline(manifest, line);
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != "skelcap-checkpoint") throw std::runtime_error("not a skelcap checkpoint: " + dir);
    if (version != kCheckpointVersion)
      throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " in " + dir);
  }
  std::map<std::string, std::vector<float>> accums;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      ls >> out.meta.kind;
    } else if (key == "step") {
      std::size_t s = 0;
      ls >> s;
      out.store.set_step(s);
    } else if (key == "vocab") {
      std::string role, hash;
      ls >> role >> hash;
      out.meta.vocab_hashes[role] = hash;
    } else if (key == "config") {
      out.meta.config_json = line.substr(7);
    } else if (key == "tensor") {
      std::string name;
      std::size_t rank = 0;
      ls >> name >> rank;
      Shape shape(rank);
      for (auto& d : shape) ls >> d;
      std::size_t offset = 0;
      if (!(ls >> offset)) throw std::runtime_error("malformed tensor line in " + dir + ": " + line);
      std::size_t n = shape_size(shape);
      if (offset + n * sizeof(float) > bytes.size())
        throw std::runtime_error("tensor " + name + " extends past the payload in " + dir);
      std::vector<float> data(n);
      std::memcpy(data.data(), bytes.data() + offset, n * sizeof(float));
      if (name.rfind(kAccumPrefix, 0) == 0) {
        accums[name.substr(std::string(kAccumPrefix).size())] = std::move(data);
      } else {
        out.store.add(name, Tensor(shape, std::move(data)));
      }
    } else {
      throw std::runtime_error("unknown checkpoint manifest key '" + key + "' in " + dir);
    }
  }
  for (auto& [name, acc] : accums) {
    auto& p = out.store.get(name);
    if (acc.size() != p.value.size()) throw std::runtime_error("accumulator size mismatch for " + name);
    p.accum = std::move(acc);
  }
  return out;
}

}  // namespace skelcap::nn
