#include "skelcap/features.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace skelcap {

static_assert(std::endian::native == std::endian::little,
              "feature and checkpoint files are written in host order");

FeatureGrid::FeatureGrid(std::size_t side, std::size_t dim)
    : side_(side), dim_(dim), values_(side * side * dim, 0.0f) {
  if (side == 0) throw std::invalid_argument("feature grid side must be >= 1");
}

FeatureGrid::FeatureGrid(std::size_t side, std::size_t dim, std::vector<float> values)
    : side_(side), dim_(dim), values_(std::move(values)) {
  if (side == 0) throw std::invalid_argument("feature grid side must be >= 1");
  if (values_.size() != side * side * dim)
    throw std::invalid_argument("feature grid expects " + std::to_string(side * side * dim) +
                                " values, got " + std::to_string(values_.size()));
  for (float v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("feature grid contains non-finite value");
}

std::span<float> FeatureGrid::at(std::size_t i, std::size_t j) {
  return {values_.data() + (i * side_ + j) * dim_, dim_};
}

std::span<const float> FeatureGrid::at(std::size_t i, std::size_t j) const {
  return {values_.data() + (i * side_ + j) * dim_, dim_};
}

std::span<const float> FeatureGrid::location(std::size_t k) const {
  return {values_.data() + k * dim_, dim_};
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error("truncated feature file: " + path);
  return v;
}

}  // namespace

void write_features(const std::string& path,
                    const std::vector<std::pair<std::string, const FeatureGrid*>>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature file: " + path);
  for (const auto& [id, grid] : records) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    put_u32(out, static_cast<std::uint32_t>(grid->side()));
    put_u32(out, static_cast<std::uint32_t>(grid->dim()));
    out.write(reinterpret_cast<const char*>(grid->values().data()),
              static_cast<std::streamsize>(grid->values().size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing feature file: " + path);
}

FeatureTable read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file: " + path);
  FeatureTable table;
  while (in.peek() != std::char_traits<char>::eof()) {
    std::uint32_t len = get_u32(in, path);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw std::runtime_error("truncated feature file: " + path);
    std::uint32_t side = get_u32(in, path);
    std::uint32_t dim = get_u32(in, path);
    std::vector<float> values(static_cast<std::size_t>(side) * side * dim);
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float))))
      throw std::runtime_error("truncated feature file: " + path);
    if (!table.emplace(id, FeatureGrid(side, dim, std::move(values))).second)
      throw std::runtime_error("duplicate image id in feature file: " + id);
  }
  return table;
}

}  // namespace skelcap
