#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace skelcap {

// L x L grid of D-dimensional feature vectors, stored row-major with the
// feature index innermost.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t side, std::size_t dim);
  FeatureGrid(std::size_t side, std::size_t dim, std::vector<float> values);

  std::size_t side() const { return side_; }
  std::size_t dim() const { return dim_; }
  std::size_t locations() const { return side_ * side_; }

  std::span<float> at(std::size_t i, std::size_t j);
  std::span<const float> at(std::size_t i, std::size_t j) const;
  std::span<const float> location(std::size_t k) const;

  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  bool operator==(const FeatureGrid&) const = default;

 private:
  std::size_t side_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

using FeatureTable = std::map<std::string, FeatureGrid>;

// Binary feature file: per record a u32 id length, the id bytes, u32 L,
// u32 D, then L*L*D little-endian float32 values.
void write_features(const std::string& path,
                    const std::vector<std::pair<std::string, const FeatureGrid*>>& records);
FeatureTable read_features(const std::string& path);

}  // namespace skelcap
