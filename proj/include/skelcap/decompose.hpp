#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "skelcap/treebank.hpp"

namespace skelcap {

// One word of a skeleton sentence. NP heads (the last word of a lowest-level
// NP) carry the words that preceded them inside that NP as attributes.
struct SkeletonToken {
  std::string surface;
  bool is_np_head = false;
  std::vector<std::string> attributes;

  bool operator==(const SkeletonToken&) const = default;
};

struct DecomposedCaption {
  std::vector<SkeletonToken> skeleton;
  std::size_t original_length = 0;

  std::vector<std::string> skeleton_words() const;
  bool operator==(const DecomposedCaption&) const = default;
};

DecomposedCaption decompose(const ParseTree& tree);

// Attributes re-inserted immediately before their skeletal word.
std::vector<std::string> fuse(const DecomposedCaption& d);

// Same interleaving for decoder output. Throws std::invalid_argument when
// the two sequences differ in length.
std::vector<std::string> fuse_predicted(const std::vector<std::string>& skeleton_words,
                                        const std::vector<std::vector<std::string>>& attrs);

// Dump line: skeleton words separated by spaces, attributed heads written as
// `head{attr1 attr2}`.
std::string format_decomposition(const DecomposedCaption& d);
DecomposedCaption parse_decomposition(std::string_view line);

}  // namespace skelcap
