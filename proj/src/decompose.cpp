#include "skelcap/decompose.hpp"

#include <sstream>
#include <stdexcept>

namespace skelcap {

namespace {

// Walks the tree in leaf order, emitting lowest-level NPs as a unit.
void walk(const ParseNode& node, DecomposedCaption& out) {
  if (node.is_leaf()) {
    out.skeleton.push_back({node.token(), false, {}});
    ++out.original_length;
    return;
  }
  if (is_np(node)) {
    bool lowest = true;
    std::vector<const ParseNode*> stack{&node};
    while (!stack.empty() && lowest) {
      const ParseNode* n = stack.back();
      stack.pop_back();
      for (const auto& c : n->children()) {
        if (is_np(c)) {
          lowest = false;
          break;
        }
        stack.push_back(&c);
      }
    }
    if (lowest) {
      auto words = leaves(node);
      SkeletonToken head{words.back(), true, {}};
      words.pop_back();
      head.attributes = std::move(words);
      out.original_length += head.attributes.size() + 1;
      out.skeleton.push_back(std::move(head));
      return;
    }
  }
  for (const auto& c : node.children()) walk(c, out);
}

}  // namespace

std::vector<std::string> DecomposedCaption::skeleton_words() const {
  std::vector<std::string> out;
  out.reserve(skeleton.size());
  for (const auto& t : skeleton) out.push_back(t.surface);
  return out;
}

DecomposedCaption decompose(const ParseTree& tree) {
  DecomposedCaption out;
  walk(tree.root(), out);
  return out;
}

std::vector<std::string> fuse(const DecomposedCaption& d) {
  std::vector<std::string> out;
  out.reserve(d.original_length);
  for (const auto& t : d.skeleton) {
    out.insert(out.end(), t.attributes.begin(), t.attributes.end());
    out.push_back(t.surface);
  }
  return out;
}

std::vector<std::string> fuse_predicted(const std::vector<std::string>& skeleton_words,
                                        const std::vector<std::vector<std::string>>& attrs) {
  if (skeleton_words.size() != attrs.size())
    throw std::invalid_argument("fuse_predicted: " + std::to_string(skeleton_words.size()) +
                                " skeleton words but " + std::to_string(attrs.size()) +
                                " attribute sequences");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < skeleton_words.size(); ++i) {
    out.insert(out.end(), attrs[i].begin(), attrs[i].end());
    out.push_back(skeleton_words[i]);
  }
  return out;
}

std::string format_decomposition(const DecomposedCaption& d) {
  std::string out;
  for (std::size_t i = 0; i < d.skeleton.size(); ++i) {
    const auto& t = d.skeleton[i];
    if (t.surface.find_first_of("{} ") != std::string::npos)
      throw std::invalid_argument("token cannot be written in a decomposition dump: " + t.surface);
    if (i) out += ' ';
    out += t.surface;
    if (t.attributes.empty()) continue;
    out += '{';
    for (std::size_t k = 0; k < t.attributes.size(); ++k) {
      if (t.attributes[k].find_first_of("{} ") != std::string::npos)
        throw std::invalid_argument("token cannot be written in a decomposition dump: " +
                                    t.attributes[k]);
      if (k) out += ' ';
      out += t.attributes[k];
    }
    out += '}';
  }
  return out;
}

DecomposedCaption parse_decomposition(std::string_view line) {
  DecomposedCaption out;
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < line.size() && line[pos] == ' ') ++pos;
  };
  skip();
  while (pos < line.size()) {
    std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '{') {
      if (line[pos] == '}') throw std::invalid_argument("unexpected '}' in decomposition line");
      ++pos;
    }
    SkeletonToken tok{std::string(line.substr(start, pos - start)), false, {}};
    if (tok.surface.empty()) throw std::invalid_argument("empty skeleton token");
    if (pos < line.size() && line[pos] == '{') {
      auto close = line.find('}', pos);
      if (close == std::string_view::npos) throw std::invalid_argument("unterminated '{'");
      std::istringstream attrs{std::string(line.substr(pos + 1, close - pos - 1))};
      std::string a;
      while (attrs >> a) {
        if (a.find('{') != std::string::npos) throw std::invalid_argument("nested '{'");
        tok.attributes.push_back(a);
      }
      if (tok.attributes.empty()) throw std::invalid_argument("empty attribute group");
      tok.is_np_head = true;
      pos = close + 1;
      if (pos < line.size() && line[pos] != ' ')
        throw std::invalid_argument("missing space after attribute group");
    }
    out.original_length += 1 + tok.attributes.size();
    out.skeleton.push_back(std::move(tok));
    skip();
  }
  return out;
}

}  // namespace skelcap
