#include "skelcap/treebank.hpp"

#include <cctype>
#include <fstream>

namespace skelcap {

ParseNode ParseNode::leaf(std::string label, std::string token) {
  if (label.empty()) throw std::invalid_argument("parse node label must be non-empty");
  if (token.empty()) throw std::invalid_argument("leaf token must be non-empty");
  ParseNode n;
  n.label_ = std::move(label);
  n.token_ = std::move(token);
  return n;
}

ParseNode ParseNode::phrase(std::string label, std::vector<ParseNode> children) {
  if (label.empty()) throw std::invalid_argument("parse node label must be non-empty");
  if (children.empty()) throw std::invalid_argument("phrase node needs at least one child");
  ParseNode n;
  n.label_ = std::move(label);
  n.children_ = std::move(children);
  return n;
}

std::string_view ParseNode::base_label() const {
  std::string_view l = label_;
  // Keep a leading '-' so labels like "-NONE-" survive.
  auto cut = l.find_first_of("-=", 1);
  return cut == std::string_view::npos ? l : l.substr(0, cut);
}

bool is_np(const ParseNode& node) { return !node.is_leaf() && node.base_label() == "NP"; }

namespace {

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  ParseNode read_tree() {
    skip_space();
    if (at_end()) throw ParseError("empty input", pos_);
    ParseNode root = read_node();
    skip_space();
    if (!at_end()) throw ParseError("trailing characters after tree", pos_);
    return root;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }

  std::string read_atom() {
    std::size_t start = pos_;
    while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != '(' &&
           peek() != ')')
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void expect_close() {
    skip_space();
    if (at_end()) throw ParseError("unbalanced parentheses", pos_);
    if (peek() != ')') throw ParseError("expected ')'", pos_);
    ++pos_;
  }

  ParseNode read_node() {
    std::size_t open = pos_;
    if (peek() != '(') throw ParseError("expected '('", pos_);
    ++pos_;
    skip_space();
    if (at_end()) throw ParseError("unbalanced parentheses", pos_);
    if (peek() == ')') throw ParseError("empty node", open);

    std::string label;
    if (peek() != '(') label = read_atom();
    skip_space();
    if (at_end()) throw ParseError("unbalanced parentheses", pos_);

    if (peek() != '(' && peek() != ')') {
      std::string token = read_atom();
      skip_space();
      if (!at_end() && peek() != ')') throw ParseError("leaf node with more than one token", pos_);
      expect_close();
      if (label.empty()) throw ParseError("leaf without a label", open);
      return ParseNode::leaf(std::move(label), std::move(token));
    }
    if (peek() == ')') throw ParseError("node '" + label + "' has no children", pos_);

    std::vector<ParseNode> children;
    while (true) {
      skip_space();
      if (at_end()) throw ParseError("unbalanced parentheses", pos_);
      if (peek() == ')') break;
      if (peek() != '(') throw ParseError("token mixed with child nodes", pos_);
      children.push_back(read_node());
    }
    ++pos_;
    if (label.empty()) {
      // Penn-style unlabeled wrapper "( (S ...) )".
      if (children.size() != 1) throw ParseError("unlabeled node with several children", open);
      return std::move(children.front());
    }
    return ParseNode::phrase(std::move(label), std::move(children));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void serialize_into(const ParseNode& node, std::string& out) {
  out += '(';
  out += node.label();
  if (node.is_leaf()) {
    out += ' ';
    out += node.token();
  } else {
    for (const auto& c : node.children()) {
      out += ' ';
      serialize_into(c, out);
    }
  }
  out += ')';
}

void collect_leaves(const ParseNode& node, std::vector<std::string>& out) {
  if (node.is_leaf()) {
    out.push_back(node.token());
    return;
  }
  for (const auto& c : node.children()) collect_leaves(c, out);
}

bool has_np_descendant(const ParseNode& node) {
  for (const auto& c : node.children())
    if (is_np(c) || has_np_descendant(c)) return true;
  return false;
}

void collect_lowest_nps(const ParseNode& node, std::vector<const ParseNode*>& out) {
  if (node.is_leaf()) return;
  if (is_np(node) && !has_np_descendant(node)) {
    out.push_back(&node);
    return;
  }
  for (const auto& c : node.children()) collect_lowest_nps(c, out);
}

}  // namespace

ParseTree parse_bracketed(std::string_view text) {
  BracketReader reader(text);
  return ParseTree(reader.read_tree(), std::string(text));
}

std::string serialize(const ParseNode& node) {
  std::string out;
  serialize_into(node, out);
  return out;
}

std::vector<std::string> leaves(const ParseNode& node) {
  std::vector<std::string> out;
  collect_leaves(node, out);
  return out;
}

std::vector<const ParseNode*> lowest_nps(const ParseTree& tree) {
  std::vector<const ParseNode*> out;
  collect_lowest_nps(tree.root(), out);
  return out;
}

std::vector<TreeLine> read_tree_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree file: " + path);
  std::vector<TreeLine> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back({number, parse_bracketed(line)});
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(number) + ": ", e);
    }
  }
  return out;
}

}  // namespace skelcap
