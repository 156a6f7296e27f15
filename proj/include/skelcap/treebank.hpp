#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skelcap {

// Raised for malformed bracketed input. offset() is the character position
// in the source string where the problem was detected.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  // Same error with extra context (e.g. file and line) in front.
  ParseError(const std::string& prefix, const ParseError& inner)
      : std::runtime_error(prefix + inner.what()), offset_(inner.offset()) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A node of a constituency tree. Leaves are preterminals: a POS label plus
// the surface token. Internal nodes carry a phrase label and >= 1 children.
class ParseNode {
 public:
  static ParseNode leaf(std::string label, std::string token);
  static ParseNode phrase(std::string label, std::vector<ParseNode> children);

  const std::string& label() const { return label_; }
  const std::string& token() const { return token_; }
  const std::vector<ParseNode>& children() const { return children_; }
  bool is_leaf() const { return children_.empty(); }

  // Label with functional suffixes ("NP-TMP", "NP=2") removed.
  std::string_view base_label() const;

  bool operator==(const ParseNode& other) const = default;

 private:
  ParseNode() = default;

  std::string label_;
  std::string token_;
  std::vector<ParseNode> children_;
};

class ParseTree {
 public:
  ParseTree(ParseNode root, std::string source_line)
      : root_(std::move(root)), source_line_(std::move(source_line)) {}

  const ParseNode& root() const { return root_; }
  const std::string& source_line() const { return source_line_; }

  // Structural equality; the source text is not compared.
  bool same_structure(const ParseTree& other) const { return root_ == other.root_; }

 private:
  ParseNode root_;
  std::string source_line_;
};

// Parses one `(LABEL child ...)` tree with `(POS word)` leaves.
ParseTree parse_bracketed(std::string_view text);

// Canonical single-line serialization, re-parseable by parse_bracketed.
std::string serialize(const ParseNode& node);
inline std::string serialize(const ParseTree& tree) { return serialize(tree.root()); }

std::vector<std::string> leaves(const ParseNode& node);
inline std::vector<std::string> leaves(const ParseTree& tree) { return leaves(tree.root()); }

// NP nodes with no NP descendant, in left-to-right order.
std::vector<const ParseNode*> lowest_nps(const ParseTree& tree);

bool is_np(const ParseNode& node);

struct TreeLine {
  std::size_t line_number;  // 1-based
  ParseTree tree;
};

// Reads a tree file: one tree per line, blank lines and `#` comments
// skipped. Parse failures are rethrown with the line number prepended.
std::vector<TreeLine> read_tree_file(const std::string& path);

}  // namespace skelcap
