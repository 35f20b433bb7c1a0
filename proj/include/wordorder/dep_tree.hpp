#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wordorder {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Labeled dependency tree over words in surface order. Node i has head
// heads[i] (another node index) or kRoot.
struct DepNode {
  std::string form;
  std::optional<std::string> pos;
  int head = -1;  // DepTree::kRoot or a node index
  std::optional<std::string> label;
  bool operator==(const DepNode&) const = default;
};

class DepTree {
 public:
  static constexpr int kRoot = -1;

  DepTree() = default;
  // Validates: exactly one root, heads in range, no cycles, and labels on
  // either all arcs or none. Throws ParseError naming the first offending
  // node (1-based) on failure.
  explicit DepTree(std::vector<DepNode> nodes);

  const std::vector<DepNode>& nodes() const { return nodes_; }
  const DepNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t root() const { return root_; }
  bool has_pos() const;
  bool has_labels() const;
  // Dependents of `head` in surface order; kRoot yields the root.
  std::vector<std::size_t> children(int head) const;
  // Undirected edges (min, max) of all arcs, sorted.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  bool operator==(const DepTree&) const = default;

 private:
  std::vector<DepNode> nodes_;
  std::size_t root_ = 0;
};

// CoNLL-style rows, one per word, blank line between sentences. Columns are
// whitespace-separated:
//   5 columns:   ID FORM POS HEAD LABEL
//   10 columns:  CoNLL-X / CoNLL-U (ID FORM LEMMA CPOS POS FEATS HEAD LABEL ...)
// "_" marks an absent POS or label; HEAD 0 is the root. Lines starting with
// '#' are comments. Errors carry the input line number.
DepTree parse_conll(std::string_view text);
std::vector<DepTree> parse_conll_corpus(std::istream& in);
std::vector<DepTree> read_conll_file(const std::string& path);
std::string to_conll(const DepTree& tree);

}  // namespace wordorder
