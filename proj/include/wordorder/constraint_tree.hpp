#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wordorder/vocabulary.hpp"

namespace wordorder {

using NodeIndex = std::uint32_t;

class ConstraintTree;

// Per-hypothesis traversal state of a ConstraintTree.
//
// Counts are held behind shared, immutable buffers: copying a state is O(1)
// and advance() allocates a fresh buffer only for the readings it changes.
//
// A state may carry more than one reading when the input contains a word
// whose subword sequence is a strict prefix of another word's and the same
// token could either continue the longer word or end the shorter one and
// start a new word. With marker-segmented BPE input this never happens and
// there is exactly one reading; the per-node accessors report on the first
// reading in canonical order.
class ConstraintState {
 public:
  bool dead() const { return readings_.empty(); }
  std::size_t remaining_total() const { return remaining_total_; }
  std::size_t readings() const { return readings_.size(); }

  NodeIndex cursor() const;
  std::uint32_t remaining(NodeIndex node) const;
  std::uint32_t remaining_terminals(NodeIndex node) const;

  bool operator==(const ConstraintState& other) const;

 private:
  friend class ConstraintTree;

  struct Reading {
    NodeIndex cursor = 0;
    // [0, n): remaining counts, [n, 2n): remaining terminal counts.
    std::shared_ptr<const std::vector<std::uint32_t>> counts;
  };

  std::vector<Reading> readings_;
  std::size_t remaining_total_ = 0;
  std::size_t node_count_ = 0;
};

// Prefix tree over the subword sequences of an input word multiset. Paths
// from the root spell words; each node counts how many input words pass
// through it and how many end at it. Immutable once built, so a single tree
// is shared by every hypothesis (and thread) decoding the same input.
class ConstraintTree {
 public:
  static constexpr NodeIndex kRoot = 0;

  struct Node {
    TokenId token = -1;  // -1 at the root
    std::vector<std::pair<TokenId, NodeIndex>> children;  // sorted by token
    std::uint32_t initial_count = 0;
    std::uint32_t terminal_count = 0;
  };

  // Throws std::invalid_argument("empty input") on an empty multiset and
  // on any empty word.
  explicit ConstraintTree(std::span<const std::vector<TokenId>> words);

  const Node& node(NodeIndex index) const { return nodes_.at(index); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t word_count() const { return word_count_; }
  std::size_t subword_count() const { return subword_count_; }
  std::optional<NodeIndex> child(NodeIndex parent, TokenId token) const;

  ConstraintState initial_state() const;

  // Sorted, duplicate-free set of tokens allowed next. Empty for exhausted
  // and dead states.
  std::vector<TokenId> valid_next(const ConstraintState& state) const;
  bool is_valid(const ConstraintState& state, TokenId token) const;

  // Consumes `token`. Returns a dead state if the token is not allowed.
  ConstraintState advance(const ConstraintState& state, TokenId token) const;

  bool is_exhausted(const ConstraintState& state) const {
    return !state.dead() && state.remaining_total() == 0;
  }

 private:
  using Counts = std::vector<std::uint32_t>;

  void enter(Counts& counts, NodeIndex& cursor, NodeIndex target) const;
  bool has_open_child(const Counts& counts, NodeIndex node) const;

  std::vector<Node> nodes_;
  std::size_t word_count_ = 0;
  std::size_t subword_count_ = 0;
};

}  // namespace wordorder
