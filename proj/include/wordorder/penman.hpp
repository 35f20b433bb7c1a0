#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wordorder/bpe.hpp"
#include "wordorder/dep_tree.hpp"

namespace wordorder {

// Input feature sets for dependency-augmented word ordering:
//   base  food Bob eat_ s
//   brac  ( food ) ( Bob ) ( eat_ s )
//   pos   ( food NNP ) ( Bob NNP ) ( eat_ s VBZ )
//   udep  ( eat_ s ( Bob ) ( food ) )
//   ldep  ( eat_ s :sub ( Bob ) :obj ( food ) )
//   full  ( eat_ s VBZ :obj ( food NNP ) :sub ( Bob NNP ) )
enum class PenmanMode { base, brac, pos, udep, ldep, full };

PenmanMode parse_penman_mode(const std::string& name);
std::string to_string(PenmanMode mode);
inline constexpr PenmanMode kAllPenmanModes[] = {PenmanMode::base, PenmanMode::brac, PenmanMode::pos,
                                                 PenmanMode::udep, PenmanMode::ldep, PenmanMode::full};

// Word form -> subword tokens. Tags and labels are never segmented.
using Segmenter = std::function<std::vector<std::string>(const std::string&)>;
Segmenter whole_word_segmenter();
Segmenter bpe_segmenter(const BpeMerges& merges);

// Dependency tree with an arbitrary subset of tags and labeled arcs. A node
// without a head is a top-level group; its subtree stays attached to it.
struct PartialNode {
  std::string form;
  std::optional<std::string> pos;
  std::optional<std::size_t> head;
  std::optional<std::string> label;  // present iff head is
  bool operator==(const PartialNode&) const = default;
};
struct PartialTree {
  std::vector<PartialNode> nodes;
  std::size_t tag_count() const;
  std::size_t arc_count() const;
  bool operator==(const PartialTree&) const = default;
};

// Child order under every head (and the order of top-level groups) is a
// seeded random permutation. Throws std::invalid_argument when the mode
// needs tags or labels the tree does not carry.
std::vector<std::string> serialize_penman(const DepTree& tree, PenmanMode mode, std::uint64_t seed,
                                          const Segmenter& segment = whole_word_segmenter());
std::vector<std::string> serialize_partial(const PartialTree& tree, std::uint64_t seed,
                                           const Segmenter& segment = whole_word_segmenter());

// Keeps each tag with probability p_pos and each labeled arc with
// probability p_dep, independently. A dropped arc detaches the dependent's
// subtree to the top level.
PartialTree sample_partial(const DepTree& tree, double p_pos, double p_dep, std::uint64_t seed);

struct PartialCell {
  double p_pos;
  double p_dep;
  PartialTree tree;
};
// The 3x3 grid over {0, 0.5, 1} x {0, 0.5, 1}; cell i uses a sub-seed
// derived from `seed` and i.
std::vector<PartialCell> partial_grid(const DepTree& tree, std::uint64_t seed);

// Parsed PENMAN sequence. Word forms are re-joined from their subwords.
struct PenmanNode {
  std::string form;
  std::optional<std::string> pos;
  std::optional<std::string> label;
  int parent = -1;  // -1 for top-level groups
};
struct PenmanGraph {
  std::vector<PenmanNode> nodes;
  bool bracketed = true;
};

// Inverse of serialization. `base` reads a flat subword sequence; every other
// mode reads bracketed groups with optional tags, labels and nesting.
// Throws std::invalid_argument on unbalanced brackets or misplaced tokens.
PenmanGraph parse_penman(std::span<const std::string> tokens, PenmanMode mode);

// Child-order independent rendering, for comparing structures.
std::string canonical_form(const PenmanGraph& graph);
// What parse_penman(serialize_penman(tree, mode)) must canonicalize to.
std::string canonical_form(const DepTree& tree, PenmanMode mode);
std::string canonical_form(const PartialTree& tree);

}  // namespace wordorder
