#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wordorder/textprep.hpp"

namespace wordorder {

// Ordered byte-pair-encoding merge rules.
//
// Words are split into UTF-8 characters and the last character carries an
// internal "</w>" end tag, so word-final pieces never merge with word-internal
// ones. Merge rules are stored in that internal form (e.g. "a a</w>"). When
// rendered, every non-final subword gets the continuation marker:
// "likes" -> "li_ kes".
class BpeMerges {
 public:
  using Rule = std::pair<std::string, std::string>;
  static constexpr std::string_view kEndOfWord = "</w>";

  BpeMerges() = default;
  explicit BpeMerges(std::vector<Rule> rules);

  // Greedy most-frequent-pair merging over a word frequency table. Ties go
  // to the lexicographically smallest pair. Stops after `num_merges` rules or
  // when no pair occurs at least `min_frequency` times.
  static BpeMerges learn(const std::map<std::string, std::uint64_t>& word_counts, std::size_t num_merges,
                         std::uint64_t min_frequency = 2);
  static BpeMerges learn(const std::vector<Words>& corpus, std::size_t num_merges,
                         std::uint64_t min_frequency = 2);

  // Segments one word into rendered subwords.
  std::vector<std::string> apply(std::string_view word) const;
  SegmentedWords apply(const Words& words) const;

  const std::vector<Rule>& rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }

  // One rule per line: "left right".
  void save(std::ostream& out) const;
  static BpeMerges load(std::istream& in);
  static BpeMerges load_file(const std::string& path);

 private:
  std::vector<Rule> rules_;
  std::map<Rule, std::size_t> ranks_;
};

// Splits a word into internal BPE symbols (characters, last one tagged).
std::vector<std::string> initial_symbols(std::string_view word);

}  // namespace wordorder
