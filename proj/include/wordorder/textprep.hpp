#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wordorder {

// Subwords that continue into the next subword of the same word carry this
// trailing marker ("li_ kes" spells "likes").
inline constexpr char kContinuationMarker = '_';

using Words = std::vector<std::string>;
using SegmentedWords = std::vector<std::vector<std::string>>;

// Reverses PTB escapes: -LCB-/-LRB- become "(", -RCB-/-RRB- become ")",
// and every backslash is removed. Idempotent.
std::string normalize_ptb(std::string_view token);

std::vector<std::string> split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

// Groups a flat subword sequence into words using the continuation marker.
// A trailing marked subword forms an (unterminated) word of its own.
SegmentedWords group_subwords(std::span<const std::string> subwords);
// Concatenates one word's subwords, stripping continuation markers.
std::string join_word(std::span<const std::string> subwords);
// group_subwords followed by join_word on every group.
Words detokenize(std::span<const std::string> subwords);
std::vector<std::string> flatten(const SegmentedWords& words);

enum class Granularity { word, subword };
Granularity parse_granularity(const std::string& name);

struct ShuffleSpec {
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::word;
};

// Uniform seeded permutation. Word granularity permutes whole words and keeps
// each word's subwords contiguous; subword granularity permutes the
// flattened subword sequence.
std::vector<std::string> shuffle(const SegmentedWords& words, const ShuffleSpec& spec);

// One TSV dataset row: space-separated subwords on both sides.
struct Example {
  std::vector<std::string> input;
  std::vector<std::string> target;
  bool operator==(const Example&) const = default;
};
using Dataset = std::vector<Example>;

// Reads "input<TAB>target" rows. A row without a tab is treated as input
// with an empty target.
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& data);

// Each example once, followed by k copies whose inputs are fresh word
// permutations of the original input. Targets are copied unchanged.
Dataset make_augmented(const Dataset& data, std::size_t k, std::uint64_t seed);

// Reads one tokenized sentence per line.
std::vector<Words> read_corpus(std::istream& in);
std::vector<Words> read_corpus_file(const std::string& path);

}  // namespace wordorder
