#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wordorder/constraint_tree.hpp"
#include "wordorder/scorer.hpp"
#include "wordorder/textprep.hpp"

namespace wordorder {

enum class SearchSpace { constrained, unconstrained };
SearchSpace parse_search_space(const std::string& name);
std::string to_string(SearchSpace s);

struct DecodeConfig {
  std::size_t beam_size = 64;
  SearchSpace mode = SearchSpace::constrained;
  // Rank finished hypotheses by logscore / length (unconstrained only).
  bool length_norm = false;
  // Output length cap in tokens. Defaults to 2 * input + 10 when unconstrained;
  // constrained decoding always runs exactly as many steps as there are
  // input subwords and rejects a smaller explicit cap.
  std::optional<std::size_t> max_len;
  // Replace the scorer input with the single <null> token.
  bool null_input = false;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // starts with BOS; ends with EOS when one was emitted
  double logscore = 0.0;
  std::optional<ConstraintState> constraint;
  bool finished = false;

  // Tokens after BOS, without a trailing EOS.
  std::vector<TokenId> output(std::optional<TokenId> eos) const;
  // Tokens after BOS, including any EOS (the sequence rescore() expects).
  std::vector<TokenId> scored_tokens() const { return {tokens.begin() + 1, tokens.end()}; }
};

// Standard beam search maximizing sum_t log p(y_t | y_<t, x).
//
// Constrained: candidates are the constraint tree's valid next tokens, so
// out-of-tree tokens never enter the beam, and a hypothesis finishes exactly
// when its constraint state is exhausted.
// Unconstrained: every vocabulary token except <s> and <null> is a candidate;
// a hypothesis finishes on EOS or at max_len. Search stops once beam_size
// hypotheses have finished and no live hypothesis can still beat the worst
// of them.
//
// Equal scores are ordered by the lexicographically smaller token sequence,
// so results are deterministic. Returns up to beam_size finished hypotheses,
// best first.
std::vector<Hypothesis> beam_search(std::span<const TokenId> input, const Scorer& scorer, const DecodeConfig& config,
                                    const ConstraintTree* constraint = nullptr);

// Sum of stepwise log-probabilities for each candidate (BOS implied, not
// included in the candidate).
std::vector<double> rescore(std::span<const std::vector<TokenId>> candidates, const Scorer& scorer,
                            std::span<const TokenId> input);

// Ranking key used for finished hypotheses.
double ranking_score(const Hypothesis& h, bool length_norm);

// Maps subword strings to scorer ids. Strings missing from the vocabulary
// get fresh ids past its end; scorers treat those as unknown words.
struct EncodedSentence {
  std::vector<std::vector<TokenId>> words;
  std::vector<std::string> extra;  // string for id vocab.size() + i

  std::vector<TokenId> flat() const;
};
EncodedSentence encode_words(const Vocabulary& vocab, const SegmentedWords& words);
std::vector<std::string> decode_tokens(const Vocabulary& vocab, const EncodedSentence& sentence,
                                       std::span<const TokenId> tokens);

// Orders one input: groups subwords into words, decodes, and returns the best
// output as subword strings (empty if nothing finished).
std::vector<std::string> order_sentence(std::span<const std::string> input_subwords, const Scorer& scorer,
                                        const DecodeConfig& config);

}  // namespace wordorder
