#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wordorder/scorer.hpp"

namespace wordorder {

enum class Smoothing { mle, kneser_ney };

struct SmoothingConfig {
  Smoothing kind = Smoothing::kneser_ney;
  double discount = 0.75;  // kneser_ney only, in (0, 1)
};

Smoothing parse_smoothing(const std::string& name);
std::string to_string(Smoothing s);

// Unconditional n-gram language model p(y_t | y_{t-n+1} .. y_{t-1}).
//
// Training pads every sequence with (order - 1) BOS tokens and appends one
// EOS. Under `mle` the longest seen context suffix gives relative
// frequencies. Under `kneser_ney` the highest order uses discounted raw
// counts, lower orders use continuation counts, and interpolation bottoms
// out in a uniform distribution over the whole vocabulary, so every token
// gets positive mass.
//
// Immutable after construction; safe for concurrent queries.
class NgramModel final : public Scorer {
 public:
  static NgramModel train(Vocabulary vocab, std::span<const std::vector<TokenId>> corpus, int order,
                          SmoothingConfig smoothing = {});

  // Plain-text count format: header "ngram v1 order=N", then sorted lines
  // "context<TAB>token<TAB>count" with the context tokens space-joined.
  // Loading rebuilds the canonical vocabulary (reserved tokens, then all
  // tokens seen in the file, sorted).
  static NgramModel load(std::istream& in, SmoothingConfig smoothing = {});
  static NgramModel load_file(const std::string& path, SmoothingConfig smoothing = {});
  void save(std::ostream& out) const;

  int order() const { return order_; }
  const SmoothingConfig& smoothing() const { return smoothing_; }

  // p(token | prefix), prefix starting with BOS.
  double probability(std::span<const TokenId> prefix, TokenId token) const;

  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string name() const override;
  std::vector<double> next_logprobs(std::span<const TokenId> prefix,
                                    std::span<const TokenId> input) const override;
  std::vector<double> candidate_logprobs(std::span<const TokenId> prefix, std::span<const TokenId> input,
                                         std::span<const TokenId> candidates) const override;

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<TokenId>& key) const noexcept;
  };
  struct ContextStats {
    std::unordered_map<TokenId, std::uint64_t> counts;
    std::uint64_t total = 0;
    std::uint64_t count_of(TokenId t) const {
      auto it = counts.find(t);
      return it == counts.end() ? 0 : it->second;
    }
  };
  using Table = std::unordered_map<std::vector<TokenId>, ContextStats, KeyHash>;

  NgramModel(Vocabulary vocab, int order, SmoothingConfig smoothing);
  void add_top(const std::vector<TokenId>& context, TokenId token, std::uint64_t count);
  void finalize();
  TokenId canonical(TokenId id) const;
  std::vector<TokenId> context_of(std::span<const TokenId> prefix) const;
  // stats[k-1] for level k (context length k-1); null when unseen.
  std::vector<const ContextStats*> level_stats(std::span<const TokenId> prefix) const;
  double probability_from(const std::vector<const ContextStats*>& stats, TokenId token) const;

  Vocabulary vocab_;
  int order_;
  SmoothingConfig smoothing_;
  Table top_;
  std::vector<Table> raw_;   // raw_[k-1]: raw counts, context length k-1
  std::vector<Table> cont_;  // cont_[k-1]: continuation counts (k < order)
};

}  // namespace wordorder
