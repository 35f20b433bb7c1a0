#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wordorder/vocabulary.hpp"

namespace wordorder {

// Raised for any failure inside a scorer; the message names the scorer.
class ScorerError : public std::runtime_error {
 public:
  ScorerError(const std::string& scorer, const std::string& what)
      : std::runtime_error("scorer '" + scorer + "': " + what) {}
};

// Next-token distribution p(y_t | y_<t, x).
//
// Contract:
//  * `prefix` begins with the BOS id; `input` is the (possibly null-token)
//    source sequence. Unconditional scorers ignore `input`.
//  * next_logprobs returns natural-log probabilities over vocabulary(),
//    normalized (logsumexp 0); impossible tokens are -inf.
//  * Ids at or beyond vocabulary().size() are unknown words: they are scored
//    as <unk> when the vocabulary has it, otherwise as -inf.
//  * Implementations must tolerate concurrent const calls.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  virtual std::string name() const = 0;

  virtual std::vector<double> next_logprobs(std::span<const TokenId> prefix,
                                            std::span<const TokenId> input) const = 0;

  // Log-probabilities for a subset of tokens. The default gathers from
  // next_logprobs(); scorers that can score single tokens cheaply override
  // it and must return bit-identical values.
  virtual std::vector<double> candidate_logprobs(std::span<const TokenId> prefix,
                                                 std::span<const TokenId> input,
                                                 std::span<const TokenId> candidates) const;
};

// log(1/|V|) for every token.
class UniformScorer final : public Scorer {
 public:
  explicit UniformScorer(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string name() const override { return "uniform"; }
  std::vector<double> next_logprobs(std::span<const TokenId> prefix,
                                    std::span<const TokenId> input) const override;

 private:
  Vocabulary vocab_;
};

double logsumexp(std::span<const double> values);

}  // namespace wordorder
