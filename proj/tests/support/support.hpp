#pragma once

// Test-only generators and brute-force oracles. Nothing here calls into the
// library code it is used to check.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wordorder/dep_tree.hpp"
#include "wordorder/random.hpp"
#include "wordorder/scorer.hpp"
#include "wordorder/textprep.hpp"

namespace wordorder::testing {

// Sentences from a small agreement-respecting English grammar (names,
// determiners, adjectives, inflected verbs, prepositional phrases), at most
// max_words tokens each, ending in ".".
std::vector<Words> grammar_corpus(std::size_t n, std::uint64_t seed, std::size_t max_words = 12);

// Random multiset of words over a tiny token alphabet; `max_subwords` tokens
// per word, `max_words` words. Token ids start at `first_id`.
std::vector<std::vector<TokenId>> random_multiset(Rng& rng, std::size_t max_words, std::size_t max_subwords,
                                                  TokenId first_id, std::size_t alphabet);

// Every distinct flattened ordering of the words.
std::set<std::vector<TokenId>> flat_permutations(std::vector<std::vector<TokenId>> words);

// Brute-force tracker: knows the valid continuations of a prefix by
// checking it against every flattened permutation.
class MultisetTracker {
 public:
  explicit MultisetTracker(const std::vector<std::vector<TokenId>>& words) : perms_(flat_permutations(words)) {}
  std::vector<TokenId> valid_next(const std::vector<TokenId>& prefix) const;
  bool complete(const std::vector<TokenId>& prefix) const { return perms_.contains(prefix); }
  const std::set<std::vector<TokenId>>& permutations() const { return perms_; }

 private:
  std::set<std::vector<TokenId>> perms_;
};

// Sum of next_logprobs over the sequence, BOS implied; no EOS term.
double sequence_logprob(const Scorer& scorer, const std::vector<TokenId>& seq, const std::vector<TokenId>& input);

// Highest-scoring flattened permutation; ties go to the lexicographically
// smallest sequence.
std::pair<std::vector<TokenId>, double> brute_force_best(const Scorer& scorer,
                                                         const std::vector<std::vector<TokenId>>& words,
                                                         const std::vector<TokenId>& input);

// BLEU-4 written straight from the definition, for cross-checking.
double reference_bleu(const std::vector<Words>& hyps, const std::vector<Words>& refs);

// All spanning trees of K_n as sorted (min, max) edge lists (Pruefer codes).
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> all_spanning_trees(std::size_t n);

// Uniformly random attachment tree over n words with forms, tags and labels
// drawn from small pools (including bracket and colon forms).
DepTree random_tree(Rng& rng, std::size_t n);

// The "Bob eats food" tree.
DepTree bob_eats_food();

// Features whose squared Euclidean distances equal tree path lengths: each
// arc gets its own orthogonal direction, a word sits at the sum of the arc
// directions on its root path, and the result is rotated by a random
// orthogonal matrix in `dim` dimensions.
Eigen::MatrixXd isometric_features(const DepTree& tree, std::size_t dim, Rng& rng);

Eigen::MatrixXd random_orthogonal(std::size_t dim, Rng& rng);

// Central finite-difference gradient of f at x.
Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& x,
                                 double h);

double gaussian(Rng& rng);

}  // namespace wordorder::testing
