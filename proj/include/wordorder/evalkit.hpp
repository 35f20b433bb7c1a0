#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wordorder/decoder.hpp"
#include "wordorder/parallel.hpp"
#include "wordorder/textprep.hpp"

namespace wordorder {

// Corpus BLEU-4: case-sensitive, single reference, clipped n-gram counts,
// brevity penalty exp(1 - r/c) when c < r, no smoothing. Any zero n-gram
// precision gives BLEU 0.
struct BleuReport {
  double bleu = 0.0;                     // [0, 100]
  std::array<double, 4> precisions{};    // matched / total, per order
  std::array<std::uint64_t, 4> matched{};
  std::array<std::uint64_t, 4> total{};
  double brevity_penalty = 0.0;
  std::uint64_t hyp_length = 0;
  std::uint64_t ref_length = 0;
};

BleuReport corpus_bleu(std::span<const Words> hyps, std::span<const Words> refs);

struct LexicalBin {
  std::size_t lo = 0;  // reference length range [lo, hi]
  std::size_t hi = 0;
  std::size_t sentences = 0;
  std::uint64_t ref_words = 0;
  std::uint64_t hyp_words = 0;
  double missing_rate = 0.0;
  double redundant_rate = 0.0;
  double length_ratio = 0.0;
};

// Missing words: multiset(ref) - multiset(hyp); redundant: the reverse.
// Rates are normalized by the total number of reference words; length ratio
// is total hypothesis words / total reference words.
struct LexicalErrorReport {
  std::uint64_t missing = 0;
  std::uint64_t redundant = 0;
  std::uint64_t ref_words = 0;
  std::uint64_t hyp_words = 0;
  double missing_rate = 0.0;
  double redundant_rate = 0.0;
  double length_ratio = 0.0;
  std::vector<LexicalBin> bins;  // by reference length, non-empty bins only
};

LexicalErrorReport lexical_errors(std::span<const Words> hyps, std::span<const Words> refs,
                                  std::size_t bin_width = 10);

// Input subwords -> output subwords.
using DecodeFn = std::function<std::vector<std::string>(const std::vector<std::string>&)>;

struct SensitivityReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> bleu;
  double mean = 0.0;
  double stddev = 0.0;  // population
  // "mean (std)" with 2 and 3 decimals.
  std::string summary() const;
};

// For every seed, re-permutes the input words of each dev example (sentence
// i uses derive_seed(seed, i)), decodes, and scores BLEU against the
// detokenized targets.
SensitivityReport sensitivity(const Dataset& dev, const DecodeFn& decode, std::span<const std::uint64_t> seeds,
                              std::size_t workers = 1);

struct SweepMode {
  SearchSpace space = SearchSpace::constrained;
  bool null_input = false;
  std::string name() const;
};
SweepMode parse_sweep_mode(const std::string& name);

struct SweepCell {
  std::size_t beam;
  SweepMode mode;
  double bleu;
};

struct SweepTable {
  std::vector<std::size_t> beams;
  std::vector<SweepMode> modes;
  std::vector<SweepCell> cells;  // mode-major, then beam
  double bleu(std::size_t beam, const std::string& mode) const;
  // One row per mode, one column per "B=<beam>".
  std::string to_text() const;
};

// Decodes every dataset input under each (beam, mode) and tabulates BLEU
// against the detokenized targets. Unconstrained decoding uses length
// normalization.
SweepTable beam_sweep(const Dataset& data, const Scorer& scorer, std::span<const std::size_t> beams,
                      std::span<const SweepMode> modes, std::size_t workers = 1);

nlohmann::json to_json(const BleuReport& r);
nlohmann::json to_json(const LexicalErrorReport& r);
nlohmann::json to_json(const SensitivityReport& r);
nlohmann::json to_json(const SweepTable& t);
std::string to_text(const BleuReport& r);
std::string to_text(const LexicalErrorReport& r);
std::string bins_csv(const LexicalErrorReport& r);

}  // namespace wordorder
