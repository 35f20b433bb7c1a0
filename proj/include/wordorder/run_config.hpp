#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace wordorder {

// Every knob the command-line tool exposes. Loaded from one JSON object
// whose sections mirror the members below; unknown keys are errors.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::optional<std::string> external_scorer;

  struct Prep {
    std::size_t vocab_size = 8000;
    std::size_t min_frequency = 2;
    std::size_t augment = 0;
    std::string granularity = "word";
    bool normalize_ptb = true;
  } prep;

  struct Lm {
    std::size_t order = 3;
    std::string smoothing = "kneser_ney";
    double discount = 0.75;
  } lm;

  struct Decode {
    std::size_t beam = 64;
    std::string mode = "constrained";
    bool length_norm = false;
    std::optional<std::size_t> max_len;
    bool null_input = false;
  } decode;

  struct Eval {
    std::size_t bin_width = 10;
  } eval;

  struct Sensitivity {
    std::size_t k = 10;
    std::vector<std::uint64_t> seeds;
  } sensitivity;

  struct Sweep {
    std::vector<std::size_t> beams{5, 64, 512};
    std::vector<std::string> modes{"constrained", "unconstrained", "constrained+null", "unconstrained+null"};
  } sweep;

  struct Linearize {
    std::string mode = "full";
  } linearize;

  struct Partial {
    std::optional<double> p_pos;  // unset: emit the full 3x3 grid
    std::optional<double> p_dep;
  } partial;

  struct Probe {
    std::size_t rank = 32;
    std::size_t epochs = 30;
    std::size_t batch = 40;
    double lr = 1e-3;
    bool exclude_punct = false;
  } probe;

  // Throws std::invalid_argument naming the offending key path.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  // The seed, or an error saying which step needs one.
  std::uint64_t require_seed(const std::string& step) const;
};

// "1..10" (inclusive) or "1,5,9" or a mix ("1..3,7").
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace wordorder
