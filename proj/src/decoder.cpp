#include "wordorder/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace wordorder {

SearchSpace parse_search_space(const std::string& name) {
  if (name == "constrained") return SearchSpace::constrained;
  if (name == "unconstrained") return SearchSpace::unconstrained;
  throw std::invalid_argument("unknown search mode '" + name + "' (expected constrained or unconstrained)");
}

std::string to_string(SearchSpace s) { return s == SearchSpace::constrained ? "constrained" : "unconstrained"; }

std::vector<TokenId> Hypothesis::output(std::optional<TokenId> eos) const {
  auto end = tokens.end();
  if (tokens.size() > 1 && eos && tokens.back() == *eos) --end;
  return {tokens.begin() + 1, end};
}

double ranking_score(const Hypothesis& h, bool length_norm) {
  if (!length_norm || h.tokens.size() <= 1) return h.logscore;
  return h.logscore / static_cast<double>(h.tokens.size() - 1);
}

namespace {

struct Expansion {
  double score;
  std::uint32_t parent;
  TokenId token;
};

// Ranks for lexicographic order of the (equal-length) live token sequences.
std::vector<std::uint32_t> lexical_ranks(const std::vector<Hypothesis>& live) {
  std::vector<std::uint32_t> order(live.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return live[a].tokens < live[b].tokens; });
  std::vector<std::uint32_t> rank(live.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

// Best-first: higher score, then lexicographically smaller sequence.
auto expansion_order(const std::vector<std::uint32_t>& rank) {
  return [&rank](const Expansion& a, const Expansion& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.parent != b.parent) return rank[a.parent] < rank[b.parent];
    return a.token < b.token;
  };
}

void keep_best(std::vector<Expansion>& xs, std::size_t k, const std::vector<std::uint32_t>& rank) {
  auto cmp = expansion_order(rank);
  if (xs.size() > k) {
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end(), cmp);
    xs.resize(k);
  }
  std::sort(xs.begin(), xs.end(), cmp);
}

void check_score(double s, const Scorer& scorer) {
  if (std::isnan(s)) throw ScorerError(scorer.name(), "returned NaN log-probability");
}

void sort_finished(std::vector<Hypothesis>& hyps, bool length_norm) {
  std::stable_sort(hyps.begin(), hyps.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    const double sa = ranking_score(a, length_norm);
    const double sb = ranking_score(b, length_norm);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  });
}

std::vector<Hypothesis> constrained_search(std::span<const TokenId> scorer_input, const Scorer& scorer,
                                           const DecodeConfig& config, const ConstraintTree& tree, TokenId bos) {
  const std::size_t steps = tree.subword_count();
  if (config.max_len && *config.max_len < steps) {
    throw std::invalid_argument("max_len " + std::to_string(*config.max_len) + " is below the input length " +
                                std::to_string(steps));
  }
  std::vector<Hypothesis> live;
  live.push_back(Hypothesis{{bos}, 0.0, tree.initial_state(), false});

  for (std::size_t step = 0; step < steps; ++step) {
    const auto rank = lexical_ranks(live);
    std::vector<Expansion> xs;
    for (std::uint32_t p = 0; p < live.size(); ++p) {
      const auto candidates = tree.valid_next(*live[p].constraint);
      if (candidates.empty()) continue;
      const auto lps = scorer.candidate_logprobs(live[p].tokens, scorer_input, candidates);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        check_score(lps[i], scorer);
        xs.push_back({live[p].logscore + lps[i], p, candidates[i]});
      }
    }
    keep_best(xs, config.beam_size, rank);
    std::vector<Hypothesis> next;
    next.reserve(xs.size());
    for (const auto& x : xs) {
      const auto& parent = live[x.parent];
      Hypothesis h;
      h.tokens.reserve(parent.tokens.size() + 1);
      h.tokens = parent.tokens;
      h.tokens.push_back(x.token);
      h.logscore = x.score;
      h.constraint = tree.advance(*parent.constraint, x.token);
      next.push_back(std::move(h));
    }
    live = std::move(next);
  }
  for (auto& h : live) h.finished = tree.is_exhausted(*h.constraint);
  std::erase_if(live, [](const Hypothesis& h) { return !h.finished; });
  return live;
}

std::vector<Hypothesis> unconstrained_search(std::span<const TokenId> scorer_input, const Scorer& scorer,
                                             const DecodeConfig& config, std::size_t max_len) {
  const auto& vocab = scorer.vocabulary();
  const TokenId bos = *vocab.bos();
  const auto eos_opt = vocab.eos();
  if (!eos_opt) throw std::invalid_argument("unconstrained decoding needs </s> in the scorer vocabulary");
  const TokenId eos = *eos_opt;
  const auto null_id = vocab.null_token();
  const std::size_t beam = config.beam_size;

  std::vector<Hypothesis> live;
  live.push_back(Hypothesis{{bos}, 0.0, std::nullopt, false});
  std::vector<Hypothesis> finished;

  for (std::size_t step = 1; step <= max_len && !live.empty(); ++step) {
    const auto rank = lexical_ranks(live);
    std::vector<Expansion> xs;
    std::vector<Expansion> local;
    for (std::uint32_t p = 0; p < live.size(); ++p) {
      const auto lps = scorer.next_logprobs(live[p].tokens, scorer_input);
      if (lps.size() != vocab.size()) throw ScorerError(scorer.name(), "next_logprobs size mismatch");
      local.clear();
      for (std::size_t t = 0; t < lps.size(); ++t) {
        const auto token = static_cast<TokenId>(t);
        if (token == bos || (null_id && token == *null_id)) continue;
        check_score(lps[t], scorer);
        if (lps[t] == -INFINITY) continue;
        local.push_back({live[p].logscore + lps[t], p, token});
      }
      keep_best(local, beam, rank);
      xs.insert(xs.end(), local.begin(), local.end());
    }
    keep_best(xs, beam, rank);

    std::vector<Hypothesis> next;
    for (const auto& x : xs) {
      Hypothesis h;
      h.tokens = live[x.parent].tokens;
      h.tokens.push_back(x.token);
      h.logscore = x.score;
      if (x.token == eos || step == max_len) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);

    if (finished.size() >= beam && !live.empty()) {
      sort_finished(finished, config.length_norm);
      const double worst = ranking_score(finished[beam - 1], config.length_norm);
      double best_live = -INFINITY;
      for (const auto& h : live) {
        // Log-probs are <= 0: the raw score can only fall, and the normalized
        // score is at best the current total spread over max_len tokens.
        const double bound = config.length_norm ? h.logscore / static_cast<double>(max_len) : h.logscore;
        best_live = std::max(best_live, bound);
      }
      if (best_live < worst) break;
    }
  }
  sort_finished(finished, config.length_norm);
  if (finished.size() > beam) finished.resize(beam);
  return finished;
}

}  // namespace

std::vector<Hypothesis> beam_search(std::span<const TokenId> input, const Scorer& scorer, const DecodeConfig& config,
                                    const ConstraintTree* constraint) {
  if (config.beam_size == 0) throw std::invalid_argument("beam_size must be >= 1");
  const auto& vocab = scorer.vocabulary();
  const auto bos = vocab.bos();
  if (!bos) throw std::invalid_argument("scorer vocabulary has no <s> token");

  std::vector<TokenId> scorer_input;
  if (config.null_input) {
    const auto null_id = vocab.null_token();
    if (!null_id) throw std::invalid_argument("null_input requires <null> in the scorer vocabulary");
    scorer_input.push_back(*null_id);
  } else {
    if (input.empty()) throw std::invalid_argument("empty input");
    scorer_input.assign(input.begin(), input.end());
  }

  if (config.mode == SearchSpace::constrained) {
    if (!constraint) throw std::invalid_argument("constrained decoding requires a constraint tree");
    return constrained_search(scorer_input, scorer, config, *constraint, *bos);
  }
  const std::size_t max_len = config.max_len.value_or(2 * input.size() + 10);
  if (max_len == 0) throw std::invalid_argument("max_len must be >= 1");
  return unconstrained_search(scorer_input, scorer, config, max_len);
}

std::vector<double> rescore(std::span<const std::vector<TokenId>> candidates, const Scorer& scorer,
                            std::span<const TokenId> input) {
  const auto bos = scorer.vocabulary().bos();
  if (!bos) throw std::invalid_argument("scorer vocabulary has no <s> token");
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& cand : candidates) {
    std::vector<TokenId> prefix{*bos};
    double total = 0.0;
    for (TokenId t : cand) {
      const TokenId one[] = {t};
      total = total + scorer.candidate_logprobs(prefix, input, one)[0];
      prefix.push_back(t);
    }
    out.push_back(total);
  }
  return out;
}

std::vector<TokenId> EncodedSentence::flat() const {
  std::vector<TokenId> out;
  for (const auto& w : words) out.insert(out.end(), w.begin(), w.end());
  return out;
}

EncodedSentence encode_words(const Vocabulary& vocab, const SegmentedWords& words) {
  EncodedSentence out;
  std::map<std::string, TokenId, std::less<>> extra_ids;
  for (const auto& w : words) {
    auto& ids = out.words.emplace_back();
    for (const auto& s : w) {
      if (auto id = vocab.find(s)) {
        ids.push_back(*id);
      } else if (auto it = extra_ids.find(s); it != extra_ids.end()) {
        ids.push_back(it->second);
      } else {
        auto id = static_cast<TokenId>(vocab.size() + out.extra.size());
        out.extra.push_back(s);
        extra_ids.emplace(s, id);
        ids.push_back(id);
      }
    }
  }
  return out;
}

std::vector<std::string> decode_tokens(const Vocabulary& vocab, const EncodedSentence& sentence,
                                       std::span<const TokenId> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (vocab.contains(t)) {
      out.push_back(vocab.token(t));
    } else {
      const auto i = static_cast<std::size_t>(t) - vocab.size();
      if (t < 0 || i >= sentence.extra.size()) throw std::out_of_range("token id " + std::to_string(t));
      out.push_back(sentence.extra[i]);
    }
  }
  return out;
}

std::vector<std::string> order_sentence(std::span<const std::string> input_subwords, const Scorer& scorer,
                                        const DecodeConfig& config) {
  const auto& vocab = scorer.vocabulary();
  const auto encoded = encode_words(vocab, group_subwords(input_subwords));
  const auto flat = encoded.flat();
  std::optional<ConstraintTree> tree;
  if (config.mode == SearchSpace::constrained) tree.emplace(encoded.words);
  const auto hyps = beam_search(flat, scorer, config, tree ? &*tree : nullptr);
  if (hyps.empty()) return {};
  return decode_tokens(vocab, encoded, hyps.front().output(vocab.eos()));
}

}  // namespace wordorder
