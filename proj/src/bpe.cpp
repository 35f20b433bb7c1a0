#include "wordorder/bpe.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>

namespace wordorder {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: keep as its own symbol
}

std::vector<std::string> merge_pair(const std::vector<std::string>& symbols, const BpeMerges::Rule& rule) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == rule.first && symbols[i + 1] == rule.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t len = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  if (!out.empty()) out.back() += BpeMerges::kEndOfWord;
  return out;
}

BpeMerges::BpeMerges(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) ranks_.emplace(rules_[i], i);
}

BpeMerges BpeMerges::learn(const std::vector<Words>& corpus, std::size_t num_merges, std::uint64_t min_frequency) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& w : sentence) counts[w] += 1;
  }
  return learn(counts, num_merges, min_frequency);
}

BpeMerges BpeMerges::learn(const std::map<std::string, std::uint64_t>& word_counts, std::size_t num_merges,
                           std::uint64_t min_frequency) {
  struct Entry {
    std::vector<std::string> symbols;
    std::int64_t freq;
  };
  std::vector<Entry> words;
  for (const auto& [w, c] : word_counts) {
    if (!w.empty() && c > 0) words.push_back({initial_symbols(w), static_cast<std::int64_t>(c)});
  }

  std::map<Rule, std::int64_t> pair_counts;
  std::map<Rule, std::set<std::size_t>> where;
  // Ordered by (-count, pair) so begin() is the next merge.
  std::set<std::tuple<std::int64_t, std::string, std::string>> queue;

  auto bump = [&](const Rule& p, std::int64_t delta) {
    auto& c = pair_counts[p];
    if (c > 0) queue.erase({-c, p.first, p.second});
    c += delta;
    if (c > 0) {
      queue.insert({-c, p.first, p.second});
    } else {
      pair_counts.erase(p);
    }
  };
  auto add_word = [&](std::size_t idx, std::int64_t sign) {
    const auto& e = words[idx];
    for (std::size_t i = 0; i + 1 < e.symbols.size(); ++i) {
      Rule p{e.symbols[i], e.symbols[i + 1]};
      bump(p, sign * e.freq);
      if (sign > 0) where[p].insert(idx);
    }
  };
  for (std::size_t i = 0; i < words.size(); ++i) add_word(i, +1);

  std::vector<Rule> rules;
  while (rules.size() < num_merges && !queue.empty()) {
    const auto [negc, left, right] = *queue.begin();
    if (static_cast<std::uint64_t>(-negc) < min_frequency) break;
    Rule best{left, right};
    rules.push_back(best);
    auto affected = where[best];
    for (std::size_t idx : affected) {
      add_word(idx, -1);
      words[idx].symbols = merge_pair(words[idx].symbols, best);
      add_word(idx, +1);
    }
    where.erase(best);
  }
  return BpeMerges(std::move(rules));
}

std::vector<std::string> BpeMerges::apply(std::string_view word) const {
  auto symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    const Rule* best = nullptr;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find(Rule{symbols[i], symbols[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (!best) break;
    symbols = merge_pair(symbols, *best);
  }
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    auto& s = symbols[i];
    if (i + 1 == symbols.size()) {
      s.resize(s.size() - kEndOfWord.size());
    } else {
      s.push_back(kContinuationMarker);
    }
  }
  return symbols;
}

SegmentedWords BpeMerges::apply(const Words& words) const {
  SegmentedWords out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(apply(w));
  return out;
}

void BpeMerges::save(std::ostream& out) const {
  for (const auto& [l, r] : rules_) out << l << ' ' << r << '\n';
}

BpeMerges BpeMerges::load(std::istream& in) {
  std::vector<Rule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("#version", 0) == 0) continue;
    auto toks = split_tokens(line);
    if (toks.size() != 2) throw std::runtime_error("merges line " + std::to_string(lineno) + ": expected 'left right'");
    rules.emplace_back(toks[0], toks[1]);
  }
  return BpeMerges(std::move(rules));
}

BpeMerges BpeMerges::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open merges file '" + path + "'");
  return load(in);
}

}  // namespace wordorder
