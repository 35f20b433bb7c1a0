#include "wordorder/textprep.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "wordorder/random.hpp"

namespace wordorder {

std::string normalize_ptb(std::string_view token) {
  if (token == "-LCB-" || token == "-LRB-") return "(";
  if (token == "-RCB-" || token == "-RRB-") return ")";
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    if (c != '\\') out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

bool continues(const std::string& subword) {
  return subword.size() > 1 && subword.back() == kContinuationMarker;
}

}  // namespace

SegmentedWords group_subwords(std::span<const std::string> subwords) {
  SegmentedWords out;
  bool open = false;
  for (const auto& s : subwords) {
    if (!open) out.emplace_back();
    out.back().push_back(s);
    open = continues(s);
  }
  return out;
}

std::string join_word(std::span<const std::string> subwords) {
  std::string out;
  for (std::size_t i = 0; i < subwords.size(); ++i) {
    const auto& s = subwords[i];
    if (i + 1 < subwords.size() && continues(s)) {
      out.append(s, 0, s.size() - 1);
    } else {
      out += s;
    }
  }
  return out;
}

Words detokenize(std::span<const std::string> subwords) {
  Words out;
  for (const auto& w : group_subwords(subwords)) out.push_back(join_word(w));
  return out;
}

std::vector<std::string> flatten(const SegmentedWords& words) {
  std::vector<std::string> out;
  for (const auto& w : words) out.insert(out.end(), w.begin(), w.end());
  return out;
}

Granularity parse_granularity(const std::string& name) {
  if (name == "word") return Granularity::word;
  if (name == "subword") return Granularity::subword;
  throw std::invalid_argument("unknown shuffle granularity '" + name + "' (expected word or subword)");
}

std::vector<std::string> shuffle(const SegmentedWords& words, const ShuffleSpec& spec) {
  Rng rng(spec.seed);
  if (spec.granularity == Granularity::word) {
    SegmentedWords copy = words;
    rng.shuffle(copy);
    return flatten(copy);
  }
  auto flat = flatten(words);
  rng.shuffle(flat);
  return flat;
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Example ex;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      ex.input = split_tokens(line);
    } else {
      ex.input = split_tokens(std::string_view(line).substr(0, tab));
      ex.target = split_tokens(std::string_view(line).substr(tab + 1));
    }
    data.push_back(std::move(ex));
  }
  return data;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  for (const auto& ex : data) out << join_tokens(ex.input) << '\t' << join_tokens(ex.target) << '\n';
}

Dataset make_augmented(const Dataset& data, std::size_t k, std::uint64_t seed) {
  Dataset out;
  out.reserve(data.size() * (k + 1));
  Rng rng(seed);
  for (const auto& ex : data) {
    out.push_back(ex);
    const auto words = group_subwords(ex.input);
    for (std::size_t c = 0; c < k; ++c) {
      auto copy = words;
      rng.shuffle(copy);
      out.push_back(Example{flatten(copy), ex.target});
    }
  }
  return out;
}

std::vector<Words> read_corpus(std::istream& in) {
  std::vector<Words> out;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_tokens(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

std::vector<Words> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
  return read_corpus(in);
}

}  // namespace wordorder
