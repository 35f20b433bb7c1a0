#include "wordorder/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wordorder {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Smoothing parse_smoothing(const std::string& name) {
  if (name == "mle") return Smoothing::mle;
  if (name == "kneser_ney" || name == "kn") return Smoothing::kneser_ney;
  throw std::invalid_argument("unknown smoothing '" + name + "' (expected mle or kneser_ney)");
}

std::string to_string(Smoothing s) { return s == Smoothing::mle ? "mle" : "kneser_ney"; }

std::size_t NgramModel::KeyHash::operator()(const std::vector<TokenId>& key) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (TokenId t : key) {
    h ^= static_cast<std::uint32_t>(t);
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h ^ key.size());
}

NgramModel::NgramModel(Vocabulary vocab, int order, SmoothingConfig smoothing)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1, got " + std::to_string(order));
  if (smoothing.kind == Smoothing::kneser_ney && !(smoothing.discount > 0.0 && smoothing.discount < 1.0)) {
    throw std::invalid_argument("kneser_ney discount must lie in (0, 1)");
  }
  if (!vocab_.bos() || !vocab_.eos()) throw std::invalid_argument("n-gram vocabulary needs <s> and </s>");
}

NgramModel NgramModel::train(Vocabulary vocab, std::span<const std::vector<TokenId>> corpus, int order,
                             SmoothingConfig smoothing) {
  NgramModel model(std::move(vocab), order, smoothing);
  if (corpus.empty()) throw std::invalid_argument("empty training corpus");
  const TokenId bos = *model.vocab_.bos();
  const TokenId eos = *model.vocab_.eos();
  const auto n = static_cast<std::size_t>(order);
  for (const auto& sentence : corpus) {
    std::vector<TokenId> padded(n - 1, bos);
    for (TokenId t : sentence) padded.push_back(model.canonical(t));
    padded.push_back(eos);
    for (std::size_t i = n - 1; i < padded.size(); ++i) {
      std::vector<TokenId> context(padded.begin() + static_cast<std::ptrdiff_t>(i - (n - 1)),
                                   padded.begin() + static_cast<std::ptrdiff_t>(i));
      model.add_top(context, padded[i], 1);
    }
  }
  model.finalize();
  return model;
}

void NgramModel::add_top(const std::vector<TokenId>& context, TokenId token, std::uint64_t count) {
  auto& stats = top_[context];
  stats.counts[token] += count;
  stats.total += count;
}

void NgramModel::finalize() {
  const auto n = static_cast<std::size_t>(order_);
  raw_.assign(n, {});
  cont_.assign(n, {});
  for (const auto& [context, stats] : top_) {
    for (const auto& [token, count] : stats.counts) {
      for (std::size_t k = 1; k <= n; ++k) {
        std::vector<TokenId> suffix(context.end() - static_cast<std::ptrdiff_t>(k - 1), context.end());
        auto& s = raw_[k - 1][suffix];
        s.counts[token] += count;
        s.total += count;
      }
    }
  }
  // Continuation counts: one per distinct left extension.
  for (std::size_t k = 1; k < n; ++k) {
    for (const auto& [context, stats] : raw_[k]) {
      std::vector<TokenId> shorter(context.begin() + 1, context.end());
      auto& s = cont_[k - 1][shorter];
      for (const auto& [token, count] : stats.counts) {
        s.counts[token] += 1;
        s.total += 1;
      }
    }
  }
}

TokenId NgramModel::canonical(TokenId id) const {
  if (vocab_.contains(id)) return id;
  if (auto u = vocab_.unk()) return *u;
  throw std::out_of_range("token id outside n-gram vocabulary");
}

std::vector<TokenId> NgramModel::context_of(std::span<const TokenId> prefix) const {
  const auto want = static_cast<std::size_t>(order_ - 1);
  std::vector<TokenId> context;
  context.reserve(want);
  const std::size_t have = std::min(want, prefix.size());
  context.assign(want - have, *vocab_.bos());
  for (std::size_t i = prefix.size() - have; i < prefix.size(); ++i) context.push_back(canonical(prefix[i]));
  return context;
}

std::vector<const NgramModel::ContextStats*> NgramModel::level_stats(std::span<const TokenId> prefix) const {
  const auto context = context_of(prefix);
  const auto n = static_cast<std::size_t>(order_);
  std::vector<const ContextStats*> stats(n, nullptr);
  for (std::size_t k = 1; k <= n; ++k) {
    std::vector<TokenId> suffix(context.end() - static_cast<std::ptrdiff_t>(k - 1), context.end());
    const Table& table = (smoothing_.kind == Smoothing::mle || k == n) ? raw_[k - 1] : cont_[k - 1];
    if (auto it = table.find(suffix); it != table.end()) stats[k - 1] = &it->second;
  }
  return stats;
}

// The dense path in next_logprobs must mirror this arithmetic exactly.
double NgramModel::probability_from(const std::vector<const ContextStats*>& stats, TokenId token) const {
  token = canonical(token);
  if (smoothing_.kind == Smoothing::mle) {
    for (std::size_t k = stats.size(); k >= 1; --k) {
      if (const auto* s = stats[k - 1]) {
        return static_cast<double>(s->count_of(token)) / static_cast<double>(s->total);
      }
    }
    return 0.0;
  }
  const double d = smoothing_.discount;
  double p = 1.0 / static_cast<double>(vocab_.size());
  for (const auto* s : stats) {
    if (!s) continue;
    const double total = static_cast<double>(s->total);
    const double gamma = d * static_cast<double>(s->counts.size()) / total;
    const std::uint64_t c = s->count_of(token);
    if (c > 0) {
      const double a = (static_cast<double>(c) - d) / total;
      const double scaled = gamma * p;
      p = a + scaled;
    } else {
      p = gamma * p;
    }
  }
  return p;
}

double NgramModel::probability(std::span<const TokenId> prefix, TokenId token) const {
  return probability_from(level_stats(prefix), token);
}

std::string NgramModel::name() const {
  return "ngram(order=" + std::to_string(order_) + "," + to_string(smoothing_.kind) + ")";
}

std::vector<double> NgramModel::next_logprobs(std::span<const TokenId> prefix, std::span<const TokenId>) const {
  const auto stats = level_stats(prefix);
  const std::size_t v = vocab_.size();
  std::vector<double> p(v, 0.0);
  if (smoothing_.kind == Smoothing::mle) {
    for (std::size_t k = stats.size(); k >= 1; --k) {
      if (const auto* s = stats[k - 1]) {
        for (const auto& [token, count] : s->counts) {
          p[static_cast<std::size_t>(token)] = static_cast<double>(count) / static_cast<double>(s->total);
        }
        break;
      }
    }
  } else {
    const double d = smoothing_.discount;
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(v));
    for (const auto* s : stats) {
      if (!s) continue;
      const double total = static_cast<double>(s->total);
      const double gamma = d * static_cast<double>(s->counts.size()) / total;
      for (auto& x : p) x = gamma * x;
      for (const auto& [token, count] : s->counts) {
        const double a = (static_cast<double>(count) - d) / total;
        auto& x = p[static_cast<std::size_t>(token)];
        x = a + x;
      }
    }
  }
  for (auto& x : p) x = x > 0.0 ? std::log(x) : kNegInf;
  return p;
}

std::vector<double> NgramModel::candidate_logprobs(std::span<const TokenId> prefix, std::span<const TokenId>,
                                                   std::span<const TokenId> candidates) const {
  const auto stats = level_stats(prefix);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (TokenId t : candidates) {
    const double p = probability_from(stats, t);
    out.push_back(p > 0.0 ? std::log(p) : kNegInf);
  }
  return out;
}

void NgramModel::save(std::ostream& out) const {
  std::vector<std::string> lines;
  for (const auto& [context, stats] : top_) {
    std::string ctx;
    for (std::size_t i = 0; i < context.size(); ++i) {
      if (i) ctx += ' ';
      ctx += vocab_.token(context[i]);
    }
    for (const auto& [token, count] : stats.counts) {
      lines.push_back(ctx + '\t' + vocab_.token(token) + '\t' + std::to_string(count));
    }
  }
  std::sort(lines.begin(), lines.end());
  out << "ngram v1 order=" << order_ << '\n';
  for (const auto& l : lines) out << l << '\n';
}

NgramModel NgramModel::load(std::istream& in, SmoothingConfig smoothing) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("n-gram model: missing header");
  const std::string prefix = "ngram v1 order=";
  if (header.rfind(prefix, 0) != 0) throw std::runtime_error("n-gram model: bad header '" + header + "'");
  int order = 0;
  try {
    order = std::stoi(header.substr(prefix.size()));
  } catch (const std::exception&) {
    throw std::runtime_error("n-gram model: bad order in header '" + header + "'");
  }

  struct Row {
    std::vector<std::string> context;
    std::string token;
    std::uint64_t count;
  };
  std::vector<Row> rows;
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw std::runtime_error("n-gram model line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    Row row;
    if (!fields[0].empty()) row.context = split(fields[0], ' ');
    if (row.context.size() != static_cast<std::size_t>(order - 1)) {
      throw std::runtime_error("n-gram model line " + std::to_string(lineno) + ": context length mismatch");
    }
    row.token = fields[1];
    try {
      row.count = std::stoull(fields[2]);
    } catch (const std::exception&) {
      throw std::runtime_error("n-gram model line " + std::to_string(lineno) + ": bad count");
    }
    for (const auto& t : row.context) tokens.push_back(t);
    tokens.push_back(row.token);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("n-gram model: no counts");

  NgramModel model(Vocabulary::with_reserved(std::move(tokens)), order, smoothing);
  for (const auto& row : rows) {
    std::vector<TokenId> context;
    for (const auto& t : row.context) context.push_back(*model.vocab_.find(t));
    model.add_top(context, *model.vocab_.find(row.token), row.count);
  }
  model.finalize();
  return model;
}

NgramModel NgramModel::load_file(const std::string& path, SmoothingConfig smoothing) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open n-gram model '" + path + "'");
  return load(in, smoothing);
}

}  // namespace wordorder
