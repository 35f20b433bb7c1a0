#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace wordorder::testing {

namespace {

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

struct Noun {
  std::string sg, pl;
};
struct Verb {
  std::string sg, pl, past;
};

const std::vector<std::string> kNames = {"Bob", "Alice", "Mary", "John"};
const std::vector<std::string> kDetSg = {"the", "a", "every", "this"};
const std::vector<std::string> kDetPl = {"the", "some", "many", "these"};
const std::vector<std::string> kAdj = {"big", "small", "red", "old", "happy", "quiet", "clever"};
const std::vector<Noun> kNouns = {{"cat", "cats"},         {"dog", "dogs"},       {"bird", "birds"},
                                  {"teacher", "teachers"}, {"child", "children"}, {"farmer", "farmers"},
                                  {"river", "rivers"},     {"house", "houses"},   {"apple", "apples"}};
const std::vector<Verb> kTrans = {{"eats", "eat", "ate"},         {"sees", "see", "saw"},
                                  {"likes", "like", "liked"},     {"chases", "chase", "chased"},
                                  {"finds", "find", "found"},     {"watches", "watch", "watched"},
                                  {"follows", "follow", "followed"}};
const std::vector<Verb> kIntrans = {{"sleeps", "sleep", "slept"},
                                    {"runs", "run", "ran"},
                                    {"listens", "listen", "listened"},
                                    {"waits", "wait", "waited"}};
const std::vector<std::string> kAdv = {"quickly", "quietly", "often", "today", "again"};
const std::vector<std::string> kPrep = {"near", "with", "under", "behind"};

// Returns whether the phrase is plural.
bool noun_phrase(Rng& rng, Words& out, bool allow_pp) {
  if (rng.bernoulli(0.2)) {
    out.push_back(pick(rng, kNames));
    return false;
  }
  const bool plural = rng.bernoulli(0.35);
  out.push_back(pick(rng, plural ? kDetPl : kDetSg));
  if (rng.bernoulli(0.4)) out.push_back(pick(rng, kAdj));
  const auto& n = pick(rng, kNouns);
  out.push_back(plural ? n.pl : n.sg);
  if (allow_pp && rng.bernoulli(0.25)) {
    out.push_back(pick(rng, kPrep));
    noun_phrase(rng, out, false);
  }
  return plural;
}

Words sentence(Rng& rng) {
  Words s;
  const bool plural = noun_phrase(rng, s, true);
  const bool past = rng.bernoulli(0.3);
  auto form = [&](const Verb& v) { return past ? v.past : (plural ? v.pl : v.sg); };
  if (rng.bernoulli(0.7)) {
    s.push_back(form(pick(rng, kTrans)));
    noun_phrase(rng, s, true);
  } else {
    s.push_back(form(pick(rng, kIntrans)));
  }
  if (rng.bernoulli(0.3)) s.push_back(pick(rng, kAdv));
  s.push_back(".");
  return s;
}

std::string ngram_key(const Words& w, std::size_t i, std::size_t n) {
  std::string k;
  for (std::size_t j = i; j < i + n; ++j) {
    k += w[j];
    k += '\x1f';
  }
  return k;
}

}  // namespace

std::vector<Words> grammar_corpus(std::size_t n, std::uint64_t seed, std::size_t max_words) {
  Rng rng(seed);
  std::vector<Words> out;
  while (out.size() < n) {
    auto s = sentence(rng);
    if (s.size() <= max_words) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<TokenId>> random_multiset(Rng& rng, std::size_t max_words, std::size_t max_subwords,
                                                  TokenId first_id, std::size_t alphabet) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_words));
  std::vector<std::vector<TokenId>> words;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(max_subwords));
    std::vector<TokenId> w;
    for (std::size_t j = 0; j < len; ++j) w.push_back(first_id + static_cast<TokenId>(rng.below(alphabet)));
    words.push_back(std::move(w));
  }
  return words;
}

std::set<std::vector<TokenId>> flat_permutations(std::vector<std::vector<TokenId>> words) {
  std::set<std::vector<TokenId>> out;
  std::sort(words.begin(), words.end());
  do {
    std::vector<TokenId> flat;
    for (const auto& w : words) flat.insert(flat.end(), w.begin(), w.end());
    out.insert(std::move(flat));
  } while (std::next_permutation(words.begin(), words.end()));
  return out;
}

std::vector<TokenId> MultisetTracker::valid_next(const std::vector<TokenId>& prefix) const {
  std::set<TokenId> next;
  for (const auto& p : perms_) {
    if (p.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), p.begin())) next.insert(p[prefix.size()]);
  }
  return {next.begin(), next.end()};
}

double sequence_logprob(const Scorer& scorer, const std::vector<TokenId>& seq, const std::vector<TokenId>& input) {
  std::vector<TokenId> prefix{*scorer.vocabulary().bos()};
  double total = 0.0;
  for (auto t : seq) {
    const auto lp = scorer.next_logprobs(prefix, input);
    total = total + lp[static_cast<std::size_t>(t)];
    prefix.push_back(t);
  }
  return total;
}

std::pair<std::vector<TokenId>, double> brute_force_best(const Scorer& scorer,
                                                         const std::vector<std::vector<TokenId>>& words,
                                                         const std::vector<TokenId>& input) {
  std::pair<std::vector<TokenId>, double> best{{}, std::numeric_limits<double>::quiet_NaN()};
  for (const auto& p : flat_permutations(words)) {  // ascending, so the first of equals wins
    const double s = sequence_logprob(scorer, p, input);
    if (std::isnan(best.second) || s > best.second) best = {p, s};
  }
  return best;
}

double reference_bleu(const std::vector<Words>& hyps, const std::vector<Words>& refs) {
  double log_p = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    double hit = 0, all = 0;
    for (std::size_t s = 0; s < hyps.size(); ++s) {
      std::unordered_map<std::string, int> ref_counts;
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i) ++ref_counts[ngram_key(refs[s], i, n)];
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i) {
        all += 1;
        auto it = ref_counts.find(ngram_key(hyps[s], i, n));
        if (it != ref_counts.end() && it->second > 0) {
          hit += 1;
          --it->second;
        }
      }
    }
    if (hit == 0) return 0.0;
    log_p += 0.25 * std::log(hit / all);
  }
  double c = 0, r = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    c += static_cast<double>(hyps[s].size());
    r += static_cast<double>(refs[s].size());
  }
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(log_p);
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> all_spanning_trees(std::size_t n) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out;
  if (n < 2) return {{}};
  if (n == 2) return {{{0, 1}}};
  std::vector<std::size_t> code(n - 2, 0);
  for (;;) {
    std::vector<std::size_t> degree(n, 1);
    for (auto c : code) ++degree[c];
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (auto c : code) {
      for (std::size_t leaf = 0; leaf < n; ++leaf) {
        if (degree[leaf] == 1) {
          edges.emplace_back(std::min(leaf, c), std::max(leaf, c));
          --degree[leaf];
          --degree[c];
          break;
        }
      }
    }
    std::vector<std::size_t> last;
    for (std::size_t v = 0; v < n; ++v) {
      if (degree[v] == 1) last.push_back(v);
    }
    edges.emplace_back(last[0], last[1]);
    std::sort(edges.begin(), edges.end());
    out.push_back(std::move(edges));
    std::size_t i = 0;
    while (i < code.size() && ++code[i] == n) code[i++] = 0;
    if (i == code.size()) break;
  }
  return out;
}

DepTree random_tree(Rng& rng, std::size_t n) {
  static const std::vector<std::string> forms = {"the", "cat", "eats", "food", "Bob", "listening", "(", ")", ":",
                                                 "-", "a", "music", "likes", "it", "'s"};
  static const std::vector<std::string> tags = {"DT", "NN", "VBZ", "NNP", ":", "-LRB-", "-RRB-", ",", "PRP", "IN"};
  static const std::vector<std::string> labels = {"sub", "obj", "det", "mod", "punct", "nmod:poss", "x"};
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<DepNode> nodes(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& node = nodes[order[k]];
    node.form = pick(rng, forms);
    node.pos = pick(rng, tags);
    if (k == 0) {
      node.head = DepTree::kRoot;
    } else {
      node.head = static_cast<int>(order[static_cast<std::size_t>(rng.below(k))]);
      node.label = pick(rng, labels);
    }
  }
  return DepTree(std::move(nodes));
}

DepTree bob_eats_food() {
  return DepTree({{"Bob", "NNP", 1, "sub"}, {"eats", "VBZ", DepTree::kRoot, std::nullopt}, {"food", "NNP", 1, "obj"}});
}

double gaussian(Rng& rng) {
  // Box-Muller on the library-independent uniform stream.
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

Eigen::MatrixXd random_orthogonal(std::size_t dim, Rng& rng) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = gaussian(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

Eigen::MatrixXd isometric_features(const DepTree& tree, std::size_t dim, Rng& rng) {
  const std::size_t n = tree.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (int at = static_cast<int>(i); at != DepTree::kRoot; at = tree.node(static_cast<std::size_t>(at)).head) {
      if (tree.node(static_cast<std::size_t>(at)).head != DepTree::kRoot) h(static_cast<Eigen::Index>(i), at) = 1.0;
    }
  }
  return h * random_orthogonal(dim, rng);
}

Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& x,
                                 double h) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  Eigen::MatrixXd xp = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      xp(i, j) = v + h;
      const double up = f(xp);
      xp(i, j) = v - h;
      const double down = f(xp);
      xp(i, j) = v;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace wordorder::testing
