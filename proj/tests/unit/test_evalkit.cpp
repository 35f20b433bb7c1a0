#include <algorithm>
#include <map>

#include "doctest.h"
#include "support.hpp"
#include "wordorder/bpe.hpp"
#include "wordorder/evalkit.hpp"
#include "wordorder/ngram.hpp"

using namespace wordorder;
using namespace wordorder::testing;

namespace {

Words w(const std::string& s) { return split_tokens(s); }

// Dataset whose inputs are seeded word shuffles of the targets, plus a KN
// model trained on exactly those targets.
struct Memorized {
  Dataset data;
  NgramModel model;
};

Memorized memorized(std::size_t n, std::uint64_t seed, int order = 3) {
  const auto corpus = grammar_corpus(n, seed);
  std::set<std::string> toks;
  for (const auto& s : corpus) toks.insert(s.begin(), s.end());
  auto vocab = Vocabulary::with_reserved({toks.begin(), toks.end()});
  std::vector<std::vector<TokenId>> ids;
  Dataset data;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ids.emplace_back();
    for (const auto& x : corpus[i]) ids.back().push_back(*vocab.find(x));
    SegmentedWords seg;
    for (const auto& x : corpus[i]) seg.push_back({x});
    data.push_back({shuffle(seg, {derive_seed(seed, i), Granularity::word}), corpus[i]});
  }
  return {data, NgramModel::train(vocab, ids, order)};
}

}  // namespace

TEST_CASE("BLEU of an identical corpus is 100") {
  const auto refs = grammar_corpus(30, 3);
  const auto r = corpus_bleu(refs, refs);
  CHECK(r.bleu == 100.0);
  CHECK(r.brevity_penalty == 1.0);
  for (double p : r.precisions) CHECK(p == 1.0);
}

TEST_CASE("BLEU is zero when a precision vanishes") {
  const std::vector<Words> hyp{w("the cat")}, ref{w("the cat sat")};
  const auto r = corpus_bleu(hyp, ref);
  CHECK(r.bleu == 0.0);
  CHECK(r.matched[0] == 2);
  CHECK(r.total[0] == 2);
  CHECK(r.matched[1] == 1);
  CHECK(r.total[2] == 0);
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(1.0 - 1.5)));
}

TEST_CASE("BLEU by hand with clipping and brevity") {
  // hyp: a a b c d e (6), ref: a b c d e f g (7)
  const std::vector<Words> hyp{w("a a b c d e")}, ref{w("a b c d e f g")};
  const auto r = corpus_bleu(hyp, ref);
  CHECK(r.matched == std::array<std::uint64_t, 4>{5, 4, 3, 2});
  CHECK(r.total == std::array<std::uint64_t, 4>{6, 5, 4, 3});
  const double expect = 100.0 * std::exp(1.0 - 7.0 / 6.0) *
                        std::exp(0.25 * (std::log(5.0 / 6) + std::log(4.0 / 5) + std::log(3.0 / 4) + std::log(2.0 / 3)));
  CHECK(r.bleu == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("BLEU matches an independent implementation") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto refs = grammar_corpus(25, rng.next());
    auto hyps = refs;
    for (auto& h : hyps) {
      rng.shuffle(h);
      if (rng.bernoulli(0.3)) h.pop_back();
      if (rng.bernoulli(0.2)) h.push_back("the");
    }
    CHECK(std::abs(corpus_bleu(hyps, refs).bleu - reference_bleu(hyps, refs)) <= 0.01);
  }
}

TEST_CASE("BLEU is 100 only for identical corpora") {
  Rng rng(6);
  const auto refs = grammar_corpus(10, 2);
  for (int trial = 0; trial < 50; ++trial) {
    auto hyps = refs;
    auto& h = hyps[static_cast<std::size_t>(rng.below(hyps.size()))];
    rng.shuffle(h);
    CHECK((corpus_bleu(hyps, refs).bleu == 100.0) == (hyps == refs));
  }
}

TEST_CASE("BLEU input validation") {
  const std::vector<Words> one{w("a")}, two{w("a"), w("b")}, none;
  CHECK_THROWS_AS(corpus_bleu(one, two), std::invalid_argument);
  CHECK_THROWS_AS(corpus_bleu(none, none), std::invalid_argument);
}

TEST_CASE("lexical errors by definition") {
  const std::vector<Words> hyp{w("a b b")}, ref{w("a b c")};
  const auto r = lexical_errors(hyp, ref);
  CHECK(r.missing == 1);
  CHECK(r.redundant == 1);
  CHECK(r.missing_rate == doctest::Approx(1.0 / 3));
  CHECK(r.redundant_rate == doctest::Approx(1.0 / 3));
  CHECK(r.length_ratio == 1.0);

  const auto same = lexical_errors(ref, ref);
  CHECK(same.missing_rate == 0.0);
  CHECK(same.redundant_rate == 0.0);
  CHECK(same.length_ratio == 1.0);
}

TEST_CASE("missing minus redundant equals the length deficit") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto refs = grammar_corpus(8, rng.next());
    std::vector<Words> hyps = grammar_corpus(8, rng.next());
    const auto r = lexical_errors(hyps, refs, 3);
    CHECK(static_cast<std::int64_t>(r.missing) - static_cast<std::int64_t>(r.redundant) ==
          static_cast<std::int64_t>(r.ref_words) - static_cast<std::int64_t>(r.hyp_words));
    std::uint64_t ref_total = 0, sentences = 0;
    for (const auto& b : r.bins) {
      ref_total += b.ref_words;
      sentences += b.sentences;
      CHECK(b.hi - b.lo == 2);
    }
    CHECK(ref_total == r.ref_words);
    CHECK(sentences == refs.size());
  }
}

TEST_CASE("constrained decodes never miss or add words") {
  const auto m = memorized(200, 4, 2);
  std::vector<Words> hyps, refs;
  DecodeConfig cfg;
  cfg.beam_size = 3;
  for (const auto& ex : m.data) {
    hyps.push_back(detokenize(order_sentence(ex.input, m.model, cfg)));
    refs.push_back(detokenize(ex.input));
  }
  const auto r = lexical_errors(hyps, refs);
  CHECK(r.missing == 0);
  CHECK(r.redundant == 0);
}

TEST_CASE("sensitivity of an oracle decoder is 100 (0.000)") {
  const auto m = memorized(40, 1);
  std::map<std::vector<std::string>, std::vector<std::string>> answer;
  for (const auto& ex : m.data) {
    auto key = ex.input;
    std::sort(key.begin(), key.end());
    answer[key] = ex.target;
  }
  DecodeFn oracle = [&](const std::vector<std::string>& in) {
    auto key = in;
    std::sort(key.begin(), key.end());
    return answer.at(key);
  };
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  const auto r = sensitivity(m.data, oracle, seeds);
  CHECK(r.mean == 100.0);
  CHECK(r.stddev == 0.0);
  CHECK(r.summary() == "100.00 (0.000)");
}

TEST_CASE("sensitivity reports are bit-stable and order-independent across workers") {
  // Unknown words get ids in order of appearance, so the decoder's tie
  // breaking, and therefore BLEU, depends on the input permutation.
  const auto m = memorized(60, 2, 2);
  Dataset dev;
  for (const auto& ex : m.data) {
    auto in = ex.input;
    auto tgt = ex.target;
    in.push_back("zork");
    in.push_back("quux");
    tgt.push_back("zork");
    tgt.push_back("quux");
    dev.push_back({in, tgt});
  }
  DecodeConfig cfg;
  cfg.beam_size = 4;
  DecodeFn decode = [&](const std::vector<std::string>& in) { return order_sentence(in, m.model, cfg); };
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  const auto a = sensitivity(dev, decode, seeds, 1);
  const auto b = sensitivity(dev, decode, seeds, 4);
  CHECK(a.bleu == b.bleu);
  CHECK(a.mean == b.mean);
  CHECK(a.stddev == b.stddev);
  CHECK(a.summary() == b.summary());
  CHECK(a.bleu.size() == 10);
  CHECK(a.stddev > 0.0);

  double mean = 0;
  for (double x : a.bleu) mean += x;
  mean /= 10;
  double var = 0;
  for (double x : a.bleu) var += (x - mean) * (x - mean);
  CHECK(a.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(a.stddev == doctest::Approx(std::sqrt(var / 10)).epsilon(1e-9));

  const std::vector<std::uint64_t> same(10, 7);
  const auto c = sensitivity(dev, decode, same, 3);
  CHECK(c.stddev == 0.0);
  CHECK(c.mean == c.bleu.front());
}

TEST_CASE("summary formatting") {
  SensitivityReport r;
  r.mean = 40.4512;
  r.stddev = 0.13349;
  CHECK(r.summary() == "40.45 (0.133)");
}

TEST_CASE("beam sweep") {
  const auto m = memorized(80, 7);
  const std::vector<std::size_t> none;
  const std::vector<SweepMode> modes{parse_sweep_mode("constrained"), parse_sweep_mode("uncond"),
                                     parse_sweep_mode("cond+null")};
  CHECK(beam_sweep(m.data, m.model, none, modes).cells.empty());

  const std::vector<std::size_t> beams{1, 8};
  const auto t = beam_sweep(m.data, m.model, beams, modes, 2);
  REQUIRE(t.cells.size() == 6);
  CHECK(t.bleu(8, "constrained") >= t.bleu(1, "constrained") - 0.5);
  CHECK(t.bleu(8, "constrained") >= t.bleu(8, "unconstrained"));
  CHECK(t.bleu(8, "constrained+null") == t.bleu(8, "constrained"));  // n-gram ignores the input
  CHECK_THROWS(t.bleu(64, "constrained"));
  const auto text = t.to_text();
  CHECK(text.find("B=1") != std::string::npos);
  CHECK(text.find("unconstrained") != std::string::npos);
  CHECK(to_json(t)["cells"].size() == 6);
  CHECK_THROWS(parse_sweep_mode("sideways"));
}

TEST_CASE("reports serialize") {
  const std::vector<Words> hyp{w("a b b")}, ref{w("a b c")};
  const auto lex = lexical_errors(hyp, ref);
  CHECK(to_json(lex)["missing_rate"].get<double>() == doctest::Approx(1.0 / 3));
  CHECK(bins_csv(lex).rfind("lo,hi,", 0) == 0);
  const std::vector<Words> longer{w("a b c d e")};
  CHECK(to_text(corpus_bleu(longer, longer)).find("BLEU = 100.00") != std::string::npos);
}
