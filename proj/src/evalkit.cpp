#include "wordorder/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "wordorder/random.hpp"

namespace wordorder {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::uint64_t> ngram_counts(const Words& w, std::size_t n) {
  std::map<Ngram, std::uint64_t> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) ++out[Ngram(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

std::map<std::string, std::uint64_t> bag(const Words& w) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& x : w) ++out[x];
  return out;
}

// Size of the multiset difference a - b.
std::uint64_t excess(const std::map<std::string, std::uint64_t>& a, const std::map<std::string, std::uint64_t>& b) {
  std::uint64_t n = 0;
  for (const auto& [w, c] : a) {
    auto it = b.find(w);
    const std::uint64_t have = it == b.end() ? 0 : it->second;
    if (c > have) n += c - have;
  }
  return n;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

BleuReport corpus_bleu(std::span<const Words> hyps, std::span<const Words> refs) {
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                std::to_string(refs.size()) + " references");
  }
  if (hyps.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  BleuReport r;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    r.hyp_length += hyps[s].size();
    r.ref_length += refs[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = ngram_counts(hyps[s], n);
      const auto g = ngram_counts(refs[s], n);
      for (const auto& [gram, c] : h) {
        auto it = g.find(gram);
        r.matched[n - 1] += std::min(c, it == g.end() ? std::uint64_t{0} : it->second);
        r.total[n - 1] += c;
      }
    }
  }
  bool all_positive = true;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = ratio(r.matched[n], r.total[n]);
    if (r.matched[n] == 0) {
      all_positive = false;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  if (r.hyp_length == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.hyp_length < r.ref_length) {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  } else {
    r.brevity_penalty = 1.0;
  }
  if (all_positive) r.bleu = 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  // Exact matches should report exactly 100 rather than 100 +- 1ulp.
  if (all_positive && r.hyp_length == r.ref_length) {
    bool exact = true;
    for (std::size_t n = 0; n < 4; ++n) exact = exact && r.matched[n] == r.total[n];
    if (exact) r.bleu = 100.0;
  }
  return r;
}

LexicalErrorReport lexical_errors(std::span<const Words> hyps, std::span<const Words> refs, std::size_t bin_width) {
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("lexical_errors: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                std::to_string(refs.size()) + " references");
  }
  if (bin_width == 0) throw std::invalid_argument("lexical_errors: bin width must be positive");
  struct Acc {
    std::size_t sentences = 0;
    std::uint64_t missing = 0, redundant = 0, ref = 0, hyp = 0;
  };
  std::map<std::size_t, Acc> bins;
  LexicalErrorReport r;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = bag(hyps[s]);
    const auto g = bag(refs[s]);
    const auto miss = excess(g, h);
    const auto red = excess(h, g);
    r.missing += miss;
    r.redundant += red;
    r.ref_words += refs[s].size();
    r.hyp_words += hyps[s].size();
    auto& b = bins[refs[s].size() / bin_width];
    ++b.sentences;
    b.missing += miss;
    b.redundant += red;
    b.ref += refs[s].size();
    b.hyp += hyps[s].size();
  }
  r.missing_rate = ratio(r.missing, r.ref_words);
  r.redundant_rate = ratio(r.redundant, r.ref_words);
  r.length_ratio = ratio(r.hyp_words, r.ref_words);
  for (const auto& [k, b] : bins) {
    LexicalBin out;
    out.lo = k * bin_width;
    out.hi = out.lo + bin_width - 1;
    out.sentences = b.sentences;
    out.ref_words = b.ref;
    out.hyp_words = b.hyp;
    out.missing_rate = ratio(b.missing, b.ref);
    out.redundant_rate = ratio(b.redundant, b.ref);
    out.length_ratio = ratio(b.hyp, b.ref);
    r.bins.push_back(out);
  }
  return r;
}

std::string SensitivityReport::summary() const { return fixed(mean, 2) + " (" + fixed(stddev, 3) + ")"; }

SensitivityReport sensitivity(const Dataset& dev, const DecodeFn& decode, std::span<const std::uint64_t> seeds,
                              std::size_t workers) {
  if (seeds.empty()) throw std::invalid_argument("sensitivity: no seeds");
  if (dev.empty()) throw std::invalid_argument("sensitivity: empty dev set");
  std::vector<Words> refs;
  refs.reserve(dev.size());
  for (const auto& ex : dev) refs.push_back(detokenize(ex.target));

  SensitivityReport r;
  r.seeds.assign(seeds.begin(), seeds.end());
  for (auto seed : seeds) {
    const std::function<Words(std::size_t)> run = [&](std::size_t i) {
      const auto words = group_subwords(dev[i].input);
      const auto permuted = shuffle(words, {derive_seed(seed, i), Granularity::word});
      return detokenize(decode(permuted));
    };
    const auto hyps = parallel_map<Words>(dev.size(), workers, run);
    r.bleu.push_back(corpus_bleu(hyps, refs).bleu);
  }
  // Accumulating deviations from the first value keeps identical runs at an
  // exact zero spread.
  const double k = static_cast<double>(r.bleu.size());
  const double x0 = r.bleu.front();
  double shift = 0.0;
  for (double x : r.bleu) shift += x - x0;
  r.mean = x0 + shift / k;
  double var = 0.0;
  for (double x : r.bleu) var += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(var / k);
  return r;
}

std::string SweepMode::name() const {
  std::string s = space == SearchSpace::constrained ? "constrained" : "unconstrained";
  return null_input ? s + "+null" : s;
}

SweepMode parse_sweep_mode(const std::string& name) {
  SweepMode m;
  std::string base = name;
  if (base.ends_with("+null")) {
    m.null_input = true;
    base.resize(base.size() - 5);
  }
  if (base == "cond") base = "constrained";
  if (base == "uncond") base = "unconstrained";
  m.space = parse_search_space(base);
  return m;
}

double SweepTable::bleu(std::size_t beam, const std::string& mode) const {
  for (const auto& c : cells) {
    if (c.beam == beam && c.mode.name() == mode) return c.bleu;
  }
  throw std::out_of_range("no sweep cell for beam " + std::to_string(beam) + ", mode " + mode);
}

std::string SweepTable::to_text() const {
  std::size_t first = 4;
  for (const auto& m : modes) first = std::max(first, m.name().size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(first)) << "mode";
  for (auto b : beams) out << "  " << std::right << std::setw(8) << ("B=" + std::to_string(b));
  out << '\n';
  for (std::size_t m = 0; m < modes.size(); ++m) {
    out << std::left << std::setw(static_cast<int>(first)) << modes[m].name();
    for (std::size_t b = 0; b < beams.size(); ++b) {
      out << "  " << std::right << std::setw(8) << fixed(cells[m * beams.size() + b].bleu, 2);
    }
    out << '\n';
  }
  return out.str();
}

SweepTable beam_sweep(const Dataset& data, const Scorer& scorer, std::span<const std::size_t> beams,
                      std::span<const SweepMode> modes, std::size_t workers) {
  SweepTable t;
  t.beams.assign(beams.begin(), beams.end());
  t.modes.assign(modes.begin(), modes.end());
  if (beams.empty() || modes.empty()) return t;
  if (data.empty()) throw std::invalid_argument("beam_sweep: empty dataset");
  std::vector<Words> refs;
  for (const auto& ex : data) refs.push_back(detokenize(ex.target));
  for (const auto& mode : modes) {
    for (auto beam : beams) {
      DecodeConfig cfg;
      cfg.beam_size = beam;
      cfg.mode = mode.space;
      cfg.null_input = mode.null_input;
      cfg.length_norm = mode.space == SearchSpace::unconstrained;
      const std::function<Words(std::size_t)> run = [&](std::size_t i) {
        return detokenize(order_sentence(data[i].input, scorer, cfg));
      };
      const auto hyps = parallel_map<Words>(data.size(), workers, run);
      t.cells.push_back({beam, mode, corpus_bleu(hyps, refs).bleu});
    }
  }
  return t;
}

nlohmann::json to_json(const BleuReport& r) {
  return {{"bleu", r.bleu},
          {"precisions", r.precisions},
          {"matched", r.matched},
          {"total", r.total},
          {"brevity_penalty", r.brevity_penalty},
          {"hyp_length", r.hyp_length},
          {"ref_length", r.ref_length}};
}

nlohmann::json to_json(const LexicalErrorReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"sentences", b.sentences},
                    {"ref_words", b.ref_words},
                    {"hyp_words", b.hyp_words},
                    {"missing_rate", b.missing_rate},
                    {"redundant_rate", b.redundant_rate},
                    {"length_ratio", b.length_ratio}});
  }
  return {{"missing", r.missing},
          {"redundant", r.redundant},
          {"ref_words", r.ref_words},
          {"hyp_words", r.hyp_words},
          {"missing_rate", r.missing_rate},
          {"redundant_rate", r.redundant_rate},
          {"length_ratio", r.length_ratio},
          {"bins", bins}};
}

nlohmann::json to_json(const SensitivityReport& r) {
  return {{"seeds", r.seeds}, {"bleu", r.bleu}, {"mean", r.mean}, {"std", r.stddev}, {"summary", r.summary()}};
}

nlohmann::json to_json(const SweepTable& t) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : t.cells) cells.push_back({{"beam", c.beam}, {"mode", c.mode.name()}, {"bleu", c.bleu}});
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : t.modes) modes.push_back(m.name());
  return {{"beams", t.beams}, {"modes", modes}, {"cells", cells}};
}

std::string to_text(const BleuReport& r) {
  std::ostringstream out;
  out << "BLEU = " << fixed(r.bleu, 2) << ", " << fixed(100 * r.precisions[0], 1);
  for (std::size_t n = 1; n < 4; ++n) out << '/' << fixed(100 * r.precisions[n], 1);
  out << " (BP=" << fixed(r.brevity_penalty, 3) << ", ratio=" << fixed(ratio(r.hyp_length, r.ref_length), 3)
      << ", hyp_len=" << r.hyp_length << ", ref_len=" << r.ref_length << ")\n";
  return out.str();
}

std::string to_text(const LexicalErrorReport& r) {
  std::ostringstream out;
  out << "missing " << fixed(r.missing_rate, 4) << "  redundant " << fixed(r.redundant_rate, 4) << "  length_ratio "
      << fixed(r.length_ratio, 4) << '\n';
  out << std::left << std::setw(9) << "ref_len" << std::right << std::setw(6) << "sents" << std::setw(10) << "missing"
      << std::setw(11) << "redundant" << std::setw(8) << "ratio" << '\n';
  for (const auto& b : r.bins) {
    out << std::left << std::setw(9) << (std::to_string(b.lo) + "-" + std::to_string(b.hi)) << std::right
        << std::setw(6) << b.sentences << std::setw(10) << fixed(b.missing_rate, 4) << std::setw(11)
        << fixed(b.redundant_rate, 4) << std::setw(8) << fixed(b.length_ratio, 3) << '\n';
  }
  return out.str();
}

std::string bins_csv(const LexicalErrorReport& r) {
  std::ostringstream out;
  out << "lo,hi,sentences,ref_words,hyp_words,missing_rate,redundant_rate,length_ratio\n";
  for (const auto& b : r.bins) {
    out << b.lo << ',' << b.hi << ',' << b.sentences << ',' << b.ref_words << ',' << b.hyp_words << ','
        << fixed(b.missing_rate, 6) << ',' << fixed(b.redundant_rate, 6) << ',' << fixed(b.length_ratio, 6) << '\n';
  }
  return out.str();
}

}  // namespace wordorder
