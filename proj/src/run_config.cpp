#include "wordorder/run_config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <stdexcept>

#include "wordorder/evalkit.hpp"
#include "wordorder/ngram.hpp"
#include "wordorder/penman.hpp"

namespace wordorder {

namespace {

// Reads named members of one JSON object and rejects any it was not asked
// about.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + where() + "' must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument("config: '" + where(key) + "' has the wrong type");
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument("config: '" + where(key) + "' has the wrong type");
    }
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(it == j_.end() ? empty : *it, where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw std::invalid_argument("config: unknown key '" + where(k) + "'");
    }
  }

 private:
  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void check(const std::string& key, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: '" + key + "': " + e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: '" + key + "' " + what);
}

void validate(const RunConfig& c) {
  require(c.workers >= 1, "workers", "must be >= 1");
  require(c.prep.vocab_size >= 1, "prep.vocab_size", "must be >= 1");
  check("prep.granularity", [&] { parse_granularity(c.prep.granularity); });
  require(c.lm.order >= 1, "lm.order", "must be >= 1");
  check("lm.smoothing", [&] { parse_smoothing(c.lm.smoothing); });
  require(c.lm.discount > 0.0 && c.lm.discount < 1.0, "lm.discount", "must lie in (0, 1)");
  require(c.decode.beam >= 1, "decode.beam", "must be >= 1");
  check("decode.mode", [&] { parse_search_space(c.decode.mode); });
  require(!c.decode.max_len || *c.decode.max_len >= 1, "decode.max_len", "must be >= 1");
  require(c.eval.bin_width >= 1, "eval.bin_width", "must be >= 1");
  for (auto b : c.sweep.beams) require(b >= 1, "sweep.beams", "entries must be >= 1");
  for (const auto& m : c.sweep.modes) check("sweep.modes", [&] { parse_sweep_mode(m); });
  check("linearize.mode", [&] { parse_penman_mode(c.linearize.mode); });
  for (auto [p, key] : {std::pair{c.partial.p_pos, "partial.p_pos"}, std::pair{c.partial.p_dep, "partial.p_dep"}}) {
    require(!p || (*p >= 0.0 && *p <= 1.0), key, "must lie in [0, 1]");
  }
  require(c.probe.rank >= 1, "probe.rank", "must be >= 1");
  require(c.probe.batch >= 1, "probe.batch", "must be >= 1");
  require(c.probe.lr > 0.0, "probe.lr", "must be positive");
}

std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("bad " + what + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.get("external_scorer", c.external_scorer);
  {
    auto s = root.sub("prep");
    s.get("vocab_size", c.prep.vocab_size);
    s.get("min_frequency", c.prep.min_frequency);
    s.get("augment", c.prep.augment);
    s.get("granularity", c.prep.granularity);
    s.get("normalize_ptb", c.prep.normalize_ptb);
    s.finish();
  }
  {
    auto s = root.sub("lm");
    s.get("order", c.lm.order);
    s.get("smoothing", c.lm.smoothing);
    s.get("discount", c.lm.discount);
    s.finish();
  }
  {
    auto s = root.sub("decode");
    s.get("beam", c.decode.beam);
    s.get("mode", c.decode.mode);
    s.get("length_norm", c.decode.length_norm);
    s.get("max_len", c.decode.max_len);
    s.get("null_input", c.decode.null_input);
    s.finish();
  }
  {
    auto s = root.sub("eval");
    s.get("bin_width", c.eval.bin_width);
    s.finish();
  }
  {
    auto s = root.sub("sensitivity");
    s.get("k", c.sensitivity.k);
    s.get("seeds", c.sensitivity.seeds);
    s.finish();
  }
  {
    auto s = root.sub("sweep");
    s.get("beams", c.sweep.beams);
    s.get("modes", c.sweep.modes);
    s.finish();
  }
  {
    auto s = root.sub("linearize");
    s.get("mode", c.linearize.mode);
    s.finish();
  }
  {
    auto s = root.sub("partial");
    s.get("p_pos", c.partial.p_pos);
    s.get("p_dep", c.partial.p_dep);
    s.finish();
  }
  {
    auto s = root.sub("probe");
    s.get("rank", c.probe.rank);
    s.get("epochs", c.probe.epochs);
    s.get("batch", c.probe.batch);
    s.get("lr", c.probe.lr);
    s.get("exclude_punct", c.probe.exclude_punct);
    s.finish();
  }
  root.finish();
  validate(c);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  auto opt = [](const auto& o) -> nlohmann::json {
    if (o) return *o;
    return nullptr;
  };
  return {{"seed", opt(seed)},
          {"workers", workers},
          {"external_scorer", opt(external_scorer)},
          {"prep",
           {{"vocab_size", prep.vocab_size},
            {"min_frequency", prep.min_frequency},
            {"augment", prep.augment},
            {"granularity", prep.granularity},
            {"normalize_ptb", prep.normalize_ptb}}},
          {"lm", {{"order", lm.order}, {"smoothing", lm.smoothing}, {"discount", lm.discount}}},
          {"decode",
           {{"beam", decode.beam},
            {"mode", decode.mode},
            {"length_norm", decode.length_norm},
            {"max_len", opt(decode.max_len)},
            {"null_input", decode.null_input}}},
          {"eval", {{"bin_width", eval.bin_width}}},
          {"sensitivity", {{"k", sensitivity.k}, {"seeds", sensitivity.seeds}}},
          {"sweep", {{"beams", sweep.beams}, {"modes", sweep.modes}}},
          {"linearize", {{"mode", linearize.mode}}},
          {"partial", {{"p_pos", opt(partial.p_pos)}, {"p_dep", opt(partial.p_dep)}}},
          {"probe",
           {{"rank", probe.rank},
            {"epochs", probe.epochs},
            {"batch", probe.batch},
            {"lr", probe.lr},
            {"exclude_punct", probe.exclude_punct}}}};
}

std::uint64_t RunConfig::require_seed(const std::string& step) const {
  if (!seed) throw std::invalid_argument(step + " is stochastic and needs a seed (config 'seed' or --seed)");
  return *seed;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (auto dots = item.find(".."); dots != std::string_view::npos) {
      auto lo = parse_u64(item.substr(0, dots), "seed range");
      auto hi = parse_u64(item.substr(dots + 2), "seed range");
      if (hi < lo) throw std::invalid_argument("empty seed range '" + std::string(item) + "'");
      for (auto s = lo;; ++s) {
        out.push_back(s);
        if (s == hi) break;
      }
    } else {
      out.push_back(parse_u64(item, "seed"));
    }
  }
  if (out.empty()) throw std::invalid_argument("empty seed list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto s : parse_seed_list(text)) out.push_back(static_cast<std::size_t>(s));
  return out;
}

}  // namespace wordorder
