#include "wordorder/penman.hpp"

#include <algorithm>
#include <stdexcept>

#include "wordorder/random.hpp"

namespace wordorder {

PenmanMode parse_penman_mode(const std::string& name) {
  for (auto m : kAllPenmanModes) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown PENMAN mode '" + name + "' (expected base, brac, pos, udep, ldep or full)");
}

std::string to_string(PenmanMode mode) {
  switch (mode) {
    case PenmanMode::base: return "base";
    case PenmanMode::brac: return "brac";
    case PenmanMode::pos: return "pos";
    case PenmanMode::udep: return "udep";
    case PenmanMode::ldep: return "ldep";
    case PenmanMode::full: return "full";
  }
  return "?";
}

Segmenter whole_word_segmenter() {
  return [](const std::string& w) { return std::vector<std::string>{w}; };
}

Segmenter bpe_segmenter(const BpeMerges& merges) {
  return [merges](const std::string& w) { return merges.apply(w); };
}

std::size_t PartialTree::tag_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.pos.has_value(); }));
}

std::size_t PartialTree::arc_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.head.has_value(); }));
}

namespace {

bool is_structural(const std::string& t) { return t == "(" || t == ")"; }
bool is_label(const std::string& t) { return t.size() > 1 && t.front() == ':'; }

PartialTree view_of(const DepTree& tree, PenmanMode mode) {
  const bool tags = mode == PenmanMode::pos || mode == PenmanMode::full;
  const bool nest = mode == PenmanMode::udep || mode == PenmanMode::ldep || mode == PenmanMode::full;
  const bool labels = mode == PenmanMode::ldep || mode == PenmanMode::full;
  if (tags && !tree.has_pos()) throw std::invalid_argument("mode " + to_string(mode) + " needs part-of-speech tags");
  if (labels && !tree.has_labels()) throw std::invalid_argument("mode " + to_string(mode) + " needs arc labels");
  PartialTree view;
  for (const auto& n : tree.nodes()) {
    PartialNode p;
    p.form = n.form;
    if (tags) p.pos = n.pos;
    if (nest && n.head != DepTree::kRoot) {
      p.head = static_cast<std::size_t>(n.head);
      if (labels) p.label = n.label;
    }
    view.nodes.push_back(std::move(p));
  }
  return view;
}

std::vector<std::string> segment_word(const Segmenter& segment, const std::string& form) {
  auto pieces = segment(form);
  if (pieces.empty()) throw std::invalid_argument("segmenter returned no subwords for '" + form + "'");
  return pieces;
}

std::vector<std::string> emit(const PartialTree& view, bool bracketed, std::uint64_t seed, const Segmenter& segment) {
  Rng rng(seed);
  std::vector<std::string> out;
  const std::size_t n = view.nodes.size();
  if (!bracketed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (auto i : order) {
      for (auto& s : segment_word(segment, view.nodes[i].form)) out.push_back(std::move(s));
    }
    return out;
  }
  std::vector<std::vector<std::size_t>> kids(n);
  std::vector<std::size_t> top;
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto& h = view.nodes[i].head) {
      if (*h >= n) throw std::invalid_argument("partial tree head out of range");
      kids[*h].push_back(i);
    } else {
      top.push_back(i);
    }
  }
  if (top.empty() && n > 0) throw std::invalid_argument("partial tree has no top-level node");
  rng.shuffle(top);

  std::size_t emitted = 0;
  auto group = [&](auto&& self, std::size_t i, int depth) -> void {
    if (depth > static_cast<int>(n)) throw std::invalid_argument("cycle in partial tree");
    ++emitted;
    const auto& node = view.nodes[i];
    out.emplace_back("(");
    for (auto& s : segment_word(segment, node.form)) out.push_back(std::move(s));
    if (node.pos) out.push_back(*node.pos);
    auto order = kids[i];
    rng.shuffle(order);
    for (auto k : order) {
      if (const auto& l = view.nodes[k].label) out.push_back(":" + *l);
      self(self, k, depth + 1);
    }
    out.emplace_back(")");
  };
  for (auto t : top) group(group, t, 0);
  if (emitted != n) throw std::invalid_argument("cycle in partial tree");
  return out;
}

PenmanGraph graph_of(const PartialTree& view, bool bracketed) {
  PenmanGraph g;
  g.bracketed = bracketed;
  for (const auto& n : view.nodes) {
    PenmanNode p;
    p.form = n.form;
    p.pos = n.pos;
    p.label = n.label;
    p.parent = n.head ? static_cast<int>(*n.head) : -1;
    g.nodes.push_back(std::move(p));
  }
  return g;
}

class PenmanParser {
 public:
  explicit PenmanParser(std::span<const std::string> tokens) : tokens_(tokens) {}

  PenmanGraph parse() {
    while (pos_ < tokens_.size()) {
      if (tokens_[pos_] != "(") fail("expected '(' at top level");
      group(-1, std::nullopt);
    }
    return std::move(graph_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("PENMAN token " + std::to_string(pos_) + ": " + what);
  }
  const std::string& take() {
    if (pos_ >= tokens_.size()) throw std::invalid_argument("unbalanced brackets: sequence ended inside a group");
    return tokens_[pos_++];
  }

  void group(int parent, std::optional<std::string> label) {
    take();  // "("
    std::vector<std::string> pieces{take()};
    while (pieces.back().size() > 1 && pieces.back().back() == kContinuationMarker) pieces.push_back(take());
    PenmanNode node;
    node.form = join_word(pieces);
    node.label = std::move(label);
    node.parent = parent;
    if (pos_ < tokens_.size() && !is_structural(tokens_[pos_]) && !is_label(tokens_[pos_])) node.pos = take();
    const int self = static_cast<int>(graph_.nodes.size());
    graph_.nodes.push_back(std::move(node));
    for (;;) {
      if (pos_ >= tokens_.size()) throw std::invalid_argument("unbalanced brackets: missing ')'");
      const auto& t = tokens_[pos_];
      if (t == ")") {
        ++pos_;
        return;
      }
      if (is_label(t)) {
        std::string l = t.substr(1);
        ++pos_;
        if (pos_ >= tokens_.size() || tokens_[pos_] != "(") fail("label must be followed by '('");
        group(self, std::move(l));
      } else if (t == "(") {
        group(self, std::nullopt);
      } else {
        fail("unexpected token '" + t + "'");
      }
    }
  }

  std::span<const std::string> tokens_;
  std::size_t pos_ = 0;
  PenmanGraph graph_;
};

std::string render(const PenmanGraph& g, const std::vector<std::vector<std::size_t>>& kids, std::size_t i) {
  const auto& n = g.nodes[i];
  std::string s = "(" + n.form;
  if (n.pos) s += " " + *n.pos;
  std::vector<std::string> parts;
  for (auto k : kids[i]) {
    const auto& l = g.nodes[k].label;
    parts.push_back((l ? ":" + *l + " " : std::string()) + render(g, kids, k));
  }
  std::sort(parts.begin(), parts.end());
  for (const auto& p : parts) s += " " + p;
  return s + ")";
}

}  // namespace

std::vector<std::string> serialize_penman(const DepTree& tree, PenmanMode mode, std::uint64_t seed,
                                          const Segmenter& segment) {
  return emit(view_of(tree, mode), mode != PenmanMode::base, seed, segment);
}

std::vector<std::string> serialize_partial(const PartialTree& tree, std::uint64_t seed, const Segmenter& segment) {
  return emit(tree, true, seed, segment);
}

PartialTree sample_partial(const DepTree& tree, double p_pos, double p_dep, std::uint64_t seed) {
  if (!(p_pos >= 0.0 && p_pos <= 1.0) || !(p_dep >= 0.0 && p_dep <= 1.0)) {
    throw std::invalid_argument("sampling proportions must lie in [0, 1]");
  }
  if (!tree.has_pos() || !tree.has_labels()) throw std::invalid_argument("partial sampling needs a fully annotated tree");
  Rng rng(seed);
  PartialTree out;
  for (const auto& n : tree.nodes()) {
    PartialNode p;
    p.form = n.form;
    if (rng.bernoulli(p_pos)) p.pos = n.pos;
    if (n.head != DepTree::kRoot) {
      if (rng.bernoulli(p_dep)) {
        p.head = static_cast<std::size_t>(n.head);
        p.label = n.label;
      }
    }
    out.nodes.push_back(std::move(p));
  }
  return out;
}

std::vector<PartialCell> partial_grid(const DepTree& tree, std::uint64_t seed) {
  static constexpr double kLevels[] = {0.0, 0.5, 1.0};
  std::vector<PartialCell> cells;
  std::uint64_t cell = 0;
  for (double p_pos : kLevels) {
    for (double p_dep : kLevels) {
      cells.push_back({p_pos, p_dep, sample_partial(tree, p_pos, p_dep, derive_seed(seed, cell++))});
    }
  }
  return cells;
}

PenmanGraph parse_penman(std::span<const std::string> tokens, PenmanMode mode) {
  if (mode == PenmanMode::base) {
    PenmanGraph g;
    g.bracketed = false;
    for (const auto& w : group_subwords(tokens)) g.nodes.push_back({join_word(w), std::nullopt, std::nullopt, -1});
    return g;
  }
  return PenmanParser(tokens).parse();
}

std::string canonical_form(const PenmanGraph& graph) {
  std::vector<std::string> parts;
  if (!graph.bracketed) {
    for (const auto& n : graph.nodes) parts.push_back(n.form);
  } else {
    std::vector<std::vector<std::size_t>> kids(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      if (graph.nodes[i].parent >= 0) kids[static_cast<std::size_t>(graph.nodes[i].parent)].push_back(i);
    }
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      if (graph.nodes[i].parent < 0) parts.push_back(render(graph, kids, i));
    }
  }
  std::sort(parts.begin(), parts.end());
  std::string s = graph.bracketed ? "" : "base:";
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " " : "") + parts[i];
  return s;
}

std::string canonical_form(const DepTree& tree, PenmanMode mode) {
  return canonical_form(graph_of(view_of(tree, mode), mode != PenmanMode::base));
}

std::string canonical_form(const PartialTree& tree) { return canonical_form(graph_of(tree, true)); }

}  // namespace wordorder
