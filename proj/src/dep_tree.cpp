#include "wordorder/dep_tree.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "wordorder/textprep.hpp"

namespace wordorder {

DepTree::DepTree(std::vector<DepNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ParseError(0, "empty tree");
  const int n = static_cast<int>(nodes_.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const int h = nodes_[static_cast<std::size_t>(i)].head;
    if (h == kRoot) {
      ++roots;
      root_ = static_cast<std::size_t>(i);
    } else if (h < 0 || h >= n) {
      throw ParseError(static_cast<std::size_t>(i + 1), "head index out of range");
    } else if (h == i) {
      throw ParseError(static_cast<std::size_t>(i + 1), "word is its own head");
    }
  }
  if (roots != 1) throw ParseError(roots == 0 ? 1 : static_cast<std::size_t>(n), "expected exactly one root, found " + std::to_string(roots));
  for (int i = 0; i < n; ++i) {
    int at = i;
    for (int steps = 0; at != kRoot; ++steps) {
      if (steps > n) throw ParseError(static_cast<std::size_t>(i + 1), "cycle in head relation");
      at = nodes_[static_cast<std::size_t>(at)].head;
    }
  }
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (i != root_ && nodes_[i].label) ++labeled;
  }
  if (labeled != 0 && labeled != nodes_.size() - 1) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (i != root_ && !nodes_[i].label) throw ParseError(i + 1, "arc label missing on a labeled tree");
    }
  }
}

bool DepTree::has_pos() const {
  for (const auto& n : nodes_) {
    if (!n.pos) return false;
  }
  return true;
}

bool DepTree::has_labels() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (i != root_ && !nodes_[i].label) return false;
  }
  return true;
}

std::vector<std::size_t> DepTree::children(int head) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].head == head) out.push_back(i);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> DepTree::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].head == kRoot) continue;
    auto h = static_cast<std::size_t>(nodes_[i].head);
    out.emplace_back(std::min(i, h), std::max(i, h));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::optional<std::string> optional_field(const std::string& s) {
  if (s == "_") return std::nullopt;
  return s;
}

struct Row {
  std::size_t line;
  std::vector<std::string> cols;
};

DepTree build_tree(const std::vector<Row>& rows) {
  std::vector<DepNode> nodes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::size_t form = 1, pos = 2, head = 3, label = 4;
    if (r.cols.size() >= 8) {
      pos = 4;
      head = 6;
      label = 7;
    } else if (r.cols.size() != 5) {
      throw ParseError(r.line, "expected 5 or 10 columns, found " + std::to_string(r.cols.size()));
    }
    long id = 0;
    long h = 0;
    try {
      id = std::stol(r.cols[0]);
      h = std::stol(r.cols[head]);
    } catch (const std::exception&) {
      throw ParseError(r.line, "non-numeric index or head");
    }
    if (id != static_cast<long>(i + 1)) throw ParseError(r.line, "indices must run 1..n in order");
    if (h < 0 || h > static_cast<long>(rows.size())) throw ParseError(r.line, "head index out of range");
    DepNode node;
    node.form = r.cols[form];
    node.pos = optional_field(r.cols[pos]);
    node.head = h == 0 ? DepTree::kRoot : static_cast<int>(h - 1);
    node.label = h == 0 ? std::nullopt : optional_field(r.cols[label]);
    nodes.push_back(std::move(node));
  }
  try {
    return DepTree(std::move(nodes));
  } catch (const ParseError& e) {
    // Map the 1-based word index onto the input line.
    const std::size_t word = e.row() == 0 ? 1 : e.row();
    const std::size_t line = rows.empty() ? 0 : rows[std::min(word, rows.size()) - 1].line;
    std::string msg = e.what();
    msg = msg.substr(msg.find(':') + 2);
    throw ParseError(line, msg);
  }
}

std::vector<DepTree> parse_rows(std::istream& in) {
  std::vector<DepTree> trees;
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!rows.empty()) trees.push_back(build_tree(rows));
    rows.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto cols = split_tokens(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0].starts_with("#")) continue;
    // CoNLL-U multiword ranges and empty nodes carry no tree structure.
    if (cols[0].find_first_of("-.") != std::string::npos) continue;
    rows.push_back({lineno, std::move(cols)});
  }
  flush();
  return trees;
}

}  // namespace

DepTree parse_conll(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto trees = parse_rows(in);
  if (trees.size() != 1) throw ParseError(0, "expected exactly one sentence, found " + std::to_string(trees.size()));
  return std::move(trees.front());
}

std::vector<DepTree> parse_conll_corpus(std::istream& in) { return parse_rows(in); }

std::vector<DepTree> read_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CoNLL file '" + path + "'");
  return parse_rows(in);
}

std::string to_conll(const DepTree& tree) {
  std::ostringstream out;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    out << (i + 1) << '\t' << n.form << '\t' << n.pos.value_or("_") << '\t' << (n.head == DepTree::kRoot ? 0 : n.head + 1)
        << '\t' << (n.head == DepTree::kRoot ? std::string("root") : n.label.value_or("_")) << '\n';
  }
  return out.str();
}

}  // namespace wordorder
