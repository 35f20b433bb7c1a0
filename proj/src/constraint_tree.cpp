#include "wordorder/constraint_tree.hpp"

#include <algorithm>
#include <stdexcept>

namespace wordorder {

NodeIndex ConstraintState::cursor() const {
  return readings_.empty() ? ConstraintTree::kRoot : readings_.front().cursor;
}

std::uint32_t ConstraintState::remaining(NodeIndex node) const {
  if (readings_.empty()) return 0;
  return readings_.front().counts->at(node);
}

std::uint32_t ConstraintState::remaining_terminals(NodeIndex node) const {
  if (readings_.empty()) return 0;
  return readings_.front().counts->at(node_count_ + node);
}

bool ConstraintState::operator==(const ConstraintState& other) const {
  if (readings_.size() != other.readings_.size() || remaining_total_ != other.remaining_total_) return false;
  for (std::size_t i = 0; i < readings_.size(); ++i) {
    if (readings_[i].cursor != other.readings_[i].cursor) return false;
    if (*readings_[i].counts != *other.readings_[i].counts) return false;
  }
  return true;
}

ConstraintTree::ConstraintTree(std::span<const std::vector<TokenId>> words) {
  if (words.empty()) throw std::invalid_argument("empty input");
  nodes_.emplace_back();
  for (const auto& word : words) {
    if (word.empty()) throw std::invalid_argument("empty word in constraint input");
    NodeIndex at = kRoot;
    for (TokenId token : word) {
      auto& kids = nodes_[at].children;
      auto it = std::lower_bound(kids.begin(), kids.end(), token,
                                 [](const auto& kid, TokenId t) { return kid.first < t; });
      NodeIndex next;
      if (it != kids.end() && it->first == token) {
        next = it->second;
      } else {
        next = static_cast<NodeIndex>(nodes_.size());
        kids.insert(it, {token, next});
        nodes_.push_back(Node{token, {}, 0, 0});
      }
      nodes_[next].initial_count += 1;
      at = next;
      ++subword_count_;
    }
    nodes_[at].terminal_count += 1;
    ++word_count_;
  }
}

std::optional<NodeIndex> ConstraintTree::child(NodeIndex parent, TokenId token) const {
  const auto& kids = nodes_.at(parent).children;
  auto it = std::lower_bound(kids.begin(), kids.end(), token,
                             [](const auto& kid, TokenId t) { return kid.first < t; });
  if (it == kids.end() || it->first != token) return std::nullopt;
  return it->second;
}

ConstraintState ConstraintTree::initial_state() const {
  const std::size_t n = nodes_.size();
  auto counts = std::make_shared<Counts>(2 * n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    (*counts)[i] = nodes_[i].initial_count;
    (*counts)[n + i] = nodes_[i].terminal_count;
  }
  ConstraintState state;
  state.node_count_ = n;
  state.remaining_total_ = subword_count_;
  state.readings_.push_back({kRoot, std::move(counts)});
  return state;
}

bool ConstraintTree::has_open_child(const Counts& counts, NodeIndex node) const {
  for (const auto& [token, kid] : nodes_[node].children) {
    if (counts[kid] > 0) return true;
  }
  return false;
}

void ConstraintTree::enter(Counts& counts, NodeIndex& cursor, NodeIndex target) const {
  counts[target] -= 1;
  cursor = target;
  // Nothing below can continue the word, so it ends here.
  if (!has_open_child(counts, target)) {
    counts[nodes_.size() + target] -= 1;
    cursor = kRoot;
  }
}

std::vector<TokenId> ConstraintTree::valid_next(const ConstraintState& state) const {
  std::vector<TokenId> out;
  auto add_open = [&](const Counts& counts, NodeIndex from) {
    for (const auto& [token, kid] : nodes_[from].children) {
      if (counts[kid] > 0) out.push_back(token);
    }
  };
  for (const auto& r : state.readings_) {
    const Counts& counts = *r.counts;
    if (r.cursor == kRoot) {
      add_open(counts, kRoot);
    } else {
      add_open(counts, r.cursor);
      if (counts[nodes_.size() + r.cursor] > 0) add_open(counts, kRoot);
    }
  }
  if (state.readings_.size() > 1 || (state.readings_.size() == 1 && state.readings_[0].cursor != kRoot)) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

bool ConstraintTree::is_valid(const ConstraintState& state, TokenId token) const {
  for (const auto& r : state.readings_) {
    const Counts& counts = *r.counts;
    if (r.cursor != kRoot) {
      if (auto c = child(r.cursor, token); c && counts[*c] > 0) return true;
      if (counts[nodes_.size() + r.cursor] == 0) continue;
    }
    if (auto c = child(kRoot, token); c && counts[*c] > 0) return true;
  }
  return false;
}

ConstraintState ConstraintTree::advance(const ConstraintState& state, TokenId token) const {
  ConstraintState next;
  next.node_count_ = state.node_count_;
  const std::size_t n = nodes_.size();

  for (const auto& r : state.readings_) {
    const Counts& counts = *r.counts;
    if (r.cursor != kRoot) {
      if (auto c = child(r.cursor, token); c && counts[*c] > 0) {
        auto copy = std::make_shared<Counts>(counts);
        NodeIndex cursor = r.cursor;
        enter(*copy, cursor, *c);
        next.readings_.push_back({cursor, std::move(copy)});
      }
      if (counts[n + r.cursor] == 0) continue;
    }
    if (auto c = child(kRoot, token); c && counts[*c] > 0) {
      auto copy = std::make_shared<Counts>(counts);
      if (r.cursor != kRoot) (*copy)[n + r.cursor] -= 1;
      NodeIndex cursor = kRoot;
      enter(*copy, cursor, *c);
      next.readings_.push_back({cursor, std::move(copy)});
    }
  }

  if (next.readings_.empty()) return next;  // dead
  next.remaining_total_ = state.remaining_total_ - 1;

  if (next.readings_.size() > 1) {
    auto less = [](const ConstraintState::Reading& a, const ConstraintState::Reading& b) {
      if (a.cursor != b.cursor) return a.cursor < b.cursor;
      return *a.counts < *b.counts;
    };
    auto same = [](const ConstraintState::Reading& a, const ConstraintState::Reading& b) {
      return a.cursor == b.cursor && *a.counts == *b.counts;
    };
    std::sort(next.readings_.begin(), next.readings_.end(), less);
    next.readings_.erase(std::unique(next.readings_.begin(), next.readings_.end(), same),
                         next.readings_.end());
  }
  return next;
}

}  // namespace wordorder
