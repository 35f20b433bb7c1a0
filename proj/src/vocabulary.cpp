#include "wordorder/vocabulary.hpp"

#include <algorithm>
#include <stdexcept>

namespace wordorder {

Vocabulary::Vocabulary() {
  for (auto t : {kBosToken, kEosToken, kUnkToken, kNullToken}) add(t);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("empty vocabulary");
  Vocabulary v{Empty{}};
  for (const auto& t : tokens) {
    if (v.find(t)) throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
    v.add(t);
  }
  return v;
}

Vocabulary Vocabulary::with_reserved(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

TokenId Vocabulary::add(std::string_view token) {
  if (auto id = find(token)) return *id;
  auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const {
  if (auto id = find(token)) return *id;
  if (auto u = unk()) return *u;
  throw std::out_of_range("token '" + std::string(token) + "' not in vocabulary and no <unk> entry");
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

}  // namespace wordorder
