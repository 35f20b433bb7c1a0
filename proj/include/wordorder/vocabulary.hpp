#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wordorder {

using TokenId = std::int32_t;

inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kNullToken = "<null>";

// Bijective mapping between token strings and dense integer ids.
//
// A default-constructed vocabulary holds the four reserved tokens at ids 0..3
// (<s>, </s>, <unk>, <null>). Vocabularies received from external scorers may
// lack some of them; the special-id accessors then return nullopt.
class Vocabulary {
 public:
  Vocabulary();

  // Builds a vocabulary whose ids follow `tokens` exactly. Throws
  // std::invalid_argument on an empty list or duplicate entries.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  // Reserved tokens followed by the given tokens in sorted order, skipping
  // reserved ones and duplicates. This is the canonical vocabulary layout
  // for models trained from a corpus.
  static Vocabulary with_reserved(std::vector<std::string> tokens);

  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<TokenId> bos() const { return find(kBosToken); }
  std::optional<TokenId> eos() const { return find(kEosToken); }
  std::optional<TokenId> unk() const { return find(kUnkToken); }
  std::optional<TokenId> null_token() const { return find(kNullToken); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  struct Empty {};
  explicit Vocabulary(Empty) {}

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

}  // namespace wordorder
