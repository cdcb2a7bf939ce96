#pragma once

// Unified id space: [text words | action cells | special tokens].
//
//   [0, K_text)                       text; id 0 is the reserved <unk> word
//   [K_text, K_text + K_action)       action tokens, unified = K_text + grid id
//   [K_text + K_action, K)            specials in the fixed Special order

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "langact/grid_codec.hpp"

namespace langact {

using TokenId = std::int32_t;

enum class TokenKind { kText, kAction, kSpecial };

enum class Special : int {
    kBos = 0,
    kEos,
    kSep,
    kPathGoal,
    kSpeedGoal,
    kClsLane,
    kClsObstacle,
    kClsTarget,
    kClsEgo,
};
inline constexpr int kNumSpecials = 9;

std::string_view special_name(Special s);

// Lowercase and drop punctuation. Returns "" for pure punctuation.
std::string normalize_word(std::string_view word);
std::vector<std::string> normalize_text(std::string_view text);

class Codebook {
public:
    // Throws std::invalid_argument on an empty list, on words that normalize to
    // nothing, and on duplicates after normalization.
    static Codebook build(const std::vector<std::string>& words, const GridSpec& grid);

    // Inverse of serialize(); throws DataError on malformed input.
    static Codebook parse(std::string_view text);
    static Codebook load(const std::string& path);

    int size() const { return static_cast<int>(words_.size()) + k_action_ + kNumSpecials; }
    int text_size() const { return static_cast<int>(words_.size()); }
    int action_offset() const { return text_size(); }
    int k_action() const { return k_action_; }
    int special_offset() const { return action_offset() + k_action_; }
    TokenId unk_id() const { return 0; }

    TokenId special(Special s) const { return special_offset() + static_cast<int>(s); }
    TokenId action(ActionTokenId grid_id) const;
    ActionTokenId grid_id(TokenId unified) const;

    // Throws std::out_of_range when id is outside [0, size()).
    TokenKind kind(TokenId id) const;

    std::vector<TokenId> encode_text(std::string_view text) const;
    std::string decode_text(std::span<const TokenId> ids) const;
    std::string token_string(TokenId id) const;

    const GridSpec& grid() const { return grid_; }
    const std::vector<std::string>& words() const { return words_; }

    std::string serialize() const;
    void save(const std::string& path) const;
    // FNV-1a over serialize(); embedded in checkpoints.
    std::uint64_t hash() const;

private:
    GridSpec grid_;
    int k_action_ = 0;
    std::vector<std::string> words_;  // words_[0] == "<unk>"
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace langact
