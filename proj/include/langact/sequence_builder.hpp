#pragma once

// Supervised token sequences for the training arrangements:
//
//   generation     [BOS V SEP L SEP PATH_GOAL path(20) SPEED_GOAL speed(10) EOS]
//   understanding  [BOS V SEP A(30) SEP L EOS]
//   refinement     [BOS V SEP L SEP PATH_GOAL coarse(20) SPEED_GOAL coarse(10) EOS]
//   endpoint probe [BOS V SEP L SEP PATH_GOAL SPEED_GOAL]
//
// Targets are stored at the position whose logits they supervise.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "langact/codebook.hpp"
#include "langact/grid_codec.hpp"

namespace langact {

inline constexpr int kPathTokens = 20;
inline constexpr int kSpeedTokens = 10;
inline constexpr int kActionTokens = kPathTokens + kSpeedTokens;

enum class SegmentTag : std::uint8_t { kV, kL, kA, kCoarse, kGoal, kSpecial };

std::string_view tag_name(SegmentTag t);

struct HardTarget {
    TokenId id = 0;
};

// Refers to the spatial soft label centered on `center` (a grid id).
struct SoftTarget {
    ActionTokenId center = 0;
};

using Target = std::variant<std::monostate, HardTarget, SoftTarget>;

enum class SequenceKind : std::uint8_t { kGeneration, kUnderstanding, kRefinement, kEndpointProbe };

enum class ActionOrder : std::uint8_t { kNatural, kEndpointFirst };

struct TokenSequence {
    SequenceKind kind = SequenceKind::kGeneration;
    std::vector<TokenId> input_ids;
    std::vector<Target> targets;
    std::vector<SegmentTag> tags;

    std::size_t size() const { return input_ids.size(); }
    int supervised_count() const;
    bool supervised(std::size_t pos) const {
        return !std::holds_alternative<std::monostate>(targets[pos]);
    }
    // One line per token: position, id, kind, tag, target.
    std::string debug_dump(const Codebook& cb) const;
};

// Grid ids of one trajectory: 20 path points and 10 speed waypoints.
struct ActionBlock {
    std::array<ActionTokenId, kPathTokens> path{};
    std::array<ActionTokenId, kSpeedTokens> speed{};

    // Throws std::invalid_argument unless the lengths are exactly 20 and 10.
    static ActionBlock from(std::span<const ActionTokenId> path, std::span<const ActionTokenId> speed);
    static ActionBlock tokenize(std::span<const Waypoint> path, std::span<const Waypoint> speed,
                                const GridSpec& spec);

    friend bool operator==(const ActionBlock&, const ActionBlock&) = default;
};

// {w_1..w_T} -> {w_T, w_1, .., w_{T-1}}
std::vector<ActionTokenId> reorder_endpoint_first(std::span<const ActionTokenId> block);
std::vector<ActionTokenId> restore_natural_order(std::span<const ActionTokenId> block);
// Path and speed sub-blocks reordered independently, concatenated (30 ids).
std::vector<ActionTokenId> reorder_endpoint_first(const ActionBlock& a);

// w_i = w0 + (i/T)(wT - w0), i = 1..T
std::vector<Waypoint> coarse_from_endpoint(Waypoint w0, Waypoint wT, int count);

// Coarse scaffold tokens for a block whose endpoints are the given grid ids;
// interpolation runs from the ego origin to the decoded endpoint cell centers.
ActionBlock coarse_scaffold(ActionTokenId path_end, ActionTokenId speed_end, const GridSpec& spec);

TokenSequence build_generation_sample(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const ActionBlock& a, ActionOrder order, const Codebook& cb);

TokenSequence build_understanding_sample(std::span<const TokenId> v, std::span<const TokenId> l,
                                         const ActionBlock& a, const Codebook& cb);

TokenSequence build_refinement_sample(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const ActionBlock& fine, const Codebook& cb);

TokenSequence build_endpoint_probe(std::span<const TokenId> v, std::span<const TokenId> l,
                                   const ActionBlock& a, const Codebook& cb);

// Unsupervised prompts used at decode time.
TokenSequence build_generation_prompt(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const Codebook& cb);
TokenSequence build_endpoint_prompt(std::span<const TokenId> v, std::span<const TokenId> l,
                                    const Codebook& cb);
TokenSequence build_refinement_prompt(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const ActionBlock& coarse, const Codebook& cb);

// Positions within a refinement layout.
struct RefinementLayout {
    std::size_t path_goal = 0;
    std::size_t first_path = 0;
    std::size_t speed_goal = 0;
    std::size_t first_speed = 0;
};
RefinementLayout refinement_layout(std::size_t v_len, std::size_t l_len);

}  // namespace langact
