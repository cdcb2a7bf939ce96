#include "langact/sequence_builder.hpp"

#include <sstream>
#include <stdexcept>

namespace langact {

namespace {

struct Builder {
    const Codebook& cb;
    TokenSequence seq;

    void push(TokenId id, SegmentTag tag) {
        seq.input_ids.push_back(id);
        seq.tags.push_back(tag);
        seq.targets.emplace_back(std::monostate{});
    }
    void push(Special s) { push(cb.special(s), s == Special::kPathGoal || s == Special::kSpeedGoal
                                                   ? SegmentTag::kGoal
                                                   : SegmentTag::kSpecial); }
    void push_all(std::span<const TokenId> ids, SegmentTag tag) {
        for (TokenId id : ids) {
            push(id, tag);
        }
    }
    void push_actions(std::span<const ActionTokenId> ids, SegmentTag tag) {
        for (ActionTokenId a : ids) {
            push(cb.action(a), tag);
        }
    }
    void supervise_last(Target t) { seq.targets.back() = t; }
    std::size_t last() const { return seq.input_ids.size() - 1; }

    // [BOS V SEP L SEP]
    void prefix(std::span<const TokenId> v, std::span<const TokenId> l) {
        push(Special::kBos);
        push_all(v, SegmentTag::kV);
        push(Special::kSep);
        push_all(l, SegmentTag::kL);
        push(Special::kSep);
    }

    // Goal token followed by an autoregressive block: each position predicts the next.
    void ar_block(Special goal, std::span<const ActionTokenId> ids) {
        push(goal);
        for (ActionTokenId a : ids) {
            supervise_last(SoftTarget{a});
            push(cb.action(a), SegmentTag::kA);
        }
    }
};

}  // namespace

std::string_view tag_name(SegmentTag t) {
    switch (t) {
    case SegmentTag::kV: return "V";
    case SegmentTag::kL: return "L";
    case SegmentTag::kA: return "A";
    case SegmentTag::kCoarse: return "coarse";
    case SegmentTag::kGoal: return "goal";
    case SegmentTag::kSpecial: return "special";
    }
    return "?";
}

int TokenSequence::supervised_count() const {
    int n = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        n += supervised(i) ? 1 : 0;
    }
    return n;
}

std::string TokenSequence::debug_dump(const Codebook& cb) const {
    std::ostringstream os;
    for (std::size_t i = 0; i < input_ids.size(); ++i) {
        os << i << '\t' << input_ids[i] << '\t' << cb.token_string(input_ids[i]) << '\t'
           << tag_name(tags[i]) << '\t';
        if (const auto* h = std::get_if<HardTarget>(&targets[i])) {
            os << "hard:" << cb.token_string(h->id);
        } else if (const auto* s = std::get_if<SoftTarget>(&targets[i])) {
            os << "soft:" << s->center;
        } else {
            os << '-';
        }
        os << '\n';
    }
    return os.str();
}

ActionBlock ActionBlock::from(std::span<const ActionTokenId> path, std::span<const ActionTokenId> speed) {
    if (path.size() != kPathTokens || speed.size() != kSpeedTokens) {
        throw std::invalid_argument("action block needs 20 path and 10 speed tokens, got " +
                                    std::to_string(path.size()) + " and " +
                                    std::to_string(speed.size()));
    }
    ActionBlock a;
    std::copy(path.begin(), path.end(), a.path.begin());
    std::copy(speed.begin(), speed.end(), a.speed.begin());
    return a;
}

ActionBlock ActionBlock::tokenize(std::span<const Waypoint> path, std::span<const Waypoint> speed,
                                  const GridSpec& spec) {
    std::vector<ActionTokenId> p;
    std::vector<ActionTokenId> s;
    for (const auto& w : path) {
        p.push_back(tokenize_waypoint(w, spec));
    }
    for (const auto& w : speed) {
        s.push_back(tokenize_waypoint(w, spec));
    }
    return from(p, s);
}

std::vector<ActionTokenId> reorder_endpoint_first(std::span<const ActionTokenId> block) {
    std::vector<ActionTokenId> out;
    if (block.empty()) {
        return out;
    }
    out.reserve(block.size());
    out.push_back(block.back());
    out.insert(out.end(), block.begin(), block.end() - 1);
    return out;
}

std::vector<ActionTokenId> restore_natural_order(std::span<const ActionTokenId> block) {
    std::vector<ActionTokenId> out;
    if (block.empty()) {
        return out;
    }
    out.reserve(block.size());
    out.insert(out.end(), block.begin() + 1, block.end());
    out.push_back(block.front());
    return out;
}

std::vector<ActionTokenId> reorder_endpoint_first(const ActionBlock& a) {
    auto out = reorder_endpoint_first(std::span<const ActionTokenId>(a.path));
    auto sp = reorder_endpoint_first(std::span<const ActionTokenId>(a.speed));
    out.insert(out.end(), sp.begin(), sp.end());
    return out;
}

std::vector<Waypoint> coarse_from_endpoint(Waypoint w0, Waypoint wT, int count) {
    if (count < 1) {
        throw std::invalid_argument("coarse_from_endpoint: count must be >= 1");
    }
    std::vector<Waypoint> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 1; i <= count; ++i) {
        if (i == count) {
            out.push_back(wT);
            break;
        }
        const double f = static_cast<double>(i) / static_cast<double>(count);
        out.push_back({w0.x + f * (wT.x - w0.x), w0.y + f * (wT.y - w0.y)});
    }
    return out;
}

ActionBlock coarse_scaffold(ActionTokenId path_end, ActionTokenId speed_end, const GridSpec& spec) {
    const Waypoint origin{0.0, 0.0};
    const auto path = coarse_from_endpoint(origin, detokenize(path_end, spec), kPathTokens);
    const auto speed = coarse_from_endpoint(origin, detokenize(speed_end, spec), kSpeedTokens);
    return ActionBlock::tokenize(path, speed, spec);
}

TokenSequence build_generation_sample(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const ActionBlock& a, ActionOrder order, const Codebook& cb) {
    Builder b{cb, {}};
    b.seq.kind = SequenceKind::kGeneration;
    b.prefix(v, l);
    if (order == ActionOrder::kEndpointFirst) {
        b.ar_block(Special::kPathGoal, reorder_endpoint_first(std::span<const ActionTokenId>(a.path)));
        b.ar_block(Special::kSpeedGoal, reorder_endpoint_first(std::span<const ActionTokenId>(a.speed)));
    } else {
        b.ar_block(Special::kPathGoal, a.path);
        b.ar_block(Special::kSpeedGoal, a.speed);
    }
    b.push(Special::kEos);
    return std::move(b.seq);
}

TokenSequence build_understanding_sample(std::span<const TokenId> v, std::span<const TokenId> l,
                                         const ActionBlock& a, const Codebook& cb) {
    Builder b{cb, {}};
    b.seq.kind = SequenceKind::kUnderstanding;
    b.push(Special::kBos);
    b.push_all(v, SegmentTag::kV);
    b.push(Special::kSep);
    b.push_actions(a.path, SegmentTag::kA);
    b.push_actions(a.speed, SegmentTag::kA);
    b.push(Special::kSep);
    for (TokenId w : l) {
        b.supervise_last(HardTarget{w});
        b.push(w, SegmentTag::kL);
    }
    b.push(Special::kEos);
    return std::move(b.seq);
}

TokenSequence build_refinement_prompt(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const ActionBlock& coarse, const Codebook& cb) {
    Builder b{cb, {}};
    b.seq.kind = SequenceKind::kRefinement;
    b.prefix(v, l);
    b.push(Special::kPathGoal);
    b.push_actions(coarse.path, SegmentTag::kCoarse);
    b.push(Special::kSpeedGoal);
    b.push_actions(coarse.speed, SegmentTag::kCoarse);
    b.push(Special::kEos);
    return std::move(b.seq);
}

RefinementLayout refinement_layout(std::size_t v_len, std::size_t l_len) {
    RefinementLayout r;
    r.path_goal = 1 + v_len + 1 + l_len + 1;
    r.first_path = r.path_goal + 1;
    r.speed_goal = r.first_path + kPathTokens;
    r.first_speed = r.speed_goal + 1;
    return r;
}

TokenSequence build_refinement_sample(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const ActionBlock& fine, const Codebook& cb) {
    const ActionBlock coarse =
        coarse_scaffold(fine.path[kPathTokens - 1], fine.speed[kSpeedTokens - 1], cb.grid());
    TokenSequence seq = build_refinement_prompt(v, l, coarse, cb);
    const RefinementLayout r = refinement_layout(v.size(), l.size());
    seq.targets[r.path_goal] = SoftTarget{fine.path[kPathTokens - 1]};
    seq.targets[r.speed_goal] = SoftTarget{fine.speed[kSpeedTokens - 1]};
    for (int i = 0; i < kPathTokens; ++i) {
        seq.targets[r.first_path + static_cast<std::size_t>(i)] = SoftTarget{fine.path[static_cast<std::size_t>(i)]};
    }
    for (int i = 0; i < kSpeedTokens; ++i) {
        seq.targets[r.first_speed + static_cast<std::size_t>(i)] = SoftTarget{fine.speed[static_cast<std::size_t>(i)]};
    }
    return seq;
}

TokenSequence build_endpoint_prompt(std::span<const TokenId> v, std::span<const TokenId> l,
                                    const Codebook& cb) {
    Builder b{cb, {}};
    b.seq.kind = SequenceKind::kEndpointProbe;
    b.prefix(v, l);
    b.push(Special::kPathGoal);
    b.push(Special::kSpeedGoal);
    return std::move(b.seq);
}

TokenSequence build_endpoint_probe(std::span<const TokenId> v, std::span<const TokenId> l,
                                   const ActionBlock& a, const Codebook& cb) {
    TokenSequence seq = build_endpoint_prompt(v, l, cb);
    const std::size_t n = seq.size();
    seq.targets[n - 2] = SoftTarget{a.path[kPathTokens - 1]};
    seq.targets[n - 1] = SoftTarget{a.speed[kSpeedTokens - 1]};
    return seq;
}

TokenSequence build_generation_prompt(std::span<const TokenId> v, std::span<const TokenId> l,
                                      const Codebook& cb) {
    Builder b{cb, {}};
    b.seq.kind = SequenceKind::kGeneration;
    b.prefix(v, l);
    b.push(Special::kPathGoal);
    return std::move(b.seq);
}

}  // namespace langact
