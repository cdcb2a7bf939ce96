#include "langact/codebook.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "langact/errors.hpp"

namespace langact {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecialNames = {
    "<bos>", "<eos>", "<sep>", "<path_goal>", "<speed_goal>",
    "<cls:lane>", "<cls:obstacle>", "<cls:target>", "<cls:ego>",
};

constexpr std::string_view kUnk = "<unk>";
constexpr std::string_view kHeader = "# langact codebook v1";

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

std::string_view special_name(Special s) { return kSpecialNames[static_cast<std::size_t>(s)]; }

std::string normalize_word(std::string_view word) {
    std::string out;
    out.reserve(word.size());
    for (char ch : word) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::ispunct(c) || std::isspace(c)) {
            continue;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> normalize_text(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        if (j > i) {
            std::string w = normalize_word(text.substr(i, j - i));
            if (!w.empty()) {
                out.push_back(std::move(w));
            }
        }
        i = j;
    }
    return out;
}

Codebook Codebook::build(const std::vector<std::string>& words, const GridSpec& grid) {
    if (words.empty()) {
        throw std::invalid_argument("codebook: empty word list");
    }
    std::vector<std::string> norm;
    norm.reserve(words.size());
    for (const auto& w : words) {
        std::string n = normalize_word(w);
        if (n.empty()) {
            throw std::invalid_argument("codebook: word '" + w + "' normalizes to nothing");
        }
        norm.push_back(std::move(n));
    }
    std::sort(norm.begin(), norm.end());
    if (auto dup = std::adjacent_find(norm.begin(), norm.end()); dup != norm.end()) {
        throw std::invalid_argument("codebook: duplicate word '" + *dup + "' after normalization");
    }

    Codebook cb;
    cb.grid_ = grid;
    cb.k_action_ = grid_size(grid).k_action;
    cb.words_.reserve(norm.size() + 1);
    cb.words_.emplace_back(kUnk);
    for (auto& w : norm) {
        cb.words_.push_back(std::move(w));
    }
    for (std::size_t i = 0; i < cb.words_.size(); ++i) {
        cb.index_.emplace(cb.words_[i], static_cast<TokenId>(i));
    }
    return cb;
}

TokenId Codebook::action(ActionTokenId grid_id) const {
    if (grid_id < 0 || grid_id >= k_action_) {
        throw std::out_of_range("grid id outside action segment");
    }
    return action_offset() + grid_id;
}

ActionTokenId Codebook::grid_id(TokenId unified) const {
    if (kind(unified) != TokenKind::kAction) {
        throw std::out_of_range("token " + std::to_string(unified) + " is not an action token");
    }
    return unified - action_offset();
}

TokenKind Codebook::kind(TokenId id) const {
    if (id < 0 || id >= size()) {
        throw std::out_of_range("token id " + std::to_string(id) + " outside codebook");
    }
    if (id < action_offset()) {
        return TokenKind::kText;
    }
    if (id < special_offset()) {
        return TokenKind::kAction;
    }
    return TokenKind::kSpecial;
}

std::vector<TokenId> Codebook::encode_text(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& w : normalize_text(text)) {
        auto it = index_.find(w);
        ids.push_back(it == index_.end() ? unk_id() : it->second);
    }
    return ids;
}

std::string Codebook::token_string(TokenId id) const {
    switch (kind(id)) {
    case TokenKind::kText:
        return words_[static_cast<std::size_t>(id)];
    case TokenKind::kAction:
        return "<a:" + std::to_string(id - action_offset()) + ">";
    case TokenKind::kSpecial:
        return std::string(kSpecialNames[static_cast<std::size_t>(id - special_offset())]);
    }
    return {};
}

std::string Codebook::decode_text(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += token_string(id);
    }
    return out;
}

std::string Codebook::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << kHeader << "\n[words]\n";
    for (const auto& w : words_) {
        os << w << '\n';
    }
    os << "[grid]\n";
    os << "x_min " << grid_.x_min << '\n'
       << "x_max " << grid_.x_max << '\n'
       << "y_min " << grid_.y_min << '\n'
       << "y_max " << grid_.y_max << '\n'
       << "k " << grid_.k << '\n'
       << "step " << grid_.step << '\n';
    os << "[specials]\n";
    for (auto name : kSpecialNames) {
        os << name << '\n';
    }
    return os.str();
}

Codebook Codebook::parse(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line) || line != kHeader) {
        throw DataError("codebook: bad header");
    }
    enum class Section { kNone, kWords, kGrid, kSpecials } section = Section::kNone;
    std::vector<std::string> words;
    std::vector<std::string> specials;
    GridSpec grid;
    int grid_fields = 0;
    while (std::getline(is, line)) {
        if (line == "[words]") {
            section = Section::kWords;
        } else if (line == "[grid]") {
            section = Section::kGrid;
        } else if (line == "[specials]") {
            section = Section::kSpecials;
        } else if (section == Section::kWords) {
            words.push_back(line);
        } else if (section == Section::kSpecials) {
            specials.push_back(line);
        } else if (section == Section::kGrid) {
            std::istringstream ls(line);
            std::string key;
            double value = 0.0;
            if (!(ls >> key >> value)) {
                throw DataError("codebook: bad grid line '" + line + "'");
            }
            if (key == "x_min") grid.x_min = value;
            else if (key == "x_max") grid.x_max = value;
            else if (key == "y_min") grid.y_min = value;
            else if (key == "y_max") grid.y_max = value;
            else if (key == "k") grid.k = value;
            else if (key == "step") grid.step = value;
            else throw DataError("codebook: unknown grid key '" + key + "'");
            ++grid_fields;
        } else {
            throw DataError("codebook: content outside a section");
        }
    }
    if (words.empty() || words.front() != kUnk || grid_fields != 6) {
        throw DataError("codebook: missing words or grid record");
    }
    if (specials.size() != kSpecialNames.size() ||
        !std::equal(specials.begin(), specials.end(), kSpecialNames.begin())) {
        throw DataError("codebook: special token list does not match this build");
    }
    words.erase(words.begin());
    try {
        return build(words, grid);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("codebook: ") + e.what());
    }
}

Codebook Codebook::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open codebook '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void Codebook::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write codebook '" + path + "'");
    }
    out << serialize();
}

std::uint64_t Codebook::hash() const { return fnv1a(serialize()); }

}  // namespace langact
