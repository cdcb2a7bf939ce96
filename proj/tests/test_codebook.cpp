#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "langact/codebook.hpp"
#include "langact/errors.hpp"

using namespace langact;

TEST_CASE("codebook size is the sum of its segments") {
    const GridSpec g;
    const auto cb = Codebook::build({"stop", "go"}, g);
    // 2 words + unk + 5656 cells + 9 specials
    CHECK(cb.size() == 2 + 1 + 5656 + 9);
    CHECK(cb.size() == 5668);
    CHECK(cb.text_size() == 3);
    CHECK(cb.action_offset() == 3);
    CHECK(cb.special_offset() == 3 + 5656);
    CHECK(cb.words()[0] == "<unk>");
    // sorted order
    CHECK(cb.words()[1] == "go");
    CHECK(cb.words()[2] == "stop");

    GridSpec g10;
    g10.k = 10.0;
    CHECK(Codebook::build({"stop", "go"}, g10).size() == 3 + 7245 + 9);
}

TEST_CASE("codebook construction errors and determinism") {
    const GridSpec g;
    CHECK_THROWS_AS(Codebook::build({}, g), std::invalid_argument);
    CHECK_THROWS_AS(Codebook::build({"Stop", "stop!"}, g), std::invalid_argument);
    CHECK_THROWS_AS(Codebook::build({"go", "..."}, g), std::invalid_argument);
    const auto a = Codebook::build({"b", "a", "c"}, g);
    const auto b = Codebook::build({"c", "a", "b"}, g);
    CHECK(a.serialize() == b.serialize());
    CHECK(a.hash() == b.hash());
    CHECK(a.encode_text("c b a") == b.encode_text("c b a"));
    CHECK(Codebook::build({"a", "d"}, g).hash() != a.hash());
}

TEST_CASE("text round trip and unknown words") {
    const GridSpec g;
    const auto cb = Codebook::build({"change", "lane", "to", "the", "left"}, g);
    const auto ids = cb.encode_text("Change lane to the left");
    CHECK(ids.size() == 5);
    CHECK(cb.decode_text(ids) == "change lane to the left");
    CHECK(cb.encode_text("").empty());
    CHECK(cb.decode_text(std::vector<TokenId>{}).empty());
    const auto oov = cb.encode_text("change zebra, lane!");
    REQUIRE(oov.size() == 3);
    CHECK(oov[1] == cb.unk_id());
    CHECK(cb.decode_text(oov) == "change <unk> lane");
    CHECK(normalize_word("Left,") == "left");
    CHECK(normalize_word("!!").empty());
}

TEST_CASE("segments partition the id space") {
    const GridSpec g;
    const auto cb = Codebook::build({"x", "y", "z"}, g);
    int text = 0, action = 0, special = 0;
    for (TokenId id = 0; id < cb.size(); ++id) {
        switch (cb.kind(id)) {
            case TokenKind::kText: ++text; CHECK(id < cb.action_offset()); break;
            case TokenKind::kAction:
                ++action;
                CHECK(cb.grid_id(id) == id - cb.action_offset());
                CHECK(cb.action(cb.grid_id(id)) == id);
                break;
            case TokenKind::kSpecial: ++special; CHECK(id >= cb.special_offset()); break;
        }
    }
    CHECK(text == cb.text_size());
    CHECK(action == 5656);
    CHECK(special == kNumSpecials);
    CHECK(cb.kind(0) == TokenKind::kText);
    CHECK(cb.kind(cb.action_offset()) == TokenKind::kAction);
    CHECK(cb.kind(cb.size() - 1) == TokenKind::kSpecial);
    CHECK_THROWS_AS(cb.kind(cb.size()), std::out_of_range);
    CHECK_THROWS_AS(cb.kind(-1), std::out_of_range);
    CHECK(cb.special(Special::kBos) == cb.special_offset());
    CHECK(cb.special(Special::kClsEgo) == cb.size() - 1);
    std::set<std::string> names;
    for (int s = 0; s < kNumSpecials; ++s) names.insert(std::string(special_name(static_cast<Special>(s))));
    CHECK(names.size() == kNumSpecials);
}

TEST_CASE("serialize, parse and file round trip") {
    GridSpec g;
    g.k = 10.0;
    const auto cb = Codebook::build({"slow", "down", "now"}, g);
    const auto back = Codebook::parse(cb.serialize());
    CHECK(back.size() == cb.size());
    CHECK(back.words() == cb.words());
    CHECK(back.grid() == cb.grid());
    CHECK(back.hash() == cb.hash());

    const auto path = (std::filesystem::temp_directory_path() / "langact_cb_test.txt").string();
    cb.save(path);
    CHECK(Codebook::load(path).hash() == cb.hash());
    std::ofstream(path) << "garbage\n";
    CHECK_THROWS_AS(Codebook::load(path), DataError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Codebook::parse(""), DataError);
}
