#include <doctest.h>

#include "dvforge/rng.hpp"
#include "dvforge/tokenizer.hpp"
#include "dvforge/util.hpp"
#include "test_util.hpp"

using namespace dvforge;

TEST_CASE("byte-level vocabulary maps each byte to its own id") {
    Vocabulary v = Vocabulary::byte_level();
    CHECK(v.entry_count() == 256);
    CHECK(v.byte_fallback_base() == 256);
    CHECK(v.id_bound() == 512);
    CHECK(v.encode("ab") == std::vector<int>{97, 98});
    CHECK(v.first_token("zebra") == 'z');
    CHECK(v.token_len("abc") == 3);
    CHECK(v.decode(std::vector<int>{104, 105}) == "hi");
    CHECK(v.id_of("a").value() == 97);
    CHECK_FALSE(v.id_of("ab").has_value());
}

TEST_CASE("loaded vocabulary encodes greedily with byte fallback") {
    testing::TempDir tmp("vocab");
    auto path = tmp.write("v.tsv", "mod\t300\nel\t301\nmode\t302\n");
    Vocabulary v = Vocabulary::load(path);
    CHECK(v.entry_count() == 3);
    CHECK(v.byte_fallback_base() == 303);

    // longest match first: "mode" beats "mod"
    CHECK(v.encode("model") == std::vector<int>{302, 303 + 'l'});
    CHECK(v.first_token("model") == 302);
    CHECK(v.token_len("modxel") == 3); // mod, fallback x, el
    CHECK(v.decode(v.encode("modxel")) == "modxel");
}

TEST_CASE("vocabulary loader rejects malformed files with line numbers") {
    testing::TempDir tmp("vocab_err");
    auto no_tab = tmp.write("a.tsv", "mod\t300\nbroken\n");
    try {
        Vocabulary::load(no_tab);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    auto bad_id = tmp.write("b.tsv", "mod\tthree\n");
    CHECK_THROWS_AS(Vocabulary::load(bad_id), ValidationError);
    auto dup_token = tmp.write("c.tsv", "mod\t300\nmod\t301\n");
    CHECK_THROWS_AS(Vocabulary::load(dup_token), ValidationError);
    auto dup_id = tmp.write("d.tsv", "mod\t300\nel\t300\n");
    CHECK_THROWS_AS(Vocabulary::load(dup_id), ValidationError);
    auto neg_id = tmp.write("e.tsv", "mod\t-1\n");
    CHECK_THROWS_AS(Vocabulary::load(neg_id), ValidationError);
    auto empty = tmp.write("f.tsv", "\n\n");
    CHECK_THROWS_AS(Vocabulary::load(empty), ValidationError);
    CHECK_THROWS_AS(Vocabulary::load(tmp.file("missing.tsv")), ValidationError);
}

TEST_CASE("encode/decode round-trips arbitrary bytes via fallback") {
    testing::TempDir tmp("vocab_rt");
    Vocabulary v = Vocabulary::load(tmp.write("v.tsv", "th\t500\nthe\t501\nem\t502\n"));
    Rng rng(7);
    for (int i = 0; i < 300; ++i) {
        std::string s;
        int len = rng.next_int(1, 24);
        for (int j = 0; j < len; ++j) {
            s.push_back(static_cast<char>(rng.next_below(256)));
        }
        CAPTURE(i);
        REQUIRE(v.decode(v.encode(s)) == s);
    }
    CHECK_THROWS_AS(v.encode(""), std::invalid_argument);
}
