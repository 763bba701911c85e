#include <doctest.h>

#include "dvforge/label_align.hpp"
#include "dvforge/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dvforge;

namespace {

Vocabulary word_vocab(const std::vector<std::string>& words) {
    testing::TempDir tmp("wv");
    std::string text;
    int id = 400;
    for (const auto& w : words) {
        text += w + "\t" + std::to_string(id++) + "\n";
    }
    return Vocabulary::load(tmp.write("v.tsv", text));
}

WordBox box(std::string text, double x0, double y0, double x1, double y1) {
    WordBox b;
    b.text = std::move(text);
    b.x0 = x0;
    b.y0 = y0;
    b.x1 = x1;
    b.y1 = y1;
    return b;
}

} // namespace

TEST_CASE("words label the cell under their bottom-right corner") {
    Vocabulary v = word_vocab({"alpha", "beta"});
    PatchGrid grid = grid_of(64, 128, 32); // 2 x 4
    // original image equals grid size so no rescaling happens
    std::vector<WordBox> words{box("alpha", 2, 2, 30, 20), box("beta", 70, 40, 120, 60)};
    AlignResult res = align_words(words, grid, 64, 128, v);
    REQUIRE(res.labels.size() == 2);
    CHECK(res.labels[0].token_index == 0);          // (30, 20) -> cell (0,0)
    CHECK(res.labels[0].word == "alpha");
    CHECK(res.labels[0].first_token_id == 400);
    CHECK(res.labels[1].token_index == 1 * 4 + 3);  // (120, 60) -> cell (1,3)
    CHECK(res.audit[0].second == WordOutcome::labeled);
}

TEST_CASE("scaling happens before assignment") {
    Vocabulary v = word_vocab({"word"});
    PatchGrid grid = grid_of(64, 64, 32);
    // original 128x128, so everything shrinks by 2: corner (70, 70) -> (35, 35)
    AlignResult res = align_words({box("word", 10, 10, 70, 70)}, grid, 128, 128, v);
    REQUIRE(res.labels.size() == 1);
    CHECK(res.labels[0].token_index == 3); // cell (1,1) of the 2x2 grid
}

TEST_CASE("filters: token count first, then scaled height, bounds beforehand") {
    Vocabulary v = Vocabulary::byte_level(); // every char is a token
    PatchGrid grid = grid_of(256, 256, 32);

    // four byte-tokens > 3 -> dropped regardless of size
    AlignResult res = align_words({box("abcd", 0, 0, 40, 40)}, grid, 256, 256, v);
    CHECK(res.labels.empty());
    CHECK(res.audit[0].second == WordOutcome::too_many_tokens);

    // 97 px tall > 3 cells; short text so the height rule is the one firing
    res = align_words({box("ab", 0, 0, 40, 97)}, grid, 256, 256, v);
    CHECK(res.audit[0].second == WordOutcome::too_tall);
    // exactly 3 cells tall survives
    res = align_words({box("ab", 0, 0, 40, 96)}, grid, 256, 256, v);
    CHECK(res.audit[0].second == WordOutcome::labeled);

    // the height filter sees the scaled box: 120 px in a 2x-downscaled image
    PatchGrid small = grid_of(128, 128, 32);
    res = align_words({box("ab", 0, 0, 40, 120)}, small, 256, 256, v);
    CHECK(res.audit[0].second == WordOutcome::labeled);

    // out-of-bounds wins over the token filter and is judged pre-scaling
    res = align_words({box("abcdef", 200, 200, 300, 240)}, grid, 256, 256, v);
    CHECK(res.audit[0].second == WordOutcome::out_of_bounds);

    // token filter beats height when both apply
    res = align_words({box("abcdef", 0, 0, 40, 200)}, grid, 256, 256, v);
    CHECK(res.audit[0].second == WordOutcome::too_many_tokens);

    CHECK_THROWS_AS(align_words({box("", 0, 0, 10, 10)}, grid, 256, 256, v),
                    std::invalid_argument);
    CHECK_THROWS_AS(align_words({box("ab", 10, 10, 5, 20)}, grid, 256, 256, v),
                    std::invalid_argument);
}

TEST_CASE("a conflicted cell drops every word that landed on it") {
    Vocabulary v = word_vocab({"one", "two", "three"});
    PatchGrid grid = grid_of(64, 64, 32);
    std::vector<WordBox> words{
        box("one", 0, 0, 20, 20),
        box("two", 2, 2, 22, 22),   // same cell as "one"
        box("three", 40, 40, 60, 60),
    };
    AlignResult res = align_words(words, grid, 64, 64, v);
    REQUIRE(res.labels.size() == 1);
    CHECK(res.labels[0].word == "three");
    CHECK(res.audit[0].second == WordOutcome::conflict);
    CHECK(res.audit[1].second == WordOutcome::conflict);
    CHECK(res.audit[2].second == WordOutcome::labeled);
}

TEST_CASE("align_words equals the containment oracle on random layouts") {
    std::vector<std::string> vocab_words{"cat", "dog", "huge", "owl", "sun", "verylongword",
                                         "x",   "why", "zoo",  "fig", "elm", "oak"};
    Vocabulary v = word_vocab(vocab_words);
    // the last two fall back to bytes: "zz" stays (2 tokens), "qqqqq" gets filtered
    std::vector<std::string> lexicon = vocab_words;
    lexicon.push_back("zz");
    lexicon.push_back("qqqqq");
    Rng rng(2024);
    for (int iter = 0; iter < 300; ++iter) {
        int rows = rng.next_int(1, 8);
        int cols = rng.next_int(1, 8);
        PatchGrid grid{rows, cols, 32};
        int orig_h = rng.next_int(grid.height() / 2, grid.height() * 3);
        int orig_w = rng.next_int(grid.width() / 2, grid.width() * 3);
        std::vector<WordBox> words;
        int n = rng.next_int(0, 12);
        for (int i = 0; i < n; ++i) {
            double x0 = rng.next_unit() * orig_w;
            double y0 = rng.next_unit() * orig_h;
            double x1 = x0 + rng.next_unit() * (orig_w - x0) + 0.5;
            double y1 = y0 + rng.next_unit() * (orig_h - y0) + 0.5;
            // sometimes push a box out of bounds on purpose
            if (rng.next_below(6) == 0) x1 = orig_w + 10.0;
            words.push_back(box(lexicon[rng.next_below(lexicon.size())], x0, y0,
                                std::min(x1, orig_w + 10.0), std::min(y1, orig_h + 10.0)));
        }
        auto got = align_words(words, grid, orig_h, orig_w, v).labels;
        auto want = oracles::align_reference(words, grid, orig_h, orig_w, v);
        CAPTURE(iter);
        REQUIRE(got == want);
    }
}

TEST_CASE("corpus stats count unioned per-image coverage") {
    Vocabulary v = Vocabulary::byte_level();
    PatchGrid g22 = grid_of(64, 64, 32);  // 4 tokens
    PatchGrid g12 = grid_of(32, 64, 32);  // 2 tokens
    LabeledSample a1{"imgA", "imgA#0", "imgA", g22, "q?", "yes",
                     {{0, "w", 119}}, SampleSource::image_to_label};
    LabeledSample a2{"imgA", "imgA#1", "imgA", g22, "q?", "no",
                     {{0, "w", 119}, {3, "v", 118}}, SampleSource::image_to_label};
    LabeledSample b1{"imgB", "imgB#0", "imgB", g12, "q?", "maybe",
                     {}, SampleSource::image_to_label};
    CorpusStats stats = compute_stats({a1, a2, b1}, v);
    CHECK(stats.samples == 3);
    CHECK(stats.images == 2);
    CHECK(stats.text_labels == 3 + 2 + 5);
    CHECK(stats.vision_labels == 1 + 2 + 0);
    // imgA: union {0,3} of 4 tokens; imgB: 0 of 2
    CHECK(stats.vision_coverage == doctest::Approx(2.0 / 6.0).epsilon(1e-12));

    LabeledSample bad = a1;
    bad.response.clear();
    CHECK_THROWS_AS(compute_stats({bad}, v), std::invalid_argument);
}

TEST_CASE("sample source names round-trip") {
    CHECK(sample_source_from(to_string(SampleSource::image_to_label)) ==
          SampleSource::image_to_label);
    CHECK(sample_source_from(to_string(SampleSource::label_to_image)) ==
          SampleSource::label_to_image);
    CHECK_THROWS_AS(sample_source_from("bogus"), ValidationError);
}
