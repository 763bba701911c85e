#include <doctest.h>

#include <cmath>

#include "dvforge/patch_grid.hpp"
#include "dvforge/rng.hpp"
#include "dvforge/util.hpp"
#include "oracles.hpp"

using namespace dvforge;

namespace {

// Expected shapes computed externally with exact integer arithmetic from the
// resize definition (nearest multiple, then floor- or ceil-scale into the
// budget), at the default cell 32 and budget [64, 2048] cells.
struct ResizeCase {
    int h, w, out_h, out_w;
};
constexpr ResizeCase kResizeTable[] = {
    {96, 96, 256, 256},      {256, 256, 256, 256},   {1000, 4000, 704, 2880},
    {1, 1, 256, 256},        {48, 48, 256, 256},     {47, 33, 320, 224},
    {520, 520, 512, 512},    {512, 512, 512, 512},   {3000, 3000, 1440, 1440},
    {8000, 125, 8000, 128},  {1080, 1920, 1088, 1920}, {768, 1024, 768, 1024},
    {31, 4096, 32, 4096},    {640, 480, 640, 480},   {817, 231, 832, 224},
    {2048, 2048, 1440, 1440},
};

} // namespace

TEST_CASE("smart_resize matches the externally computed table") {
    GridConfig cfg;
    for (const ResizeCase& c : kResizeTable) {
        CAPTURE(c.h);
        CAPTURE(c.w);
        auto [h, w] = smart_resize(c.h, c.w, cfg);
        CHECK(h == c.out_h);
        CHECK(w == c.out_w);
    }
}

TEST_CASE("smart_resize throws when the aspect ratio defeats the budget") {
    GridConfig cfg;
    CHECK_THROWS_AS(smart_resize(1, 100000, cfg), std::runtime_error);
    CHECK_THROWS_AS(smart_resize(100000, 1, cfg), std::runtime_error);
    CHECK_THROWS_AS(smart_resize(0, 10, cfg), std::invalid_argument);
}

TEST_CASE("smart_resize output always lands in the budget and is idempotent") {
    GridConfig cfg;
    Rng rng(41);
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        int h = rng.next_int(1, 5000);
        int w = rng.next_int(1, 5000);
        std::pair<int, int> out;
        try {
            out = smart_resize(h, w, cfg);
        } catch (const std::runtime_error&) {
            continue; // extreme aspect ratio; rejection is the contract
        }
        ++checked;
        CAPTURE(h);
        CAPTURE(w);
        REQUIRE(out.first % cfg.cell == 0);
        REQUIRE(out.second % cfg.cell == 0);
        long long px = static_cast<long long>(out.first) * out.second;
        REQUIRE(px >= cfg.min_pixels);
        REQUIRE(px <= cfg.max_pixels);
        // A shape that already satisfies the budget is its own resize.
        CHECK(smart_resize(out.first, out.second, cfg) == out);
    }
    CHECK(checked > 400);
}

TEST_CASE("grid budget validation") {
    GridConfig cfg;
    cfg.cell = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = GridConfig{};
    cfg.min_pixels = cfg.max_pixels + 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = GridConfig{};
    cfg.min_pixels = 100; // not a multiple of 32^2
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("grid_of splits resized dims into cells") {
    PatchGrid g = grid_of(704, 2880, 32);
    CHECK(g.rows == 22);
    CHECK(g.cols == 90);
    CHECK(g.token_count() == 1980);
    CHECK(g.height() == 704);
    CHECK(g.width() == 2880);
    CHECK_THROWS_AS(grid_of(100, 64, 32), std::invalid_argument);
    CHECK_THROWS_AS(grid_of(64, 64, 0), std::invalid_argument);
}

TEST_CASE("token_index uses the cell left/above an exact boundary") {
    PatchGrid g = grid_of(128, 256, 32); // 4 rows x 8 cols
    CHECK(token_index(g, 70, 40) == 1 * 8 + 2);
    CHECK(token_index(g, 0, 0) == 0);
    CHECK(token_index(g, 32, 32) == 0);         // boundary belongs to cell (0,0)
    CHECK(token_index(g, 33, 32) == 1);         // one pixel past it does not
    CHECK(token_index(g, 256, 128) == 31);      // far corner stays in range
    CHECK(token_index(g, 255.5, 127.5) == 31);
    CHECK_THROWS_AS(token_index(g, -0.1, 5), std::invalid_argument);
    CHECK_THROWS_AS(token_index(g, 5, 128.5), std::invalid_argument);
}

TEST_CASE("token_index agrees with the containment scan") {
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        int rows = rng.next_int(1, 12);
        int cols = rng.next_int(1, 12);
        PatchGrid g{rows, cols, 32};
        double x = rng.next_unit() * g.width();
        double y = rng.next_unit() * g.height();
        if (rng.next_below(8) == 0) x = static_cast<double>(32 * rng.next_int(0, cols));
        if (rng.next_below(8) == 0) y = static_cast<double>(32 * rng.next_int(0, rows));
        CAPTURE(rows);
        CAPTURE(cols);
        CAPTURE(x);
        CAPTURE(y);
        REQUIRE(token_index(g, x, y) == oracles::containment_token_index(g, x, y));
    }
}

TEST_CASE("scale_box rescales fractionally without snapping") {
    WordBox box{"w", 10, 10, 70, 40};
    WordBox out = scale_box(box, {100, 100}, {256, 256});
    CHECK(out.x0 == doctest::Approx(25.6).epsilon(1e-12));
    CHECK(out.y0 == doctest::Approx(25.6).epsilon(1e-12));
    CHECK(out.x1 == doctest::Approx(179.2).epsilon(1e-12));
    CHECK(out.y1 == doctest::Approx(102.4).epsilon(1e-12));
    CHECK(out.text == "w");
    CHECK_THROWS_AS(scale_box(box, {0, 100}, {256, 256}), std::invalid_argument);
}
