#include "dvforge/font.hpp"

#include <cstring>

namespace dvforge {

namespace {

// Glyphs are drawn on an 8x8 canvas and doubled vertically into 8x16 at
// startup. '#' is ink, '.' is background.
struct GlyphArt {
    char ch;
    const char* rows[8];
};

constexpr GlyphArt kArt[] = {
    {' ', {"........", "........", "........", "........",
           "........", "........", "........", "........"}},
    {'!', {"...#....", "...#....", "...#....", "...#....",
           "...#....", "........", "...#....", "........"}},
    {'"', {"..#.#...", "..#.#...", "..#.#...", "........",
           "........", "........", "........", "........"}},
    {'#', {"..#.#...", "..#.#...", "#######.", "..#.#...",
           "#######.", "..#.#...", "..#.#...", "........"}},
    {'$', {"...#....", "..####..", ".#.#....", "..###...",
           "...#.#..", ".####...", "...#....", "........"}},
    {'%', {".##...#.", ".##..#..", "....#...", "...#....",
           "..#.....", ".#..##..", "#...##..", "........"}},
    {'&', {"..##....", ".#..#...", "..##....", ".###....",
           "#...#.#.", "#....#..", ".###..#.", "........"}},
    {'\'', {"...#....", "...#....", "..#.....", "........",
            "........", "........", "........", "........"}},
    {'(', {"....#...", "...#....", "..#.....", "..#.....",
           "..#.....", "...#....", "....#...", "........"}},
    {')', {"..#.....", "...#....", "....#...", "....#...",
           "....#...", "...#....", "..#.....", "........"}},
    {'*', {"........", "...#....", ".#.#.#..", "..###...",
           ".#.#.#..", "...#....", "........", "........"}},
    {'+', {"........", "...#....", "...#....", ".#####..",
           "...#....", "...#....", "........", "........"}},
    {',', {"........", "........", "........", "........",
           "........", "...##...", "...##...", "..#....."}},
    {'-', {"........", "........", "........", ".#####..",
           "........", "........", "........", "........"}},
    {'.', {"........", "........", "........", "........",
           "........", "...##...", "...##...", "........"}},
    {'/', {"......#.", ".....#..", "....#...", "...#....",
           "..#.....", ".#......", "#.......", "........"}},
    {'0', {"..###...", ".#...#..", ".#..##..", ".#.#.#..",
           ".##..#..", ".#...#..", "..###...", "........"}},
    {'1', {"...#....", "..##....", "...#....", "...#....",
           "...#....", "...#....", "..###...", "........"}},
    {'2', {"..###...", ".#...#..", ".....#..", "....#...",
           "...#....", "..#.....", ".#####..", "........"}},
    {'3', {"..###...", ".#...#..", ".....#..", "...##...",
           ".....#..", ".#...#..", "..###...", "........"}},
    {'4', {"....#...", "...##...", "..#.#...", ".#..#...",
           ".#####..", "....#...", "....#...", "........"}},
    {'5', {".#####..", ".#......", ".####...", ".....#..",
           ".....#..", ".#...#..", "..###...", "........"}},
    {'6', {"..###...", ".#......", ".####...", ".#...#..",
           ".#...#..", ".#...#..", "..###...", "........"}},
    {'7', {".#####..", ".....#..", "....#...", "...#....",
           "..#.....", "..#.....", "..#.....", "........"}},
    {'8', {"..###...", ".#...#..", ".#...#..", "..###...",
           ".#...#..", ".#...#..", "..###...", "........"}},
    {'9', {"..###...", ".#...#..", ".#...#..", "..####..",
           ".....#..", ".....#..", "..###...", "........"}},
    {':', {"........", "...##...", "...##...", "........",
           "...##...", "...##...", "........", "........"}},
    {';', {"........", "...##...", "...##...", "........",
           "...##...", "...##...", "..#.....", "........"}},
    {'<', {".....#..", "....#...", "...#....", "..#.....",
           "...#....", "....#...", ".....#..", "........"}},
    {'=', {"........", "........", ".#####..", "........",
           ".#####..", "........", "........", "........"}},
    {'>', {"..#.....", "...#....", "....#...", ".....#..",
           "....#...", "...#....", "..#.....", "........"}},
    {'?', {"..###...", ".#...#..", ".....#..", "....#...",
           "...#....", "........", "...#....", "........"}},
    {'@', {"..###...", ".#...#..", ".#.###..", ".#.#.#..",
           ".#.###..", ".#......", "..###...", "........"}},
    {'A', {"...#....", "..#.#...", ".#...#..", ".#...#..",
           ".#####..", ".#...#..", ".#...#..", "........"}},
    {'B', {".####...", ".#...#..", ".#...#..", ".####...",
           ".#...#..", ".#...#..", ".####...", "........"}},
    {'C', {"..###...", ".#...#..", ".#......", ".#......",
           ".#......", ".#...#..", "..###...", "........"}},
    {'D', {".####...", ".#...#..", ".#...#..", ".#...#..",
           ".#...#..", ".#...#..", ".####...", "........"}},
    {'E', {".#####..", ".#......", ".#......", ".####...",
           ".#......", ".#......", ".#####..", "........"}},
    {'F', {".#####..", ".#......", ".#......", ".####...",
           ".#......", ".#......", ".#......", "........"}},
    {'G', {"..###...", ".#...#..", ".#......", ".#..##..",
           ".#...#..", ".#...#..", "..###...", "........"}},
    {'H', {".#...#..", ".#...#..", ".#...#..", ".#####..",
           ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'I', {"..###...", "...#....", "...#....", "...#....",
           "...#....", "...#....", "..###...", "........"}},
    {'J', {"...###..", "....#...", "....#...", "....#...",
           "....#...", ".#..#...", "..##....", "........"}},
    {'K', {".#...#..", ".#..#...", ".#.#....", ".##.....",
           ".#.#....", ".#..#...", ".#...#..", "........"}},
    {'L', {".#......", ".#......", ".#......", ".#......",
           ".#......", ".#......", ".#####..", "........"}},
    {'M', {".#...#..", ".##.##..", ".#.#.#..", ".#.#.#..",
           ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'N', {".#...#..", ".##..#..", ".#.#.#..", ".#..##..",
           ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'O', {"..###...", ".#...#..", ".#...#..", ".#...#..",
           ".#...#..", ".#...#..", "..###...", "........"}},
    {'P', {".####...", ".#...#..", ".#...#..", ".####...",
           ".#......", ".#......", ".#......", "........"}},
    {'Q', {"..###...", ".#...#..", ".#...#..", ".#...#..",
           ".#.#.#..", ".#..#...", "..##.#..", "........"}},
    {'R', {".####...", ".#...#..", ".#...#..", ".####...",
           ".#.#....", ".#..#...", ".#...#..", "........"}},
    {'S', {"..####..", ".#......", ".#......", "..###...",
           ".....#..", ".....#..", ".####...", "........"}},
    {'T', {".#####..", "...#....", "...#....", "...#....",
           "...#....", "...#....", "...#....", "........"}},
    {'U', {".#...#..", ".#...#..", ".#...#..", ".#...#..",
           ".#...#..", ".#...#..", "..###...", "........"}},
    {'V', {".#...#..", ".#...#..", ".#...#..", ".#...#..",
           ".#...#..", "..#.#...", "...#....", "........"}},
    {'W', {".#...#..", ".#...#..", ".#...#..", ".#.#.#..",
           ".#.#.#..", ".##.##..", ".#...#..", "........"}},
    {'X', {".#...#..", ".#...#..", "..#.#...", "...#....",
           "..#.#...", ".#...#..", ".#...#..", "........"}},
    {'Y', {".#...#..", ".#...#..", "..#.#...", "...#....",
           "...#....", "...#....", "...#....", "........"}},
    {'Z', {".#####..", ".....#..", "....#...", "...#....",
           "..#.....", ".#......", ".#####..", "........"}},
    {'[', {"..###...", "..#.....", "..#.....", "..#.....",
           "..#.....", "..#.....", "..###...", "........"}},
    {'\\', {"#.......", ".#......", "..#.....", "...#....",
            "....#...", ".....#..", "......#.", "........"}},
    {']', {"..###...", "....#...", "....#...", "....#...",
           "....#...", "....#...", "..###...", "........"}},
    {'^', {"...#....", "..#.#...", ".#...#..", "........",
           "........", "........", "........", "........"}},
    {'_', {"........", "........", "........", "........",
           "........", "........", "........", ".######."}},
    {'`', {"...#....", "....#...", "........", "........",
           "........", "........", "........", "........"}},
    {'a', {"........", "........", "..###...", ".....#..",
           "..####..", ".#...#..", "..####..", "........"}},
    {'b', {".#......", ".#......", ".####...", ".#...#..",
           ".#...#..", ".#...#..", ".####...", "........"}},
    {'c', {"........", "........", "..###...", ".#......",
           ".#......", ".#......", "..###...", "........"}},
    {'d', {".....#..", ".....#..", "..####..", ".#...#..",
           ".#...#..", ".#...#..", "..####..", "........"}},
    {'e', {"........", "........", "..###...", ".#...#..",
           ".#####..", ".#......", "..###...", "........"}},
    {'f', {"...##...", "..#.....", ".####...", "..#.....",
           "..#.....", "..#.....", "..#.....", "........"}},
    {'g', {"........", "........", "..####..", ".#...#..",
           ".#...#..", "..####..", ".....#..", "..###..."}},
    {'h', {".#......", ".#......", ".####...", ".#...#..",
           ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'i', {"...#....", "........", "..##....", "...#....",
           "...#....", "...#....", "..###...", "........"}},
    {'j', {"....#...", "........", "...##...", "....#...",
           "....#...", "....#...", ".#..#...", "..##...."}},
    {'k', {".#......", ".#......", ".#..#...", ".#.#....",
           ".###....", ".#..#...", ".#...#..", "........"}},
    {'l', {"..##....", "...#....", "...#....", "...#....",
           "...#....", "...#....", "..###...", "........"}},
    {'m', {"........", "........", ".##.#...", ".#.#.#..",
           ".#.#.#..", ".#.#.#..", ".#.#.#..", "........"}},
    {'n', {"........", "........", ".####...", ".#...#..",
           ".#...#..", ".#...#..", ".#...#..", "........"}},
    {'o', {"........", "........", "..###...", ".#...#..",
           ".#...#..", ".#...#..", "..###...", "........"}},
    {'p', {"........", "........", ".####...", ".#...#..",
           ".#...#..", ".####...", ".#......", ".#......"}},
    {'q', {"........", "........", "..####..", ".#...#..",
           ".#...#..", "..####..", ".....#..", ".....#.."}},
    {'r', {"........", "........", ".#.##...", ".##.....",
           ".#......", ".#......", ".#......", "........"}},
    {'s', {"........", "........", "..####..", ".#......",
           "..###...", ".....#..", ".####...", "........"}},
    {'t', {"..#.....", "..#.....", ".####...", "..#.....",
           "..#.....", "..#.....", "...##...", "........"}},
    {'u', {"........", "........", ".#...#..", ".#...#..",
           ".#...#..", ".#...#..", "..####..", "........"}},
    {'v', {"........", "........", ".#...#..", ".#...#..",
           ".#...#..", "..#.#...", "...#....", "........"}},
    {'w', {"........", "........", ".#...#..", ".#...#..",
           ".#.#.#..", ".#.#.#..", "..#.#...", "........"}},
    {'x', {"........", "........", ".#...#..", "..#.#...",
           "...#....", "..#.#...", ".#...#..", "........"}},
    {'y', {"........", "........", ".#...#..", ".#...#..",
           ".#...#..", "..####..", ".....#..", "..###..."}},
    {'z', {"........", "........", ".#####..", "....#...",
           "...#....", "..#.....", ".#####..", "........"}},
    {'{', {"....##..", "...#....", "...#....", "..#.....",
           "...#....", "...#....", "....##..", "........"}},
    {'|', {"...#....", "...#....", "...#....", "...#....",
           "...#....", "...#....", "...#....", "........"}},
    {'}', {"..##....", "....#...", "....#...", ".....#..",
           "....#...", "....#...", "..##....", "........"}},
    {'~', {"........", "........", "..##..#.", ".#..##..",
           "........", "........", "........", "........"}},
};

constexpr GlyphArt kFallbackArt = {
    '\0', {"#######.", "#.....#.", "#.....#.", "#.....#.",
           "#.....#.", "#.....#.", "#######.", "........"}};

Glyph expand(const GlyphArt& art) {
    Glyph g;
    for (int y = 0; y < 8; ++y) {
        std::uint8_t bits = 0;
        for (int x = 0; x < kGlyphWidth; ++x) {
            if (art.rows[y][x] == '#') {
                bits |= static_cast<std::uint8_t>(1u << (kGlyphWidth - 1 - x));
            }
        }
        g.rows[static_cast<std::size_t>(2 * y)] = bits;
        g.rows[static_cast<std::size_t>(2 * y + 1)] = bits;
    }
    return g;
}

struct FontTable {
    Glyph glyphs[128];
    Glyph fallback;

    FontTable() {
        fallback = expand(kFallbackArt);
        for (Glyph& g : glyphs) {
            g = fallback;
        }
        for (const GlyphArt& art : kArt) {
            glyphs[static_cast<unsigned char>(art.ch)] = expand(art);
        }
    }
};

const FontTable& table() {
    static const FontTable t;
    return t;
}

} // namespace

const Glyph& glyph_for(char c) {
    auto uc = static_cast<unsigned char>(c);
    if (uc < 128) {
        return table().glyphs[uc];
    }
    return table().fallback;
}

int text_width_px(std::string_view text, int scale) {
    return static_cast<int>(text.size()) * kGlyphWidth * scale;
}

} // namespace dvforge
