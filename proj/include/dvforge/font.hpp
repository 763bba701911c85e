#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace dvforge {

inline constexpr int kGlyphWidth = 8;
inline constexpr int kGlyphHeight = 16;

// Fixed 8x16 monospace bitmap glyph. rows[y] holds one scanline, most
// significant bit = leftmost pixel.
struct Glyph {
    std::array<std::uint8_t, kGlyphHeight> rows{};

    bool ink_at(int x, int y) const {
        return (rows[static_cast<std::size_t>(y)] >> (kGlyphWidth - 1 - x)) & 1u;
    }
};

// Glyph for a character; printable ASCII is covered, anything else renders as
// a boxed placeholder so every byte has a deterministic ink extent.
const Glyph& glyph_for(char c);

// Rendered pixel width of a word at an integer scale factor.
int text_width_px(std::string_view text, int scale);

} // namespace dvforge
