#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dvforge/label_align.hpp"
#include "dvforge/patch_grid.hpp"
#include "dvforge/tokenizer.hpp"

namespace dvforge {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

// One dark color (all channels < 96) and one light color (all channels > 160);
// a coin flip from the same seed decides which of the two becomes foreground.
// Returns (bg, fg).
std::pair<Rgb, Rgb> pick_colors(std::uint64_t seed);

struct RenderSpec {
    int cell = 32;
    // 0 means derive the grid from the content and the pixel budget.
    int rows = 0;
    int cols = 0;
    int glyph_scale = 1;
    int margin_cells = 0;
    bool auto_colors = true;
    Rgb fg{0, 0, 0};
    Rgb bg{255, 255, 255};
    std::uint64_t seed = 0;

    void validate() const;
};

struct Placement {
    std::string word;
    int row = 0;
    int col = 0;
    int span_cells = 0;
    // glyph ink extent in pixels; contained in the spanned cells by construction
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    bool operator==(const Placement&) const = default;
};

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb; // row-major, 3 bytes per pixel

    Rgb at(int x, int y) const {
        auto off = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                        static_cast<std::size_t>(x));
        return Rgb{rgb[off], rgb[off + 1], rgb[off + 2]};
    }
    void set(int x, int y, Rgb c) {
        auto off = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                        static_cast<std::size_t>(x));
        rgb[off] = c.r;
        rgb[off + 1] = c.g;
        rgb[off + 2] = c.b;
    }
};

// Smallest grid (by token count) that fits the words and lands inside the
// pixel budget. Throws when no multiple-of-cell shape can satisfy both.
PatchGrid resolve_grid(const std::vector<std::string>& words, const RenderSpec& spec,
                       const GridConfig& budget);

// Places words left-to-right in row-major reading order. A word spanning k
// cells advances the cursor k+1 cells (one empty separator cell); wraps at the
// right margin. Words never share a cell.
std::vector<Placement> layout(const std::vector<std::string>& words, const PatchGrid& grid,
                              const RenderSpec& spec);

Image render(const std::vector<Placement>& placements, const PatchGrid& grid,
             const RenderSpec& spec, Rgb bg, Rgb fg);

// One label per placement at the last occupied cell.
std::vector<VisionLabel> labels_from_layout(const std::vector<Placement>& placements,
                                            const PatchGrid& grid, const Vocabulary& vocab);

struct RenderedDoc {
    Image image;
    PatchGrid grid;
    std::vector<Placement> placements;
    std::vector<VisionLabel> labels;
    Rgb bg;
    Rgb fg;
};

RenderedDoc render_document(const std::vector<std::string>& words, const RenderSpec& spec,
                            const GridConfig& budget, const Vocabulary& vocab);

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

} // namespace dvforge
