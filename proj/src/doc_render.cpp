#include "dvforge/doc_render.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "dvforge/font.hpp"
#include "dvforge/rng.hpp"
#include "dvforge/util.hpp"

namespace dvforge {

namespace {

int span_of(const std::string& word, const RenderSpec& spec) {
    int width = text_width_px(word, spec.glyph_scale);
    return (width + spec.cell - 1) / spec.cell;
}

// Shared cursor walk so resolve_grid sizes exactly what layout will place.
// Returns the number of content rows consumed (margins excluded).
int place_words(const std::vector<std::string>& words, int total_cols, const RenderSpec& spec,
                std::vector<Placement>* out) {
    int usable = total_cols - 2 * spec.margin_cells;
    if (usable <= 0) {
        throw ValidationError("margin_cells " + std::to_string(spec.margin_cells) +
                              " leaves no usable columns in a " + std::to_string(total_cols) +
                              "-column grid");
    }
    int right = total_cols - spec.margin_cells; // exclusive
    int row = spec.margin_cells;
    int col = spec.margin_cells;
    int glyph_h = kGlyphHeight * spec.glyph_scale;
    bool any = false;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string& word = words[i];
        if (word.empty()) {
            throw ValidationError("empty word at position " + std::to_string(i));
        }
        int span = span_of(word, spec);
        if (span > usable) {
            throw ValidationError("word \"" + word + "\" spans " + std::to_string(span) +
                                  " cells but only " + std::to_string(usable) +
                                  " columns are usable");
        }
        if (col + span > right) {
            ++row;
            col = spec.margin_cells;
        }
        any = true;
        if (out != nullptr) {
            Placement p;
            p.word = word;
            p.row = row;
            p.col = col;
            p.span_cells = span;
            p.x0 = col * spec.cell;
            p.y0 = row * spec.cell + (spec.cell - glyph_h) / 2;
            p.x1 = p.x0 + text_width_px(word, spec.glyph_scale);
            p.y1 = p.y0 + glyph_h;
            out->push_back(std::move(p));
        }
        col += span + 1;
    }
    return any ? row + 1 - spec.margin_cells : 0;
}

} // namespace

std::pair<Rgb, Rgb> pick_colors(std::uint64_t seed) {
    Rng rng(seed);
    auto dark_channel = [&] { return static_cast<std::uint8_t>(rng.next_below(96)); };
    auto light_channel = [&] { return static_cast<std::uint8_t>(161 + rng.next_below(95)); };
    Rgb dark{dark_channel(), dark_channel(), dark_channel()};
    Rgb light{light_channel(), light_channel(), light_channel()};
    bool dark_fg = rng.next_below(2) == 1;
    if (dark_fg) {
        return {light, dark};
    }
    return {dark, light};
}

void RenderSpec::validate() const {
    if (cell <= 0) {
        throw ValidationError("render cell must be positive");
    }
    if (glyph_scale < 1) {
        throw ValidationError("glyph_scale must be >= 1");
    }
    if (kGlyphHeight * glyph_scale > cell) {
        throw ValidationError("glyph height " + std::to_string(kGlyphHeight * glyph_scale) +
                              " exceeds cell " + std::to_string(cell) +
                              "; lower glyph_scale");
    }
    if (margin_cells < 0) {
        throw ValidationError("margin_cells must be >= 0");
    }
    if ((rows == 0) != (cols == 0)) {
        throw ValidationError("render rows and cols must both be set or both be 0 (auto)");
    }
    if (rows < 0 || cols < 0) {
        throw ValidationError("render rows/cols must be >= 0");
    }
    if (!auto_colors) {
        auto is_dark = [](Rgb c) { return c.r < 96 && c.g < 96 && c.b < 96; };
        auto is_light = [](Rgb c) { return c.r > 160 && c.g > 160 && c.b > 160; };
        bool ok = (is_dark(fg) && is_light(bg)) || (is_light(fg) && is_dark(bg));
        if (!ok) {
            throw ValidationError("fixed colors must pair one dark (channels < 96) with one "
                                  "light (channels > 160)");
        }
    }
}

PatchGrid resolve_grid(const std::vector<std::string>& words, const RenderSpec& spec,
                       const GridConfig& budget) {
    spec.validate();
    budget.validate();
    if (budget.cell != spec.cell) {
        throw ValidationError("render cell " + std::to_string(spec.cell) +
                              " does not match grid cell " + std::to_string(budget.cell));
    }
    if (spec.rows > 0) {
        return grid_of(spec.rows * spec.cell, spec.cols * spec.cell, spec.cell);
    }
    auto cell2 = static_cast<long long>(spec.cell) * spec.cell;
    long long min_cells = budget.min_pixels / cell2;
    long long max_cells = budget.max_pixels / cell2;
    bool found = false;
    long long best_tokens = 0;
    int best_rows = 0;
    int best_cols = 0;
    for (long long cols = 1; cols <= max_cells; ++cols) {
        int content_rows;
        try {
            content_rows = place_words(words, static_cast<int>(cols), spec, nullptr);
        } catch (const ValidationError&) {
            continue; // a word does not fit this width
        }
        long long rows = std::max<long long>(content_rows + 2 * spec.margin_cells, 1);
        rows = std::max(rows, (min_cells + cols - 1) / cols);
        long long tokens = rows * cols;
        if (tokens > max_cells) {
            continue;
        }
        long long squareness = std::llabs(rows - cols);
        if (!found || tokens < best_tokens ||
            (tokens == best_tokens && squareness < std::llabs(static_cast<long long>(best_rows) -
                                                              best_cols))) {
            found = true;
            best_tokens = tokens;
            best_rows = static_cast<int>(rows);
            best_cols = static_cast<int>(cols);
        }
    }
    if (!found) {
        throw ValidationError("no grid fits the content within the pixel budget [" +
                              std::to_string(budget.min_pixels) + ", " +
                              std::to_string(budget.max_pixels) + "]");
    }
    return grid_of(best_rows * spec.cell, best_cols * spec.cell, spec.cell);
}

std::vector<Placement> layout(const std::vector<std::string>& words, const PatchGrid& grid,
                              const RenderSpec& spec) {
    spec.validate();
    if (grid.cell != spec.cell) {
        throw ValidationError("grid cell does not match render cell");
    }
    std::vector<Placement> placements;
    int content_rows = place_words(words, grid.cols, spec, &placements);
    if (content_rows + 2 * spec.margin_cells > grid.rows) {
        throw ValidationError("content needs " +
                              std::to_string(content_rows + 2 * spec.margin_cells) +
                              " rows but the grid has " + std::to_string(grid.rows));
    }
    return placements;
}

Image render(const std::vector<Placement>& placements, const PatchGrid& grid,
             const RenderSpec& spec, Rgb bg, Rgb fg) {
    Image img;
    img.width = grid.width();
    img.height = grid.height();
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            img.set(x, y, bg);
        }
    }
    int scale = spec.glyph_scale;
    int gw = kGlyphWidth * scale;
    int gh = kGlyphHeight * scale;
    for (const Placement& p : placements) {
        for (std::size_t ci = 0; ci < p.word.size(); ++ci) {
            const Glyph& glyph = glyph_for(p.word[ci]);
            int ox = p.x0 + static_cast<int>(ci) * gw;
            for (int gy = 0; gy < gh; ++gy) {
                for (int gx = 0; gx < gw; ++gx) {
                    if (glyph.ink_at(gx / scale, gy / scale)) {
                        img.set(ox + gx, p.y0 + gy, fg);
                    }
                }
            }
        }
    }
    return img;
}

std::vector<VisionLabel> labels_from_layout(const std::vector<Placement>& placements,
                                            const PatchGrid& grid, const Vocabulary& vocab) {
    std::vector<VisionLabel> labels;
    labels.reserve(placements.size());
    for (const Placement& p : placements) {
        VisionLabel label;
        label.token_index = p.row * grid.cols + p.col + p.span_cells - 1;
        label.word = p.word;
        label.first_token_id = vocab.first_token(p.word);
        labels.push_back(std::move(label));
    }
    return labels;
}

RenderedDoc render_document(const std::vector<std::string>& words, const RenderSpec& spec,
                            const GridConfig& budget, const Vocabulary& vocab) {
    RenderedDoc doc;
    doc.grid = resolve_grid(words, spec, budget);
    doc.placements = layout(words, doc.grid, spec);
    if (spec.auto_colors) {
        auto [bg, fg] = pick_colors(spec.seed);
        doc.bg = bg;
        doc.fg = fg;
    } else {
        doc.bg = spec.bg;
        doc.fg = spec.fg;
    }
    doc.image = render(doc.placements, doc.grid, spec, doc.bg, doc.fg);
    doc.labels = labels_from_layout(doc.placements, doc.grid, vocab);
    return doc;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for write: " + path);
    }
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
    if (!out) {
        throw std::runtime_error("short write: " + path);
    }
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::string magic;
    in >> magic;
    if (magic != "P6") {
        throw std::runtime_error(path + ": not a binary PPM (P6) file");
    }
    int w = 0;
    int h = 0;
    int maxval = 0;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval != 255) {
        throw std::runtime_error(path + ": malformed PPM header");
    }
    in.get(); // single whitespace after maxval
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
        throw std::runtime_error(path + ": truncated pixel data");
    }
    return img;
}

} // namespace dvforge
