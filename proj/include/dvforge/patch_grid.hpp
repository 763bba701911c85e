#pragma once

#include <cstdint>
#include <string>
#include <utility>

namespace dvforge {

// Budget and cell size of the dynamic-resolution visual tokenizer. One cell
// of `cell` x `cell` pixels corresponds to one visual token.
struct GridConfig {
    int cell = 32;
    long long min_pixels = 32LL * 32 * 64;
    long long max_pixels = 32LL * 32 * 2048;

    void validate() const;
};

// Cell lattice over a resized image. Token order is row-major.
struct PatchGrid {
    int rows = 0;
    int cols = 0;
    int cell = 0;

    int height() const { return rows * cell; }
    int width() const { return cols * cell; }
    int token_count() const { return rows * cols; }

    bool operator==(const PatchGrid&) const = default;
};

// One OCR-recognized word with its pixel-space bounding box. Coordinates stay
// fractional after scaling; token_index maps them to cells directly.
struct WordBox {
    std::string text;
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;
    double confidence = -1.0; // < 0 means absent

    bool has_confidence() const { return confidence >= 0.0; }
    double height() const { return y1 - y0; }
};

// Resize (h, w) to multiples of cfg.cell whose pixel count lands inside
// [min_pixels, max_pixels], preserving aspect ratio: round to the nearest
// multiples first, then uniformly downscale (flooring) or upscale (ceiling)
// when the budget demands it. Throws when no such shape exists, naming the
// violated constraint.
std::pair<int, int> smart_resize(int h, int w, const GridConfig& cfg);

// (h, w) must be positive multiples of cell.
PatchGrid grid_of(int h, int w, int cell);

// Row-major token index of the cell containing point (x, y), with
// 0 <= x <= width and 0 <= y <= height. A coordinate exactly on a cell
// boundary belongs to the cell above/left of it: the ink of a box ending
// there lies in that cell.
int token_index(const PatchGrid& grid, double x, double y);

// Rescale box coordinates from one image shape to another. Dims are (h, w).
WordBox scale_box(const WordBox& box, std::pair<int, int> from_hw, std::pair<int, int> to_hw);

} // namespace dvforge
