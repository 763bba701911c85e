#include "dvforge/patch_grid.hpp"

#include "dvforge/util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dvforge {

namespace {

long long round_to_multiple(double v, int f) {
    return static_cast<long long>(std::llround(v / f)) * f;
}

long long floor_to_multiple(double v, int f) {
    return static_cast<long long>(std::floor(v / f)) * f;
}

long long ceil_to_multiple(double v, int f) {
    return static_cast<long long>(std::ceil(v / f)) * f;
}

} // namespace

void GridConfig::validate() const {
    if (cell <= 0) {
        throw ValidationError("grid.cell must be positive");
    }
    if (min_pixels <= 0 || min_pixels > max_pixels) {
        throw ValidationError("grid budget requires 0 < min_pixels <= max_pixels");
    }
    long long cell2 = static_cast<long long>(cell) * cell;
    if (min_pixels % cell2 != 0 || max_pixels % cell2 != 0) {
        throw ValidationError("grid budget bounds must be multiples of cell^2");
    }
}

std::pair<int, int> smart_resize(int h, int w, const GridConfig& cfg) {
    cfg.validate();
    if (h < 1 || w < 1) {
        throw std::invalid_argument("smart_resize requires h, w >= 1");
    }

    const int cell = cfg.cell;
    long long hb = std::max<long long>(cell, round_to_multiple(h, cell));
    long long wb = std::max<long long>(cell, round_to_multiple(w, cell));
    const double pixels = static_cast<double>(h) * static_cast<double>(w);

    if (hb * wb > cfg.max_pixels) {
        double scale = std::sqrt(static_cast<double>(cfg.max_pixels) / pixels);
        hb = floor_to_multiple(h * scale, cell);
        wb = floor_to_multiple(w * scale, cell);
        if (hb < cell || wb < cell) {
            throw std::runtime_error(
                "smart_resize: max_pixels unsatisfiable for " + std::to_string(h) + "x" +
                std::to_string(w) + " (aspect ratio leaves no multiple-of-" + std::to_string(cell) +
                " shape under the budget)");
        }
    } else if (hb * wb < cfg.min_pixels) {
        double scale = std::sqrt(static_cast<double>(cfg.min_pixels) / pixels);
        hb = ceil_to_multiple(h * scale, cell);
        wb = ceil_to_multiple(w * scale, cell);
    }

    if (hb * wb < cfg.min_pixels) {
        throw std::runtime_error("smart_resize: min_pixels unsatisfiable for " + std::to_string(h) +
                                 "x" + std::to_string(w));
    }
    if (hb * wb > cfg.max_pixels) {
        throw std::runtime_error("smart_resize: max_pixels unsatisfiable for " + std::to_string(h) +
                                 "x" + std::to_string(w) +
                                 " (rounding up to whole cells overshoots the budget)");
    }
    return {static_cast<int>(hb), static_cast<int>(wb)};
}

PatchGrid grid_of(int h, int w, int cell) {
    if (cell <= 0) {
        throw std::invalid_argument("grid_of: cell must be positive");
    }
    if (h <= 0 || w <= 0 || h % cell != 0 || w % cell != 0) {
        throw std::invalid_argument("grid_of: dims must be positive multiples of cell, got " +
                                    std::to_string(h) + "x" + std::to_string(w) + " with cell " +
                                    std::to_string(cell));
    }
    return PatchGrid{h / cell, w / cell, cell};
}

int token_index(const PatchGrid& grid, double x, double y) {
    if (!(x >= 0.0 && x <= grid.width() && y >= 0.0 && y <= grid.height())) {
        throw std::invalid_argument("token_index: point (" + std::to_string(x) + ", " +
                                    std::to_string(y) + ") outside image rectangle");
    }
    // Cells are the half-open intervals (i*cell, (i+1)*cell], so ceil(v/cell)-1;
    // 0 is folded into the first cell.
    auto cell_of = [&](double v, int count) {
        int i = static_cast<int>(std::ceil(v / grid.cell)) - 1;
        return std::clamp(i, 0, count - 1);
    };
    return cell_of(y, grid.rows) * grid.cols + cell_of(x, grid.cols);
}

WordBox scale_box(const WordBox& box, std::pair<int, int> from_hw, std::pair<int, int> to_hw) {
    if (from_hw.first <= 0 || from_hw.second <= 0 || to_hw.first <= 0 || to_hw.second <= 0) {
        throw std::invalid_argument("scale_box: dims must be positive");
    }
    double sy = static_cast<double>(to_hw.first) / from_hw.first;
    double sx = static_cast<double>(to_hw.second) / from_hw.second;
    WordBox out = box;
    out.x0 = box.x0 * sx;
    out.x1 = box.x1 * sx;
    out.y0 = box.y0 * sy;
    out.y1 = box.y1 * sy;
    return out;
}

} // namespace dvforge
