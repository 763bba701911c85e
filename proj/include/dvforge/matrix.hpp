#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace dvforge {

// Dense row-major matrix of doubles. All model math runs in double precision.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double* row(int i) {
        assert(i >= 0 && i < rows);
        return data.data() + static_cast<std::size_t>(i) * cols;
    }
    const double* row(int i) const {
        assert(i >= 0 && i < rows);
        return data.data() + static_cast<std::size_t>(i) * cols;
    }
    std::span<double> row_span(int i) { return {row(i), static_cast<std::size_t>(cols)}; }
    std::span<const double> row_span(int i) const { return {row(i), static_cast<std::size_t>(cols)}; }

    double& at(int r, int c) {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return data[static_cast<std::size_t>(r) * cols + c];
    }
    double at(int r, int c) const {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return data[static_cast<std::size_t>(r) * cols + c];
    }

    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// Sum with pairwise recursion: deterministic and more accurate than a naive
// left-to-right loop on long inputs.
double pairwise_sum(std::span<const double> values);

} // namespace dvforge
