#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mmql/errors.hpp"

namespace mmql {

// Dense row-major matrix of 64-bit floats. The only tensor type in the
// project; vectors are 1 x n or n x 1 as context demands.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), d(std::move(data)) {
        if (d.size() != static_cast<size_t>(r) * c)
            throw DimensionError("Mat: data size does not match shape");
    }

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat filled(int r, int c, double v) {
        Mat m(r, c);
        std::fill(m.d.begin(), m.d.end(), v);
        return m;
    }
    static Mat row(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Mat(1, n, std::move(v));
    }

    double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return d.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
    }
};

inline void require_same_shape(const Mat& a, const Mat& b, const char* where) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(where) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

}  // namespace mmql
