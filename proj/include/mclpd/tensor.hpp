#pragma once
// Minimal dense double tensor used throughout the library. Row-major,
// rank 1..4. Heavy math goes through BLAS on the flat buffer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mclpd {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), 0.0);
    }
    Tensor(std::vector<std::size_t> s, std::vector<double> data)
        : shape(std::move(s)), v(std::move(data)) {
        if (v.size() != count(shape)) throw std::invalid_argument("tensor: data/shape mismatch");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }
    static Tensor zeros(std::initializer_list<std::size_t> s) { return Tensor(std::vector<std::size_t>(s)); }
    static Tensor full(std::initializer_list<std::size_t> s, double x) {
        Tensor t{std::vector<std::size_t>(s)};
        for (auto& e : t.v) e = x;
        return t;
    }

    std::size_t size() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    double& at(std::size_t i, std::size_t j) { return v[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * shape[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return v[(i * shape[1] + j) * shape[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return v[(i * shape[1] + j) * shape[2] + k];
    }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Shorthand for [rows x cols] matrices.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double x = 0.0) : rows(r), cols(c), v(r * c, x) {}
    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    double* row(std::size_t i) { return v.data() + i * cols; }
    const double* row(std::size_t i) const { return v.data() + i * cols; }
    std::size_t size() const { return v.size(); }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

inline bool all_finite(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}
inline bool all_finite(const Tensor& t) { return all_finite(t.data(), t.size()); }
inline bool all_finite(const Mat& m) { return all_finite(m.v.data(), m.v.size()); }

}  // namespace mclpd
