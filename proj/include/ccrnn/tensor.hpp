#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace ccrnn {

/// Dense row-major matrix.
template <std::floating_point T>
class BasicMatrix {
public:
    using value_type = T;

    BasicMatrix() = default;
    BasicMatrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using Vector = std::vector<double>;

namespace detail {

inline void require_shape(bool ok, const char* op, std::size_t want, std::size_t got)
{
    if (!ok)
        throw ShapeError(std::string(op) + ": expected dimension " + std::to_string(want) +
                         ", got " + std::to_string(got));
}

} // namespace detail

/// out = M x
template <std::floating_point T>
void matvec_into(const BasicMatrix<T>& m, std::span<const T> x, std::span<T> out)
{
    detail::require_shape(m.cols() == x.size(), "matvec", m.cols(), x.size());
    detail::require_shape(m.rows() == out.size(), "matvec", m.rows(), out.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        T acc = 0;
        for (std::size_t j = 0; j < r.size(); ++j)
            acc += r[j] * x[j];
        out[i] = acc;
    }
}

template <std::floating_point T>
std::vector<T> matvec(const BasicMatrix<T>& m, std::span<const T> x)
{
    std::vector<T> out(m.rows());
    matvec_into(m, x, std::span<T>(out));
    return out;
}

/// out += M^T x
template <std::floating_point T>
void matvec_transposed_add(const BasicMatrix<T>& m, std::span<const T> x, std::span<T> out)
{
    detail::require_shape(m.rows() == x.size(), "matvec_transposed", m.rows(), x.size());
    detail::require_shape(m.cols() == out.size(), "matvec_transposed", m.cols(), out.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const T xi = x[i];
        if (xi == T(0))
            continue;
        const auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j)
            out[j] += r[j] * xi;
    }
}

/// M += a b^T
template <std::floating_point T>
void add_outer(BasicMatrix<T>& m, std::span<const T> a, std::span<const T> b)
{
    detail::require_shape(m.rows() == a.size(), "add_outer", m.rows(), a.size());
    detail::require_shape(m.cols() == b.size(), "add_outer", m.cols(), b.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const T ai = a[i];
        if (ai == T(0))
            continue;
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j)
            r[j] += ai * b[j];
    }
}

template <std::floating_point T>
T sigmoid(T x) noexcept
{
    if (x >= T(0))
        return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <std::floating_point T>
void sigmoid_inplace(std::span<T> x) noexcept
{
    for (auto& v : x)
        v = sigmoid(v);
}

template <std::floating_point T>
std::vector<T> sigmoid(std::span<const T> x)
{
    std::vector<T> out(x.begin(), x.end());
    sigmoid_inplace(std::span<T>(out));
    return out;
}

/// Softmax with max subtraction.
template <std::floating_point T>
void softmax_inplace(std::span<T> x) noexcept
{
    if (x.empty())
        return;
    const T mx = *std::max_element(x.begin(), x.end());
    T sum = 0;
    for (auto& v : x) {
        v = std::exp(v - mx);
        sum += v;
    }
    const T inv = T(1) / sum;
    for (auto& v : x)
        v *= inv;
}

template <std::floating_point T>
std::vector<T> softmax(std::span<const T> x)
{
    std::vector<T> out(x.begin(), x.end());
    softmax_inplace(std::span<T>(out));
    return out;
}

/// Clamp every entry into [-tau, tau].
template <std::floating_point T>
void clip_elementwise(std::span<T> g, T tau)
{
    if (!(tau > T(0)))
        throw ParameterError("clip bound must be positive");
    for (auto& v : g)
        v = std::clamp(v, -tau, tau);
}

template <std::floating_point T>
void clip_elementwise(BasicMatrix<T>& g, T tau)
{
    clip_elementwise(g.flat(), tau);
}

/// log with a floor at the smallest normal, so a saturated softmax never yields -inf.
inline double safe_log(double p) noexcept
{
    return std::log(std::max(p, std::numeric_limits<double>::min()));
}

/// Draw index i with probability p[i]. p must sum to 1 within 1e-6.
inline std::size_t sample_categorical(std::span<const double> p, Rng& rng)
{
    double sum = 0;
    for (double v : p) {
        if (!(v >= 0.0))
            throw ParameterError("sample_categorical: negative or NaN probability");
        sum += v;
    }
    if (p.empty() || std::abs(sum - 1.0) > 1e-6)
        throw ParameterError("sample_categorical: probabilities do not sum to 1");
    const double u = rng.uniform();
    double acc = 0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0)
            last_positive = i;
        acc += p[i];
        if (u < acc && p[i] > 0)
            return i;
    }
    return last_positive;
}

/// Fill with i.i.d. uniform draws in [lo, hi].
template <std::floating_point T>
void fill_uniform(BasicMatrix<T>& m, Rng& rng, T lo, T hi)
{
    for (auto& v : m.flat())
        v = static_cast<T>(rng.uniform(lo, hi));
}

} // namespace ccrnn
