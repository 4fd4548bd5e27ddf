#pragma once

#include <vector>

#include "model_common.hpp"

namespace ccrnn {

/**
 * Elman character RNN:
 *
 *     h_t = sigmoid(A c_t + R h_{t-1})
 *     y_t = softmax(U h_t)
 *
 * A is m x (d+1); its last column is the embedding of characters unseen in
 * training and is never updated. U is d x m.
 */
struct CharRnn {
    static constexpr ModelKind kind = ModelKind::plain;

    Matrix A;
    Matrix R;
    Matrix U;

    CharRnn() = default;
    CharRnn(std::size_t hidden, std::size_t alphabet)
        : A(hidden, alphabet + 1), R(hidden, hidden), U(alphabet, hidden) {}

    /// Weights i.i.d. uniform in [-scale, scale], drawn in the order A, R, U.
    static CharRnn init(std::size_t hidden, std::size_t alphabet, Rng& rng, double scale = 0.1)
    {
        if (hidden == 0 || alphabet == 0)
            throw ConfigError("hidden size and alphabet size must be positive");
        CharRnn p(hidden, alphabet);
        fill_uniform(p.A, rng, -scale, scale);
        fill_uniform(p.R, rng, -scale, scale);
        fill_uniform(p.U, rng, -scale, scale);
        return p;
    }

    std::size_t hidden() const noexcept { return R.rows(); }
    std::size_t alphabet() const noexcept { return U.rows(); }

    std::vector<NamedMatrix> params() { return {{"A", &A}, {"R", &R}, {"U", &U}}; }
    std::vector<NamedConstMatrix> params() const { return {{"A", &A}, {"R", &R}, {"U", &U}}; }

    struct Carry {
        Vector h;
    };

    struct Trace {
        Vector h0;
        std::vector<CharId> inputs;
        std::vector<CharId> targets;
        std::vector<Vector> h;
        std::vector<Vector> y;
        std::size_t length = 0;
    };

    struct Gradients {
        Matrix A, R, U;

        void zero()
        {
            A.fill(0);
            R.fill(0);
            U.fill(0);
        }
        void clip(double tau)
        {
            clip_elementwise(A, tau);
            clip_elementwise(R, tau);
            clip_elementwise(U, tau);
        }
        std::vector<NamedConstMatrix> dense() const { return {{"A", &A}, {"R", &R}, {"U", &U}}; }
    };

    Carry initial_carry() const { return Carry{Vector(hidden(), 0.0)}; }

    Gradients make_gradients() const
    {
        return Gradients{Matrix(A.rows(), A.cols()), Matrix(R.rows(), R.cols()), Matrix(U.rows(), U.cols())};
    }

    double objective(const LossTotals& acc) const { return acc.char_nats; }

    void forward(const EncodedStream& s, std::size_t begin, std::size_t end, Carry& carry, Trace* trace,
                 LossTotals& acc) const
    {
        detail::check_window(s, begin, end);
        const std::size_t m = hidden();
        if (carry.h.size() != m)
            throw ShapeError("carried hidden state has the wrong size");
        const std::size_t n = end - begin;
        if (trace) {
            trace->h0 = carry.h;
            trace->length = n;
            trace->inputs.resize(n);
            trace->targets.resize(n);
            trace->h.resize(n);
            trace->y.resize(n);
        }
        Vector h_new(m), y(alphabet());
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = begin + k;
            const CharId c = s.chars[t];
            const CharId target = s.chars[t + 1];
            detail::recur(A, R, c, carry.h, h_new);
            sigmoid_inplace(std::span<double>(h_new));
            matvec_into(U, std::span<const double>(h_new), std::span<double>(y));
            softmax_inplace(std::span<double>(y));
            detail::add_char_loss(y, target, acc);
            if (trace) {
                trace->inputs[k] = c;
                trace->targets[k] = target;
                trace->h[k] = h_new;
                trace->y[k] = y;
            }
            std::swap(carry.h, h_new);
        }
    }

    void backward(const Trace& tr, Gradients& g) const
    {
        const std::size_t m = hidden();
        const std::size_t d = alphabet();
        Vector dh_next(m, 0.0), dh(m), da(m), dy(d);
        for (std::size_t k = tr.length; k-- > 0;) {
            const Vector& h = tr.h[k];
            const Vector& h_prev = k == 0 ? tr.h0 : tr.h[k - 1];
            detail::softmax_grad(tr.y[k], tr.targets[k], 1.0, dy);
            add_outer(g.U, std::span<const double>(dy), std::span<const double>(h));
            dh = dh_next;
            matvec_transposed_add(U, std::span<const double>(dy), std::span<double>(dh));
            detail::sigmoid_backward(dh, h, da);
            if (tr.inputs[k] < d)
                detail::add_column(g.A, tr.inputs[k], da);
            add_outer(g.R, std::span<const double>(da), std::span<const double>(h_prev));
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            matvec_transposed_add(R, std::span<const double>(da), std::span<double>(dh_next));
        }
    }

    void apply(const Gradients& g, double lr)
    {
        detail::axpy(-lr, g.A, A);
        detail::axpy(-lr, g.R, R);
        detail::axpy(-lr, g.U, U);
    }

    friend bool operator==(const CharRnn&, const CharRnn&) = default;
};

/// One recurrence step: sigmoid(A[:, c] + R h_prev).
inline Vector crnn_step(const CharRnn& p, CharId c, std::span<const double> h_prev)
{
    if (h_prev.size() != p.hidden())
        throw ShapeError("crnn_step: hidden state has the wrong size");
    Vector h(p.hidden());
    detail::recur(p.A, p.R, c, h_prev, h);
    sigmoid_inplace(std::span<double>(h));
    return h;
}

/// softmax(U h)
inline Vector crnn_output(const CharRnn& p, std::span<const double> h)
{
    Vector y = matvec(p.U, h);
    softmax_inplace(std::span<double>(y));
    return y;
}

} // namespace ccrnn
