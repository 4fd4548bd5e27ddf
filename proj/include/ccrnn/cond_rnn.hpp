#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "model_common.hpp"
#include "ngram_index.hpp"

namespace ccrnn {

/**
 * Character RNN whose output matrix is selected per step by the longest
 * retained n-gram ending at the current input:
 *
 *     h_t = sigmoid(A c_t + R h_{t-1})
 *     y_t = softmax(bank[ctx_t] h_t),   ctx_t = index.longest_match(c_{t-n_max+1..t})
 *
 * The bank holds one d x m matrix per context id of the index.
 */
struct CondRnn {
    static constexpr ModelKind kind = ModelKind::conditional;

    Matrix A;
    Matrix R;
    std::vector<Matrix> bank;
    NGramIndex index;

    CondRnn() = default;
    CondRnn(std::size_t hidden, std::size_t alphabet, NGramIndex idx)
        : A(hidden, alphabet + 1), R(hidden, hidden), bank(idx.size(), Matrix(alphabet, hidden)),
          index(std::move(idx)) {}

    /// Weights i.i.d. uniform in [-scale, scale], drawn in the order A, R, bank[0], bank[1], ...
    static CondRnn init(std::size_t hidden, std::size_t alphabet, NGramIndex idx, Rng& rng, double scale = 0.1)
    {
        if (hidden == 0 || alphabet == 0)
            throw ConfigError("hidden size and alphabet size must be positive");
        CondRnn p(hidden, alphabet, std::move(idx));
        for (auto& [name, mat] : p.params())
            fill_uniform(*mat, rng, -scale, scale);
        return p;
    }

    std::size_t hidden() const noexcept { return R.rows(); }
    std::size_t alphabet() const noexcept { return bank.empty() ? 0 : bank.front().rows(); }

    std::vector<NamedMatrix> params()
    {
        std::vector<NamedMatrix> out{{"A", &A}, {"R", &R}};
        for (std::size_t i = 0; i < bank.size(); ++i)
            out.push_back({"bank" + std::to_string(i), &bank[i]});
        return out;
    }
    std::vector<NamedConstMatrix> params() const
    {
        std::vector<NamedConstMatrix> out{{"A", &A}, {"R", &R}};
        for (std::size_t i = 0; i < bank.size(); ++i)
            out.push_back({"bank" + std::to_string(i), &bank[i]});
        return out;
    }

    /// Context used to predict the character after position t.
    ContextId context_at(std::span<const CharId> chars, std::size_t t) const
    {
        const std::size_t n = index.max_order();
        const std::size_t from = t + 1 >= n ? t + 1 - n : 0;
        return index.longest_match(chars.subspan(from, t + 1 - from));
    }

    struct Carry {
        Vector h;
    };

    struct Trace {
        Vector h0;
        std::vector<CharId> inputs;
        std::vector<CharId> targets;
        std::vector<ContextId> contexts;
        std::vector<Vector> h;
        std::vector<Vector> y;
        std::size_t length = 0;
    };

    struct Gradients {
        Matrix A, R;
        std::map<ContextId, Matrix> bank; // only contexts seen in the window
        std::size_t rows = 0, cols = 0;

        void zero()
        {
            A.fill(0);
            R.fill(0);
            bank.clear();
        }
        void clip(double tau)
        {
            clip_elementwise(A, tau);
            clip_elementwise(R, tau);
            for (auto& [ctx, block] : bank)
                clip_elementwise(block, tau);
        }
        Matrix& block(ContextId ctx)
        {
            auto [it, inserted] = bank.try_emplace(ctx);
            if (inserted)
                it->second = Matrix(rows, cols);
            return it->second;
        }
    };

    Carry initial_carry() const { return Carry{Vector(hidden(), 0.0)}; }

    Gradients make_gradients() const
    {
        return Gradients{Matrix(A.rows(), A.cols()), Matrix(R.rows(), R.cols()), {}, alphabet(), hidden()};
    }

    double objective(const LossTotals& acc) const { return acc.char_nats; }

    void forward(const EncodedStream& s, std::size_t begin, std::size_t end, Carry& carry, Trace* trace,
                 LossTotals& acc) const
    {
        detail::check_window(s, begin, end);
        if (bank.size() != index.size())
            throw ConfigError("output bank size does not match the n-gram index");
        const std::size_t m = hidden();
        if (carry.h.size() != m)
            throw ShapeError("carried hidden state has the wrong size");
        const std::size_t n = end - begin;
        if (trace) {
            trace->h0 = carry.h;
            trace->length = n;
            trace->inputs.resize(n);
            trace->targets.resize(n);
            trace->contexts.resize(n);
            trace->h.resize(n);
            trace->y.resize(n);
        }
        Vector h_new(m), y(alphabet());
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = begin + k;
            const CharId c = s.chars[t];
            const CharId target = s.chars[t + 1];
            const ContextId ctx = context_at(s.chars, t);
            detail::recur(A, R, c, carry.h, h_new);
            sigmoid_inplace(std::span<double>(h_new));
            matvec_into(bank[ctx], std::span<const double>(h_new), std::span<double>(y));
            softmax_inplace(std::span<double>(y));
            detail::add_char_loss(y, target, acc);
            if (trace) {
                trace->inputs[k] = c;
                trace->targets[k] = target;
                trace->contexts[k] = ctx;
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
            const ContextId ctx = tr.contexts[k];
            detail::softmax_grad(tr.y[k], tr.targets[k], 1.0, dy);
            add_outer(g.block(ctx), std::span<const double>(dy), std::span<const double>(h));
            dh = dh_next;
            matvec_transposed_add(bank[ctx], std::span<const double>(dy), std::span<double>(dh));
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
        for (const auto& [ctx, block] : g.bank)
            detail::axpy(-lr, block, bank[ctx]);
    }

    friend bool operator==(const CondRnn&, const CondRnn&) = default;
};

/// softmax(bank[ctx] h)
inline Vector cond_output(const CondRnn& p, std::span<const double> h, ContextId ctx)
{
    if (ctx >= p.bank.size())
        throw IndexError("context id " + std::to_string(ctx) + " outside output bank of size " +
                         std::to_string(p.bank.size()));
    Vector y = matvec(p.bank[ctx], h);
    softmax_inplace(std::span<double>(y));
    return y;
}

} // namespace ccrnn
