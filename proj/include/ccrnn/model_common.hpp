#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "tensor.hpp"

namespace ccrnn {

enum class ModelKind { plain, mixed, conditional };

inline std::string to_string(ModelKind k)
{
    switch (k) {
    case ModelKind::plain: return "plain";
    case ModelKind::mixed: return "mixed";
    case ModelKind::conditional: return "cond";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s)
{
    if (s == "plain") return ModelKind::plain;
    if (s == "mixed") return ModelKind::mixed;
    if (s == "cond" || s == "conditional") return ModelKind::conditional;
    throw ConfigError("unknown model kind '" + std::string(s) + "' (expected plain, mixed or cond)");
}

/// Running loss over one or more windows, in nats.
struct LossTotals {
    double char_nats = 0;
    double word_nats = 0;
    std::size_t chars = 0;  // predicted characters with a known target
    std::size_t words = 0;  // predicted words (mixed model only)
    std::size_t unseen = 0; // targets outside the training alphabet, excluded from char_nats

    LossTotals& operator+=(const LossTotals& o)
    {
        char_nats += o.char_nats;
        word_nats += o.word_nats;
        chars += o.chars;
        words += o.words;
        unseen += o.unseen;
        return *this;
    }
};

/// A named view of one parameter matrix.
struct NamedMatrix {
    std::string name;
    Matrix* matrix;
};

struct NamedConstMatrix {
    std::string name;
    const Matrix* matrix;
};

/**
 * What the trainer and evaluator need from a model. forward() consumes inputs
 * [begin, end) of the stream, each predicting the next character, and adds its
 * losses to `acc`; with a trace it also records what backward() needs.
 * backward() accumulates exact gradients of objective() for that window, with
 * the state carried into the window held constant.
 */
template <typename M>
concept SequenceModel = requires(M& m, const M& cm, const EncodedStream& s, typename M::Carry& carry,
                                 typename M::Trace& trace, typename M::Gradients& g, LossTotals& acc) {
    { cm.initial_carry() } -> std::same_as<typename M::Carry>;
    cm.forward(s, std::size_t{}, std::size_t{}, carry, &trace, acc);
    cm.backward(trace, g);
    { cm.make_gradients() } -> std::same_as<typename M::Gradients>;
    { cm.objective(acc) } -> std::convertible_to<double>;
    g.zero();
    g.clip(double{});
    m.apply(g, double{});
    { M::kind } -> std::convertible_to<ModelKind>;
};

namespace detail {

/// out = sigmoid(A[:, c] + R h_prev)
inline void recur(const Matrix& a, const Matrix& r, CharId c, std::span<const double> h_prev, std::span<double> out)
{
    if (c >= a.cols())
        throw IndexError("input id " + std::to_string(c) + " outside embedding of width " +
                         std::to_string(a.cols()));
    matvec_into(r, h_prev, out);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += a(i, c);
}

inline void check_window(const EncodedStream& s, std::size_t begin, std::size_t end)
{
    if (begin > end || (end > 0 && end + 1 > s.size()))
        throw ShapeError("window [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") has no targets in a stream of length " + std::to_string(s.size()));
}

/// Add -log y[target] to the totals unless the target is outside the alphabet.
inline double add_char_loss(std::span<const double> y, CharId target, LossTotals& acc)
{
    if (target >= y.size()) {
        ++acc.unseen;
        return 0;
    }
    const double l = -safe_log(y[target]);
    acc.char_nats += l;
    ++acc.chars;
    return l;
}

/// dy = scale * (y - onehot(target)), or zero when the target is unseen.
inline void softmax_grad(std::span<const double> y, CharId target, double scale, std::span<double> out)
{
    if (target >= y.size()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = scale * y[i];
    out[target] -= scale;
}

/// da = dh .* h .* (1 - h)
inline void sigmoid_backward(std::span<const double> dh, std::span<const double> h, std::span<double> da)
{
    for (std::size_t i = 0; i < h.size(); ++i)
        da[i] = dh[i] * h[i] * (1.0 - h[i]);
}

inline void axpy(double alpha, const Matrix& x, Matrix& y)
{
    auto xs = x.flat();
    auto ys = y.flat();
    for (std::size_t i = 0; i < ys.size(); ++i)
        ys[i] += alpha * xs[i];
}

inline void add_column(Matrix& m, std::size_t col, std::span<const double> v)
{
    for (std::size_t i = 0; i < v.size(); ++i)
        m(i, col) += v[i];
}

} // namespace detail

/// Negative log-likelihood in nats: -sum_t log y_t[target_t].
inline double nll_char(std::span<const Vector> predictions, std::span<const CharId> targets)
{
    if (predictions.size() != targets.size())
        throw ShapeError("nll_char: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
    double nats = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] >= predictions[t].size())
            throw IndexError("nll_char: target id out of range");
        nats -= safe_log(predictions[t][targets[t]]);
    }
    return nats;
}

/// lambda * char + (1 - lambda) * word, lambda in (0, 1).
inline double nll_mixed(double char_nats, double word_nats, double lambda)
{
    if (!(lambda > 0.0 && lambda < 1.0))
        throw ParameterError("interpolation weight must lie in (0, 1)");
    return lambda * char_nats + (1.0 - lambda) * word_nats;
}

} // namespace ccrnn
