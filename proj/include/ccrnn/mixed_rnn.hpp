#pragma once

#include <map>
#include <vector>

#include "model_common.hpp"

namespace ccrnn {

/**
 * Character RNN conditioned on a word-level RNN.
 *
 *     g_p = sigmoid(Aw w_p + Rw g_{p-1})            word side, ticks once per word
 *     v_p = softmax(Uw g_p)                          predicts w_{p+1} over the restricted vocabulary
 *     h_t = sigmoid(A c_t + R h_{t-1} + Q z_t)       z_t = g_{p-1} when char t belongs to word p
 *     y_t = softmax(U h_t)
 *
 * Loss: lambda * char NLL + (1 - lambda) * word NLL. The word RNN ticks after the
 * last character of a word (including its trailing whitespace) has been read.
 *
 * z_t enters the character recurrence as a constant: the character loss does
 * not backpropagate into the word RNN, which learns from the word loss only.
 * Restricted output ids are the prefix [0, k_out) of the word vocabulary;
 * targets outside it become `<UNK>` (id 0).
 */
struct MixedRnn {
    static constexpr ModelKind kind = ModelKind::mixed;

    Matrix A;  // m x (d+1)
    Matrix R;  // m x m
    Matrix U;  // d x m
    Matrix Q;  // m x g
    Matrix Aw; // g x k
    Matrix Rw; // g x g
    Matrix Uw; // k_out x g
    double lambda = 0.5;

    MixedRnn() = default;
    MixedRnn(std::size_t hidden, std::size_t alphabet, std::size_t word_hidden, std::size_t words,
             std::size_t words_out, double lambda_)
        : A(hidden, alphabet + 1), R(hidden, hidden), U(alphabet, hidden), Q(hidden, word_hidden),
          Aw(word_hidden, words), Rw(word_hidden, word_hidden), Uw(words_out, word_hidden), lambda(lambda_)
    {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw ParameterError("interpolation weight must lie in (0, 1)");
        if (words_out > words)
            throw ConfigError("restricted word vocabulary is larger than the word vocabulary");
    }

    /// Weights i.i.d. uniform in [-scale, scale], drawn in the order A, R, U, Q, Aw, Rw, Uw.
    static MixedRnn init(std::size_t hidden, std::size_t alphabet, std::size_t word_hidden, std::size_t words,
                         std::size_t words_out, double lambda, Rng& rng, double scale = 0.1)
    {
        if (hidden == 0 || alphabet == 0 || word_hidden == 0 || words == 0 || words_out == 0)
            throw ConfigError("mixed model sizes must be positive");
        MixedRnn p(hidden, alphabet, word_hidden, words, words_out, lambda);
        for (auto& [name, mat] : p.params())
            fill_uniform(*mat, rng, -scale, scale);
        return p;
    }

    std::size_t hidden() const noexcept { return R.rows(); }
    std::size_t alphabet() const noexcept { return U.rows(); }
    std::size_t word_hidden() const noexcept { return Rw.rows(); }
    std::size_t words() const noexcept { return Aw.cols(); }
    std::size_t words_out() const noexcept { return Uw.rows(); }

    WordId restrict_word(WordId w) const noexcept { return w < words_out() ? w : WordVocab::unk_id; }

    std::vector<NamedMatrix> params()
    {
        return {{"A", &A}, {"R", &R}, {"U", &U}, {"Q", &Q}, {"Aw", &Aw}, {"Rw", &Rw}, {"Uw", &Uw}};
    }
    std::vector<NamedConstMatrix> params() const
    {
        return {{"A", &A}, {"R", &R}, {"U", &U}, {"Q", &Q}, {"Aw", &Aw}, {"Rw", &Rw}, {"Uw", &Uw}};
    }

    struct Carry {
        Vector h;
        Vector g; // word state after the latest tick: the z of the current word
    };

    struct Tick {
        WordId word = 0;
        WordId target = 0; // restricted id
        bool has_target = false;
        Vector g;
        Vector v;
    };

    struct Trace {
        Vector h0;
        std::vector<CharId> inputs;
        std::vector<CharId> targets;
        std::vector<std::size_t> z_index; // into z_states
        std::vector<Vector> h;
        std::vector<Vector> y;
        std::vector<Vector> z_states; // [0] = carried-in g, [i + 1] = ticks[i].g
        std::vector<Tick> ticks;
        std::size_t length = 0;
    };

    struct Gradients {
        Matrix A, R, U, Q;
        std::map<WordId, Vector> Aw; // touched columns only
        Matrix Rw, Uw;
        std::size_t word_rows = 0;
        std::size_t words = 0;

        void zero()
        {
            A.fill(0);
            R.fill(0);
            U.fill(0);
            Q.fill(0);
            Aw.clear();
            Rw.fill(0);
            Uw.fill(0);
        }
        void clip(double tau)
        {
            clip_elementwise(A, tau);
            clip_elementwise(R, tau);
            clip_elementwise(U, tau);
            clip_elementwise(Q, tau);
            for (auto& [w, col] : Aw)
                clip_elementwise(std::span<double>(col), tau);
            clip_elementwise(Rw, tau);
            clip_elementwise(Uw, tau);
        }
        Matrix dense_Aw() const
        {
            Matrix out(word_rows, words);
            for (const auto& [w, col] : Aw)
                detail::add_column(out, w, col);
            return out;
        }
    };

    Carry initial_carry() const { return Carry{Vector(hidden(), 0.0), Vector(word_hidden(), 0.0)}; }

    Gradients make_gradients() const
    {
        Gradients g{Matrix(A.rows(), A.cols()), Matrix(R.rows(), R.cols()), Matrix(U.rows(), U.cols()),
                    Matrix(Q.rows(), Q.cols()), {}, Matrix(Rw.rows(), Rw.cols()), Matrix(Uw.rows(), Uw.cols()),
                    word_hidden(), words()};
        return g;
    }

    double objective(const LossTotals& acc) const { return nll_mixed(acc.char_nats, acc.word_nats, lambda); }

    void forward(const EncodedStream& s, std::size_t begin, std::size_t end, Carry& carry, Trace* trace,
                 LossTotals& acc) const
    {
        detail::check_window(s, begin, end);
        if (end > begin && (!s.has_words() || s.word_of_char.size() != s.size()))
            throw ConfigError("mixed model needs a stream with word alignment");
        const std::size_t m = hidden();
        const std::size_t gw = word_hidden();
        if (carry.h.size() != m || carry.g.size() != gw)
            throw ShapeError("carried state has the wrong size");
        const std::size_t n = end - begin;
        if (trace) {
            trace->h0 = carry.h;
            trace->length = n;
            trace->inputs.resize(n);
            trace->targets.resize(n);
            trace->z_index.resize(n);
            trace->h.resize(n);
            trace->y.resize(n);
            trace->z_states.resize(1);
            trace->z_states[0] = carry.g;
            trace->ticks.clear();
        }
        Vector h_new(m), y(alphabet()), g_new(gw), v(words_out());
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = begin + k;
            const CharId c = s.chars[t];
            const CharId target = s.chars[t + 1];
            detail::recur(A, R, c, carry.h, h_new);
            for (std::size_t i = 0; i < m; ++i) {
                const auto qi = Q.row(i);
                double acc_q = 0;
                for (std::size_t j = 0; j < gw; ++j)
                    acc_q += qi[j] * carry.g[j];
                h_new[i] += acc_q;
            }
            sigmoid_inplace(std::span<double>(h_new));
            matvec_into(U, std::span<const double>(h_new), std::span<double>(y));
            softmax_inplace(std::span<double>(y));
            detail::add_char_loss(y, target, acc);
            if (trace) {
                trace->inputs[k] = c;
                trace->targets[k] = target;
                trace->z_index[k] = trace->z_states.size() - 1;
                trace->h[k] = h_new;
                trace->y[k] = y;
            }
            std::swap(carry.h, h_new);

            const std::uint32_t p = s.word_of_char[t];
            if (s.word_of_char[t + 1] == p)
                continue;
            // last character of word p consumed: tick the word RNN
            const WordId w = s.words[p];
            if (w >= words())
                throw IndexError("word id " + std::to_string(w) + " outside word embedding");
            matvec_into(Rw, std::span<const double>(carry.g), std::span<double>(g_new));
            for (std::size_t i = 0; i < gw; ++i)
                g_new[i] += Aw(i, w);
            sigmoid_inplace(std::span<double>(g_new));
            const bool has_target = p + 1 < s.words.size();
            WordId wt = 0;
            if (has_target) {
                wt = restrict_word(s.words[p + 1]);
                matvec_into(Uw, std::span<const double>(g_new), std::span<double>(v));
                softmax_inplace(std::span<double>(v));
                acc.word_nats -= safe_log(v[wt]);
                ++acc.words;
            }
            if (trace) {
                trace->ticks.push_back(Tick{w, wt, has_target, g_new, has_target ? v : Vector{}});
                trace->z_states.push_back(g_new);
            }
            std::swap(carry.g, g_new);
        }
    }

    void backward(const Trace& tr, Gradients& g) const
    {
        const std::size_t m = hidden();
        const std::size_t d = alphabet();
        const std::size_t gw = word_hidden();
        {
            Vector dh_next(m, 0.0), dh(m), da(m), dy(d);
            for (std::size_t k = tr.length; k-- > 0;) {
                const Vector& h = tr.h[k];
                const Vector& h_prev = k == 0 ? tr.h0 : tr.h[k - 1];
                const Vector& z = tr.z_states[tr.z_index[k]];
                detail::softmax_grad(tr.y[k], tr.targets[k], lambda, dy);
                add_outer(g.U, std::span<const double>(dy), std::span<const double>(h));
                dh = dh_next;
                matvec_transposed_add(U, std::span<const double>(dy), std::span<double>(dh));
                detail::sigmoid_backward(dh, h, da);
                if (tr.inputs[k] < d)
                    detail::add_column(g.A, tr.inputs[k], da);
                add_outer(g.R, std::span<const double>(da), std::span<const double>(h_prev));
                add_outer(g.Q, std::span<const double>(da), std::span<const double>(z));
                std::fill(dh_next.begin(), dh_next.end(), 0.0);
                matvec_transposed_add(R, std::span<const double>(da), std::span<double>(dh_next));
            }
        }
        {
            const double wscale = 1.0 - lambda;
            Vector dg_next(gw, 0.0), dg(gw), da(gw), dv(words_out());
            for (std::size_t i = tr.ticks.size(); i-- > 0;) {
                const Tick& tk = tr.ticks[i];
                const Vector& g_prev = tr.z_states[i];
                dg = dg_next;
                if (tk.has_target) {
                    detail::softmax_grad(tk.v, tk.target, wscale, dv);
                    add_outer(g.Uw, std::span<const double>(dv), std::span<const double>(tk.g));
                    matvec_transposed_add(Uw, std::span<const double>(dv), std::span<double>(dg));
                }
                detail::sigmoid_backward(dg, tk.g, da);
                auto& col = g.Aw[tk.word];
                if (col.empty())
                    col.assign(gw, 0.0);
                for (std::size_t r = 0; r < gw; ++r)
                    col[r] += da[r];
                add_outer(g.Rw, std::span<const double>(da), std::span<const double>(g_prev));
                std::fill(dg_next.begin(), dg_next.end(), 0.0);
                matvec_transposed_add(Rw, std::span<const double>(da), std::span<double>(dg_next));
            }
        }
    }

    void apply(const Gradients& g, double lr)
    {
        detail::axpy(-lr, g.A, A);
        detail::axpy(-lr, g.R, R);
        detail::axpy(-lr, g.U, U);
        detail::axpy(-lr, g.Q, Q);
        for (const auto& [w, col] : g.Aw)
            for (std::size_t r = 0; r < col.size(); ++r)
                Aw(r, w) -= lr * col[r];
        detail::axpy(-lr, g.Rw, Rw);
        detail::axpy(-lr, g.Uw, Uw);
    }

    friend bool operator==(const MixedRnn&, const MixedRnn&) = default;
};

/// sigmoid(Aw[:, w] + Rw g_prev)
inline Vector word_rnn_step(const MixedRnn& p, WordId w, std::span<const double> g_prev)
{
    if (g_prev.size() != p.word_hidden())
        throw ShapeError("word_rnn_step: word state has the wrong size");
    if (w >= p.words())
        throw IndexError("word id " + std::to_string(w) + " out of range");
    Vector g = matvec(p.Rw, g_prev);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] += p.Aw(i, w);
    sigmoid_inplace(std::span<double>(g));
    return g;
}

/// sigmoid(A[:, c] + R h_prev + Q z)
inline Vector mixed_step(const MixedRnn& p, CharId c, std::span<const double> h_prev, std::span<const double> z)
{
    if (h_prev.size() != p.hidden())
        throw ShapeError("mixed_step: hidden state has the wrong size");
    if (z.size() != p.word_hidden())
        throw ShapeError("mixed_step: context vector has the wrong size");
    Vector h(p.hidden());
    detail::recur(p.A, p.R, c, h_prev, h);
    Vector qz = matvec(p.Q, z);
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] += qz[i];
    sigmoid_inplace(std::span<double>(h));
    return h;
}

/// softmax(Uw g) over the restricted word vocabulary.
inline Vector mixed_word_output(const MixedRnn& p, std::span<const double> g)
{
    Vector v = matvec(p.Uw, g);
    softmax_inplace(std::span<double>(v));
    return v;
}

/// softmax(U h)
inline Vector mixed_char_output(const MixedRnn& p, std::span<const double> h)
{
    Vector y = matvec(p.U, h);
    softmax_inplace(std::span<double>(y));
    return y;
}

} // namespace ccrnn
