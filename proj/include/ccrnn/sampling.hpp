#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "model.hpp"

namespace ccrnn {

namespace detail {

inline void apply_temperature(Vector& y, double temperature)
{
    if (!(temperature > 0))
        throw ParameterError("sampling temperature must be positive");
    if (temperature == 1.0)
        return;
    double sum = 0;
    for (auto& p : y) {
        p = std::pow(p, 1.0 / temperature);
        sum += p;
    }
    for (auto& p : y)
        p /= sum;
}

/// Step function for one model: feed(c) consumes c and returns the next-symbol distribution.
struct CharRnnStepper {
    const CharRnn& model;
    Vector h = Vector(model.hidden(), 0.0);

    Vector feed(CharId c)
    {
        h = crnn_step(model, c, h);
        return crnn_output(model, h);
    }
};

struct CondRnnStepper {
    explicit CondRnnStepper(const CondRnn& m) : model(m), h(m.hidden(), 0.0) {}

    const CondRnn& model;
    Vector h;
    std::vector<CharId> history;

    Vector feed(CharId c)
    {
        history.push_back(c);
        h = crnn_step_shared(c);
        return cond_output(model, h, model.context_at(history, history.size() - 1));
    }

    Vector crnn_step_shared(CharId c) const
    {
        Vector out(model.hidden());
        recur(model.A, model.R, c, h, out);
        sigmoid_inplace(std::span<double>(out));
        return out;
    }
};

/// Tracks token boundaries the same way encode_stream() does and ticks the word RNN between tokens.
struct MixedRnnStepper {
    MixedRnnStepper(const MixedRnn& m, const CharVocab& cv, const WordVocab& wv)
        : model(m), chars(cv), words(wv), h(m.hidden(), 0.0), g(m.word_hidden(), 0.0) {}

    const MixedRnn& model;
    const CharVocab& chars;
    const WordVocab& words;
    Vector h;
    Vector g;
    std::string token;
    bool after_space = false;

    Vector feed(CharId c)
    {
        const char32_t ch = c < chars.size() ? chars.char_of(c) : U'�';
        if (is_space(ch)) {
            after_space = after_space || !token.empty();
        } else {
            if (after_space && !token.empty()) {
                WordId w = words.id_of(token);
                if (w >= model.words())
                    w = WordVocab::unk_id;
                g = word_rnn_step(model, w, g);
                token.clear();
            }
            after_space = false;
            utf8::append(token, ch);
        }
        h = mixed_step(model, c, h, g);
        return mixed_char_output(model, h);
    }
};

template <typename Stepper>
std::vector<CharId> sample_with(Stepper& stepper, std::span<const CharId> prime, std::size_t length, Rng& rng,
                                double temperature)
{
    std::vector<CharId> out;
    if (length == 0)
        return out;
    if (prime.empty())
        throw ParameterError("sampling needs at least one prime symbol");
    Vector y;
    for (CharId c : prime)
        y = stepper.feed(c);
    out.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
        apply_temperature(y, temperature);
        const auto c = static_cast<CharId>(sample_categorical(y, rng));
        out.push_back(c);
        if (i + 1 < length)
            y = stepper.feed(c);
    }
    return out;
}

} // namespace detail

/// Default prime: newline if in the alphabet, else space, else the first symbol.
inline std::vector<CharId> default_prime(const CharVocab& cv)
{
    if (auto id = cv.find(U'\n'))
        return {*id};
    if (auto id = cv.find(U' '))
        return {*id};
    return {0};
}

/**
 * Autoregressive sampling of `length` symbol ids after feeding `prime`.
 * For the conditional model the context is recomputed from the generated
 * history at every step; for the mixed model the word RNN ticks whenever a
 * new token starts.
 */
inline std::vector<CharId> sample_ids(const AnyModel& model, const CharVocab& cv, const WordVocab& wv,
                                      std::span<const CharId> prime, std::size_t length, Rng& rng,
                                      double temperature = 1.0)
{
    return std::visit(
        [&](const auto& m) -> std::vector<CharId> {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, CharRnn>) {
                detail::CharRnnStepper s{m};
                return detail::sample_with(s, prime, length, rng, temperature);
            } else if constexpr (std::is_same_v<M, CondRnn>) {
                detail::CondRnnStepper s(m);
                return detail::sample_with(s, prime, length, rng, temperature);
            } else {
                detail::MixedRnnStepper s(m, cv, wv);
                return detail::sample_with(s, prime, length, rng, temperature);
            }
        },
        model);
}

/// `length` characters of text sampled from a character-level model.
inline std::string sample_text(const AnyModel& model, const CharVocab& cv, const WordVocab& wv, Rng& rng,
                               std::size_t length, double temperature = 1.0)
{
    const auto prime = default_prime(cv);
    return decode_chars(sample_ids(model, cv, wv, prime, length, rng, temperature), cv);
}

} // namespace ccrnn
