#pragma once

#include <algorithm>
#include <variant>

#include "char_rnn.hpp"
#include "cond_rnn.hpp"
#include "config.hpp"
#include "mixed_rnn.hpp"
#include "rng.hpp"

namespace ccrnn {

using AnyModel = std::variant<CharRnn, MixedRnn, CondRnn>;

static_assert(SequenceModel<CharRnn>);
static_assert(SequenceModel<MixedRnn>);
static_assert(SequenceModel<CondRnn>);

inline ModelKind kind_of(const AnyModel& m)
{
    return std::visit([](const auto& x) { return std::decay_t<decltype(x)>::kind; }, m);
}

inline std::size_t hidden_of(const AnyModel& m)
{
    return std::visit([](const auto& x) { return x.hidden(); }, m);
}

inline std::size_t alphabet_of(const AnyModel& m)
{
    return std::visit([](const auto& x) { return x.alphabet(); }, m);
}

/**
 * Fresh parameters for `config.model_kind`, drawn from the init sub-seed of
 * config.seed. `words` is the word vocabulary size (mixed only); the restricted
 * output vocabulary is min(config.word_out, words). `index` is required for the
 * conditional model.
 */
inline AnyModel init_model(const TrainConfig& config, std::size_t alphabet, std::size_t words = 0,
                           const NGramIndex* index = nullptr)
{
    config.validate();
    if (alphabet == 0)
        throw ConfigError("alphabet is empty");
    Rng rng(derive_seed(config.seed, SeedStream::init));
    switch (config.model_kind) {
    case ModelKind::plain:
        return CharRnn::init(config.hidden, alphabet, rng);
    case ModelKind::mixed:
        if (words == 0)
            throw ConfigError("mixed model needs a word vocabulary");
        return MixedRnn::init(config.hidden, alphabet, config.word_hidden, words, std::min(config.word_out, words),
                              config.lambda, rng);
    case ModelKind::conditional:
        if (!index)
            throw ConfigError("conditional model needs an n-gram index");
        return CondRnn::init(config.hidden, alphabet, *index, rng);
    }
    throw ConfigError("unknown model kind");
}

} // namespace ccrnn
