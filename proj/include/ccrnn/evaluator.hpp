#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <thread>
#include <vector>

#include "model.hpp"

namespace ccrnn {

/// Entropy of a model on a stream.
struct EvalReport {
    double nats = 0;
    std::size_t tokens = 0; // predicted symbols with a known target
    std::size_t unseen = 0; // targets outside the training alphabet (not scored)
    double bpc = 0;
    std::optional<double> bpb; // bit mode only
    std::optional<double> oov_rate;
};

inline double bpc_from_bpb(double bpb) noexcept { return 8.0 * bpb; }

/// Entropy in bits per symbol: nats / (T ln 2).
inline double bits_per_symbol(double nats, std::size_t tokens) noexcept
{
    return tokens == 0 ? 0.0 : nats / (static_cast<double>(tokens) * std::numbers::ln2);
}

inline EvalReport make_report(const LossTotals& acc, bool bit_mode)
{
    EvalReport r;
    r.nats = acc.char_nats;
    r.tokens = acc.chars;
    r.unseen = acc.unseen;
    const double per_symbol = bits_per_symbol(acc.char_nats, acc.chars);
    if (bit_mode) {
        r.bpb = per_symbol;
        r.bpc = bpc_from_bpb(per_symbol);
    } else {
        r.bpc = per_symbol;
    }
    return r;
}

namespace detail {

template <SequenceModel M>
void check_vocabulary(const M& model, const EncodedStream& s)
{
    const std::size_t d = model.alphabet();
    for (CharId c : s.chars)
        if (c > d)
            throw ConfigError("stream uses character id " + std::to_string(c) + " but the model alphabet has " +
                              std::to_string(d) + " symbols");
    if constexpr (std::is_same_v<M, MixedRnn>) {
        if (s.size() > 1 && !s.has_words())
            throw ConfigError("mixed model needs a stream with word alignment");
        for (WordId w : s.words)
            if (w >= model.words())
                throw ConfigError("stream uses word id " + std::to_string(w) + " but the model has " +
                                  std::to_string(model.words()) + " words");
    }
}

} // namespace detail

/// One forward pass from a zero state, no updates.
template <SequenceModel M>
LossTotals evaluate_totals(const M& model, const EncodedStream& s)
{
    detail::check_vocabulary(model, s);
    LossTotals acc;
    if (s.size() < 2)
        return acc;
    auto carry = model.initial_carry();
    model.forward(s, 0, s.size() - 1, carry, nullptr, acc);
    return acc;
}

template <SequenceModel M>
EvalReport evaluate(const M& model, const EncodedStream& s, bool bit_mode = false)
{
    return make_report(evaluate_totals(model, s), bit_mode);
}

inline EvalReport evaluate(const AnyModel& model, const EncodedStream& s, bool bit_mode = false)
{
    return std::visit([&](const auto& m) { return evaluate(m, s, bit_mode); }, model);
}

/**
 * Evaluate contiguous shards in parallel, each from a zero state, and sum the
 * shard totals in shard order. With shards == 1 this equals evaluate() exactly;
 * otherwise each shard boundary drops the carried state.
 */
template <SequenceModel M>
EvalReport evaluate_sharded(const M& model, const EncodedStream& s, std::size_t shards, bool bit_mode = false)
{
    detail::check_vocabulary(model, s);
    if (shards < 1)
        throw ParameterError("shard count must be at least 1");
    if (s.size() < 2)
        return make_report({}, bit_mode);
    const std::size_t inputs = s.size() - 1;
    shards = std::min(shards, inputs);
    std::vector<LossTotals> parts(shards);
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < shards; ++i) {
        const std::size_t b = inputs * i / shards;
        const std::size_t e = inputs * (i + 1) / shards;
        workers.emplace_back([&, i, b, e] {
            auto carry = model.initial_carry();
            model.forward(s, b, e, carry, nullptr, parts[i]);
        });
    }
    for (auto& w : workers)
        w.join();
    LossTotals total;
    for (const auto& p : parts)
        total += p;
    return make_report(total, bit_mode);
}

inline EvalReport evaluate_sharded(const AnyModel& model, const EncodedStream& s, std::size_t shards,
                                   bool bit_mode = false)
{
    return std::visit([&](const auto& m) { return evaluate_sharded(m, s, shards, bit_mode); }, model);
}

} // namespace ccrnn
