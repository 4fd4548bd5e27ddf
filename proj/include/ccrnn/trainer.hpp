#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "evaluator.hpp"
#include "model.hpp"

namespace ccrnn {

/// Mutable optimizer state carried across epochs.
struct TrainState {
    std::size_t epoch = 0;
    double lr = 0.1;
    double best_valid = std::numeric_limits<double>::infinity();
    bool decay_active = false;
    std::size_t decays = 0;
    Rng::State rng{};

    static TrainState initial(const TrainConfig& c)
    {
        TrainState s;
        s.lr = c.gamma;
        s.rng = Rng(derive_seed(c.seed, SeedStream::init)).state();
        return s;
    }

    friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct EpochStats {
    double train_bpc = 0; // bits per modeled symbol
    double seconds = 0;
    LossTotals totals;
};

/**
 * One sequential pass of truncated BPTT + SGD. The stream is cut into windows
 * of config.bptt inputs; the hidden state flows across windows but gradients
 * stop at window boundaries. Per window: forward with trace, backward,
 * per-entry clip to config.tau, then p -= lr * grad.
 */
template <SequenceModel M>
EpochStats train_epoch(M& model, const EncodedStream& train, const TrainConfig& config, double lr)
{
    if (train.size() < 2)
        throw InputError("training stream needs at least two symbols");
    detail::check_vocabulary(model, train);
    const auto start = std::chrono::steady_clock::now();
    typename M::Trace trace;
    auto grads = model.make_gradients();
    auto carry = model.initial_carry();
    LossTotals acc;
    const std::size_t inputs = train.size() - 1;
    for (std::size_t begin = 0; begin < inputs; begin += config.bptt) {
        const std::size_t end = std::min(begin + config.bptt, inputs);
        model.forward(train, begin, end, carry, &trace, acc);
        if (std::isnan(acc.char_nats) || std::isnan(acc.word_nats))
            throw DivergenceError(begin, "training loss became NaN in the window starting at step " +
                                             std::to_string(begin));
        grads.zero();
        model.backward(trace, grads);
        grads.clip(config.tau);
        model.apply(grads, lr);
    }
    EpochStats out;
    out.totals = acc;
    out.train_bpc = bits_per_symbol(acc.char_nats, acc.chars);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

inline EpochStats train_epoch(AnyModel& model, const EncodedStream& train, const TrainConfig& config, double lr)
{
    return std::visit([&](auto& m) { return train_epoch(m, train, config, lr); }, model);
}

/**
 * Validation-driven schedule: the learning rate stays constant until the
 * validation entropy exceeds the best seen so far; from then on it is divided
 * by alpha after every epoch.
 */
inline TrainState lr_schedule(TrainState state, double valid_entropy, double alpha)
{
    if (!(alpha > 1))
        throw ParameterError("learning-rate decay factor must be greater than 1");
    if (valid_entropy > state.best_valid)
        state.decay_active = true;
    if (state.decay_active) {
        state.lr /= alpha;
        ++state.decays;
    }
    state.best_valid = std::min(state.best_valid, valid_entropy);
    ++state.epoch;
    return state;
}

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0;
    double train_bpc = 0;
    double valid_bpc = 0;
    double seconds = 0;
};

inline constexpr std::string_view epoch_log_header = "epoch\tlr\ttrain_bpc\tvalid_bpc\tseconds";

inline std::string format_epoch_log(const EpochLog& e)
{
    return std::to_string(e.epoch) + '\t' + format_double(e.lr) + '\t' + format_double(e.train_bpc) + '\t' +
           format_double(e.valid_bpc) + '\t' + format_double(e.seconds);
}

struct FitResult {
    AnyModel best;
    TrainState state;
    std::vector<EpochLog> log;
    double best_valid_bpc = 0; // bits per modeled symbol
};

/// Thrown by fit() when an epoch diverges; carries the best model so far.
class FitDiverged : public DivergenceError {
public:
    FitDiverged(const DivergenceError& e, FitResult partial)
        : DivergenceError(e.step(), e.what()), partial_(std::move(partial)) {}

    const FitResult& partial() const noexcept { return partial_; }

private:
    FitResult partial_;
};

/**
 * Train until max_epochs or until the learning rate has been decayed
 * max_decays times, evaluating the validation stream after every epoch.
 * Returns the parameters with the lowest validation entropy.
 */
inline FitResult fit(const TrainConfig& config, AnyModel model, const EncodedStream& train,
                     const EncodedStream& valid, const std::function<void(const EpochLog&)>& on_epoch = {})
{
    config.validate();
    FitResult result{model, TrainState::initial(config), {}, 0};
    result.best_valid_bpc = evaluate(model, valid).bpc;
    bool have_best = false;
    while (result.state.epoch < config.max_epochs) {
        const double lr = result.state.lr;
        EpochStats stats;
        try {
            stats = train_epoch(model, train, config, lr);
        } catch (const DivergenceError& e) {
            throw FitDiverged(e, result);
        }
        const LossTotals vt = std::visit([&](const auto& m) { return evaluate_totals(m, valid); }, model);
        const double valid_entropy = bits_per_symbol(vt.char_nats, vt.chars);
        EpochLog row{result.state.epoch + 1, lr, stats.train_bpc, valid_entropy, stats.seconds};
        result.log.push_back(row);
        if (on_epoch)
            on_epoch(row);
        if (!have_best || valid_entropy < result.best_valid_bpc) {
            result.best = model;
            result.best_valid_bpc = valid_entropy;
            have_best = true;
        }
        result.state = lr_schedule(result.state, valid_entropy, config.alpha);
        if (result.state.decays >= config.max_decays)
            break;
    }
    return result;
}

} // namespace ccrnn
