#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "model_common.hpp"

namespace ccrnn {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw Error("cannot format number");
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, std::string_view key = "value")
{
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("'" + std::string(key) + "': not a number: '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view key = "value")
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("'" + std::string(key) + "': not a non-negative integer: '" + std::string(s) + "'");
    return v;
}

inline bool parse_bool(std::string_view s, std::string_view key = "value")
{
    if (s == "true" || s == "1" || s == "yes")
        return true;
    if (s == "false" || s == "0" || s == "no")
        return false;
    throw ConfigError("'" + std::string(key) + "': not a boolean: '" + std::string(s) + "'");
}

/// Hyperparameters of one training run.
struct TrainConfig {
    ModelKind model_kind = ModelKind::plain;
    std::size_t hidden = 100;
    std::size_t word_hidden = 200;
    std::size_t word_topk = 10000;
    std::size_t word_out = 5000; // restricted output vocabulary, including <UNK>
    double lambda = 0.5;
    std::uint64_t theta = 1000; // n-gram count cutoff
    std::size_t n_max = 8;      // n-gram maximum order
    bool bits = false;
    double gamma = 0.1; // initial learning rate
    double alpha = 1.5; // learning-rate divisor once validation stops improving
    double tau = 15.0;  // per-entry gradient clip
    std::size_t bptt = 32;
    std::size_t max_epochs = 50;
    std::size_t max_decays = 8;
    std::uint64_t seed = 1;

    void validate() const
    {
        auto fail = [](const std::string& m) { throw ConfigError(m); };
        if (!(gamma > 0)) fail("learning rate must be positive");
        if (!(alpha > 1)) fail("learning-rate decay factor must be greater than 1");
        if (!(tau > 0)) fail("clip bound must be positive");
        if (bptt < 1) fail("BPTT window must be at least 1");
        if (!(lambda > 0 && lambda < 1)) fail("lambda must lie in (0, 1)");
        if (hidden < 1) fail("hidden size must be at least 1");
        if (model_kind == ModelKind::mixed) {
            if (word_hidden < 1) fail("word hidden size must be at least 1");
            if (word_topk < 1) fail("word vocabulary size must be at least 1");
            if (word_out < 1) fail("restricted word vocabulary must hold at least <UNK>");
            if (bits) fail("the mixed model has no bit mode");
        }
        if (model_kind == ModelKind::conditional) {
            if (theta < 1) fail("n-gram cutoff must be at least 1");
            if (n_max < 1) fail("n-gram order must be at least 1");
        }
    }

    std::vector<std::pair<std::string, std::string>> to_key_values() const
    {
        return {
            {"model", to_string(model_kind)},
            {"hidden", std::to_string(hidden)},
            {"word-hidden", std::to_string(word_hidden)},
            {"word-topk", std::to_string(word_topk)},
            {"word-out", std::to_string(word_out)},
            {"lambda", format_double(lambda)},
            {"ngram-cutoff", std::to_string(theta)},
            {"ngram-max", std::to_string(n_max)},
            {"bits", bits ? "true" : "false"},
            {"lr", format_double(gamma)},
            {"lr-decay", format_double(alpha)},
            {"clip", format_double(tau)},
            {"bptt", std::to_string(bptt)},
            {"max-epochs", std::to_string(max_epochs)},
            {"max-decays", std::to_string(max_decays)},
            {"seed", std::to_string(seed)},
        };
    }

    /// Apply one key; unknown keys are a ConfigError.
    void set(std::string_view key, std::string_view value)
    {
        if (key == "model") model_kind = parse_model_kind(value);
        else if (key == "hidden") hidden = parse_uint(value, key);
        else if (key == "word-hidden") word_hidden = parse_uint(value, key);
        else if (key == "word-topk") word_topk = parse_uint(value, key);
        else if (key == "word-out") word_out = parse_uint(value, key);
        else if (key == "lambda") lambda = parse_double(value, key);
        else if (key == "ngram-cutoff") theta = parse_uint(value, key);
        else if (key == "ngram-max") n_max = parse_uint(value, key);
        else if (key == "bits") bits = parse_bool(value, key);
        else if (key == "lr") gamma = parse_double(value, key);
        else if (key == "lr-decay") alpha = parse_double(value, key);
        else if (key == "clip") tau = parse_double(value, key);
        else if (key == "bptt") bptt = parse_uint(value, key);
        else if (key == "max-epochs") max_epochs = parse_uint(value, key);
        else if (key == "max-decays") max_decays = parse_uint(value, key);
        else if (key == "seed") seed = parse_uint(value, key);
        else throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Flat `key = value` lines; `#` starts a comment. Later duplicates win.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t lineno = 0;
    for (const auto& raw : split_text_lines(text)) {
        ++lineno;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::string(key), std::string(value));
    }
    return out;
}

} // namespace ccrnn
