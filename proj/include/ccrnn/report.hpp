#pragma once

#include <charconv>
#include <string>
#include <vector>

#include "evaluator.hpp"
#include "model_common.hpp"

namespace ccrnn {

/**
 * Fixed-point text of `v` with `decimals` digits, rounding half up on the
 * shortest decimal representation of v. 1.855 is stored as 1.85499999...
 * but its shortest form is "1.855", which rounds to "1.86".
 */
inline std::string round_half_up(double v, int decimals)
{
    char buf[512];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    if (ec != std::errc())
        throw Error("cannot format number");
    std::string s(buf, ptr);
    bool negative = false;
    if (!s.empty() && s[0] == '-') {
        negative = true;
        s.erase(0, 1);
    }
    auto dot = s.find('.');
    if (dot == std::string::npos) {
        dot = s.size();
        s += '.';
    }
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    std::size_t int_len = dot;
    const std::size_t keep = int_len + static_cast<std::size_t>(decimals);
    if (digits.size() < keep + 1)
        digits.append(keep + 1 - digits.size(), '0');
    const bool up = digits[keep] >= '5';
    digits.resize(keep);
    if (up) {
        std::size_t i = keep;
        for (;;) {
            if (i == 0) {
                digits.insert(digits.begin(), '1');
                ++int_len;
                break;
            }
            --i;
            if (digits[i] == '9') {
                digits[i] = '0';
            } else {
                ++digits[i];
                break;
            }
        }
    }
    std::string out = digits.substr(0, int_len);
    if (out.empty())
        out = "0";
    if (decimals > 0)
        out += '.' + digits.substr(int_len);
    if (negative && out.find_first_not_of("0.") != std::string::npos)
        out.insert(out.begin(), '-');
    return out;
}

struct TableRow {
    std::string label;
    std::size_t hidden = 0;
    ModelKind kind = ModelKind::plain;
    EvalReport valid;
    EvalReport test;
    double seconds_per_epoch = 0;
};

/**
 * TSV with columns label, m, model_kind, valid_bpc, test_bpc,
 * seconds_per_epoch; BPC at 2 decimals. When any row carries bits-per-bit
 * values, valid_bpb and test_bpb columns (3 decimals) are appended.
 */
inline std::string report_table(const std::vector<TableRow>& rows)
{
    if (rows.empty())
        throw InputError("report_table needs at least one row");
    bool with_bpb = false;
    for (const auto& r : rows)
        with_bpb = with_bpb || r.valid.bpb.has_value() || r.test.bpb.has_value();
    std::string out = "label\tm\tmodel_kind\tvalid_bpc\ttest_bpc\tseconds_per_epoch";
    if (with_bpb)
        out += "\tvalid_bpb\ttest_bpb";
    out += '\n';
    auto bpb = [](const EvalReport& r) { return r.bpb ? round_half_up(*r.bpb, 3) : std::string("-"); };
    for (const auto& r : rows) {
        out += r.label + '\t' + std::to_string(r.hidden) + '\t' + to_string(r.kind) + '\t' +
               round_half_up(r.valid.bpc, 2) + '\t' + round_half_up(r.test.bpc, 2) + '\t' +
               round_half_up(r.seconds_per_epoch, 2);
        if (with_bpb)
            out += '\t' + bpb(r.valid) + '\t' + bpb(r.test);
        out += '\n';
    }
    return out;
}

inline constexpr std::string_view eval_report_header = "tokens\tnats\tbpc\tbpb\tunseen";

/// One TSV row matching eval_report_header; numbers at full round-trip precision.
inline std::string format_eval_report(const EvalReport& r)
{
    return std::to_string(r.tokens) + '\t' + format_double(r.nats) + '\t' + format_double(r.bpc) + '\t' +
           (r.bpb ? format_double(*r.bpb) : std::string("-")) + '\t' + std::to_string(r.unseen);
}

} // namespace ccrnn
