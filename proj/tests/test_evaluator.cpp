#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace ccrnn;

namespace {

EncodedStream random_chars(std::size_t n, std::size_t d, Rng& rng)
{
    EncodedStream s;
    for (std::size_t i = 0; i < n; ++i)
        s.chars.push_back(static_cast<CharId>(rng.uniform_index(d)));
    return s;
}

} // namespace

TEST(Evaluate, UniformModelGivesLog2D)
{
    Rng rng(1);
    for (std::size_t d : {2u, 3u, 5u, 50u}) {
        auto m = CharRnn::init(4, d, rng);
        m.U.fill(0);
        const auto s = random_chars(500, d, rng);
        const auto r = evaluate(m, s);
        EXPECT_NEAR(r.bpc, std::log2(double(d)), 1e-12);
        EXPECT_EQ(r.tokens, 499u);
        EXPECT_FALSE(r.bpb.has_value());
    }
}

TEST(Evaluate, PureFunction)
{
    Rng rng(2);
    const auto s = random_chars(300, 4, rng);
    const AnyModel m = CondRnn::init(5, 4, NGramIndex::build(s.chars, 2, 3), rng);
    const auto a = evaluate(m, s), b = evaluate(m, s);
    EXPECT_EQ(a.nats, b.nats);
    EXPECT_EQ(a.bpc, b.bpc);
}

TEST(Evaluate, MatchesStepByStepOracle)
{
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = CharRnn::init(6, 5, rng, 1.0);
        const auto s = random_chars(200, 5, rng);
        Vector h(6, 0.0);
        double nats = 0;
        for (std::size_t t = 0; t + 1 < s.size(); ++t) {
            h = oracle::scalar_step(p.A, p.R, s.chars[t], h);
            nats -= std::log(oracle::naive_softmax(oracle::naive_matvec(p.U, h))[s.chars[t + 1]]);
        }
        const auto r = evaluate(p, s);
        ASSERT_NEAR(r.nats, nats, 1e-10 * nats);
        ASSERT_NEAR(r.bpc * double(r.tokens) * std::numbers::ln2, r.nats, 1e-12 * r.nats);
    }
}

TEST(Evaluate, CondMatchesStepByStepOracle)
{
    Rng rng(4);
    const auto s = random_chars(200, 4, rng);
    const auto idx = NGramIndex::build(s.chars, 2, 3);
    const auto set = oracle::brute_retained(s.chars, 2, 3);
    const auto p = CondRnn::init(5, 4, idx, rng, 1.0);
    Vector h(5, 0.0);
    double nats = 0;
    for (std::size_t t = 0; t + 1 < s.size(); ++t) {
        h = oracle::scalar_step(p.A, p.R, s.chars[t], h);
        const std::vector<CharId> history(s.chars.begin(), s.chars.begin() + t + 1);
        const ContextId ctx = idx.longest_match(oracle::brute_longest(set, history, 3));
        nats -= std::log(oracle::naive_softmax(oracle::naive_matvec(p.bank[ctx], h))[s.chars[t + 1]]);
    }
    EXPECT_NEAR(evaluate(p, s).nats, nats, 1e-10 * nats);
}

TEST(Evaluate, UnseenTargetsCountedNotScored)
{
    Rng rng(5);
    const auto p = CharRnn::init(3, 2, rng);
    EncodedStream s;
    s.chars = {0, 1, 2, 0, 2, 1};
    const auto r = evaluate(p, s);
    EXPECT_EQ(r.unseen, 2u);
    EXPECT_EQ(r.tokens, 3u);
}

TEST(Evaluate, VocabularyMismatchIsConfigError)
{
    Rng rng(6);
    const auto p = CharRnn::init(3, 2, rng);
    EncodedStream s;
    s.chars = {0, 1, 5};
    EXPECT_THROW(evaluate(p, s), ConfigError);
    const auto mixed = MixedRnn::init(3, 2, 2, 3, 3, 0.5, rng);
    EncodedStream no_words;
    no_words.chars = {0, 1, 0};
    EXPECT_THROW(evaluate(mixed, no_words), ConfigError);
    EncodedStream big_word = no_words;
    big_word.words = {7};
    big_word.word_of_char = {0, 0, 0};
    EXPECT_THROW(evaluate(mixed, big_word), ConfigError);
}

TEST(Evaluate, BitModeReportsBothUnits)
{
    Rng rng(7);
    const auto s = to_stream(encode_bits("hello, world"));
    auto p = CharRnn::init(4, 2, rng);
    p.U.fill(0);
    const auto r = evaluate(p, s, true);
    ASSERT_TRUE(r.bpb.has_value());
    EXPECT_NEAR(*r.bpb, 1.0, 1e-12);
    EXPECT_EQ(r.bpc, 8 * *r.bpb);
}

TEST(EvaluateSharded, OneShardIsExactManyShardsClose)
{
    Rng rng(8);
    const auto s = random_chars(2000, 4, rng);
    const auto p = CharRnn::init(6, 4, rng, 0.5);
    const auto single = evaluate(p, s);
    const auto one = evaluate_sharded(p, s, 1);
    EXPECT_EQ(one.nats, single.nats);
    EXPECT_EQ(one.tokens, single.tokens);
    const auto four = evaluate_sharded(p, s, 4);
    EXPECT_EQ(four.tokens, single.tokens);
    EXPECT_NEAR(four.bpc, single.bpc, 1e-2);
    EXPECT_EQ(evaluate_sharded(p, s, 4).nats, four.nats);
    EXPECT_THROW(evaluate_sharded(p, s, 0), ParameterError);
}

TEST(BpcFromBpb, RoundedReferenceRows)
{
    // Reference values are rounded: BPB to 3 decimals, BPC to 2. 8 x BPB must
    // fall within the combined rounding interval of the reference BPC.
    const struct {
        double bpb, bpc;
    } rows[] = {{0.287, 2.29}, {0.282, 2.25}, {0.222, 1.78}, {0.216, 1.73}};
    for (const auto& r : rows)
        EXPECT_LE(std::abs(bpc_from_bpb(r.bpb) - r.bpc), 8 * 0.0005 + 0.005) << r.bpb;
    EXPECT_NEAR(bpc_from_bpb(0.287), 2.296, 1e-12);
    EXPECT_NEAR(bpc_from_bpb(0.222), 1.776, 1e-12);
    EXPECT_EQ(round_half_up(bpc_from_bpb(0.222), 2), "1.78");
    EXPECT_EQ(bpc_from_bpb(0), 0.0);
}

TEST(RoundHalfUp, Rules)
{
    EXPECT_EQ(round_half_up(1.855, 2), "1.86");
    EXPECT_EQ(round_half_up(1.845, 2), "1.85");
    EXPECT_EQ(round_half_up(1.844999, 2), "1.84");
    EXPECT_EQ(round_half_up(0.2875, 3), "0.288");
    EXPECT_EQ(round_half_up(9.999, 2), "10.00");
    EXPECT_EQ(round_half_up(2, 2), "2.00");
    EXPECT_EQ(round_half_up(0.001, 2), "0.00");
    EXPECT_EQ(round_half_up(166.4, 0), "166");
}

TEST(ReportTable, LayoutAndOrder)
{
    EvalReport v, t;
    v.bpc = 1.855;
    t.bpc = 1.9;
    const auto one = report_table({{"crnn", 100, ModelKind::plain, v, t, 166.0}});
    EXPECT_EQ(one, "label\tm\tmodel_kind\tvalid_bpc\ttest_bpc\tseconds_per_epoch\n"
                   "crnn\t100\tplain\t1.86\t1.90\t166.00\n");
    const auto two = report_table({{"b", 100, ModelKind::conditional, v, t, 1.0},
                                   {"a", 50, ModelKind::mixed, v, t, 2.0}});
    const auto lines = split_text_lines(two);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[1].substr(0, 2), "b\t");
    EXPECT_EQ(lines[2].substr(0, 2), "a\t");
    EXPECT_THROW(report_table({}), InputError);
}

TEST(ReportTable, BitColumns)
{
    EvalReport v, t;
    v.bpb = 0.2874;
    v.bpc = 8 * *v.bpb;
    t.bpb = 0.2825;
    t.bpc = 8 * *t.bpb;
    const auto table = report_table({{"crnn-bits", 100, ModelKind::plain, v, t, 3.0}});
    EXPECT_EQ(split_text_lines(table)[0],
              "label\tm\tmodel_kind\tvalid_bpc\ttest_bpc\tseconds_per_epoch\tvalid_bpb\ttest_bpb");
    EXPECT_EQ(split_text_lines(table)[1], "crnn-bits\t100\tplain\t2.30\t2.26\t3.00\t0.287\t0.283");
}

TEST(EvalReportRow, FormatsAllFields)
{
    LossTotals acc;
    acc.char_nats = 10;
    acc.chars = 4;
    acc.unseen = 1;
    const auto r = make_report(acc, true);
    const auto row = format_eval_report(r);
    EXPECT_EQ(row.substr(0, 5), "4\t10\t");
    EXPECT_EQ(row.back(), '1');
    EXPECT_EQ(std::string(eval_report_header), "tokens\tnats\tbpc\tbpb\tunseen");
}
