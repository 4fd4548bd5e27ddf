#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace ccrnn;

namespace {

EncodedStream periodic(const std::string& pattern, std::size_t length, CharVocab& cv)
{
    std::string text;
    while (text.size() < length)
        text += pattern;
    text.resize(length);
    cv = build_char_vocab(std::string_view(text));
    return encode_chars(std::string_view(text), cv);
}

TrainConfig small_config(ModelKind kind = ModelKind::plain)
{
    TrainConfig c;
    c.model_kind = kind;
    c.hidden = 8;
    c.word_hidden = 4;
    c.word_out = 50;
    c.theta = 2;
    c.n_max = 3;
    c.max_epochs = 5;
    c.seed = 42;
    return c;
}

std::vector<std::string> without_seconds(const std::vector<EpochLog>& log)
{
    std::vector<std::string> out;
    for (auto e : log) {
        e.seconds = 0;
        out.push_back(format_epoch_log(e));
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST(TrainConfig, DefaultsValidate)
{
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.gamma, 0.1);
    EXPECT_EQ(c.alpha, 1.5);
    EXPECT_EQ(c.tau, 15.0);
    EXPECT_EQ(c.bptt, 32u);
    EXPECT_EQ(c.lambda, 0.5);
    EXPECT_EQ(c.max_decays, 8u);
}

TEST(TrainConfig, RejectsInvalidValues)
{
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), ConfigError);
    };
    bad([](TrainConfig& c) { c.gamma = 0; });
    bad([](TrainConfig& c) { c.alpha = 1; });
    bad([](TrainConfig& c) { c.tau = -1; });
    bad([](TrainConfig& c) { c.bptt = 0; });
    bad([](TrainConfig& c) { c.lambda = 1; });
    bad([](TrainConfig& c) { c.lambda = 0; });
    bad([](TrainConfig& c) { c.hidden = 0; });
    bad([](TrainConfig& c) {
        c.model_kind = ModelKind::mixed;
        c.bits = true;
    });
    bad([](TrainConfig& c) {
        c.model_kind = ModelKind::conditional;
        c.theta = 0;
    });
}

TEST(TrainConfig, KeyValueRoundTrip)
{
    TrainConfig c = small_config(ModelKind::conditional);
    c.gamma = 0.123456789;
    c.lambda = 0.3;
    c.bits = true;
    std::string text = "# experiment\n\n";
    for (const auto& [k, v] : c.to_key_values())
        text += k + " = " + v + "   # note\n";
    TrainConfig back;
    for (const auto& [k, v] : parse_key_values(text))
        back.set(k, v);
    EXPECT_EQ(back, c);
}

TEST(TrainConfig, ParseErrors)
{
    TrainConfig c;
    EXPECT_THROW(c.set("hiden", "3"), ConfigError);
    EXPECT_THROW(c.set("hidden", "3x"), ConfigError);
    EXPECT_THROW(c.set("lr", ""), ConfigError);
    EXPECT_THROW(c.set("model", "lstm"), ConfigError);
    EXPECT_THROW(c.set("bits", "maybe"), ConfigError);
    EXPECT_THROW(parse_key_values("hidden 3\n"), ConfigError);
    EXPECT_THROW(parse_key_values(" = 3\n"), ConfigError);
    const auto kv = parse_key_values("hidden = 3\nhidden = 4\n");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv.back().second, "4");
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

TEST(InitModel, DeterministicBoundedAndSeedSensitive)
{
    const std::vector<CharId> s{0, 1, 2, 0, 1, 2};
    const auto idx = NGramIndex::build(s, 1, 2);
    for (auto kind : {ModelKind::plain, ModelKind::mixed, ModelKind::conditional}) {
        auto c = small_config(kind);
        const auto a = init_model(c, 3, 7, &idx);
        const auto b = init_model(c, 3, 7, &idx);
        EXPECT_EQ(a, b);
        EXPECT_EQ(kind_of(a), kind);
        c.seed = 43;
        const auto other = init_model(c, 3, 7, &idx);
        EXPECT_NE(a, other);
        std::visit(
            [](const auto& m) {
                for (const auto& [name, mat] : m.params())
                    for (double v : mat->flat()) {
                        ASSERT_GE(v, -0.1);
                        ASSERT_LE(v, 0.1);
                    }
            },
            a);
    }
}

TEST(InitModel, SizesAndErrors)
{
    auto c = small_config(ModelKind::mixed);
    c.word_out = 5;
    const auto m = std::get<MixedRnn>(init_model(c, 4, 3));
    EXPECT_EQ(m.words_out(), 3u);
    EXPECT_EQ(m.A.cols(), 5u);
    EXPECT_THROW(init_model(c, 4, 0), ConfigError);
    EXPECT_THROW(init_model(c, 0, 3), ConfigError);
    EXPECT_THROW(init_model(small_config(ModelKind::conditional), 4), ConfigError);
    auto bad = small_config();
    bad.hidden = 0;
    EXPECT_THROW(init_model(bad, 4), ConfigError);
}

// ---------------------------------------------------------------------------
// One epoch
// ---------------------------------------------------------------------------

TEST(TrainEpoch, ZeroLearningRateIsEvaluation)
{
    CharVocab cv;
    const auto s = periodic("abcab", 300, cv);
    for (auto kind : {ModelKind::plain, ModelKind::conditional}) {
        auto c = small_config(kind);
        const auto idx = NGramIndex::build(s.chars, c.theta, c.n_max);
        AnyModel m = init_model(c, cv.size(), 0, &idx);
        const AnyModel before = m;
        const auto stats = train_epoch(m, s, c, 0.0);
        EXPECT_EQ(m, before);
        EXPECT_EQ(stats.train_bpc, evaluate(before, s).bpc);
    }
}

TEST(TrainEpoch, SingleStepMatchesHandRolledOracle)
{
    // plain model, one window, independent scalar-loop BPTT + clip + SGD
    Rng rng(7);
    const std::size_t m = 3, d = 4;
    auto p = CharRnn::init(m, d, rng, 2.0);
    const auto s = oracle::random_stream(6, d, 1, rng);
    TrainConfig c;
    c.bptt = 5;
    c.tau = 0.05;
    const double lr = 0.3;

    const std::size_t n = 5;
    std::vector<Vector> h(n + 1, Vector(m, 0.0)), y(n);
    for (std::size_t t = 0; t < n; ++t) {
        h[t + 1] = oracle::scalar_step(p.A, p.R, s.chars[t], h[t]);
        y[t] = oracle::naive_softmax(oracle::naive_matvec(p.U, h[t + 1]));
    }
    Matrix gA(m, d + 1), gR(m, m), gU(d, m);
    Vector carry(m, 0.0);
    for (std::size_t t = n; t-- > 0;) {
        Vector dz(d);
        for (std::size_t i = 0; i < d; ++i)
            dz[i] = y[t][i] - (i == s.chars[t + 1] ? 1.0 : 0.0);
        Vector dh = carry;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                gU(i, j) += dz[i] * h[t + 1][j];
                dh[j] += p.U(i, j) * dz[i];
            }
        Vector da(m);
        for (std::size_t j = 0; j < m; ++j)
            da[j] = dh[j] * h[t + 1][j] * (1 - h[t + 1][j]);
        for (std::size_t j = 0; j < m; ++j) {
            gA(j, s.chars[t]) += da[j];
            for (std::size_t k = 0; k < m; ++k)
                gR(j, k) += da[j] * h[t][k];
        }
        std::fill(carry.begin(), carry.end(), 0.0);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k)
                carry[k] += p.R(j, k) * da[j];
    }
    auto expect = p;
    auto step = [&](Matrix& w, const Matrix& g) {
        for (std::size_t i = 0; i < w.size(); ++i)
            w.flat()[i] -= lr * std::max(-c.tau, std::min(c.tau, g.flat()[i]));
    };
    step(expect.A, gA);
    step(expect.R, gR);
    step(expect.U, gU);

    train_epoch(p, s, c, lr);
    const auto got = p.params();
    const auto want = expect.params();
    for (std::size_t k = 0; k < got.size(); ++k)
        for (std::size_t i = 0; i < got[k].matrix->size(); ++i)
            ASSERT_NEAR(got[k].matrix->flat()[i], want[k].matrix->flat()[i], 1e-12) << got[k].name << i;
}

TEST(TrainEpoch, UpdatesBoundedByLrTimesClip)
{
    CharVocab cv;
    const auto s = periodic("xyzzy", 200, cv);
    auto c = small_config();
    c.tau = 0.01;
    c.bptt = 200;
    auto m = std::get<CharRnn>(init_model(c, cv.size()));
    const auto before = m;
    const double lr = 0.5;
    train_epoch(m, s, c, lr);
    for (std::size_t k = 0; k < m.params().size(); ++k) {
        const auto& a = *m.params()[k].matrix;
        const auto& b = *before.params()[k].matrix;
        for (std::size_t i = 0; i < a.size(); ++i)
            ASSERT_LE(std::abs(a.flat()[i] - b.flat()[i]), lr * c.tau * (1 + 1e-12));
    }
}

TEST(TrainEpoch, ToyAlternationIsLearned)
{
    CharVocab cv;
    const auto s = periodic("ab", 400, cv);
    auto c = small_config();
    c.hidden = 4;
    AnyModel m = init_model(c, cv.size());
    double bpc = 1e9;
    for (int epoch = 0; epoch < 50 && bpc >= 0.2; ++epoch)
        bpc = train_epoch(m, s, c, c.gamma).train_bpc;
    EXPECT_LT(bpc, 0.2);
}

TEST(TrainEpoch, NanRaisesDivergenceWithStep)
{
    CharVocab cv;
    const auto s = periodic("abc", 100, cv);
    auto c = small_config();
    c.bptt = 10;
    auto m = std::get<CharRnn>(init_model(c, cv.size()));
    m.A(0, 0) = std::nan("");
    try {
        train_epoch(m, s, c, 0.1);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.step(), 0u);
    }
    EncodedStream one;
    one.chars = {0};
    EXPECT_THROW(train_epoch(m, one, c, 0.1), InputError);
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

TEST(LrSchedule, MonotoneImprovementKeepsRate)
{
    TrainConfig c;
    auto st = TrainState::initial(c);
    for (double e : {2.0, 1.8, 1.7}) {
        st = lr_schedule(st, e, c.alpha);
        EXPECT_EQ(st.lr, c.gamma);
    }
    EXPECT_FALSE(st.decay_active);
    EXPECT_EQ(st.best_valid, 1.7);
    EXPECT_EQ(st.epoch, 3u);
}

TEST(LrSchedule, LatchedDecayAfterFirstIncrease)
{
    TrainConfig c;
    const double g = c.gamma, a = c.alpha;
    auto st = TrainState::initial(c);
    st = lr_schedule(st, 2.0, a);
    st = lr_schedule(st, 1.8, a);
    EXPECT_EQ(st.lr, g);
    st = lr_schedule(st, 1.81, a);
    EXPECT_DOUBLE_EQ(st.lr, g / a);
    st = lr_schedule(st, 1.5, a); // improvement does not unlatch
    EXPECT_DOUBLE_EQ(st.lr, g / (a * a));
    st = lr_schedule(st, 1.4, a);
    EXPECT_DOUBLE_EQ(st.lr, g / (a * a * a));
    EXPECT_EQ(st.decays, 3u);
    EXPECT_EQ(st.best_valid, 1.4);
}

TEST(LrSchedule, DefaultValuesOneDecay)
{
    TrainState st;
    st.lr = 0.1;
    st.best_valid = 1.0;
    st = lr_schedule(st, 1.1, 1.5);
    EXPECT_NEAR(st.lr, 0.0666666666666667, 1e-15);
    EXPECT_THROW(lr_schedule(st, 1.0, 1.0), ParameterError);
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

TEST(Fit, ZeroEpochsReturnsInitialModel)
{
    CharVocab cv;
    const auto s = periodic("abcd", 100, cv);
    auto c = small_config();
    c.max_epochs = 0;
    const auto init = init_model(c, cv.size());
    const auto r = fit(c, init, s, s);
    EXPECT_TRUE(r.log.empty());
    EXPECT_EQ(r.best, init);
    EXPECT_EQ(r.best_valid_bpc, evaluate(init, s).bpc);
}

TEST(Fit, BestTrackingAndLrShape)
{
    CharVocab cv;
    const auto train = periodic("abcdabcaabd", 600, cv);
    const auto valid = encode_chars(std::string_view("abcdabcaabdabcdabcaabdabcd"), cv);
    auto c = small_config();
    c.max_epochs = 15;
    c.gamma = 0.5;
    std::vector<EpochLog> seen;
    const auto r = fit(c, init_model(c, cv.size()), train, valid, [&](const EpochLog& e) { seen.push_back(e); });
    ASSERT_FALSE(r.log.empty());
    EXPECT_EQ(seen.size(), r.log.size());
    double best = r.log.front().valid_bpc;
    for (const auto& e : r.log)
        best = std::min(best, e.valid_bpc);
    EXPECT_EQ(r.best_valid_bpc, best);
    EXPECT_LE(r.best_valid_bpc, r.log.front().valid_bpc);
    EXPECT_EQ(evaluate(r.best, valid).bpc, r.best_valid_bpc);
    // lr constant until the first increase, then geometric with ratio 1/alpha
    bool latched = false;
    double best_so_far = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < r.log.size(); ++i) {
        latched = latched || r.log[i - 1].valid_bpc > best_so_far;
        best_so_far = std::min(best_so_far, r.log[i - 1].valid_bpc);
        const double want = latched ? r.log[i - 1].lr / c.alpha : r.log[i - 1].lr;
        ASSERT_DOUBLE_EQ(r.log[i].lr, want);
    }
}

TEST(Fit, StopsAfterMaxDecays)
{
    CharVocab cv;
    const auto train = periodic("abcab", 200, cv);
    const auto valid = encode_chars(std::string_view("cbacbacbaccc"), cv); // unlike training
    auto c = small_config();
    c.max_epochs = 50;
    c.max_decays = 2;
    c.gamma = 1.0;
    const auto r = fit(c, init_model(c, cv.size()), train, valid);
    EXPECT_EQ(r.state.decays, 2u);
    EXPECT_LT(r.log.size(), 50u);
}

TEST(Fit, DeterministicLogPerSeed)
{
    CharVocab cv;
    const auto train = periodic("hello world ", 400, cv);
    const auto valid = encode_chars(std::string_view("world hello hello "), cv);
    for (auto kind : {ModelKind::plain, ModelKind::conditional}) {
        auto c = small_config(kind);
        const auto idx = NGramIndex::build(train.chars, c.theta, c.n_max);
        const auto a = fit(c, init_model(c, cv.size(), 0, &idx), train, valid);
        const auto b = fit(c, init_model(c, cv.size(), 0, &idx), train, valid);
        EXPECT_EQ(without_seconds(a.log), without_seconds(b.log));
        EXPECT_EQ(a.best, b.best);
        EXPECT_EQ(a.state, b.state);
    }
}

TEST(Fit, MixedModelTrains)
{
    const std::string text = "the cat sat on the mat the cat ate the rat ";
    std::string corpus;
    for (int i = 0; i < 10; ++i)
        corpus += text;
    const auto cv = build_char_vocab(std::string_view(corpus));
    const auto wv = build_word_vocab(corpus, 100);
    const auto train = encode_stream(corpus, cv, wv);
    const auto valid = encode_stream(text, cv, wv);
    auto c = small_config(ModelKind::mixed);
    c.max_epochs = 4;
    const auto init = init_model(c, cv.size(), wv.size());
    const auto r = fit(c, init, train, valid);
    EXPECT_LT(r.best_valid_bpc, evaluate(init, valid).bpc);
}

TEST(Fit, DivergenceKeepsLastGoodModel)
{
    CharVocab cv;
    const auto s = periodic("abc", 100, cv);
    auto c = small_config();
    auto m = std::get<CharRnn>(init_model(c, cv.size()));
    m.U(0, 0) = std::numeric_limits<double>::infinity();
    try {
        fit(c, m, s, s);
        FAIL() << "expected divergence";
    } catch (const FitDiverged& e) {
        EXPECT_TRUE(e.partial().log.empty());
        EXPECT_EQ(std::get<CharRnn>(e.partial().best), m);
    }
}
