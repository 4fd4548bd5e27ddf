#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"

using namespace ccrnn;

TEST(Rng, MatchesReferenceStream)
{
    Rng zero(0);
    EXPECT_EQ(zero.next(), 0x99ec5f36cb75f2b4ULL);
    EXPECT_EQ(zero.next(), 0xbf6e1f784956452aULL);
    EXPECT_EQ(zero.next(), 0x1a5f849d4933e6e0ULL);
    Rng r42(42);
    EXPECT_EQ(r42.next(), 0x15780b2e0c2ec716ULL);
    EXPECT_EQ(r42.next(), 0x6104d9866d113a7eULL);
    EXPECT_EQ(r42.next(), 0xae17533239e499a1ULL);
}

TEST(Rng, DerivedSeedMatchesReference)
{
    EXPECT_EQ(derive_seed(7, SeedStream::init), 0xec779c3693f88501ULL);
    EXPECT_NE(derive_seed(7, SeedStream::init), derive_seed(7, SeedStream::split));
    EXPECT_NE(derive_seed(7, SeedStream::split), derive_seed(7, SeedStream::sample));
}

TEST(Rng, UniformRangesAndStateRoundTrip)
{
    Rng r(9);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.uniform_index(7), 7u);
    }
    Rng copy = Rng::from_state(r.state());
    EXPECT_EQ(copy, r);
    EXPECT_EQ(copy.next(), r.next());
}

TEST(Matvec, Identity)
{
    Matrix m(2, 2, {1, 0, 0, 1});
    EXPECT_EQ(matvec(m, std::span<const double>(Vector{3, -1})), (Vector{3, -1}));
}

TEST(Matvec, RowSum)
{
    Matrix m(1, 3, 1.0);
    EXPECT_EQ(matvec(m, std::span<const double>(Vector{1, 2, 3})), (Vector{6}));
}

TEST(Matvec, HandComputedCase)
{
    Matrix m(2, 2, {1, 2, 3, 4});
    const Vector x{1, 1};
    EXPECT_EQ(matvec(m, std::span<const double>(x)), (Vector{3, 7}));
    EXPECT_EQ(oracle::naive_matvec(m, x), (Vector{3, 7}));
}

TEST(Matvec, ShapeMismatchThrows)
{
    Matrix m(2, 3);
    EXPECT_THROW(matvec(m, std::span<const double>(Vector{1, 2})), ShapeError);
    EXPECT_THROW((Matrix(2, 2, std::vector<double>{1, 2, 3})), ShapeError);
}

TEST(Matvec, AgreesWithNaiveLoopOnRandom64)
{
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m(64, 64);
        fill_uniform(m, rng, -1.0, 1.0);
        Vector x(64);
        for (auto& v : x)
            v = rng.uniform(-1, 1);
        const auto got = matvec(m, std::span<const double>(x));
        const auto want = oracle::naive_matvec(m, x);
        for (std::size_t i = 0; i < 64; ++i)
            ASSERT_LE(std::abs(got[i] - want[i]), 1e-12 * std::max(1.0, std::abs(want[i])));
    }
}

TEST(Matvec, TransposedAddAndOuter)
{
    Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
    Vector out{1, 1, 1};
    matvec_transposed_add(m, std::span<const double>(Vector{1, -1}), std::span<double>(out));
    EXPECT_EQ(out, (Vector{-2, -2, -2}));
    Matrix acc(2, 2);
    add_outer(acc, std::span<const double>(Vector{1, 2}), std::span<const double>(Vector{3, 4}));
    EXPECT_EQ(acc, Matrix(2, 2, {3, 4, 6, 8}));
}

TEST(Sigmoid, ZeroGivesHalf)
{
    EXPECT_EQ(sigmoid(std::span<const double>(Vector{0, 0})), (Vector{0.5, 0.5}));
}

TEST(Sigmoid, SaturatesWithoutOverflow)
{
    const double hi = sigmoid(1000.0);
    EXPECT_TRUE(std::isfinite(hi));
    EXPECT_NEAR(hi, 1.0, 1e-12);
    const double lo = sigmoid(-1000.0);
    EXPECT_TRUE(std::isfinite(lo));
    EXPECT_GE(lo, 0.0);
    EXPECT_GT(sigmoid(-700.0), 0.0);
}

TEST(Sigmoid, SymmetryOnSampledInputs)
{
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-30, 30);
        ASSERT_NEAR(sigmoid(-x), 1.0 - sigmoid(x), 1e-15);
        ASSERT_NEAR(sigmoid(x), oracle::naive_sigmoid(x), 1e-15);
    }
}

TEST(Softmax, UniformInput)
{
    const auto y = softmax(std::span<const double>(Vector{3, 3, 3, 3}));
    for (double v : y)
        EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, ClosedFormLogs)
{
    const Vector x{std::log(1.0), std::log(2.0), std::log(3.0)};
    const auto y = softmax(std::span<const double>(x));
    const auto ref = oracle::naive_softmax(x);
    const Vector exact{1.0 / 6, 2.0 / 6, 3.0 / 6};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(y[i], exact[i], 1e-12);
        EXPECT_NEAR(ref[i], exact[i], 1e-12);
    }
}

TEST(Softmax, ShiftInvariance)
{
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Vector x(7);
        for (auto& v : x)
            v = rng.uniform(-10, 10);
        const double c = rng.uniform(-500, 500);
        Vector shifted = x;
        for (auto& v : shifted)
            v += c;
        const auto a = softmax(std::span<const double>(x));
        const auto b = softmax(std::span<const double>(shifted));
        for (std::size_t i = 0; i < x.size(); ++i)
            ASSERT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(Softmax, NormalizedAndStrictlyPositive)
{
    Rng rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        Vector x(1 + rng.uniform_index(40));
        for (auto& v : x)
            v = rng.uniform(-50, 50);
        const auto y = softmax(std::span<const double>(x));
        ASSERT_NEAR(std::accumulate(y.begin(), y.end(), 0.0), 1.0, 1e-9);
        for (double v : y)
            ASSERT_GT(v, 0.0);
    }
}

TEST(Clip, WithinBoundsUnchanged)
{
    Vector g{0.1, -0.2};
    clip_elementwise(std::span<double>(g), 1.0);
    EXPECT_EQ(g, (Vector{0.1, -0.2}));
}

TEST(Clip, Clamps)
{
    Vector g{50, -50};
    clip_elementwise(std::span<double>(g), 15.0);
    EXPECT_EQ(g, (Vector{15, -15}));
}

TEST(Clip, IdempotentAndSignPreserving)
{
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix g(3, 4);
        fill_uniform(g, rng, -100.0, 100.0);
        const double tau = rng.uniform(0.1, 50);
        Matrix once = g;
        clip_elementwise(once, tau);
        Matrix twice = once;
        clip_elementwise(twice, tau);
        ASSERT_EQ(once, twice);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ASSERT_LE(std::abs(once.flat()[i]), tau);
            if (g.flat()[i] != 0) {
                ASSERT_EQ(std::signbit(g.flat()[i]), std::signbit(once.flat()[i]));
            }
        }
    }
}

TEST(Clip, NonPositiveBoundThrows)
{
    Vector g{1};
    EXPECT_THROW(clip_elementwise(std::span<double>(g), 0.0), ParameterError);
    EXPECT_THROW(clip_elementwise(std::span<double>(g), -1.0), ParameterError);
}

TEST(SampleCategorical, DegenerateDistribution)
{
    Rng rng(1);
    const Vector p{1, 0, 0};
    for (int i = 0; i < 1000; ++i)
        ASSERT_EQ(sample_categorical(p, rng), 0u);
}

TEST(SampleCategorical, LawOfLargeNumbers)
{
    Rng rng(2024);
    const Vector p{0.5, 0.5};
    std::size_t zeros = 0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i)
        zeros += sample_categorical(p, rng) == 0;
    const double freq = double(zeros) / n;
    EXPECT_GE(freq, 0.49);
    EXPECT_LE(freq, 0.51);
}

TEST(SampleCategorical, DeterministicPerSeed)
{
    const Vector p{0.2, 0.3, 0.5};
    Rng a(77), b(77);
    for (int i = 0; i < 500; ++i)
        ASSERT_EQ(sample_categorical(p, a), sample_categorical(p, b));
}

TEST(SampleCategorical, RejectsUnnormalized)
{
    Rng rng(1);
    EXPECT_THROW(sample_categorical(Vector{0.5, 0.4}, rng), ParameterError);
    EXPECT_THROW(sample_categorical(Vector{1.5, -0.5}, rng), ParameterError);
    EXPECT_THROW(sample_categorical(Vector{}, rng), ParameterError);
}

TEST(FillUniform, StaysInRangeAndIsDeterministic)
{
    Rng a(4), b(4);
    Matrix x(10, 10), y(10, 10);
    fill_uniform(x, a, -0.1, 0.1);
    fill_uniform(y, b, -0.1, 0.1);
    EXPECT_EQ(x, y);
    for (double v : x.flat()) {
        EXPECT_GE(v, -0.1);
        EXPECT_LE(v, 0.1);
    }
}
