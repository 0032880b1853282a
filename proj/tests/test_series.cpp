#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using pnf::FormalSeries;
using pnf::MultiIndex;
using pnf::PeriodicFn;

namespace
{

constexpr std::size_t M = 64;

FormalSeries x(std::size_t n, std::size_t order, std::size_t k)
{
    return FormalSeries::variable(n, order, M, k);
}

FormalSeries random_series(std::mt19937_64 &rng, std::size_t n, std::size_t order, std::size_t min_degree = 0)
{
    FormalSeries s(n, order, M);
    for (std::size_t idx = s.basis().degree_begin(min_degree); idx < s.basis().size(); ++idx) {
        s.set(idx, fixtures::random_trig(rng, M, 0.5, 2));
    }
    return s;
}

} // namespace

TEST(MonomialBasis, GradedOrder)
{
    const auto b = pnf::MonomialBasis::get(2, 3);
    ASSERT_EQ(b->size(), 10u);
    EXPECT_EQ(b->exponent(0), (MultiIndex{0, 0}));
    EXPECT_EQ(b->exponent(1), (MultiIndex{1, 0}));
    EXPECT_EQ(b->exponent(2), (MultiIndex{0, 1}));
    EXPECT_EQ(b->exponent(3), (MultiIndex{2, 0}));
    for (std::size_t i = 0; i < b->size(); ++i) {
        EXPECT_EQ(b->index(b->exponent(i)), i);
    }
    EXPECT_EQ(b->index(MultiIndex{4, 0}), pnf::MonomialBasis::npos);
    EXPECT_EQ(b->degree_begin(2), 3u);
    EXPECT_EQ(b->degree_begin(4), b->size());
}

TEST(FormalSeries, ProductOfVariables)
{
    const auto p = x(2, 4, 0) * x(2, 4, 1);
    EXPECT_EQ(p.nonzero_terms().size(), 1u);
    EXPECT_LT((p.coefficient(MultiIndex{1, 1}) - 1.0).max_abs(), 1e-16);
}

TEST(FormalSeries, ProductWithZero)
{
    std::mt19937_64 rng(1);
    const auto a = random_series(rng, 2, 3);
    EXPECT_EQ((a * a.zero_like()).max_abs(), 0.0);
}

TEST(FormalSeries, Binomial)
{
    const auto s = x(2, 2, 0) + x(2, 2, 1);
    const auto sq = s * s;
    const auto expect = x(2, 2, 0) * x(2, 2, 0) + 2.0 * (x(2, 2, 0) * x(2, 2, 1)) + x(2, 2, 1) * x(2, 2, 1);
    EXPECT_EQ(pnf::max_abs_difference(sq, expect), 0.0);
    // cube is truncated away at order 2
    EXPECT_EQ((sq * s).max_abs(), 0.0);
}

TEST(FormalSeries, ShapeMismatch)
{
    try {
        (void)(x(2, 3, 0) + x(3, 3, 0));
        FAIL();
    } catch (const pnf::Error &e) {
        EXPECT_EQ(e.kind(), pnf::ErrorKind::DimensionMismatch);
    }
    EXPECT_THROW((void)(x(2, 3, 0) * x(2, 4, 0)), pnf::Error);
}

TEST(FormalSeries, Derivatives)
{
    const auto x1 = x(2, 4, 0), x2 = x(2, 4, 1);
    EXPECT_EQ(pnf::max_abs_difference((x1 * x1 * x2).derive_x(0), 2.0 * (x1 * x2)), 0.0);
    EXPECT_EQ(x1.derive_x(1).max_abs(), 0.0);
    const auto s = PeriodicFn::from_function(M, [](double t) { return std::sin(t); });
    const auto c = PeriodicFn::from_function(M, [](double t) { return std::cos(t); });
    EXPECT_LT(pnf::max_abs_difference((s * x1).derive_theta(), c * x1), 1e-13);
}

TEST(FormalSeries, TruncationConsistency)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_series(rng, 3, 5), b = random_series(rng, 3, 5);
        const auto full = (a.with_order(8) * b.with_order(8)).with_order(5);
        EXPECT_LT(pnf::max_abs_difference(a * b, full), 1e-13);
    }
}

TEST(FormalSeries, Leibniz)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_series(rng, 2, 5), b = random_series(rng, 2, 5);
        for (std::size_t k = 0; k < 2; ++k) {
            // the product loses top-degree terms, so compare below the order
            const auto lhs = (a * b).derive_x(k).truncated(3);
            const auto rhs = (a.derive_x(k) * b + a * b.derive_x(k)).truncated(3);
            EXPECT_LT(pnf::max_abs_difference(lhs, rhs), 1e-10);
        }
        const auto lhs = (a * b).derive_theta();
        const auto rhs = a.derive_theta() * b + a * b.derive_theta();
        EXPECT_LT(pnf::max_abs_difference(lhs, rhs), 1e-10);
    }
}

TEST(FormalSeries, ComposeLinearFrame)
{
    Eigen::MatrixXd g(2, 2);
    g << 2, 0, 0, 1;
    const pnf::FiberedDiffeo phi = pnf::LinearFrame{pnf::PeriodicMatrix::constant(g, M)};
    EXPECT_EQ(pnf::max_abs_difference(pnf::compose(x(2, 3, 0), phi), 2.0 * x(2, 3, 0)), 0.0);
}

TEST(FormalSeries, ComposeReflection)
{
    const pnf::FiberedDiffeo phi = pnf::Reflection{{-1, 1}};
    const auto m = x(2, 3, 0) * x(2, 3, 1);
    EXPECT_EQ(pnf::max_abs_difference(pnf::compose(m, phi), -1.0 * m), 0.0);
}

TEST(FormalSeries, ComposeWithIdentity)
{
    std::mt19937_64 rng(4);
    const auto a = random_series(rng, 2, 4);
    const pnf::FiberedDiffeo id = pnf::FiberwiseFormal{pnf::detail::coordinate_series(2, 4, M)};
    EXPECT_LT(pnf::max_abs_difference(pnf::compose(a, id), a), 1e-15);
}

TEST(FormalSeries, FiberwiseInverseRoundTrip)
{
    const std::size_t n = 2, order = 5;
    const auto x1 = x(n, order, 0), x2 = x(n, order, 1);
    const pnf::FiberedDiffeo phi = pnf::FiberwiseFormal{{x1 + x2 * x2, x2}};
    const pnf::FiberedDiffeo inv = pnf::inverse(phi);
    // x1 ∘ Φ ∘ Φ⁻¹
    const auto back = pnf::compose(pnf::compose(x1, phi), inv);
    EXPECT_LT(pnf::max_abs_difference(back, x1), 1e-10);
    // reversion oracle: the inverse of (x1 + x2², x2) is (y1 - y2², y2)
    const auto &comps = std::get<pnf::FiberwiseFormal>(inv).components;
    EXPECT_LT(pnf::max_abs_difference(comps[0], x1 - x2 * x2), 1e-14);
}

TEST(FormalSeries, RandomInverseRoundTrip)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        const pnf::FiberedDiffeo phi = fixtures::random_fiberwise(rng, 3, 4, M);
        const pnf::FiberedDiffeo inv = pnf::inverse(phi);
        for (std::size_t k = 0; k < 3; ++k) {
            const auto xk = x(3, 4, k);
            EXPECT_LT(pnf::max_abs_difference(pnf::compose(pnf::compose(xk, phi), inv), xk), 1e-10);
            EXPECT_LT(pnf::max_abs_difference(pnf::compose(pnf::compose(xk, inv), phi), xk), 1e-10);
        }
    }
}

TEST(FormalSeries, ChainRuleAgainstFiniteDifferences)
{
    std::mt19937_64 rng(6);
    const std::size_t n = 2, order = 4;
    const auto a = random_series(rng, n, order, 1);
    const auto phi = fixtures::random_fiberwise(rng, n, order, M);
    const auto composed = pnf::compose(a, pnf::FiberedDiffeo{phi});
    std::uniform_real_distribution<double> ut(0, pnf::two_pi), ux(-0.005, 0.005);
    for (int trial = 0; trial < 10; ++trial) {
        const double t = ut(rng);
        std::vector<double> pt{ux(rng), ux(rng)};
        for (std::size_t k = 0; k < n; ++k) {
            // d/dx_k of a(θ, Φ(θ, x)) by central differences on the exact composition
            auto eval_exact = [&](std::vector<double> y) {
                std::vector<double> img(n);
                for (std::size_t i = 0; i < n; ++i) {
                    img[i] = phi.components[i].evaluate(t, y);
                }
                return a.evaluate(t, img);
            };
            const double h = 1e-5;
            auto plus = pt, minus = pt;
            plus[k] += h;
            minus[k] -= h;
            const double fd = (eval_exact(plus) - eval_exact(minus)) / (2 * h);
            const double series = composed.derive_x(k).evaluate(t, pt);
            EXPECT_LT(std::abs(fd - series), 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}
