#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using pnf::FormalSeries;
using pnf::MultiIndex;
using pnf::PeriodicFn;
using pnf::PoissonStructure;

namespace
{

constexpr std::size_t M = 256;
const double sqrt2 = std::sqrt(2.0);

pnf::ErrorKind kind_of(const std::function<void()> &f)
{
    try {
        f();
    } catch (const pnf::Error &e) {
        return e.kind();
    }
    return pnf::ErrorKind::InvalidArgument;
}

Eigen::MatrixXd skew2(double a12)
{
    Eigen::MatrixXd a(2, 2);
    a << 0, a12, -a12, 0;
    return a;
}

pnf::SpectralData spectral_with(std::vector<double> lambda, PeriodicFn k)
{
    const std::size_t n = lambda.size();
    return {std::move(lambda), std::move(k), pnf::PeriodicMatrix::identity(n, M), std::vector<int>(n, 1), false, 1, 0};
}


// Composite Simpson rule on [0, 2π].
double simpson(const std::function<double(double)> &f, int panels = 20000)
{
    const double h = pnf::two_pi / panels;
    double s = f(0) + f(pnf::two_pi);
    for (int i = 1; i < panels; ++i) {
        s += (i % 2 ? 4 : 2) * f(i * h);
    }
    return s * h / 3;
}

} // namespace

TEST(Normalize, AlreadyNormal)
{
    const auto p = PoissonStructure::normal_form({1, sqrt2}, skew2(3), 4, M);
    const auto nf = pnf::normalize(p);
    EXPECT_TRUE(nf.chain.steps.empty());
    EXPECT_DOUBLE_EQ(nf.mu[0], 1.0);
    EXPECT_DOUBLE_EQ(nf.mu[1], sqrt2);
    EXPECT_DOUBLE_EQ(nf.a(0, 1), 3.0);
    EXPECT_FALSE(nf.covered);
    EXPECT_EQ(nf.monodromy, (std::vector<int>{1, 1}));
}

TEST(Normalize, RoundTrip)
{
    std::mt19937_64 rng(31);
    for (std::size_t n : {2u, 3u}) {
        for (int trial = 0; trial < 4; ++trial) {
            const auto mu = fixtures::random_mu(rng, n);
            const auto a = fixtures::random_skew(rng, n);
            const auto p = PoissonStructure::normal_form(mu, a, 4, M);
            const auto q = pnf::transform(p, fixtures::random_chain(rng, n, 4, M));
            const auto nf = pnf::normalize(q);
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_NEAR(nf.mu[i], mu[i], 1e-8);
            }
            EXPECT_LT((nf.a - a).cwiseAbs().maxCoeff(), 1e-7);
            EXPECT_LT((nf.a + nf.a.transpose()).cwiseAbs().maxCoeff(), 1e-15);
            EXPECT_LT(nf.diagnostics.jacobi_residual, 1e-9);
            EXPECT_LT(nf.diagnostics.theta_deviation, 1e-9);
            EXPECT_LT(nf.diagnostics.pair_deviation, 1e-8);
            // the recorded chain reproduces the reported structure
            EXPECT_LT(pnf::max_abs_difference(pnf::transform(q, nf.chain), nf.structure), 1e-12);
        }
    }
}

TEST(Normalize, MoebiusExampleOnDoubleCover)
{
    const auto nf = pnf::normalize(fixtures::moebius_example(1, sqrt2, 4, M));
    EXPECT_TRUE(nf.covered);
    EXPECT_EQ(nf.monodromy, (std::vector<int>{-1, -1}));
    EXPECT_TRUE(std::holds_alternative<pnf::DoubleCover>(nf.chain.steps.front()));
    EXPECT_LT(nf.diagnostics.jacobi_residual, 1e-9);
    EXPECT_NEAR(nf.mu[1] / nf.mu[0], sqrt2, 1e-8);
    // on the cover θ runs twice as fast: μ = λ/2; eigenframe coordinates commute
    EXPECT_NEAR(nf.mu[0], 0.5, 1e-10);
    EXPECT_NEAR(nf.a(0, 1), 0.0, 1e-10);
}

TEST(Normalize, OrderIndependence)
{
    std::mt19937_64 rng(32);
    const auto mu = fixtures::random_mu(rng, 2);
    const auto a = fixtures::random_skew(rng, 2);
    const auto chain = fixtures::random_chain(rng, 2, 6, M);
    const auto p6 = pnf::transform(PoissonStructure::normal_form(mu, a, 6, M), chain);
    const auto p4 = p6.map_series([](const FormalSeries &s) { return s.with_order(4); });
    const auto n4 = pnf::normalize(p4), n6 = pnf::normalize(p6);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(n4.mu[i], n6.mu[i], 1e-9);
    }
    EXPECT_NEAR(n4.a(0, 1), n6.a(0, 1), 1e-9);
}

TEST(Normalize, NotPoisson)
{
    PoissonStructure p(2, 3, M);
    p.set_theta_bracket(0, FormalSeries::variable(2, 3, M, 0));
    p.set_theta_bracket(1, FormalSeries::variable(2, 3, M, 1) * 1.5);
    p.set_bracket(0, 1, FormalSeries::variable(2, 3, M, 0));
    EXPECT_EQ(kind_of([&] { (void)pnf::normalize(p); }), pnf::ErrorKind::NotPoisson);
}

TEST(Normalize, LinearPairBracketIsStructuralMismatch)
{
    // μ3 = μ1 + μ2 lets {x1,x2} = x3 satisfy Jacobi
    auto p = PoissonStructure::normal_form({1, 2, 3}, Eigen::MatrixXd::Zero(3, 3), 3, M);
    p.set_bracket(0, 1, FormalSeries::variable(3, 3, M, 2));
    EXPECT_LT(pnf::jacobiator(p).norm, 1e-14);
    EXPECT_EQ(kind_of([&] { (void)pnf::normalize(p); }), pnf::ErrorKind::StructuralMismatch);
}

TEST(Normalize, ResonantSpectrum)
{
    const auto p = PoissonStructure::normal_form({1, 2}, Eigen::MatrixXd::Zero(2, 2), 4, M);
    EXPECT_EQ(kind_of([&] { (void)pnf::normalize(p); }), pnf::ErrorKind::ResonantInput);
}

TEST(Normalize, SmallDivisorWarning)
{
    const double eps = 3e-6;
    const auto p = PoissonStructure::normal_form({1, 2 + eps}, Eigen::MatrixXd::Zero(2, 2), 3, M);
    const auto nf = pnf::normalize(p);
    ASSERT_FALSE(nf.warnings.empty());
    EXPECT_EQ(nf.warnings[0].kind, "small_divisor");
    EXPECT_NEAR(nf.warnings[0].value, eps, 1e-12);
}

TEST(Reparametrize, UnitFactor)
{
    const auto p = PoissonStructure::normal_form({1, sqrt2}, Eigen::MatrixXd::Zero(2, 2), 3, M);
    const auto r = pnf::reparametrize(p, spectral_with({1, sqrt2}, PeriodicFn::constant(M, 1.0)));
    EXPECT_TRUE(r.identity);
    EXPECT_EQ(r.mu, (std::vector<double>{1, sqrt2}));
}

TEST(Reparametrize, ConstantFactor)
{
    const auto p = PoissonStructure::normal_form({2.5, 2.5 * sqrt2}, Eigen::MatrixXd::Zero(2, 2), 3, M);
    const auto r = pnf::reparametrize(p, spectral_with({1, sqrt2}, PeriodicFn::constant(M, 2.5)));
    EXPECT_TRUE(r.identity);
    EXPECT_NEAR(r.mu[0], 2.5, 1e-13);
    EXPECT_NEAR(r.mu[1], 2.5 * sqrt2, 1e-13);
}

TEST(Reparametrize, OscillatingFactor)
{
    const auto k = PeriodicFn::from_function(M, [](double t) { return 2 + std::sin(t); });
    PoissonStructure p(2, 3, M);
    p.set_theta_bracket(0, k * FormalSeries::variable(2, 3, M, 0));
    p.set_theta_bracket(1, (k * sqrt2) * FormalSeries::variable(2, 3, M, 1));
    const auto r = pnf::reparametrize(p, spectral_with({1, sqrt2}, k));
    const double integral = simpson([](double t) { return 1 / (2 + std::sin(t)); });
    EXPECT_NEAR(integral, pnf::two_pi / std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(r.mu[0], pnf::two_pi / integral, 1e-10);
    EXPECT_NEAR(r.mu[1], sqrt2 * std::sqrt(3.0), 1e-10);
    // χ is a circle diffeomorphism and the new θ-brackets are constant
    EXPECT_NEAR(r.chi.shift.eval(pnf::two_pi), 0.0, 1e-12);
    for (std::size_t i = 0; i < 2; ++i) {
        MultiIndex e(2, 0);
        e[i] = 1;
        EXPECT_LT((r.structure.theta_bracket(i).coefficient(e) - r.mu[i]).max_abs(), 1e-10);
    }
}

TEST(Reparametrize, VanishingFactor)
{
    const auto k = PeriodicFn::from_function(M, [](double t) { return std::cos(t); });
    const auto p = PoissonStructure::normal_form({1, sqrt2}, Eigen::MatrixXd::Zero(2, 2), 3, M);
    EXPECT_EQ(kind_of([&] { (void)pnf::reparametrize(p, spectral_with({1, sqrt2}, k)); }), pnf::ErrorKind::KVanishes);
}

TEST(Linearize, AlreadyLinear)
{
    const auto p = PoissonStructure::normal_form({1, sqrt2}, skew2(1), 4, M);
    const auto r = pnf::linearize_theta_field(p);
    EXPECT_TRUE(r.identity);
}

TEST(Linearize, SingleHomologicalEquation)
{
    const auto x = FormalSeries::variable(1, 2, M, 0);
    const auto s = PeriodicFn::from_function(M, [](double t) { return std::sin(t); });
    PoissonStructure p(1, 2, M);
    p.set_theta_bracket(0, x + s * (x * x));
    const auto r = pnf::linearize_theta_field(p);
    ASSERT_FALSE(r.identity);
    // divisor 2μ - μ = 1, corrector coefficient -sin θ
    EXPECT_LT((r.phi.components[0].coefficient(MultiIndex{2}) + s).max_abs(), 1e-15);
    EXPECT_LT(pnf::max_abs_difference(r.structure.theta_bracket(0), x), 1e-13);
}

TEST(Linearize, DirectDivision)
{
    const auto x1 = FormalSeries::variable(2, 3, M, 0), x2 = FormalSeries::variable(2, 3, M, 1);
    PoissonStructure p(2, 3, M);
    p.set_theta_bracket(0, x1 + 0.7 * (x2 * x2));
    p.set_theta_bracket(1, sqrt2 * x2);
    const auto r = pnf::linearize_theta_field(p);
    const double coeff = r.phi.components[0].coefficient(MultiIndex{0, 2})[0];
    EXPECT_NEAR(coeff, -0.7 / (2 * sqrt2 - 1), 1e-14);
    EXPECT_LT(pnf::max_abs_difference(r.structure.theta_bracket(0), x1), 1e-13);
    EXPECT_LT(pnf::max_abs_difference(r.structure.theta_bracket(1), sqrt2 * x2), 1e-13);
}

TEST(Linearize, ResonantDivisor)
{
    // λ2 = 2λ1 with a nonzero x1² term in {θ,x2}
    const auto x1 = FormalSeries::variable(2, 3, M, 0), x2 = FormalSeries::variable(2, 3, M, 1);
    PoissonStructure p(2, 3, M);
    p.set_theta_bracket(0, x1);
    p.set_theta_bracket(1, 2.0 * x2 + x1 * x1);
    EXPECT_EQ(kind_of([&] { (void)pnf::linearize_theta_field(p); }), pnf::ErrorKind::ResonantDivisor);
}

TEST(Quadratize, ConstantCoefficient)
{
    const auto p = PoissonStructure::normal_form({1, sqrt2}, skew2(5), 4, M);
    const auto q = pnf::quadratize(p, {1, sqrt2});
    EXPECT_TRUE(q.identity);
    EXPECT_EQ(q.a(0, 1), 5.0);
    EXPECT_EQ(q.a(1, 0), -5.0);
}

TEST(Quadratize, OscillatingCoefficient)
{
    const auto x1 = FormalSeries::variable(2, 4, M, 0), x2 = FormalSeries::variable(2, 4, M, 1);
    const auto k = PeriodicFn::from_function(M, [](double t) { return 3 + std::cos(t); });
    auto p = PoissonStructure::normal_form({1, sqrt2}, Eigen::MatrixXd::Zero(2, 2), 4, M);
    p.set_bracket(0, 1, k * (x1 * x2));
    EXPECT_LT(pnf::jacobiator(p).norm, 1e-13);
    const auto q = pnf::quadratize(p, {1, sqrt2});
    EXPECT_FALSE(q.identity);
    EXPECT_NEAR(q.a(0, 1), 3.0, 1e-13);
    const auto chi2 = PeriodicFn::from_function(M, [](double t) { return std::exp(std::sin(t)); });
    EXPECT_LT((q.phi.matrix.entry(1, 1) - chi2).max_abs(), 1e-12);
    EXPECT_LT(pnf::max_abs_difference(q.structure, PoissonStructure::normal_form({1, sqrt2}, skew2(3), 4, M)), 1e-12);
}

TEST(Quadratize, UnexpectedMonomial)
{
    const auto x1 = FormalSeries::variable(2, 4, M, 0), x2 = FormalSeries::variable(2, 4, M, 1);
    auto p = PoissonStructure::normal_form({1, sqrt2}, Eigen::MatrixXd::Zero(2, 2), 4, M);
    p.set_bracket(0, 1, x1 * x2 + 0.1 * (x2 * x2));
    EXPECT_EQ(kind_of([&] { (void)pnf::quadratize(p, {1, sqrt2}); }), pnf::ErrorKind::UnexpectedMonomial);
}

TEST(Quadratize, NonConstantResidual)
{
    // k_23 varies although k_12 and k_13 are constant: no diagonal rescaling fixes it
    const auto x2 = FormalSeries::variable(3, 4, M, 1), x3 = FormalSeries::variable(3, 4, M, 2);
    auto p = PoissonStructure::normal_form({1, sqrt2, std::sqrt(3.0)}, Eigen::MatrixXd::Zero(3, 3), 4, M);
    p.set_bracket(1, 2, PeriodicFn::from_function(M, [](double t) { return std::cos(t); }) * (x2 * x3));
    EXPECT_EQ(kind_of([&] { (void)pnf::quadratize(p, {1, sqrt2, std::sqrt(3.0)}); }),
              pnf::ErrorKind::NonConstantResidual);
}

TEST(Quadratize, OneDimensional)
{
    const auto p = PoissonStructure::normal_form({0.8}, Eigen::MatrixXd::Zero(1, 1), 4, M);
    const auto q = pnf::quadratize(p, {0.8});
    EXPECT_TRUE(q.identity);
    EXPECT_EQ(q.a.size(), 1);
    EXPECT_EQ(q.a(0, 0), 0.0);
}

TEST(Quadratize, SingleMonomialAfterLinearization)
{
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 3; ++trial) {
        const auto mu = fixtures::random_mu(rng, 3);
        auto p = pnf::transform(PoissonStructure::normal_form(mu, fixtures::random_skew(rng, 3), 4, M),
                                pnf::FiberedDiffeo{fixtures::random_fiberwise(rng, 3, 4, M)});
        const auto lin = pnf::linearize_theta_field(p);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = i + 1; j < 3; ++j) {
                const auto u = lin.structure.bracket(i, j);
                const auto &b = u.basis();
                for (std::size_t idx = b.degree_begin(2); idx < b.degree_begin(3); ++idx) {
                    const auto &e = b.exponent(idx);
                    if (!(e[i] == 1 && e[j] == 1)) {
                        EXPECT_LT(u.term_max_abs(idx), 1e-8);
                    }
                }
            }
        }
    }
}

TEST(Normalize, OneDimensional)
{
    const auto x = FormalSeries::variable(1, 4, M, 0);
    const auto s = PeriodicFn::from_function(M, [](double t) { return 1.3 + 0.4 * std::sin(t); });
    PoissonStructure p(1, 4, M);
    p.set_theta_bracket(0, s * x + (s * 0.2) * (x * x * x));
    const auto nf = pnf::normalize(p);
    // μ = 2π / ∫ dθ / s(θ) = sqrt(1.3² - 0.4²)
    EXPECT_NEAR(nf.mu[0], std::sqrt(1.3 * 1.3 - 0.4 * 0.4), 1e-12);
    EXPECT_LT(nf.diagnostics.theta_deviation, 1e-9);
}

TEST(Normalize, LiteralChiDiagnostic)
{
    const auto k = PeriodicFn::from_function(M, [](double t) { return 1 + 0.5 * std::sin(t); });
    PoissonStructure p(2, 3, M);
    p.set_theta_bracket(0, k * FormalSeries::variable(2, 3, M, 0));
    p.set_theta_bracket(1, (k * sqrt2) * FormalSeries::variable(2, 3, M, 1));
    pnf::NormalizeConfig cfg;
    cfg.literal_chi = true;
    const auto nf = pnf::normalize(p, cfg);
    ASSERT_TRUE(nf.diagnostics.literal_mu.has_value());
    // literal constant 2π/∫k uses the arithmetic mean of k, which is 1 here
    EXPECT_NEAR((*nf.diagnostics.literal_mu)[0], 1.0, 1e-12);
    // literal χ does not close up: χ(2π) = 2π · mean(1/k) / mean(k) = 2π / sqrt(0.75)
    EXPECT_NEAR(*nf.diagnostics.literal_chi_end, pnf::two_pi / std::sqrt(0.75), 1e-10);
    EXPECT_NEAR(nf.mu[0], std::sqrt(0.75), 1e-12);
}
