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

constexpr std::size_t M = 128;

using Bivector = std::function<Eigen::MatrixXd(const Eigen::VectorXd &)>;

// Jacobiator of a bivector field given pointwise, by central differences.
double numeric_jacobiator(const Bivector &pi, const Eigen::VectorXd &z)
{
    const Eigen::Index d = z.size();
    const double h = 1e-5;
    std::vector<Eigen::MatrixXd> dpi;
    for (Eigen::Index l = 0; l < d; ++l) {
        Eigen::VectorXd zp = z, zm = z;
        zp(l) += h;
        zm(l) -= h;
        dpi.push_back((pi(zp) - pi(zm)) / (2 * h));
    }
    const Eigen::MatrixXd p = pi(z);
    double worst = 0;
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
            for (Eigen::Index c = 0; c < d; ++c) {
                double s = 0;
                for (Eigen::Index l = 0; l < d; ++l) {
                    s += p(a, l) * dpi[l](b, c) + p(b, l) * dpi[l](c, a) + p(c, l) * dpi[l](a, b);
                }
                worst = std::max(worst, std::abs(s));
            }
        }
    }
    return worst;
}

Bivector normal_form_bivector(const std::vector<double> &mu, const Eigen::MatrixXd &a)
{
    return [=](const Eigen::VectorXd &z) {
        const Eigen::Index n = static_cast<Eigen::Index>(mu.size());
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n + 1, n + 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(0, i + 1) = mu[static_cast<std::size_t>(i)] * z(i + 1);
            p(i + 1, 0) = -p(0, i + 1);
            for (Eigen::Index j = 0; j < n; ++j) {
                p(i + 1, j + 1) = a(i, j) * z(i + 1) * z(j + 1);
            }
        }
        return p;
    };
}

Bivector moebius_bivector(double l, double m)
{
    return [=](const Eigen::VectorXd &z) {
        const double c = std::cos(z(0) / 2), s = std::sin(z(0) / 2);
        const double x1 = z(1), x2 = z(2);
        const double c2 = l * c * c + m * s * s, s2 = l * s * s + m * c * c, cs = (m - l) * c * s;
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
        p(0, 1) = x1 * c2 + x2 * cs;
        p(0, 2) = x1 * cs + x2 * s2;
        p(1, 2) = x1 * x1 / 2 * c2 + x2 * x2 / 2 * s2 + x1 * x2 * cs;
        p(1, 0) = -p(0, 1);
        p(2, 0) = -p(0, 2);
        p(2, 1) = -p(1, 2);
        return p;
    };
}

} // namespace

TEST(Poisson, SkewStorage)
{
    PoissonStructure p(3, 3, M);
    const auto x1 = FormalSeries::variable(3, 3, M, 0);
    p.set_bracket(2, 0, x1);
    EXPECT_EQ(pnf::max_abs_difference(p.bracket(0, 2), -1.0 * x1), 0.0);
    EXPECT_EQ(p.bracket(1, 1).max_abs(), 0.0);
    try {
        p.set_bracket(1, 1, x1);
        FAIL();
    } catch (const pnf::Error &e) {
        EXPECT_EQ(e.kind(), pnf::ErrorKind::SkewViolation);
    }
}

TEST(Poisson, NormalFormIsPoisson)
{
    Eigen::MatrixXd a(3, 3);
    a << 0, 3, -1.5, -3, 0, 0.7, 1.5, -0.7, 0;
    const std::vector<double> mu{1, std::sqrt(2.0), -0.4};
    const auto p = PoissonStructure::normal_form(mu, a, 4, M);
    EXPECT_LT(pnf::jacobiator(p).norm, 1e-12);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd z(4);
        z << u(rng) + 3, u(rng), u(rng), u(rng);
        EXPECT_LT(numeric_jacobiator(normal_form_bivector(mu, a), z), 1e-8);
        // brackets agree pointwise with the closed form
        const std::vector<double> xs{z(1), z(2), z(3)};
        EXPECT_LT((p.evaluate(z(0), xs) - normal_form_bivector(mu, a)(z)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Poisson, LinearThetaBracketsOnly)
{
    const std::vector<double> mu{0.3, -2, 5};
    const auto p = PoissonStructure::normal_form(mu, Eigen::MatrixXd::Zero(3, 3), 3, M);
    EXPECT_LT(pnf::jacobiator(p).norm, 1e-15);
}

TEST(Poisson, MoebiusExampleIsPoisson)
{
    const auto p = fixtures::moebius_example(1, std::sqrt(2.0), 3, 256);
    EXPECT_LT(pnf::jacobiator(p).norm, 1e-10);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd z(3);
        z << 3 * u(rng), u(rng), u(rng);
        EXPECT_LT(numeric_jacobiator(moebius_bivector(1, std::sqrt(2.0)), z), 1e-8);
        const std::vector<double> xs{z(1), z(2)};
        EXPECT_LT((p.evaluate(z(0), xs) - moebius_bivector(1, std::sqrt(2.0))(z)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Poisson, NonPoissonDetected)
{
    // {θ,x1} = x1, {θ,x2} = x2, {x1,x2} = x1: the (θ,x1,x2) cyclic sum is -x1
    PoissonStructure p(2, 3, M);
    p.set_theta_bracket(0, FormalSeries::variable(2, 3, M, 0));
    p.set_theta_bracket(1, FormalSeries::variable(2, 3, M, 1));
    p.set_bracket(0, 1, FormalSeries::variable(2, 3, M, 0));
    EXPECT_NEAR(pnf::jacobiator(p).norm, 1.0, 1e-14);
}

TEST(Poisson, IdentityTransform)
{
    const auto p = fixtures::moebius_example(1, std::sqrt(2.0), 3, M);
    const pnf::FiberedDiffeo id = pnf::FiberwiseFormal{pnf::detail::coordinate_series(2, 3, M)};
    EXPECT_LT(pnf::max_abs_difference(pnf::transform(p, id), p), 1e-14);
    const pnf::FiberedDiffeo id2 = pnf::LinearFrame{pnf::PeriodicMatrix::identity(2, M)};
    EXPECT_LT(pnf::max_abs_difference(pnf::transform(p, id2), p), 1e-14);
}

TEST(Poisson, ReflectionPreservesNormalForm)
{
    Eigen::MatrixXd a(3, 3);
    a << 0, 3, -1, -3, 0, 2, 1, -2, 0;
    const auto p = PoissonStructure::normal_form({1, std::sqrt(2.0), 0.5}, a, 4, M);
    for (const auto &signs : {std::vector<int>{-1, 1, 1}, std::vector<int>{1, -1, -1}, std::vector<int>{-1, -1, -1}}) {
        EXPECT_EQ(pnf::max_abs_difference(pnf::transform(p, pnf::FiberedDiffeo{pnf::Reflection{signs}}), p), 0.0);
    }
}

TEST(Poisson, PushforwardMatchesJacobianConjugation)
{
    std::mt19937_64 rng(13);
    const std::size_t n = 2, order = 5;
    const auto p = fixtures::moebius_example(1, std::sqrt(2.0), order, M);
    const auto phi = fixtures::random_fiberwise(rng, n, order, M);
    const auto q = pnf::transform(p, pnf::FiberedDiffeo{phi});
    std::uniform_real_distribution<double> ut(0, pnf::two_pi), ux(-0.002, 0.002);
    for (int trial = 0; trial < 5; ++trial) {
        const double t = ut(rng);
        const std::vector<double> xs{ux(rng), ux(rng)};
        auto image = [&](double th, const std::vector<double> &y) {
            Eigen::VectorXd out(3);
            out(0) = th;
            for (std::size_t i = 0; i < n; ++i) {
                out(static_cast<Eigen::Index>(i) + 1) = phi.components[i].evaluate(th, y);
            }
            return out;
        };
        Eigen::MatrixXd jac(3, 3);
        const double h = 1e-6;
        for (int l = 0; l < 3; ++l) {
            double tp = t, tm = t;
            auto yp = xs, ym = xs;
            if (l == 0) {
                tp += h;
                tm -= h;
            } else {
                yp[l - 1] += h;
                ym[l - 1] -= h;
            }
            jac.col(l) = (image(tp, yp) - image(tm, ym)) / (2 * h);
        }
        const Eigen::MatrixXd expect = jac * p.evaluate(t, xs) * jac.transpose();
        const Eigen::VectorXd y = image(t, xs);
        const Eigen::MatrixXd got = q.evaluate(t, std::vector<double>{y(1), y(2)});
        EXPECT_LT((got - expect).cwiseAbs().maxCoeff(), 1e-7 * expect.cwiseAbs().maxCoeff());
    }
}

TEST(Poisson, TransformRoundTrip)
{
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 3; ++trial) {
        const auto mu = fixtures::random_mu(rng, 3);
        const auto p = PoissonStructure::normal_form(mu, fixtures::random_skew(rng, 3), 4, M);
        const pnf::FiberedDiffeo f = fixtures::random_fiberwise(rng, 3, 4, M);
        const pnf::FiberedDiffeo g = fixtures::random_frame(rng, 3, M);
        for (const auto &phi : {f, g}) {
            const auto q = pnf::transform(p, phi);
            EXPECT_LT(pnf::jacobiator(q).norm, 1e-9);
            EXPECT_LT(pnf::max_abs_difference(pnf::transform(q, pnf::inverse(phi)), p), 1e-9);
            for (std::size_t i = 0; i < 3; ++i) {
                EXPECT_EQ(q.bracket(i, i).max_abs(), 0.0);
            }
        }
    }
}

TEST(Poisson, BaseReparamRoundTrip)
{
    std::mt19937_64 rng(15);
    const auto p = fixtures::moebius_example(1, std::sqrt(2.0), 3, 256);
    const pnf::FiberedDiffeo r = fixtures::random_reparam(rng, 256);
    const auto q = pnf::transform(p, r);
    EXPECT_LT(pnf::jacobiator(q).norm, 1e-9);
    EXPECT_LT(pnf::max_abs_difference(pnf::transform(q, pnf::inverse(r)), p), 1e-9);
}

TEST(Poisson, LinearPartOfNormalForm)
{
    const auto lp = pnf::linear_part(PoissonStructure::normal_form({1, 2.5}, Eigen::MatrixXd::Zero(2, 2), 3, M));
    Eigen::MatrixXd d(2, 2);
    d << 1, 0, 0, 2.5;
    EXPECT_EQ(lp.h.max_deviation(d), 0.0);
    EXPECT_TRUE(lp.u_vanishes);
}

TEST(Poisson, LinearPartOfMoebiusExample)
{
    const double l = 1, m = std::sqrt(2.0);
    const auto lp = pnf::linear_part(fixtures::moebius_example(l, m, 3, M));
    for (std::size_t k = 0; k < M; k += 7) {
        const double t = PeriodicFn::node(M, k);
        const double c = std::cos(t / 2), s = std::sin(t / 2);
        Eigen::MatrixXd h(2, 2);
        h << l * c * c + m * s * s, (m - l) * c * s, (m - l) * c * s, l * s * s + m * c * c;
        EXPECT_LT((lp.h.at(k) - h).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_TRUE(lp.u_vanishes);
}

TEST(Poisson, LinearPartFlagsLinearPairBracket)
{
    PoissonStructure p(2, 3, M);
    p.set_bracket(0, 1, FormalSeries::variable(2, 3, M, 0));
    const auto lp = pnf::linear_part(p);
    EXPECT_FALSE(lp.u_vanishes);
    for (std::size_t q = 0; q < lp.u.size(); ++q) {
        const auto &[i, j, k] = lp.u_index[q];
        const double expect = (i == 0 && j == 1 && k == 0) ? 1.0 : 0.0;
        EXPECT_EQ(lp.u[q].max_abs(), expect);
    }
}

TEST(Poisson, ConstantTermsRejected)
{
    PoissonStructure p(1, 2, M);
    p.set_theta_bracket(0, FormalSeries::constant(1, 2, PeriodicFn::constant(M, 0.1)));
    try {
        (void)pnf::linear_part(p);
        FAIL();
    } catch (const pnf::Error &e) {
        EXPECT_EQ(e.kind(), pnf::ErrorKind::NotVanishingOnGamma);
    }
}

TEST(Poisson, GeneralBracketLeibniz)
{
    const auto p = fixtures::moebius_example(1, std::sqrt(2.0), 4, M);
    const auto x1 = FormalSeries::variable(2, 4, M, 0), x2 = FormalSeries::variable(2, 4, M, 1);
    // {x1², x2} = 2 x1 {x1, x2}
    EXPECT_LT(pnf::max_abs_difference(pnf::bracket(p, x1 * x1, x2), 2.0 * (x1 * p.bracket(0, 1))), 1e-14);
    EXPECT_LT(pnf::max_abs_difference(pnf::bracket(p, x1, x2), p.bracket(0, 1)), 1e-15);
}
