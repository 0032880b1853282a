#ifndef PNF_TESTS_FIXTURES_HPP
#define PNF_TESTS_FIXTURES_HPP

// Shared builders for unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include <pnf/pnf.hpp>

namespace fixtures
{

/// Möbius example on S¹×R²: eigenlines of H_θ rotate by half a turn around the circle.
inline pnf::PoissonStructure moebius_example(double lambda, double mu, std::size_t order, std::size_t grid)
{
    using pnf::FormalSeries;
    using pnf::PeriodicFn;
    const auto c2 = PeriodicFn::from_function(grid, [&](double t) {
        return lambda * std::cos(t / 2) * std::cos(t / 2) + mu * std::sin(t / 2) * std::sin(t / 2);
    });
    const auto s2 = PeriodicFn::from_function(grid, [&](double t) {
        return lambda * std::sin(t / 2) * std::sin(t / 2) + mu * std::cos(t / 2) * std::cos(t / 2);
    });
    const auto cs = PeriodicFn::from_function(grid, [&](double t) {
        return (mu - lambda) * std::cos(t / 2) * std::sin(t / 2);
    });
    const auto x1 = FormalSeries::variable(2, order, grid, 0);
    const auto x2 = FormalSeries::variable(2, order, grid, 1);
    pnf::PoissonStructure p(2, order, grid);
    p.set_theta_bracket(0, c2 * x1 + cs * x2);
    p.set_theta_bracket(1, cs * x1 + s2 * x2);
    p.set_bracket(0, 1, (c2 * 0.5) * (x1 * x1) + (s2 * 0.5) * (x2 * x2) + cs * (x1 * x2));
    return p;
}

/// Random trigonometric polynomial of degree `harmonics` with every coefficient in [-amp, amp].
inline pnf::PeriodicFn random_trig(std::mt19937_64 &rng, std::size_t grid, double amp, int harmonics = 2)
{
    std::uniform_real_distribution<double> u(-amp, amp);
    std::vector<double> c(static_cast<std::size_t>(2 * harmonics + 1));
    for (double &v : c) {
        v = u(rng);
    }
    return pnf::PeriodicFn::from_fourier(grid, c);
}

/// Non-resonant μ: ±q_i √p_i with distinct primes, rejected until the smallest divisor up to
/// `bound` exceeds `min_gap`.
inline std::vector<double> random_mu(std::mt19937_64 &rng, std::size_t n, std::size_t bound = 6,
                                     double min_gap = 1e-3)
{
    static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    std::uniform_int_distribution<int> q(1, 5);
    std::bernoulli_distribution neg(0.3);
    for (;;) {
        std::vector<double> mu(n);
        std::vector<std::size_t> pick(std::size(primes));
        for (std::size_t i = 0; i < pick.size(); ++i) {
            pick[i] = i;
        }
        std::shuffle(pick.begin(), pick.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            mu[i] = 0.5 * q(rng) * std::sqrt(primes[pick[i]]) * (neg(rng) ? -1.0 : 1.0);
        }
        double sum = 0;
        for (double m : mu) {
            sum += m;
        }
        if (std::abs(sum) < 0.2) {
            continue;
        }
        const auto r = pnf::check_nonresonance(mu, bound, 1e-12);
        if (r.ok && r.min_gap > min_gap) {
            return mu;
        }
    }
}

inline Eigen::MatrixXd random_skew(std::mt19937_64 &rng, std::size_t n, double amp = 5.0)
{
    std::uniform_real_distribution<double> u(-amp, amp);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
            a(i, j) = u(rng);
            a(j, i) = -a(i, j);
        }
    }
    return a;
}

/// x_i ↦ x_i + Σ_{2≤|p|≤N} c_p(θ) x^p with |c_p| ≤ amp.
inline pnf::FiberwiseFormal random_fiberwise(std::mt19937_64 &rng, std::size_t n, std::size_t order,
                                             std::size_t grid, double amp = 0.3)
{
    pnf::FiberwiseFormal f{pnf::detail::coordinate_series(n, order, grid)};
    const auto &basis = f.components[0].basis();
    for (auto &c : f.components) {
        for (std::size_t idx = basis.degree_begin(2); idx < basis.size(); ++idx) {
            c.set(idx, random_trig(rng, grid, amp / 5, 2));
        }
    }
    return f;
}

/// x ↦ G(θ) x with G = I + small periodic perturbation.
inline pnf::LinearFrame random_frame(std::mt19937_64 &rng, std::size_t n, std::size_t grid, double amp = 0.3)
{
    pnf::PeriodicMatrix g = pnf::PeriodicMatrix::identity(n, grid);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            g.set(i, j, g.entry(i, j) + random_trig(rng, grid, amp / (2.0 * static_cast<double>(n)), 1));
        }
    }
    return pnf::LinearFrame{g};
}

inline pnf::BaseReparam random_reparam(std::mt19937_64 &rng, std::size_t grid, double amp = 0.3)
{
    std::uniform_real_distribution<double> u(-amp / 2, amp / 2);
    const double a = u(rng), b = u(rng);
    return pnf::BaseReparam{pnf::PeriodicFn::from_function(grid, [&](double t) {
        return a * std::sin(t) + b * (1 - std::cos(t));
    })};
}

/// Frame, base reparametrization and higher-order fiberwise terms, in that order.
inline pnf::DiffeoChain random_chain(std::mt19937_64 &rng, std::size_t n, std::size_t order, std::size_t grid,
                                     double amp = 0.3)
{
    pnf::DiffeoChain c;
    c.steps.emplace_back(random_frame(rng, n, grid, amp));
    c.steps.emplace_back(random_reparam(rng, grid, amp));
    c.steps.emplace_back(random_fiberwise(rng, n, order, grid, amp));
    return c;
}

} // namespace fixtures

#endif
