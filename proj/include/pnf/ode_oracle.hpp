#ifndef PNF_ODE_ORACLE_HPP
#define PNF_ODE_ORACLE_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <pnf/error.hpp>
#include <pnf/foliation.hpp>
#include <pnf/poisson.hpp>

namespace pnf
{

// Numeric cross-checks by direct integration of vector fields built from a bivector.

/// Pointwise evaluation of a series at many (θ, x); spectra are computed once.
class SeriesEvaluator
{
public:
    explicit SeriesEvaluator(const FormalSeries &s) : m_grid(s.grid())
    {
        for (std::size_t idx : s.nonzero_terms()) {
            m_terms.push_back({s.basis().exponent(idx), s.coefficient(idx).spectrum()});
        }
    }

    double operator()(double theta, std::span<const double> x) const
    {
        double acc = 0;
        for (const auto &t : m_terms) {
            double mono = 1;
            for (std::size_t k = 0; k < t.exponent.size(); ++k) {
                for (unsigned e = 0; e < t.exponent[k]; ++e) {
                    mono *= x[k];
                }
            }
            if (mono != 0) {
                acc += PeriodicFn::eval_spectrum(t.spectrum, m_grid, theta) * mono;
            }
        }
        return acc;
    }

private:
    struct Term {
        MultiIndex exponent;
        std::vector<std::complex<double>> spectrum;
    };
    std::size_t m_grid;
    std::vector<Term> m_terms;
};

/// Π^{ab}(θ, x) as an (n+1)×(n+1) skew matrix, index 0 = θ.
class BivectorEvaluator
{
public:
    explicit BivectorEvaluator(const PoissonStructure &p) : m_n(p.n())
    {
        for (std::size_t a = 0; a <= m_n; ++a) {
            for (std::size_t b = a + 1; b <= m_n; ++b) {
                m_entries.emplace_back(p.entry(a, b));
            }
        }
    }

    std::size_t n() const noexcept
    {
        return m_n;
    }

    Eigen::MatrixXd operator()(double theta, std::span<const double> x) const
    {
        const auto d = static_cast<Eigen::Index>(m_n + 1);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        std::size_t k = 0;
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = a + 1; b < d; ++b) {
                m(a, b) = m_entries[k++](theta, x);
                m(b, a) = -m(a, b);
            }
        }
        return m;
    }

private:
    std::size_t m_n;
    std::vector<SeriesEvaluator> m_entries;
};

struct OdeConfig {
    double rel_tol = 1e-12;
    double abs_tol = 1e-12;
    double max_time = 1e4;
    std::size_t max_steps = 2'000'000;
};

namespace detail
{

using OdeState = std::vector<double>;
using OdeRhs = std::function<void(const OdeState &, OdeState &, double)>;

/// Integrates until component 0 reaches ±target; returns the crossing time and state.
inline std::pair<double, OdeState> integrate_until_theta(const OdeRhs &rhs, OdeState y0, double target,
                                                         const OdeConfig &cfg)
{
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_dense_output(cfg.abs_tol, cfg.rel_tol, ode::runge_kutta_dopri5<OdeState>());
    for (const double v : y0) {
        if (!std::isfinite(v)) {
            raise(ErrorKind::IntegrationFailure, "non-finite initial state");
        }
    }
    try {
        stepper.initialize(y0, 0.0, 1e-3);
        std::size_t steps = 0;
        for (;;) {
            if (++steps > cfg.max_steps || stepper.current_time() > cfg.max_time) {
                raise(ErrorKind::IntegrationFailure, "no return to the starting fibre within the step budget");
            }
            const auto [t0, t1] = stepper.do_step(rhs);
            const double th = stepper.current_state()[0];
            if (!std::isfinite(th)) {
                raise(ErrorKind::IntegrationFailure, "trajectory blew up");
            }
            if (std::abs(th - y0[0]) >= target) {
                // bisection on the dense output
                const double sign = th > y0[0] ? 1.0 : -1.0;
                double lo = t0, hi = t1;
                OdeState mid(y0.size());
                for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                    const double m = 0.5 * (lo + hi);
                    stepper.calc_state(m, mid);
                    if (sign * (mid[0] - y0[0]) >= target) {
                        hi = m;
                    } else {
                        lo = m;
                    }
                }
                stepper.calc_state(hi, mid);
                return {hi, mid};
            }
        }
    } catch (const Error &) {
        throw;
    } catch (const std::exception &e) {
        raise(ErrorKind::IntegrationFailure, e.what());
    }
}

} // namespace detail

/// First return time of the modular flow started at (θ, x) = (0, 0).
inline double modular_return_time(const PoissonStructure &p, const OdeConfig &cfg = {})
{
    std::vector<SeriesEvaluator> field;
    for (const auto &c : modular_field(p)) {
        field.emplace_back(c);
    }
    const std::size_t n = p.n();
    detail::OdeRhs rhs = [&](const detail::OdeState &y, detail::OdeState &dy, double) {
        const std::span<const double> x(y.data() + 1, n);
        for (std::size_t a = 0; a <= n; ++a) {
            dy[a] = field[a](y[0], x);
        }
    };
    const auto [t, y] = detail::integrate_until_theta(rhs, detail::OdeState(n + 1, 0.0), two_pi, cfg);
    (void)y;
    return t;
}

struct HolonomyContinuation {
    Eigen::VectorXd endpoint;   // x after θ has advanced by 2π
    Eigen::VectorXd predicted;  // x0 · exp(holonomy translation)
    double relative_error = 0;  // max_i |endpoint_i / predicted_i - 1|
    double flow_time = 0;
};

/// Follows the Hamiltonian flow of f = Σ c_i ln x_i with c = -μ/|μ|², which moves θ at unit
/// speed and stays in one leaf, once around Γ, starting at (0, x0).
inline HolonomyContinuation holonomy_continuation(const PoissonStructure &p, const FoliationReport &rep,
                                                  const std::vector<double> &x0, const OdeConfig &cfg = {})
{
    if (rep.holonomy_case != HolonomyCase::Case1 || !rep.holonomy_translation) {
        raise(ErrorKind::InvalidArgument, "holonomy continuation needs a Case 1 report");
    }
    (void)leaf_through(x0, rep); // validates x0
    const std::size_t n = p.n();
    const Eigen::Map<const Eigen::VectorXd> mu(rep.mu.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd c = -mu / mu.squaredNorm();
    const BivectorEvaluator pi(p);
    detail::OdeRhs rhs = [&](const detail::OdeState &y, detail::OdeState &dy, double) {
        const std::span<const double> x(y.data() + 1, n);
        const Eigen::MatrixXd m = pi(y[0], x);
        // X_f^b = Σ_a Π^{ab} ∂_a f
        for (Eigen::Index b = 0; b <= static_cast<Eigen::Index>(n); ++b) {
            double acc = 0;
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
                acc += m(i + 1, b) * c(i) / y[static_cast<std::size_t>(i + 1)];
            }
            dy[static_cast<std::size_t>(b)] = acc;
        }
    };
    detail::OdeState y0(n + 1, 0.0);
    std::copy(x0.begin(), x0.end(), y0.begin() + 1);
    const auto [t, y] = detail::integrate_until_theta(rhs, y0, two_pi, cfg);
    HolonomyContinuation out;
    out.flow_time = t;
    out.endpoint = Eigen::Map<const Eigen::VectorXd>(y.data() + 1, static_cast<Eigen::Index>(n));
    out.predicted = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(n)).array()
                    * rep.holonomy_translation->array().exp();
    out.relative_error = (out.endpoint.array() / out.predicted.array() - 1).abs().maxCoeff();
    return out;
}

/// Relative component of the leaf tangent vectors outside the column space of Π, maximized
/// over the given parameter samples.
inline double leaf_tangency(const PoissonStructure &p, const LeafMap &leaf, const std::vector<std::vector<double>> &samples)
{
    const BivectorEvaluator pi(p);
    double worst = 0;
    for (const auto &t : samples) {
        const Eigen::VectorXd pt = leaf(t);
        const Eigen::MatrixXd m = pi(pt(0), std::span<const double>(pt.data() + 1, p.n()));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU);
        const auto &sv = svd.singularValues();
        Eigen::Index r = 0;
        while (r < sv.size() && sv(r) > 1e-9 * std::max(1e-300, sv(0))) {
            ++r;
        }
        const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
        const Eigen::MatrixXd jac = leaf.jacobian(t);
        for (Eigen::Index j = 0; j < jac.cols(); ++j) {
            const Eigen::VectorXd v = jac.col(j);
            const double norm = v.norm();
            if (norm > 0) {
                worst = std::max(worst, (v - u * (u.transpose() * v)).norm() / norm);
            }
        }
    }
    return worst;
}

/// Rank of Π(θ, x) with singular values below tol·σ_max treated as zero.
inline std::size_t numeric_rank(const PoissonStructure &p, double theta, const std::vector<double> &x, double tol = 1e-9)
{
    if (x.size() != p.n()) {
        raise(ErrorKind::DimensionMismatch, "point must have n fibre coordinates");
    }
    const Eigen::MatrixXd m = BivectorEvaluator(p)(theta, x);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    if (sv.size() == 0 || sv(0) == 0) {
        return 0;
    }
    return static_cast<std::size_t>((sv.array() > tol * sv(0)).count());
}

} // namespace pnf

#endif
