#ifndef PNF_POISSON_HPP
#define PNF_POISSON_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include <pnf/diffeo.hpp>
#include <pnf/error.hpp>
#include <pnf/periodic.hpp>
#include <pnf/periodic_matrix.hpp>
#include <pnf/series.hpp>

namespace pnf
{

/// Poisson bivector on a neighbourhood of Γ = S¹×{0}, held through coordinate brackets
/// {θ, x_i} and {x_i, x_j} (i < j stored; the rest follows from skew-symmetry).
class PoissonStructure
{
public:
    PoissonStructure(std::size_t n, std::size_t order, std::size_t grid)
    {
        for (std::size_t i = 0; i < n; ++i) {
            m_theta.emplace_back(n, order, grid);
        }
        for (std::size_t i = 0; i < n * (n - 1) / 2; ++i) {
            m_pairs.emplace_back(n, order, grid);
        }
    }

    /// ∂θ∧(Σ μ_i x_i ∂x_i) + Σ_{i<j} a_ij x_i x_j ∂x_i∧∂x_j.
    static PoissonStructure normal_form(const std::vector<double> &mu, const Eigen::MatrixXd &a, std::size_t order,
                                        std::size_t grid)
    {
        const std::size_t n = mu.size();
        PoissonStructure p(n, order, grid);
        for (std::size_t i = 0; i < n; ++i) {
            MultiIndex e(n, 0);
            e[i] = 1;
            p.m_theta[i].set(e, PeriodicFn::constant(grid, mu[i]));
            for (std::size_t j = i + 1; j < n; ++j) {
                MultiIndex q(n, 0);
                q[i] = 1;
                q[j] = 1;
                p.pair_ref(i, j).set(q, PeriodicFn::constant(grid, a(static_cast<Eigen::Index>(i),
                                                                      static_cast<Eigen::Index>(j))));
            }
        }
        return p;
    }

    std::size_t n() const noexcept
    {
        return m_theta.size();
    }
    std::size_t order() const noexcept
    {
        return m_theta.at(0).order();
    }
    std::size_t grid() const noexcept
    {
        return m_theta.at(0).grid();
    }

    /// {θ, x_i}.
    const FormalSeries &theta_bracket(std::size_t i) const
    {
        return m_theta.at(i);
    }
    void set_theta_bracket(std::size_t i, FormalSeries s)
    {
        m_theta.at(i).check_same(s);
        m_theta[i] = std::move(s);
    }

    /// {x_i, x_j}.
    FormalSeries bracket(std::size_t i, std::size_t j) const
    {
        if (i == j) {
            return m_theta.at(0).zero_like();
        }
        if (i < j) {
            return m_pairs[pair_index(i, j)];
        }
        return -m_pairs[pair_index(j, i)];
    }
    /// Sets {x_i, x_j} (and implicitly {x_j, x_i} = -{x_i, x_j}).
    void set_bracket(std::size_t i, std::size_t j, FormalSeries s)
    {
        if (i == j) {
            raise(ErrorKind::SkewViolation, "diagonal bracket {x_i, x_i} must vanish");
        }
        if (i > j) {
            std::swap(i, j);
            s *= -1.0;
        }
        pair_ref(i, j).check_same(s);
        pair_ref(i, j) = std::move(s);
    }

    /// Full bivector component Π^{ab} with index 0 = θ and index k = x_k (k >= 1).
    FormalSeries entry(std::size_t a, std::size_t b) const
    {
        if (a == b) {
            return m_theta.at(0).zero_like();
        }
        if (a == 0) {
            return m_theta.at(b - 1);
        }
        if (b == 0) {
            return -m_theta.at(a - 1);
        }
        return bracket(a - 1, b - 1);
    }

    /// Applies f to every stored bracket series.
    template <typename F>
    PoissonStructure map_series(F &&f) const
    {
        PoissonStructure out = *this;
        for (auto &s : out.m_theta) {
            s = f(s);
        }
        for (auto &s : out.m_pairs) {
            s = f(s);
        }
        return out;
    }

    /// Largest constant term among all brackets (zero when Π vanishes on Γ).
    double constant_term_max() const
    {
        double r = 0;
        for (const auto &s : m_theta) {
            r = std::max(r, s.term_max_abs(0));
        }
        for (const auto &s : m_pairs) {
            r = std::max(r, s.term_max_abs(0));
        }
        return r;
    }

    /// Numeric Π^{ab}(θ, x) as an (n+1)×(n+1) matrix.
    Eigen::MatrixXd evaluate(double theta, std::span<const double> x) const
    {
        const auto dim = static_cast<Eigen::Index>(n() + 1);
        Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(dim, dim);
        for (std::size_t i = 0; i < n(); ++i) {
            const double v = m_theta[i].evaluate(theta, x);
            pi(0, static_cast<Eigen::Index>(i + 1)) = v;
            pi(static_cast<Eigen::Index>(i + 1), 0) = -v;
            for (std::size_t j = i + 1; j < n(); ++j) {
                const double w = m_pairs[pair_index(i, j)].evaluate(theta, x);
                pi(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j + 1)) = w;
                pi(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(i + 1)) = -w;
            }
        }
        return pi;
    }

    friend double max_abs_difference(const PoissonStructure &a, const PoissonStructure &b)
    {
        double r = 0;
        for (std::size_t i = 0; i < a.m_theta.size(); ++i) {
            r = std::max(r, max_abs_difference(a.m_theta[i], b.m_theta.at(i)));
        }
        for (std::size_t i = 0; i < a.m_pairs.size(); ++i) {
            r = std::max(r, max_abs_difference(a.m_pairs[i], b.m_pairs.at(i)));
        }
        return r;
    }

private:
    std::size_t pair_index(std::size_t i, std::size_t j) const
    {
        // row-major upper triangle
        const std::size_t nn = n();
        return i * nn - i * (i + 1) / 2 + (j - i - 1);
    }
    FormalSeries &pair_ref(std::size_t i, std::size_t j)
    {
        return m_pairs.at(pair_index(i, j));
    }

    std::vector<FormalSeries> m_theta;
    std::vector<FormalSeries> m_pairs;
};

double max_abs_difference(const PoissonStructure &a, const PoissonStructure &b);

namespace detail
{

inline FormalSeries derive(const FormalSeries &s, std::size_t a)
{
    return a == 0 ? s.derive_theta() : s.derive_x(a - 1);
}

} // namespace detail

/// {f, g} = Σ Π^{ab} ∂_a f ∂_b g, exact up to the truncation order.
inline FormalSeries bracket(const PoissonStructure &p, const FormalSeries &f, const FormalSeries &g)
{
    const std::size_t n = p.n();
    std::vector<FormalSeries> df, dg;
    for (std::size_t a = 0; a <= n; ++a) {
        df.push_back(detail::derive(f, a));
        dg.push_back(detail::derive(g, a));
    }
    FormalSeries out = f.zero_like();
    const bool f_theta = df[0].max_abs() > 0;
    const bool g_theta = dg[0].max_abs() > 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const FormalSeries &b0 = p.theta_bracket(k - 1);
        // B0_k (∂θ f ∂_k g − ∂_k f ∂θ g)
        if (f_theta) {
            (b0 * df[0]).accumulate_product(dg[k], out);
        }
        if (g_theta) {
            (b0 * df[k]).accumulate_product(-dg[0], out);
        }
        for (std::size_t l = 1; l <= n; ++l) {
            if (l == k) {
                continue;
            }
            (p.bracket(k - 1, l - 1) * df[k]).accumulate_product(dg[l], out);
        }
    }
    return out;
}

struct JacobiTerm {
    std::array<std::size_t, 3> indices; // bivector indices, 0 = θ
    FormalSeries residual;
};

struct JacobiatorResult {
    std::vector<JacobiTerm> terms;
    double norm = 0;
};

/// Cyclic sums {f,{g,h}} + {g,{h,f}} + {h,{f,g}} over the coordinate triples
/// (θ, x_i, x_j) and (x_i, x_j, x_k).
inline JacobiatorResult jacobiator(const PoissonStructure &p)
{
    const std::size_t n = p.n();
    const std::size_t dim = n + 1;
    std::vector<std::vector<FormalSeries>> pi(dim);
    std::vector<std::vector<std::vector<FormalSeries>>> dpi(dim);
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = 0; b < dim; ++b) {
            pi[a].push_back(p.entry(a, b));
        }
    }
    for (std::size_t a = 0; a < dim; ++a) {
        dpi[a].resize(dim);
        for (std::size_t b = 0; b < dim; ++b) {
            for (std::size_t l = 0; l < dim; ++l) {
                dpi[a][b].push_back(detail::derive(pi[a][b], l));
            }
        }
    }
    JacobiatorResult result;
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = a + 1; b < dim; ++b) {
            for (std::size_t c = b + 1; c < dim; ++c) {
                FormalSeries acc = pi[0][0].zero_like();
                for (std::size_t l = 0; l < dim; ++l) {
                    pi[a][l].accumulate_product(dpi[b][c][l], acc);
                    pi[b][l].accumulate_product(dpi[c][a][l], acc);
                    pi[c][l].accumulate_product(dpi[a][b][l], acc);
                }
                result.norm = std::max(result.norm, acc.max_abs());
                result.terms.push_back({{a, b, c}, std::move(acc)});
            }
        }
    }
    return result;
}

/// Pushforward of Π by Φ: the brackets of the new coordinates expressed in those coordinates.
inline PoissonStructure transform(const PoissonStructure &p, const FiberedDiffeo &phi)
{
    const std::size_t n = p.n(), order = p.order(), grid = p.grid();
    validate(phi, n, grid);

    if (std::holds_alternative<DoubleCover>(phi)) {
        PoissonStructure out = p.map_series([&](const FormalSeries &s) { return compose(s, phi); });
        for (std::size_t i = 0; i < n; ++i) {
            out.set_theta_bracket(i, out.theta_bracket(i) * 0.5);
        }
        return out;
    }
    if (const auto *r = std::get_if<BaseReparam>(&phi)) {
        // {χ(θ), x_i} = χ'(θ) {θ, x_i}; then re-express coefficients in θ' = χ(θ).
        const PeriodicFn slope = r->shift.derivative() + 1.0;
        PoissonStructure scaled = p;
        for (std::size_t i = 0; i < n; ++i) {
            scaled.set_theta_bracket(i, p.theta_bracket(i) * slope);
        }
        const FiberedDiffeo back = inverse(phi);
        return scaled.map_series([&](const FormalSeries &s) { return compose(s, back); });
    }
    if (std::holds_alternative<Reflection>(phi)) {
        const auto &signs = std::get<Reflection>(phi).signs;
        PoissonStructure out = p.map_series([&](const FormalSeries &s) { return compose(s, phi); });
        for (std::size_t i = 0; i < n; ++i) {
            out.set_theta_bracket(i, out.theta_bracket(i) * static_cast<double>(signs[i]));
            for (std::size_t j = i + 1; j < n; ++j) {
                out.set_bracket(i, j, out.bracket(i, j) * static_cast<double>(signs[i] * signs[j]));
            }
        }
        return out;
    }

    const auto f = fiber_components(phi, n, order, grid);
    const auto finv = std::holds_alternative<LinearFrame>(phi)
                          ? fiber_components(inverse(phi), n, order, grid)
                          : invert_fiberwise(f);
    PoissonStructure out(n, order, grid);
    for (std::size_t i = 0; i < n; ++i) {
        // {θ, F_i} = Σ_k B0_k ∂_k F_i
        FormalSeries t = f[i].zero_like();
        for (std::size_t k = 0; k < n; ++k) {
            p.theta_bracket(k).accumulate_product(f[i].derive_x(k), t);
        }
        out.set_theta_bracket(i, t.compose(finv));
        for (std::size_t j = i + 1; j < n; ++j) {
            out.set_bracket(i, j, bracket(p, f[i], f[j]).compose(finv));
        }
    }
    return out;
}

inline PoissonStructure transform(const PoissonStructure &p, const DiffeoChain &chain)
{
    PoissonStructure out = p;
    for (const auto &step : chain.steps) {
        out = transform(out, step);
    }
    return out;
}

/// Degree-one data of Π along Γ.
struct LinearPart {
    PeriodicMatrix h;                 // h_ij(θ): coefficient of x_j in {θ, x_i}
    std::vector<std::array<std::size_t, 3>> u_index; // (i, j, k), i < j
    std::vector<PeriodicFn> u;        // u^{ij}_k(θ): coefficient of x_k in {x_i, x_j}
    double u_max = 0;
    bool u_vanishes = true;
    double cubic_remainder = 0;       // largest coefficient of degree >= 3 in any bracket
};

inline LinearPart linear_part(const PoissonStructure &p, double tol = 1e-9)
{
    const double c0 = p.constant_term_max();
    if (c0 > tol) {
        raise(ErrorKind::NotVanishingOnGamma, "brackets have constant terms up to " + std::to_string(c0));
    }
    const std::size_t n = p.n();
    LinearPart lp{PeriodicMatrix(n, p.grid()), {}, {}, 0, true, 0};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            MultiIndex e(n, 0);
            e[j] = 1;
            lp.h.set(i, j, p.theta_bracket(i).coefficient(e));
        }
        for (std::size_t d = 3; d <= p.order(); ++d) {
            lp.cubic_remainder = std::max(lp.cubic_remainder, p.theta_bracket(i).max_abs_degree(d));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const FormalSeries b = p.bracket(i, j);
            for (std::size_t k = 0; k < n; ++k) {
                MultiIndex e(n, 0);
                e[k] = 1;
                PeriodicFn c = b.coefficient(e);
                lp.u_max = std::max(lp.u_max, c.max_abs());
                lp.u_index.push_back({i, j, k});
                lp.u.push_back(std::move(c));
            }
            for (std::size_t d = 3; d <= p.order(); ++d) {
                lp.cubic_remainder = std::max(lp.cubic_remainder, b.max_abs_degree(d));
            }
        }
    }
    lp.u_vanishes = lp.u_max <= tol;
    return lp;
}

/// Modular vector field with respect to dθ∧dx_1∧…∧dx_n: component a is Σ_b ∂_b Π^{ab}.
/// Index 0 is the ∂θ component, index k the ∂x_k component.
inline std::vector<FormalSeries> modular_field(const PoissonStructure &p)
{
    const std::size_t dim = p.n() + 1;
    std::vector<FormalSeries> out;
    for (std::size_t a = 0; a < dim; ++a) {
        FormalSeries acc = p.theta_bracket(0).zero_like();
        for (std::size_t b = 0; b < dim; ++b) {
            if (a != b) {
                acc += detail::derive(p.entry(a, b), b);
            }
        }
        out.push_back(std::move(acc));
    }
    return out;
}

/// Restriction to P_I = {x_k = 0 for k ∉ I}; brackets of the remaining variables.
inline PoissonStructure restrict_to(const PoissonStructure &p, const std::vector<std::size_t> &keep)
{
    const std::size_t n = p.n(), m = keep.size();
    if (m == 0) {
        raise(ErrorKind::InvalidArgument, "restriction needs at least one variable");
    }
    auto restrict_series = [&](const FormalSeries &s) {
        FormalSeries out(m, p.order(), p.grid());
        for (std::size_t idx = 0; idx < s.basis().size(); ++idx) {
            const auto &e = s.basis().exponent(idx);
            MultiIndex q(m, 0);
            unsigned kept = 0;
            for (std::size_t t = 0; t < m; ++t) {
                q[t] = e[keep[t]];
                kept += q[t];
            }
            if (kept == total_degree(e) && !s.term_is_zero(idx)) {
                out.set(q, s.coefficient(idx));
            }
        }
        return out;
    };
    (void)n;
    PoissonStructure out(m, p.order(), p.grid());
    for (std::size_t t = 0; t < m; ++t) {
        out.set_theta_bracket(t, restrict_series(p.theta_bracket(keep[t])));
        for (std::size_t u = t + 1; u < m; ++u) {
            out.set_bracket(t, u, restrict_series(p.bracket(keep[t], keep[u])));
        }
    }
    return out;
}

} // namespace pnf

#endif
