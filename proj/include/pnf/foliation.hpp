#ifndef PNF_FOLIATION_HPP
#define PNF_FOLIATION_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <pnf/error.hpp>
#include <pnf/invariants.hpp>
#include <pnf/normalize.hpp>

namespace pnf
{

// In the log chart x̄_i = ln x_i on P⁺ = {x_i > 0} a normal form reads
// {θ, x̄_i} = μ_i, {x̄_i, x̄_j} = a_ij. Everything here is linear algebra on (μ, a).

/// φ a φᵀ = diag([[0,-1],[1,0]] × s, 0), ψ = φ⁻¹. Columns of ψ are the basis b_1..b_n.
struct SkewCanonical {
    Eigen::MatrixXd phi;
    Eigen::MatrixXd psi;
    std::size_t s = 0;
    std::vector<double> singular_values;
};

namespace detail
{

inline double rank_threshold(const Eigen::MatrixXd &a, double tol)
{
    const double scale = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
    return tol * std::max(1.0, scale);
}

/// Removes the rank-2 piece of `rem` generated by (ξ, η), appending b_odd = aη/c, b_even = aξ.
inline void split_pair(Eigen::MatrixXd &rem, const Eigen::VectorXd &xi, const Eigen::VectorXd &eta,
                       std::vector<Eigen::VectorXd> &basis)
{
    const double c = xi.dot(rem * eta);
    const Eigen::VectorXd odd = rem * eta / c;
    const Eigen::VectorXd even = rem * xi;
    rem -= even * odd.transpose() - odd * even.transpose();
    basis.push_back(odd);
    basis.push_back(even);
}

/// Pivoted splitting of the remaining skew matrix, s pairs.
inline void split_pivoted(Eigen::MatrixXd &rem, std::size_t pairs, std::vector<Eigen::VectorXd> &basis)
{
    const Eigen::Index n = rem.rows();
    for (std::size_t k = 0; k < pairs; ++k) {
        Eigen::Index p = 0, q = 0;
        rem.cwiseAbs().maxCoeff(&p, &q);
        if (p > q) {
            std::swap(p, q);
        }
        split_pair(rem, Eigen::VectorXd::Unit(n, p), Eigen::VectorXd::Unit(n, q), basis);
    }
}

/// Appends an orthonormal basis of the orthogonal complement of span(basis).
inline Eigen::MatrixXd complete_basis(const std::vector<Eigen::VectorXd> &basis, Eigen::Index n)
{
    Eigen::MatrixXd psi(n, n);
    const Eigen::Index k = static_cast<Eigen::Index>(basis.size());
    for (Eigen::Index j = 0; j < k; ++j) {
        psi.col(j) = basis[static_cast<std::size_t>(j)];
    }
    if (k < n) {
        if (k == 0) {
            psi.setIdentity();
            return psi;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(psi.leftCols(k).transpose(), Eigen::ComputeFullV);
        psi.rightCols(n - k) = svd.matrixV().rightCols(n - k);
    }
    return psi;
}

inline std::vector<double> singular_values(const Eigen::MatrixXd &a)
{
    if (a.size() == 0) {
        return {};
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
    return {sv.data(), sv.data() + sv.size()};
}

inline std::size_t half_rank(const std::vector<double> &sv, double threshold)
{
    const auto r = std::count_if(sv.begin(), sv.end(), [&](double v) { return v > threshold; });
    return static_cast<std::size_t>(r) / 2;
}

inline SkewCanonical finish(const std::vector<Eigen::VectorXd> &basis, Eigen::Index n, std::size_t s,
                            std::vector<double> sv)
{
    SkewCanonical out;
    out.psi = complete_basis(basis, n);
    out.phi = out.psi.inverse();
    out.s = s;
    out.singular_values = std::move(sv);
    return out;
}

} // namespace detail

/// Block form of a skew matrix with rank decided by singular values above tol·max(1, max|a|).
inline SkewCanonical skew_canonical(const Eigen::MatrixXd &a, double tol = 1e-9)
{
    const auto sv = detail::singular_values(a);
    const std::size_t s = detail::half_rank(sv, detail::rank_threshold(a, tol));
    Eigen::MatrixXd rem = a;
    std::vector<Eigen::VectorXd> basis;
    detail::split_pivoted(rem, s, basis);
    return detail::finish(basis, a.rows(), s, sv);
}

enum class HolonomyCase { Case1, Case2 };

inline std::string to_string(HolonomyCase c)
{
    return c == HolonomyCase::Case1 ? "Case1" : "Case2";
}

struct FoliationReport {
    std::size_t n = 0;
    std::vector<double> mu;
    Eigen::MatrixXd a;
    std::size_t s = 0;
    HolonomyCase holonomy_case = HolonomyCase::Case2;
    Eigen::MatrixXd phi;
    Eigen::MatrixXd psi;
    std::size_t leaf_dim = 0;
    std::string leaf_space;
    std::optional<Eigen::VectorXd> holonomy_translation; // in x̄ = ln x, Case 1 only
    double membership_residual = 0;                       // |a a⁺ μ - μ| / |μ|
    std::vector<double> singular_values;
    std::vector<Warning> warnings;
    std::shared_ptr<const FoliationReport> alternative;   // opposite decision for near-threshold input
};

struct FoliationConfig {
    double rank_tol = 1e-9;       // relative to max(1, max|a|)
    double membership_tol = 1e-9; // relative to |μ|
    double near_factor = 1e3;     // decisions within this factor of a threshold are flagged
};

namespace detail
{

inline FoliationReport build_report(const std::vector<double> &mu_in, const Eigen::MatrixXd &a, std::size_t s,
                                    bool case1, const std::vector<double> &sv, double residual)
{
    const Eigen::Index n = a.rows();
    const Eigen::Map<const Eigen::VectorXd> mu(mu_in.data(), n);
    FoliationReport r;
    r.n = static_cast<std::size_t>(n);
    r.mu = mu_in;
    r.a = a;
    r.s = s;
    r.singular_values = sv;
    r.membership_residual = residual;
    Eigen::MatrixXd rem = a;
    std::vector<Eigen::VectorXd> basis;
    if (case1) {
        // ξ = -a⁺μ, η = μ, so b_1 = aμ/|μ|² and b_2 = -μ
        const Eigen::VectorXd apmu = a.completeOrthogonalDecomposition().pseudoInverse() * mu;
        split_pair(rem, -apmu, mu, basis);
        split_pivoted(rem, s - 1, basis);
        r.holonomy_case = HolonomyCase::Case1;
        r.leaf_dim = 2 * s;
        r.leaf_space = "[0,2pi) x R^" + std::to_string(n - static_cast<Eigen::Index>(2 * s));
    } else {
        split_pivoted(rem, s, basis);
        basis.push_back(mu);
        r.holonomy_case = HolonomyCase::Case2;
        r.leaf_dim = std::min<std::size_t>(2 * s + 2, static_cast<std::size_t>(n) + 1);
        r.leaf_space = "R^" + std::to_string(n - static_cast<Eigen::Index>(2 * s) - 1);
    }
    const auto canon = finish(basis, n, s, sv);
    r.phi = canon.phi;
    r.psi = canon.psi;
    if (case1) {
        r.holonomy_translation = Eigen::VectorXd(two_pi * r.psi.col(0));
    }
    return r;
}

} // namespace detail

/// Rank 2s of a, the dichotomy μ ∈ Im(a) (holonomy along Γ) or not, and the adapted basis.
inline FoliationReport classify_holonomy(const std::vector<double> &mu_in, const Eigen::MatrixXd &a,
                                         const FoliationConfig &cfg = {})
{
    const Eigen::Index n = static_cast<Eigen::Index>(mu_in.size());
    if (a.rows() != n || a.cols() != n) {
        raise(ErrorKind::DimensionMismatch, "a must be n×n");
    }
    (void)modular_period(mu_in);
    const Eigen::Map<const Eigen::VectorXd> mu(mu_in.data(), n);
    const auto sv = detail::singular_values(a);
    const double thr = detail::rank_threshold(a, cfg.rank_tol);
    const std::size_t s = detail::half_rank(sv, thr);

    // projection of μ onto Im(a) with the rank fixed at 2s
    auto residual_for = [&](std::size_t pairs) {
        if (pairs == 0) {
            return 1.0;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
        const Eigen::MatrixXd u = svd.matrixU().leftCols(static_cast<Eigen::Index>(2 * pairs));
        return (mu - u * (u.transpose() * mu)).norm() / mu.norm();
    };
    const double residual = residual_for(s);
    const bool case1 = s > 0 && residual < cfg.membership_tol;
    FoliationReport r = detail::build_report(mu_in, a, s, case1, sv, residual);

    // near-threshold decisions: rank and membership
    bool near_rank = false;
    for (double v : sv) {
        if (v > thr / cfg.near_factor && v < thr * cfg.near_factor) {
            near_rank = true;
        }
    }
    const bool near_member = s > 0 && residual > cfg.membership_tol / cfg.near_factor
                             && residual < cfg.membership_tol * cfg.near_factor;
    if (near_rank) {
        const std::size_t alt_s =
            detail::half_rank(sv, std::any_of(sv.begin(), sv.end(), [&](double v) { return v > thr && v < thr * cfg.near_factor; })
                                      ? thr * cfg.near_factor
                                      : thr / cfg.near_factor);
        const double alt_res = residual_for(alt_s);
        const bool alt_case1 = alt_s > 0 && alt_res < cfg.membership_tol;
        r.warnings.push_back({"near_threshold_rank", *std::min_element(sv.begin(), sv.end(), [&](double x, double y) {
                                  return std::abs(std::log(x / thr)) < std::abs(std::log(y / thr));
                              }),
                              "a singular value of a lies near the rank threshold"});
        if (alt_s != s && (alt_s > 0 || !alt_case1)) {
            r.alternative = std::make_shared<FoliationReport>(
                detail::build_report(mu_in, a, alt_s, alt_case1, sv, alt_res));
        }
    } else if (near_member) {
        r.warnings.push_back({"near_threshold_membership", residual, "μ lies near Im(a)"});
        r.alternative = std::make_shared<FoliationReport>(detail::build_report(mu_in, a, s, !case1, sv, residual));
    }
    return r;
}

inline FoliationReport classify_holonomy(const NormalForm &nf, const FoliationConfig &cfg = {})
{
    return classify_holonomy(nf.mu, nf.a, cfg);
}

/// Evaluable parametrization of the leaf through (θ = 0, x0) in P⁺.
/// Case 1: θ = t_1, x̄ = x̄0 + Σ_{j≤2s} ψ_j t_j.  Case 2: θ = t_0, x̄ = x̄0 + Σ_{j≤2s+1} ψ_j t_{j}.
class LeafMap
{
public:
    LeafMap(std::vector<double> x0, Eigen::MatrixXd directions, bool theta_is_first_direction)
        : m_log_x0(x0.size()), m_dirs(std::move(directions)), m_theta_first(theta_is_first_direction)
    {
        for (std::size_t i = 0; i < x0.size(); ++i) {
            m_log_x0(static_cast<Eigen::Index>(i)) = std::log(x0[i]);
        }
    }

    /// Number of parameters.
    std::size_t dim() const noexcept
    {
        return static_cast<std::size_t>(m_dirs.cols()) + (m_theta_first ? 0 : 1);
    }
    std::size_t n() const noexcept
    {
        return static_cast<std::size_t>(m_log_x0.size());
    }
    /// Directions in x̄ spanned by the non-angular parameters.
    const Eigen::MatrixXd &log_directions() const noexcept
    {
        return m_dirs;
    }
    bool theta_is_first_direction() const noexcept
    {
        return m_theta_first;
    }

    /// Point (θ, x_1..x_n).
    Eigen::VectorXd operator()(std::span<const double> t) const
    {
        check(t);
        Eigen::VectorXd out(m_log_x0.size() + 1);
        out(0) = t[0];
        out.tail(m_log_x0.size()) = log_point(t).array().exp();
        return out;
    }

    /// ∂(θ, x)/∂t, an (n+1)×dim matrix.
    Eigen::MatrixXd jacobian(std::span<const double> t) const
    {
        check(t);
        const Eigen::Index n = m_log_x0.size();
        const Eigen::Index d = static_cast<Eigen::Index>(dim());
        const Eigen::VectorXd x = log_point(t).array().exp();
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + 1, d);
        jac(0, 0) = 1;
        const Eigen::Index offset = m_theta_first ? 0 : 1;
        for (Eigen::Index j = 0; j < m_dirs.cols(); ++j) {
            jac.col(j + offset).tail(n) = x.cwiseProduct(m_dirs.col(j));
        }
        return jac;
    }

private:
    Eigen::VectorXd log_point(std::span<const double> t) const
    {
        const Eigen::Index offset = m_theta_first ? 0 : 1;
        Eigen::VectorXd lx = m_log_x0;
        for (Eigen::Index j = 0; j < m_dirs.cols(); ++j) {
            lx += m_dirs.col(j) * t[static_cast<std::size_t>(j + offset)];
        }
        return lx;
    }

    void check(std::span<const double> t) const
    {
        if (t.size() != dim()) {
            raise(ErrorKind::DimensionMismatch, "leaf map expects " + std::to_string(dim()) + " parameters");
        }
    }

    Eigen::VectorXd m_log_x0;
    Eigen::MatrixXd m_dirs;
    bool m_theta_first;
};

inline LeafMap leaf_through(const std::vector<double> &x0, const FoliationReport &rep)
{
    if (x0.size() != rep.n) {
        raise(ErrorKind::DimensionMismatch, "x0 must have n coordinates");
    }
    for (double v : x0) {
        if (!(v > 0) || !std::isfinite(v)) {
            raise(ErrorKind::NotInPositiveOrthant, "leaf base point must have strictly positive coordinates");
        }
    }
    const bool case1 = rep.holonomy_case == HolonomyCase::Case1;
    const Eigen::Index cols = static_cast<Eigen::Index>(case1 ? 2 * rep.s : 2 * rep.s + 1);
    return LeafMap(x0, rep.psi.leftCols(cols), case1);
}

struct Stratum {
    std::vector<std::size_t> indices; // I: coordinates allowed to be nonzero
    std::vector<double> mu;
    Eigen::MatrixXd a;
    std::size_t dim = 1;              // 1 + |I|
    std::size_t orthants = 1;         // 2^|I| open pieces of the regular part, all isomorphic by reflections
};

/// P_I = {x_k = 0 for k ∉ I} for every I ⊆ {0..n-1}, ∅ (the circle Γ) first, then by size.
inline std::vector<Stratum> stratification(const std::vector<double> &mu, const Eigen::MatrixXd &a)
{
    const std::size_t n = mu.size();
    if (n > 20) {
        raise(ErrorKind::InvalidArgument, "too many coordinates to enumerate strata");
    }
    std::vector<Stratum> out;
    for (std::size_t size = 0; size <= n; ++size) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != size) {
                continue;
            }
            Stratum st;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (std::size_t{1} << i)) {
                    st.indices.push_back(i);
                    st.mu.push_back(mu[i]);
                }
            }
            const auto m = static_cast<Eigen::Index>(size);
            st.a = Eigen::MatrixXd::Zero(m, m);
            for (Eigen::Index p = 0; p < m; ++p) {
                for (Eigen::Index q = 0; q < m; ++q) {
                    st.a(p, q) = a(static_cast<Eigen::Index>(st.indices[static_cast<std::size_t>(p)]),
                                   static_cast<Eigen::Index>(st.indices[static_cast<std::size_t>(q)]));
                }
            }
            st.dim = 1 + size;
            st.orthants = std::size_t{1} << size;
            out.push_back(std::move(st));
        }
    }
    // reverse-lexicographic masks put {0} before {1}; order within a size by index list
    std::stable_sort(out.begin(), out.end(), [](const Stratum &x, const Stratum &y) {
        return x.indices.size() != y.indices.size() ? x.indices.size() < y.indices.size() : x.indices < y.indices;
    });
    return out;
}

inline std::vector<Stratum> stratification(const NormalForm &nf)
{
    return stratification(nf.mu, nf.a);
}

} // namespace pnf

#endif
