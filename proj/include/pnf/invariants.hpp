#ifndef PNF_INVARIANTS_HPP
#define PNF_INVARIANTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <pnf/error.hpp>
#include <pnf/normalize.hpp>
#include <pnf/periodic.hpp>
#include <pnf/poisson.hpp>

namespace pnf
{

struct InvariantRecord {
    std::vector<double> mu;
    Eigen::MatrixXd a;
    std::optional<double> period; // 2π/Σμ; empty when Σμ = 0
    std::vector<int> monodromy;
    bool covered = false;

    std::size_t n() const noexcept
    {
        return mu.size();
    }
};

namespace detail
{

inline double trace_threshold(const std::vector<double> &mu)
{
    double scale = 0;
    for (double m : mu) {
        scale = std::max(scale, std::abs(m));
    }
    return 1e-12 * std::max(1.0, scale);
}

} // namespace detail

inline double modular_period(const std::vector<double> &mu)
{
    const double sum = std::accumulate(mu.begin(), mu.end(), 0.0);
    if (std::abs(sum) <= detail::trace_threshold(mu)) {
        raise(ErrorKind::ZeroModularTrace, "Σμ vanishes: the modular field is zero along Γ");
    }
    return two_pi / sum;
}

inline double modular_period(const InvariantRecord &rec)
{
    return modular_period(rec.mu);
}

/// Period of the modular flow on the base circle; on a double cover θ runs twice as fast.
inline double base_period(const InvariantRecord &rec)
{
    return rec.covered ? modular_period(rec) / 2 : modular_period(rec);
}

inline InvariantRecord make_record(std::vector<double> mu, Eigen::MatrixXd a, std::vector<int> monodromy = {},
                                   bool covered = false)
{
    if (monodromy.empty()) {
        monodromy.assign(mu.size(), 1);
    }
    if (a.rows() != static_cast<Eigen::Index>(mu.size()) || a.cols() != a.rows()
        || monodromy.size() != mu.size()) {
        raise(ErrorKind::DimensionMismatch, "invariant record shapes disagree");
    }
    if ((a + a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
        raise(ErrorKind::SkewViolation, "a must be skew-symmetric");
    }
    InvariantRecord r{std::move(mu), std::move(a), std::nullopt, std::move(monodromy), covered};
    const double sum = std::accumulate(r.mu.begin(), r.mu.end(), 0.0);
    if (std::abs(sum) > detail::trace_threshold(r.mu)) {
        r.period = two_pi / sum;
    }
    return r;
}

inline InvariantRecord make_record(const NormalForm &nf)
{
    return make_record(nf.mu, nf.a, nf.monodromy, nf.covered);
}

/// Period ∫₀^{2π} dθ / D^θ(θ, 0) of the modular flow along Γ, read from any structure.
/// D^θ restricted to Γ is trace H(θ).
inline double modular_period_on_gamma(const PoissonStructure &p)
{
    const FormalSeries d = modular_field(p)[0];
    const PeriodicFn on_gamma = d.coefficient(MultiIndex(p.n(), 0));
    if (on_gamma.min_value() * on_gamma.max_value() <= 0) {
        raise(ErrorKind::ZeroModularTrace, "modular field vanishes somewhere on Γ");
    }
    return two_pi * on_gamma.reciprocal().mean();
}

struct EquivalenceResult {
    bool equivalent = false;
    std::vector<std::size_t> permutation; // σ: index i of the first record ↦ σ(i) in the second
    std::string failing_invariant;        // "dimension", "mu", "a" or "monodromy" when not equivalent
    std::string detail;
};

namespace detail
{

inline bool close(double x, double y, double tol)
{
    return std::abs(x - y) <= tol * std::max({1.0, std::abs(x), std::abs(y)});
}

/// The invariants as seen on the double cover.
inline InvariantRecord lift_to_cover(const InvariantRecord &r)
{
    if (r.covered) {
        return r;
    }
    std::vector<double> mu = r.mu;
    for (double &m : mu) {
        m /= 2;
    }
    return make_record(std::move(mu), r.a, r.monodromy, true);
}

} // namespace detail

/// Searches index permutations σ with μ₂[σ(i)] = μ₁[i], a₂[σ(i)][σ(j)] = a₁[i][j] and
/// matching monodromy. Records at different covering status are compared on the cover.
inline EquivalenceResult equivalent(const InvariantRecord &first, const InvariantRecord &second, double tol = 1e-7)
{
    EquivalenceResult res;
    if (first.n() != second.n()) {
        res.failing_invariant = "dimension";
        res.detail = "n = " + std::to_string(first.n()) + " vs " + std::to_string(second.n());
        return res;
    }
    const bool lift = first.covered != second.covered;
    const InvariantRecord r1 = lift ? detail::lift_to_cover(first) : first;
    const InvariantRecord r2 = lift ? detail::lift_to_cover(second) : second;
    const std::size_t n = r1.n();
    std::vector<std::size_t> sigma(n);
    std::iota(sigma.begin(), sigma.end(), 0);
    int depth = 0; // 1: some σ matches μ, 2: some σ matches μ and a
    do {
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            ok = detail::close(r2.mu[sigma[i]], r1.mu[i], tol);
        }
        if (!ok) {
            continue;
        }
        depth = std::max(depth, 1);
        for (std::size_t i = 0; i < n && ok; ++i) {
            for (std::size_t j = i + 1; j < n && ok; ++j) {
                ok = detail::close(r2.a(static_cast<Eigen::Index>(sigma[i]), static_cast<Eigen::Index>(sigma[j])),
                                   r1.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), tol);
            }
        }
        if (!ok) {
            continue;
        }
        depth = std::max(depth, 2);
        for (std::size_t i = 0; i < n && ok; ++i) {
            ok = r2.monodromy[sigma[i]] == r1.monodromy[i];
        }
        if (ok) {
            res.equivalent = true;
            res.permutation = sigma;
            return res;
        }
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    static const char *names[] = {"mu", "a", "monodromy"};
    res.failing_invariant = names[depth];
    res.detail = depth == 0   ? "no index permutation matches the eigenvalue ratios"
                 : depth == 1 ? "eigenvalue ratios match but the quadratic coefficients differ"
                              : "eigenbundle topology differs";
    if (lift) {
        res.detail += " (compared on the double cover)";
    }
    return res;
}

} // namespace pnf

#endif
