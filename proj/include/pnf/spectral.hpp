#ifndef PNF_SPECTRAL_HPP
#define PNF_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <pnf/error.hpp>
#include <pnf/periodic.hpp>
#include <pnf/periodic_matrix.hpp>
#include <pnf/series.hpp>

namespace pnf
{

/// Eigenstructure of H(θ) = k(θ)·V(θ) diag(λ) V(θ)⁻¹ around the circle.
struct SpectralData {
    std::vector<double> lambda;   // eigenvalues at θ = 0, so k(0) = 1
    PeriodicFn k;                 // common scalar factor
    PeriodicMatrix frame;         // column i: unit eigenvector for λ_i, continued along the grid
    std::vector<int> monodromy;   // +1 trivial eigenline bundle, -1 Möbius
    bool covered = false;
    double min_separation = 0;    // smallest eigenvalue gap over the grid, relative
    double proportionality_error = 0;
};

namespace detail
{

struct NodeEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors; // unit columns
};

inline NodeEigen real_eigen(const Eigen::MatrixXd &h, double tol)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) {
        raise(ErrorKind::EigenvalueCollision, "eigen decomposition failed");
    }
    const auto n = h.rows();
    NodeEigen out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) > tol * scale) {
            raise(ErrorKind::ComplexSpectrum, "H(θ) has a non-real eigenvalue");
        }
        out.values(i) = ev.real();
        Eigen::VectorXd v = es.eigenvectors().col(i).real();
        if (v.norm() == 0) {
            v = es.eigenvectors().col(i).imag();
        }
        out.vectors.col(i) = v.normalized();
    }
    return out;
}

/// Permutation σ maximizing Π_i |V(σ(i), i)|: eigenvector i is attached to axis σ(i).
inline std::vector<std::size_t> axis_assignment(const Eigen::MatrixXd &v)
{
    const std::size_t n = static_cast<std::size_t>(v.rows());
    std::vector<std::size_t> perm(n), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_score = -std::numeric_limits<double>::infinity();
    if (n <= 8) {
        do {
            double score = 0;
            for (std::size_t i = 0; i < n; ++i) {
                score += std::log(std::abs(v(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(i))) + 1e-300);
            }
            if (score > best_score) {
                best_score = score;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    // greedy fallback for large n
    std::vector<bool> used(n, false);
    best.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double m = -1;
        for (std::size_t a = 0; a < n; ++a) {
            const double s = std::abs(v(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)));
            if (!used[a] && s > m) {
                m = s;
                best[i] = a;
            }
        }
        used[best[i]] = true;
    }
    return best;
}

} // namespace detail

/// Tracks eigenvalues (nearest match) and unit eigenvectors (sign continuity) around the grid,
/// factors the spectrum as k(θ)λ_i and reads off the monodromy of each eigenline.
inline SpectralData eigen_continuation(const PeriodicMatrix &h, double tol_spec = 1e-8)
{
    const std::size_t n = h.dim(), grid = h.grid();
    const auto ni = static_cast<Eigen::Index>(n);

    auto first = detail::real_eigen(h.at(0), tol_spec);
    // Order eigenpairs by the coordinate axis they are closest to.
    const auto sigma = detail::axis_assignment(first.vectors);
    Eigen::VectorXd vals(ni);
    Eigen::MatrixXd vecs(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
        const auto axis = static_cast<Eigen::Index>(sigma[i]);
        Eigen::VectorXd v = first.vectors.col(static_cast<Eigen::Index>(i));
        if (v(axis) < 0) {
            v = -v;
        }
        vals(axis) = first.values(static_cast<Eigen::Index>(i));
        vecs.col(axis) = v;
    }

    std::vector<Eigen::VectorXd> values(grid);
    std::vector<Eigen::MatrixXd> frames(grid);
    values[0] = vals;
    frames[0] = vecs;
    double min_sep = std::numeric_limits<double>::infinity();

    auto separation = [&](const Eigen::VectorXd &v) {
        const double scale = v.cwiseAbs().maxCoeff();
        double s = std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < v.size(); ++a) {
            for (Eigen::Index b = a + 1; b < v.size(); ++b) {
                s = std::min(s, std::abs(v(a) - v(b)) / scale);
            }
        }
        return v.size() > 1 ? s : 1.0;
    };

    auto match = [&](const Eigen::VectorXd &prev_vals, const Eigen::MatrixXd &prev_vecs,
                     const detail::NodeEigen &cur, Eigen::VectorXd &out_vals, Eigen::MatrixXd &out_vecs,
                     std::size_t m) {
        std::vector<bool> taken(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = n;
            double dist = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < n; ++c) {
                const double d = std::abs(cur.values(static_cast<Eigen::Index>(c)) - prev_vals(static_cast<Eigen::Index>(i)));
                if (d < dist) {
                    dist = d;
                    best = c;
                }
            }
            if (taken[best]) {
                raise(ErrorKind::EigenvalueCollision,
                      "eigenvalue branches merge near node " + std::to_string(m));
            }
            taken[best] = true;
            const auto bi = static_cast<Eigen::Index>(best);
            const auto ii = static_cast<Eigen::Index>(i);
            out_vals(ii) = cur.values(bi);
            Eigen::VectorXd v = cur.vectors.col(bi);
            if (v.dot(prev_vecs.col(ii)) < 0) {
                v = -v;
            }
            out_vecs.col(ii) = v;
        }
    };

    min_sep = separation(values[0]);
    for (std::size_t m = 1; m < grid; ++m) {
        const auto cur = detail::real_eigen(h.at(m), tol_spec);
        values[m].resize(ni);
        frames[m].resize(ni, ni);
        match(values[m - 1], frames[m - 1], cur, values[m], frames[m], m);
        min_sep = std::min(min_sep, separation(values[m]));
    }
    if (min_sep <= tol_spec) {
        raise(ErrorKind::EigenvalueCollision, "eigenvalues are not distinct along the circle");
    }

    // Closing the loop: the branches must return to themselves.
    Eigen::VectorXd wrap_vals(ni);
    Eigen::MatrixXd wrap_vecs(ni, ni);
    detail::NodeEigen start{values[0], frames[0]};
    match(values[grid - 1], frames[grid - 1], start, wrap_vals, wrap_vecs, 0);
    std::vector<int> monodromy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (std::abs(wrap_vals(ii) - values[0](ii)) > 1e-12 * std::max(1.0, std::abs(values[0](ii)))) {
            raise(ErrorKind::EigenvalueCollision, "eigenvalue branches are permuted after one loop");
        }
        monodromy[i] = wrap_vecs.col(ii).dot(frames[0].col(ii)) > 0 ? 1 : -1;
    }

    std::vector<double> lambda(n);
    for (std::size_t i = 0; i < n; ++i) {
        lambda[i] = values[0](static_cast<Eigen::Index>(i));
        if (std::abs(lambda[i]) <= tol_spec * values[0].cwiseAbs().maxCoeff()) {
            raise(ErrorKind::EigenvalueCollision, "zero eigenvalue on the circle");
        }
    }
    std::vector<double> ks(grid);
    double prop_err = 0;
    for (std::size_t m = 0; m < grid; ++m) {
        ks[m] = values[m](0) / lambda[0];
        for (std::size_t i = 1; i < n; ++i) {
            prop_err = std::max(prop_err, std::abs(values[m](static_cast<Eigen::Index>(i)) / lambda[i] - ks[m]));
        }
    }
    if (prop_err > tol_spec * 100) {
        raise(ErrorKind::NonProportionalSpectrum,
              "eigenvalues are not proportional along Γ (deviation " + std::to_string(prop_err) + ")");
    }
    PeriodicFn k(std::move(ks));
    if (k.min_value() <= tol_spec) {
        raise(ErrorKind::KVanishes, "the spectral factor k(θ) vanishes or changes sign");
    }
    SpectralData out{std::move(lambda), std::move(k), PeriodicMatrix::from_nodes(std::move(frames)),
                     std::move(monodromy), false, min_sep, prop_err};
    return out;
}

struct ResonanceViolation {
    std::size_t i;
    std::ptrdiff_t j; // -1 for a relation λ_i = <p, λ>
    MultiIndex p;
    double gap;
};

struct NonresonanceReport {
    bool ok = true;
    std::vector<ResonanceViolation> violations;
    double min_gap = std::numeric_limits<double>::infinity();
};

/// Looks for λ_i = <p,λ> and λ_i + λ_j = <p,λ> (i ≠ j) with 2 <= |p| <= degree_bound,
/// ignoring the trivial relations p = e_i + e_j.
inline NonresonanceReport check_nonresonance(const std::vector<double> &lambda, std::size_t degree_bound, double tol)
{
    if (degree_bound < 2) {
        raise(ErrorKind::InvalidArgument, "degree bound must be at least 2");
    }
    const std::size_t n = lambda.size();
    const auto basis = MonomialBasis::get(n, degree_bound);
    NonresonanceReport rep;
    for (std::size_t idx = basis->degree_begin(2); idx < basis->size(); ++idx) {
        const auto &p = basis->exponent(idx);
        double dot = 0;
        for (std::size_t k = 0; k < n; ++k) {
            dot += p[k] * lambda[k];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double g1 = std::abs(dot - lambda[i]);
            rep.min_gap = std::min(rep.min_gap, g1);
            if (g1 < tol) {
                rep.violations.push_back({i, -1, p, g1});
            }
            for (std::size_t j = i + 1; j < n; ++j) {
                if (total_degree(p) == 2 && p[i] == 1 && p[j] == 1) {
                    continue;
                }
                const double g2 = std::abs(dot - lambda[i] - lambda[j]);
                rep.min_gap = std::min(rep.min_gap, g2);
                if (g2 < tol) {
                    rep.violations.push_back({i, static_cast<std::ptrdiff_t>(j), p, g2});
                }
            }
        }
    }
    rep.ok = rep.violations.empty();
    return rep;
}

struct BrunoReport {
    std::vector<double> omega;          // ω_1..ω_kmax
    std::vector<double> partial_sums;   // Σ_{m<=k} 2^{-m} log(1/ω_m)
    std::vector<double> half_sums;      // Σ_{m<=k} ½ log(1/ω_m), the literal weight
    bool appears_bounded = false;
    bool literal = false;
};

namespace detail
{

/// Calls f(c) for every c ∈ Z_+^n with |c| == degree (c_i >= floor).
inline void for_each_exact_degree(std::size_t n, unsigned degree, unsigned floor,
                                  const std::function<void(const std::vector<unsigned> &)> &f)
{
    std::vector<unsigned> c(n, floor);
    if (degree < floor * n) {
        return;
    }
    std::function<void(std::size_t, unsigned)> rec = [&](std::size_t k, unsigned rem) {
        if (k + 1 == n) {
            c[k] = floor + rem;
            f(c);
            return;
        }
        for (unsigned e = 0; e <= rem; ++e) {
            c[k] = floor + e;
            rec(k + 1, rem - e);
        }
    };
    rec(0, degree - floor * static_cast<unsigned>(n));
}

inline double count_multi_indices(std::size_t n, double max_degree)
{
    // C(max_degree + n, n)
    double r = 1;
    for (std::size_t k = 1; k <= n; ++k) {
        r *= (max_degree + static_cast<double>(k)) / static_cast<double>(k);
    }
    return r;
}

} // namespace detail

/// Small-divisor minima ω_k = min_{j, 2 <= |c| <= 2^k} |<c,λ> - λ_j| (nonzero values).
/// With literal set, ω_k instead minimizes |Σ c_i λ_i| over c_i <= -1 with Σ|c_i| <= 2^k.
inline BrunoReport bruno_omega(const std::vector<double> &lambda, std::size_t k_max, bool literal = false,
                               double tol = 1e-12)
{
    const std::size_t n = lambda.size();
    if (k_max == 0 || k_max > 20) {
        raise(ErrorKind::InvalidArgument, "k_max must be in 1..20");
    }
    if (detail::count_multi_indices(n, std::ldexp(1.0, static_cast<int>(k_max))) > 5e7) {
        raise(ErrorKind::InvalidArgument, "Bruno enumeration too large; lower k_max");
    }
    double scale = 0;
    for (double l : lambda) {
        scale = std::max(scale, std::abs(l));
    }
    BrunoReport rep;
    rep.literal = literal;
    double current = std::numeric_limits<double>::infinity();
    unsigned done = literal ? static_cast<unsigned>(n) - 1 : 1;
    double sum = 0, half = 0;
    for (std::size_t k = 1; k <= k_max; ++k) {
        const unsigned top = 1u << k;
        for (unsigned d = done + 1; d <= top; ++d) {
            if (literal) {
                detail::for_each_exact_degree(n, d, 1, [&](const std::vector<unsigned> &c) {
                    double dot = 0;
                    for (std::size_t i = 0; i < n; ++i) {
                        dot -= c[i] * lambda[i];
                    }
                    const double v = std::abs(dot);
                    if (v > tol * scale) {
                        current = std::min(current, v);
                    }
                });
            } else {
                detail::for_each_exact_degree(n, d, 0, [&](const std::vector<unsigned> &c) {
                    double dot = 0;
                    for (std::size_t i = 0; i < n; ++i) {
                        dot += c[i] * lambda[i];
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        const double v = std::abs(dot - lambda[j]);
                        if (v <= tol * scale) {
                            raise(ErrorKind::ResonantInput, "exact small divisor: λ is resonant");
                        }
                        current = std::min(current, v);
                    }
                });
            }
        }
        done = std::max(done, top);
        rep.omega.push_back(current);
        if (std::isfinite(current)) { // empty index sets contribute nothing
            sum += std::ldexp(1.0, -static_cast<int>(k)) * std::log(1.0 / current);
            half += 0.5 * std::log(1.0 / current);
        }
        rep.partial_sums.push_back(sum);
        rep.half_sums.push_back(half);
    }
    // Heuristic: the last increments shrink geometrically.
    const std::size_t m = rep.partial_sums.size();
    if (m >= 3) {
        const double d1 = rep.partial_sums[m - 1] - rep.partial_sums[m - 2];
        const double d2 = rep.partial_sums[m - 2] - rep.partial_sums[m - 3];
        rep.appears_bounded = d1 <= 0.75 * d2 + 1e-15 || d1 < 1e-12;
    } else {
        rep.appears_bounded = true;
    }
    return rep;
}

} // namespace pnf

#endif
