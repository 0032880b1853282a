#ifndef PNF_NORMALIZE_HPP
#define PNF_NORMALIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <pnf/diffeo.hpp>
#include <pnf/error.hpp>
#include <pnf/periodic.hpp>
#include <pnf/poisson.hpp>
#include <pnf/series.hpp>
#include <pnf/spectral.hpp>

namespace pnf
{

struct NormalizeConfig {
    double tol_jacobi = 1e-8;       // input must be Poisson to this accuracy
    double tol_vanishing = 1e-9;    // constant terms allowed on Γ
    double tol_resonance = 1e-8;    // relative to max|μ|
    double tol_spec = 1e-8;
    double tol_structure = 1e-6;    // gross-violation threshold for the structural checks
    double small_divisor = 1e-5;    // divisors below this raise a warning
    double tail_warning = 1e-8;     // spectral tail energy above this raises a warning
    bool literal_chi = false; // also report the alternative constant 2π/∫k
};

struct Warning {
    std::string kind;
    double value;
    std::string message;
};

struct NormalFormDiagnostics {
    double input_jacobi = 0;
    double jacobi_residual = 0;
    double smallest_divisor = std::numeric_limits<double>::infinity();
    double theta_deviation = 0;  // max |{θ,x_i} - μ_i x_i|
    double pair_deviation = 0;   // max |{x_i,x_j} - a_ij x_i x_j|
    double truncation_residual = 0;
    double tail_energy = 0;
    double proportionality_error = 0;
    std::optional<std::vector<double>> literal_mu;
    std::optional<double> literal_chi_end; // χ(2π) under the alternative constant
};

/// Invariants of the structure together with the coordinate change that realizes them.
struct NormalForm {
    std::size_t n = 0;
    std::vector<double> mu;
    Eigen::MatrixXd a;
    std::vector<int> monodromy; // of the original eigenbundles
    bool covered = false;       // μ and a refer to the double cover
    std::vector<double> lambda; // eigenvalue ratios of the (possibly covered) linear part
    DiffeoChain chain;
    PoissonStructure structure; // transform(input, chain)
    NormalFormDiagnostics diagnostics;
    std::vector<Warning> warnings;
};

struct ReparamResult {
    PoissonStructure structure;
    std::vector<double> mu;
    BaseReparam chi;
    bool identity;
};

/// New angle χ(θ) = 2π ∫₀^θ k⁻¹ / ∫₀^{2π} k⁻¹; then {χ, x_i} = μ_i x_i + o(x) with
/// μ_i = λ_i · 2π / ∫₀^{2π} k⁻¹.
inline ReparamResult reparametrize(const PoissonStructure &p, const SpectralData &spec)
{
    if (spec.k.min_value() <= 0) {
        raise(ErrorKind::KVanishes, "k(θ) must stay positive");
    }
    const PeriodicFn kinv = spec.k.reciprocal();
    const double kinv_mean = kinv.mean();
    const PeriodicFn slope = kinv * (1.0 / kinv_mean);
    BaseReparam chi{slope.antiderivative()};
    std::vector<double> mu;
    for (double l : spec.lambda) {
        mu.push_back(l / kinv_mean);
    }
    const bool identity = chi.shift.max_abs() < 1e-14;
    return {identity ? p : transform(p, FiberedDiffeo{chi}), std::move(mu), std::move(chi), identity};
}

struct LinearizeResult {
    FiberwiseFormal phi;
    bool identity;
    PoissonStructure structure;
    std::vector<double> mu;
    double smallest_divisor;
    std::vector<Warning> warnings;
};

/// Reads μ_i off a structure whose linear part is diag(μ) with constant entries.
inline std::vector<double> diagonal_linear_part(const PoissonStructure &p, double tol)
{
    const std::size_t n = p.n();
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            MultiIndex e(n, 0);
            e[j] = 1;
            const PeriodicFn c = p.theta_bracket(i).coefficient(e);
            if (i == j) {
                mu[i] = c.mean();
                if (c.variation() > tol * std::max(1.0, std::abs(mu[i]))) {
                    raise(ErrorKind::StructuralMismatch, "linear part of {θ,x} is not constant");
                }
            } else if (c.max_abs() > tol) {
                raise(ErrorKind::StructuralMismatch, "linear part of {θ,x} is not diagonal");
            }
        }
    }
    return mu;
}

/// Solves X_θ φ_i = μ_i φ_i degree by degree, where X_θ = Σ {θ,x_k} ∂_k, giving new fiber
/// coordinates φ_i = x_i + O(x²) in which {θ, φ_i} = μ_i φ_i up to the truncation order.
/// The monomial x^p of component i is divided by <p,μ> - μ_i.
inline LinearizeResult linearize_theta_field(const PoissonStructure &p, const NormalizeConfig &cfg = {})
{
    const std::size_t n = p.n(), order = p.order(), grid = p.grid();
    const auto mu = diagonal_linear_part(p, cfg.tol_structure);
    double scale = 0;
    for (double m : mu) {
        scale = std::max(scale, std::abs(m));
    }
    LinearizeResult res{FiberwiseFormal{detail::coordinate_series(n, order, grid)}, true, p, mu,
                        std::numeric_limits<double>::infinity(), {}};
    auto &phi = res.phi.components;
    const auto &basis = phi[0].basis();
    for (std::size_t r = 2; r <= order; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            // degree-r part of Σ_k {θ,x_k} ∂_k φ_i, with φ_i known below degree r
            FormalSeries rem = phi[i].zero_like();
            for (std::size_t k = 0; k < n; ++k) {
                p.theta_bracket(k).accumulate_product(phi[i].derive_x(k), rem);
            }
            for (std::size_t idx = basis.degree_begin(r); idx < basis.degree_begin(r + 1); ++idx) {
                const auto &e = basis.exponent(idx);
                double dot = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    dot += e[k] * mu[k];
                }
                const double divisor = dot - mu[i];
                res.smallest_divisor = std::min(res.smallest_divisor, std::abs(divisor));
                const double size = rem.term_max_abs(idx);
                if (size == 0) {
                    continue;
                }
                if (std::abs(divisor) < cfg.tol_resonance * std::max(1.0, scale)) {
                    if (size > cfg.tol_structure) {
                        raise(ErrorKind::ResonantDivisor, "resonant homological equation at degree "
                                                              + std::to_string(r));
                    }
                    continue;
                }
                if (std::abs(divisor) < cfg.small_divisor) {
                    res.warnings.push_back({"small_divisor", std::abs(divisor),
                                            "small divisor in the homological equation"});
                }
                phi[i].set(idx, rem.coefficient(idx) * (-1.0 / divisor));
                res.identity = false;
            }
        }
    }
    if (!res.identity) {
        res.structure = transform(p, FiberedDiffeo{res.phi});
    }
    return res;
}

struct QuadratizeResult {
    Eigen::MatrixXd a;
    LinearFrame phi;
    bool identity;
    PoissonStructure structure;
    PeriodicMatrix k_funcs; // k_ij(θ) before rescaling
};

/// For {θ,x_i} = μ_i x_i exactly: checks that {x_i,x_j} = k_ij(θ) x_i x_j, then rescales
/// x_j ↦ χ_j(θ) x_j with χ_j = exp((1/μ_1) ∫₀^θ (k_1j − mean k_1j)) so that all k_ij become constant.
inline QuadratizeResult quadratize(const PoissonStructure &p, const std::vector<double> &mu,
                                   const NormalizeConfig &cfg = {})
{
    const std::size_t n = p.n(), grid = p.grid();
    QuadratizeResult res{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                         LinearFrame{PeriodicMatrix::identity(n, grid)}, true, p, PeriodicMatrix(n, grid)};
    if (n == 1) {
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const FormalSeries u = p.bracket(i, j);
            MultiIndex e(n, 0);
            e[i] = 1;
            e[j] = 1;
            const std::size_t target = u.basis().index(e);
            for (std::size_t idx = 0; idx < u.basis().size(); ++idx) {
                if (idx != target && u.term_max_abs(idx) > cfg.tol_structure) {
                    raise(ErrorKind::UnexpectedMonomial,
                          "{x" + std::to_string(i + 1) + ",x" + std::to_string(j + 1)
                              + "} has a term outside x_i x_j of size " + std::to_string(u.term_max_abs(idx)));
                }
            }
            const PeriodicFn kij = u.coefficient(target);
            res.k_funcs.set(i, j, kij);
            res.k_funcs.set(j, i, -kij);
        }
    }
    std::vector<PeriodicFn> chi{PeriodicFn::constant(grid, 1.0)};
    double largest_log = 0;
    for (std::size_t j = 1; j < n; ++j) {
        const PeriodicFn log_chi = res.k_funcs.entry(0, j).antiderivative() * (1.0 / mu[0]);
        largest_log = std::max(largest_log, log_chi.max_abs());
        chi.push_back(log_chi.exp());
    }
    if (largest_log > 1e-14) {
        res.identity = false;
        res.phi = LinearFrame{PeriodicMatrix::diagonal(chi)};
        res.structure = transform(p, FiberedDiffeo{res.phi});
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            MultiIndex e(n, 0);
            e[i] = 1;
            e[j] = 1;
            const PeriodicFn kij = res.structure.bracket(i, j).coefficient(e);
            const double mean = kij.mean();
            if (kij.variation() > cfg.tol_structure * std::max(1.0, std::abs(mean))) {
                raise(ErrorKind::NonConstantResidual,
                      "k_" + std::to_string(i + 1) + std::to_string(j + 1) + " still varies by "
                          + std::to_string(kij.variation()));
            }
            res.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mean;
            res.a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -mean;
        }
    }
    return res;
}

namespace detail
{

inline double structure_tail_energy(const PoissonStructure &p)
{
    double worst = 0;
    auto scan = [&](const FormalSeries &s) {
        for (std::size_t idx : s.nonzero_terms()) {
            if (s.term_max_abs(idx) > 1e-12) {
                worst = std::max(worst, s.coefficient(idx).tail_energy());
            }
        }
    };
    for (std::size_t i = 0; i < p.n(); ++i) {
        scan(p.theta_bracket(i));
        for (std::size_t j = i + 1; j < p.n(); ++j) {
            scan(p.bracket(i, j));
        }
    }
    return worst;
}

} // namespace detail

/// Full pipeline: validation, double cover when an eigenline is a Möbius band, diagonalization,
/// circle reparametrization, fiberwise linearization, quadratization.
inline NormalForm normalize(const PoissonStructure &input, const NormalizeConfig &cfg = {})
{
    const std::size_t n = input.n();
    NormalForm nf{n, {}, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                  {}, false, {}, {}, input, {}, {}};

    const LinearPart lp0 = linear_part(input, cfg.tol_vanishing);
    nf.diagnostics.input_jacobi = jacobiator(input).norm;
    if (nf.diagnostics.input_jacobi > cfg.tol_jacobi) {
        raise(ErrorKind::NotPoisson, "Jacobiator norm " + std::to_string(nf.diagnostics.input_jacobi));
    }
    if (!lp0.u_vanishes) {
        raise(ErrorKind::StructuralMismatch,
              "{x_i,x_j} has a linear part (max " + std::to_string(lp0.u_max)
                  + "): the linearization along Γ is not the dual of a non-resonant algebra");
    }
    nf.diagnostics.tail_energy = detail::structure_tail_energy(input);

    PoissonStructure p = input;
    SpectralData spec = eigen_continuation(lp0.h, cfg.tol_spec);
    nf.monodromy = spec.monodromy;
    if (std::any_of(spec.monodromy.begin(), spec.monodromy.end(), [](int e) { return e < 0; })) {
        nf.covered = true;
        nf.chain.steps.emplace_back(DoubleCover{});
        p = transform(p, FiberedDiffeo{DoubleCover{}});
        spec = eigen_continuation(linear_part(p, cfg.tol_vanishing).h, cfg.tol_spec);
        if (std::any_of(spec.monodromy.begin(), spec.monodromy.end(), [](int e) { return e < 0; })) {
            raise(ErrorKind::EigenvalueCollision, "eigenbundles stay non-trivial on the double cover");
        }
        spec.covered = true;
    }
    nf.lambda = spec.lambda;
    nf.diagnostics.proportionality_error = spec.proportionality_error;

    if (spec.frame.max_deviation(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                           static_cast<Eigen::Index>(n)))
        > 1e-14) {
        LinearFrame diag{spec.frame.inverse()};
        p = transform(p, FiberedDiffeo{diag});
        nf.chain.steps.emplace_back(std::move(diag));
        nf.diagnostics.tail_energy = std::max(nf.diagnostics.tail_energy, detail::structure_tail_energy(p));
    }

    ReparamResult rep = reparametrize(p, spec);
    if (cfg.literal_chi) {
        // alternative constant 2π / ∫k instead of 2π / ∫k⁻¹
        const double kmean = spec.k.mean();
        std::vector<double> lit;
        for (double l : spec.lambda) {
            lit.push_back(l / kmean);
        }
        nf.diagnostics.literal_mu = lit;
        nf.diagnostics.literal_chi_end = two_pi * spec.k.reciprocal().mean() / kmean;
    }
    if (!rep.identity) {
        nf.chain.steps.emplace_back(rep.chi);
        p = std::move(rep.structure);
    }

    double mu_scale = 0;
    for (double m : rep.mu) {
        mu_scale = std::max(mu_scale, std::abs(m));
    }
    const auto nr = check_nonresonance(rep.mu, std::max<std::size_t>(2, input.order()), cfg.tol_resonance * mu_scale);
    nf.diagnostics.smallest_divisor = nr.min_gap;
    if (!nr.ok) {
        raise(ErrorKind::ResonantInput, "eigenvalue ratios are resonant up to the truncation order");
    }
    if (nr.min_gap < cfg.small_divisor) {
        nf.warnings.push_back({"small_divisor", nr.min_gap, "near-resonance among the eigenvalue ratios"});
    }

    LinearizeResult lin = linearize_theta_field(p, cfg);
    for (auto &w : lin.warnings) {
        nf.warnings.push_back(std::move(w));
    }
    if (!lin.identity) {
        nf.chain.steps.emplace_back(std::move(lin.phi));
        p = std::move(lin.structure);
    }

    QuadratizeResult quad = quadratize(p, lin.mu, cfg);
    if (!quad.identity) {
        nf.chain.steps.emplace_back(std::move(quad.phi));
        p = std::move(quad.structure);
    }
    nf.a = quad.a;

    nf.mu = diagonal_linear_part(p, cfg.tol_structure);
    const PoissonStructure ideal = PoissonStructure::normal_form(nf.mu, nf.a, p.order(), p.grid());
    for (std::size_t i = 0; i < n; ++i) {
        nf.diagnostics.theta_deviation = std::max(nf.diagnostics.theta_deviation,
                                                  max_abs_difference(p.theta_bracket(i), ideal.theta_bracket(i)));
        for (std::size_t j = i + 1; j < n; ++j) {
            nf.diagnostics.pair_deviation = std::max(nf.diagnostics.pair_deviation,
                                                     max_abs_difference(p.bracket(i, j), ideal.bracket(i, j)));
        }
    }
    nf.diagnostics.truncation_residual = std::max(nf.diagnostics.theta_deviation, nf.diagnostics.pair_deviation);
    nf.diagnostics.jacobi_residual = jacobiator(p).norm;
    if (nf.diagnostics.tail_energy > cfg.tail_warning) {
        nf.warnings.push_back({"tail_energy", nf.diagnostics.tail_energy,
                               "coefficient spectra reach the upper quarter of the grid; consider a larger grid"});
    }
    nf.structure = std::move(p);
    return nf;
}

} // namespace pnf

#endif
