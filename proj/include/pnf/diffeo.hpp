#ifndef PNF_DIFFEO_HPP
#define PNF_DIFFEO_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <pnf/error.hpp>
#include <pnf/periodic.hpp>
#include <pnf/periodic_matrix.hpp>
#include <pnf/series.hpp>

namespace pnf
{

// All diffeomorphisms map old coordinates to new ones and preserve the fibration
// S¹×Rⁿ → S¹; none of them moves θ in an x-dependent way.

/// θ' = χ(θ) = θ + shift(θ), x' = x. χ must be strictly increasing.
struct BaseReparam {
    PeriodicFn shift;
};

/// θ' = θ, x'_i = Φ_i(θ, x) with Φ(θ, 0) = 0 and invertible linear part.
struct FiberwiseFormal {
    std::vector<FormalSeries> components;
};

/// θ' = θ, x' = G(θ) x.
struct LinearFrame {
    PeriodicMatrix matrix;
};

/// Pullback along (θ̃, x) ↦ (2θ̃, x): the new structure lives on the source circle.
struct DoubleCover {
};

/// x_i ↦ signs_i · x_i with signs_i ∈ {+1, -1}.
struct Reflection {
    std::vector<int> signs;
};

using FiberedDiffeo = std::variant<BaseReparam, FiberwiseFormal, LinearFrame, DoubleCover, Reflection>;

/// Steps applied in order: steps[0] first.
struct DiffeoChain {
    std::vector<FiberedDiffeo> steps;
};

inline std::string kind_name(const FiberedDiffeo &phi)
{
    return std::visit(
        [](const auto &d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BaseReparam>) {
                return "BaseReparam";
            } else if constexpr (std::is_same_v<T, FiberwiseFormal>) {
                return "FiberwiseFormal";
            } else if constexpr (std::is_same_v<T, LinearFrame>) {
                return "LinearFrame";
            } else if constexpr (std::is_same_v<T, DoubleCover>) {
                return "DoubleCover";
            } else {
                return "Reflection";
            }
        },
        phi);
}

namespace detail
{

inline std::vector<FormalSeries> apply_matrix(const PeriodicMatrix &g, const std::vector<FormalSeries> &v)
{
    std::vector<FormalSeries> out;
    const std::size_t n = g.dim();
    for (std::size_t i = 0; i < n; ++i) {
        FormalSeries acc = v.at(0).zero_like();
        for (std::size_t j = 0; j < n; ++j) {
            const PeriodicFn gij = g.entry(i, j);
            if (!gij.is_zero()) {
                acc += gij * v[j];
            }
        }
        out.push_back(std::move(acc));
    }
    return out;
}

inline std::vector<FormalSeries> coordinate_series(std::size_t n, std::size_t order, std::size_t grid)
{
    std::vector<FormalSeries> xs;
    for (std::size_t k = 0; k < n; ++k) {
        xs.push_back(FormalSeries::variable(n, order, grid, k));
    }
    return xs;
}

/// Linear part (coefficient of x_j in component i) of a fiberwise map.
inline PeriodicMatrix linear_part_of(const std::vector<FormalSeries> &f)
{
    const std::size_t n = f.size();
    PeriodicMatrix g(n, f.at(0).grid());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            MultiIndex p(n, 0);
            p[j] = 1;
            g.set(i, j, f[i].coefficient(p));
        }
    }
    return g;
}

inline void check_reparam(const BaseReparam &r)
{
    const PeriodicFn slope = r.shift.derivative() + 1.0;
    if (slope.min_value() <= 1e-9) {
        raise(ErrorKind::InvalidArgument, "circle reparametrization is not strictly increasing");
    }
}

/// c ↦ c(θ + shift(θ)) at every grid node.
inline PeriodicFn reparam_coefficient(const PeriodicFn &c, const std::vector<double> &targets)
{
    return PeriodicFn(c.eval_many(targets));
}

inline std::vector<double> reparam_targets(const BaseReparam &r)
{
    const std::size_t grid = r.shift.size();
    std::vector<double> t(grid);
    for (std::size_t m = 0; m < grid; ++m) {
        t[m] = PeriodicFn::node(grid, m) + r.shift[m];
    }
    return t;
}

} // namespace detail

/// Fiberwise components Φ_i(θ, x) for the kinds that fix θ.
inline std::vector<FormalSeries> fiber_components(const FiberedDiffeo &phi, std::size_t n, std::size_t order,
                                                  std::size_t grid)
{
    if (const auto *f = std::get_if<FiberwiseFormal>(&phi)) {
        return f->components;
    }
    if (const auto *l = std::get_if<LinearFrame>(&phi)) {
        return detail::apply_matrix(l->matrix, detail::coordinate_series(n, order, grid));
    }
    if (const auto *r = std::get_if<Reflection>(&phi)) {
        auto xs = detail::coordinate_series(n, order, grid);
        for (std::size_t k = 0; k < n; ++k) {
            xs[k] *= static_cast<double>(r->signs.at(k));
        }
        return xs;
    }
    raise(ErrorKind::InvalidArgument, kind_name(phi) + " is not a fiberwise map");
}

/// Checks the structural invariants of a diffeomorphism against a problem shape.
inline void validate(const FiberedDiffeo &phi, std::size_t n, std::size_t grid)
{
    if (const auto *r = std::get_if<BaseReparam>(&phi)) {
        if (r->shift.size() != grid) {
            raise(ErrorKind::DimensionMismatch, "reparametrization grid mismatch");
        }
        detail::check_reparam(*r);
    } else if (const auto *f = std::get_if<FiberwiseFormal>(&phi)) {
        if (f->components.size() != n) {
            raise(ErrorKind::DimensionMismatch, "fiberwise map needs n components");
        }
        for (const auto &c : f->components) {
            if (c.nvars() != n || c.grid() != grid) {
                raise(ErrorKind::DimensionMismatch, "fiberwise component shape mismatch");
            }
            if (c.term_max_abs(0) > 0) {
                raise(ErrorKind::InvalidArgument, "fiberwise map must fix the circle (zero constant term)");
            }
        }
        (void)detail::linear_part_of(f->components).inverse();
    } else if (const auto *l = std::get_if<LinearFrame>(&phi)) {
        if (l->matrix.dim() != n || l->matrix.grid() != grid) {
            raise(ErrorKind::DimensionMismatch, "linear frame shape mismatch");
        }
        (void)l->matrix.inverse();
    } else if (const auto *s = std::get_if<Reflection>(&phi)) {
        if (s->signs.size() != n) {
            raise(ErrorKind::DimensionMismatch, "reflection needs n signs");
        }
        for (int e : s->signs) {
            if (e != 1 && e != -1) {
                raise(ErrorKind::InvalidArgument, "reflection signs must be +1 or -1");
            }
        }
    }
}

/// a ∘ Φ, truncated at the order of a.
inline FormalSeries compose(const FormalSeries &a, const FiberedDiffeo &phi)
{
    validate(phi, a.nvars(), a.grid());
    if (const auto *r = std::get_if<BaseReparam>(&phi)) {
        const auto targets = detail::reparam_targets(*r);
        return a.map_coefficients([&](const PeriodicFn &c) { return detail::reparam_coefficient(c, targets); });
    }
    if (std::holds_alternative<DoubleCover>(phi)) {
        return a.map_coefficients([](const PeriodicFn &c) {
            std::vector<double> s(c.size());
            for (std::size_t m = 0; m < c.size(); ++m) {
                s[m] = c[(2 * m) % c.size()];
            }
            return PeriodicFn(std::move(s));
        });
    }
    if (const auto *s = std::get_if<Reflection>(&phi)) {
        FormalSeries out = a;
        for (std::size_t idx = 0; idx < a.basis().size(); ++idx) {
            const auto &p = a.basis().exponent(idx);
            int sign = 1;
            for (std::size_t k = 0; k < p.size(); ++k) {
                if (p[k] % 2 == 1) {
                    sign *= s->signs[k];
                }
            }
            if (sign < 0) {
                for (double &v : out.coeff(idx)) {
                    v = -v;
                }
            }
        }
        return out;
    }
    return a.compose(fiber_components(phi, a.nvars(), a.order(), a.grid()));
}

inline FormalSeries compose(const FormalSeries &a, const DiffeoChain &chain)
{
    FormalSeries out = a;
    // a ∘ (Φ_k ∘ ... ∘ Φ_1) = ((a ∘ Φ_k) ∘ ...) ∘ Φ_1
    for (auto it = chain.steps.rbegin(); it != chain.steps.rend(); ++it) {
        out = compose(out, *it);
    }
    return out;
}

/// Formal inverse of a fiberwise map by degree-by-degree reversion up to the order.
inline std::vector<FormalSeries> invert_fiberwise(const std::vector<FormalSeries> &f)
{
    const std::size_t n = f.size();
    const std::size_t order = f.at(0).order();
    const std::size_t grid = f.at(0).grid();
    const PeriodicMatrix lin = detail::linear_part_of(f);
    const PeriodicMatrix lin_inv = lin.inverse();

    // f = L x + h(x) with h of degree >= 2; iterate X <- L^{-1}(y - h(X)).
    std::vector<FormalSeries> h;
    for (std::size_t i = 0; i < n; ++i) {
        FormalSeries hi = f[i];
        for (std::size_t j = 0; j < n; ++j) {
            MultiIndex p(n, 0);
            p[j] = 1;
            hi.set(p, PeriodicFn::constant(grid, 0.0));
        }
        h.push_back(std::move(hi));
    }
    const auto ys = detail::coordinate_series(n, order, grid);
    std::vector<FormalSeries> x = detail::apply_matrix(lin_inv, ys);
    for (std::size_t r = 2; r <= order; ++r) {
        std::vector<FormalSeries> rhs;
        for (std::size_t i = 0; i < n; ++i) {
            rhs.push_back(ys[i] - h[i].compose(x).truncated(r));
        }
        x = detail::apply_matrix(lin_inv, rhs);
    }
    return x;
}

/// Inverse diffeomorphism. DoubleCover has none.
inline FiberedDiffeo inverse(const FiberedDiffeo &phi)
{
    if (const auto *r = std::get_if<BaseReparam>(&phi)) {
        detail::check_reparam(*r);
        const std::size_t grid = r->shift.size();
        const auto spec = r->shift.spectrum();
        const auto dspec = r->shift.derivative().spectrum();
        std::vector<double> inv(grid);
        for (std::size_t m = 0; m < grid; ++m) {
            const double target = PeriodicFn::node(grid, m);
            double t = target - r->shift[m];
            for (int it = 0; it < 60; ++it) {
                const double g = t + PeriodicFn::eval_spectrum(spec, grid, t) - target;
                const double dg = 1.0 + PeriodicFn::eval_spectrum(dspec, grid, t);
                const double step = g / dg;
                t -= step;
                if (std::abs(step) < 1e-15) {
                    break;
                }
            }
            inv[m] = t - target;
        }
        return BaseReparam{PeriodicFn(std::move(inv))};
    }
    if (const auto *f = std::get_if<FiberwiseFormal>(&phi)) {
        return FiberwiseFormal{invert_fiberwise(f->components)};
    }
    if (const auto *l = std::get_if<LinearFrame>(&phi)) {
        return LinearFrame{l->matrix.inverse()};
    }
    if (const auto *s = std::get_if<Reflection>(&phi)) {
        return *s;
    }
    raise(ErrorKind::InvalidArgument, "the double cover has no inverse");
}

} // namespace pnf

#endif
