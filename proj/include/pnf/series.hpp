#ifndef PNF_SERIES_HPP
#define PNF_SERIES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <pnf/error.hpp>
#include <pnf/periodic.hpp>

namespace pnf
{

/// Exponent vector (p_1, ..., p_n) of a monomial x^p.
using MultiIndex = std::vector<unsigned>;

inline unsigned total_degree(const MultiIndex &p)
{
    unsigned d = 0;
    for (unsigned e : p) {
        d += e;
    }
    return d;
}

/// The monomials x^p with |p| <= order in n variables, in graded order
/// (degree ascending, lexicographically descending within a degree).
class MonomialBasis
{
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    MonomialBasis(std::size_t n, std::size_t order) : m_n(n), m_order(order)
    {
        if (n == 0) {
            raise(ErrorKind::InvalidArgument, "series need at least one variable");
        }
        double table = 1;
        for (std::size_t k = 0; k < n; ++k) {
            table *= static_cast<double>(order + 1);
        }
        if (table > 5e7) {
            raise(ErrorKind::InvalidArgument, "monomial table too large for n = " + std::to_string(n)
                                                  + ", order = " + std::to_string(order));
        }
        m_lookup.assign(static_cast<std::size_t>(table), npos);
        m_radix.resize(n);
        std::size_t r = 1;
        for (std::size_t k = 0; k < n; ++k) {
            m_radix[k] = r;
            r *= order + 1;
        }

        MultiIndex cur(n, 0);
        for (std::size_t d = 0; d <= order; ++d) {
            m_degree_start.push_back(m_exps.size());
            enumerate(cur, 0, static_cast<unsigned>(d));
        }
        m_degree_start.push_back(m_exps.size());

        m_codes.resize(m_exps.size());
        for (std::size_t i = 0; i < m_exps.size(); ++i) {
            m_codes[i] = encode(m_exps[i]);
            m_lookup[m_codes[i]] = i;
        }
        m_lower.assign(m_exps.size() * n, npos);
        for (std::size_t i = 0; i < m_exps.size(); ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                if (m_exps[i][k] > 0) {
                    m_lower[i * n + k] = m_lookup[m_codes[i] - m_radix[k]];
                }
            }
        }
    }

    /// Shared, immutable basis for (n, order).
    static std::shared_ptr<const MonomialBasis> get(std::size_t n, std::size_t order)
    {
        static std::mutex mutex;
        static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const MonomialBasis>> cache;
        std::lock_guard lock(mutex);
        auto &slot = cache[{n, order}];
        if (!slot) {
            slot = std::make_shared<const MonomialBasis>(n, order);
        }
        return slot;
    }

    std::size_t nvars() const noexcept
    {
        return m_n;
    }
    std::size_t order() const noexcept
    {
        return m_order;
    }
    std::size_t size() const noexcept
    {
        return m_exps.size();
    }
    const MultiIndex &exponent(std::size_t i) const
    {
        return m_exps[i];
    }
    unsigned degree(std::size_t i) const
    {
        return total_degree(m_exps[i]);
    }
    /// First index of degree d; degree_begin(order + 1) == size().
    std::size_t degree_begin(std::size_t d) const
    {
        return m_degree_start[std::min(d, m_order + 1)];
    }

    std::size_t index(const MultiIndex &p) const
    {
        if (p.size() != m_n) {
            raise(ErrorKind::DimensionMismatch, "multi-index has wrong length");
        }
        if (total_degree(p) > m_order) {
            return npos;
        }
        return m_lookup[encode(p)];
    }

    /// Index of x^(p_i + p_j), or npos if it exceeds the order.
    std::size_t product(std::size_t i, std::size_t j) const
    {
        if (degree(i) + degree(j) > m_order) {
            return npos;
        }
        return m_lookup[m_codes[i] + m_codes[j]];
    }

    /// Index of x^(p - e_k), or npos if p_k == 0.
    std::size_t lower(std::size_t i, std::size_t k) const
    {
        return m_lower[i * m_n + k];
    }

private:
    void enumerate(MultiIndex &cur, std::size_t k, unsigned remaining)
    {
        if (k + 1 == m_n) {
            cur[k] = remaining;
            m_exps.push_back(cur);
            return;
        }
        for (unsigned e = remaining + 1; e-- > 0;) {
            cur[k] = e;
            enumerate(cur, k + 1, remaining - e);
        }
        cur[k] = 0;
    }

    std::size_t encode(const MultiIndex &p) const
    {
        std::size_t c = 0;
        for (std::size_t k = 0; k < m_n; ++k) {
            c += p[k] * m_radix[k];
        }
        return c;
    }

    std::size_t m_n;
    std::size_t m_order;
    std::vector<MultiIndex> m_exps;
    std::vector<std::size_t> m_degree_start;
    std::vector<std::size_t> m_codes;
    std::vector<std::size_t> m_radix;
    std::vector<std::size_t> m_lookup;
    std::vector<std::size_t> m_lower;
};

/// Truncated power series in x_1..x_n whose coefficients are periodic functions of θ.
///
/// Storage is dense: one row of `grid` samples per monomial of the basis.
class FormalSeries
{
public:
    FormalSeries(std::size_t n, std::size_t order, std::size_t grid)
        : m_basis(MonomialBasis::get(n, order)), m_grid(grid), m_data(m_basis->size() * grid, 0.0)
    {
        if (grid < 4 || !detail::is_power_of_two(grid)) {
            raise(ErrorKind::InvalidArgument, "grid size must be a power of two >= 4");
        }
    }

    static FormalSeries variable(std::size_t n, std::size_t order, std::size_t grid, std::size_t k)
    {
        FormalSeries s(n, order, grid);
        if (order >= 1) {
            MultiIndex p(n, 0);
            p.at(k) = 1;
            s.set(p, PeriodicFn::constant(grid, 1.0));
        }
        return s;
    }

    static FormalSeries constant(std::size_t n, std::size_t order, const PeriodicFn &c)
    {
        FormalSeries s(n, order, c.size());
        s.set(MultiIndex(n, 0), c);
        return s;
    }

    static FormalSeries monomial(std::size_t n, std::size_t order, const MultiIndex &p, const PeriodicFn &c)
    {
        FormalSeries s(n, order, c.size());
        s.set(p, c);
        return s;
    }

    /// A zero series sharing the shape of this one.
    FormalSeries zero_like() const
    {
        return FormalSeries(nvars(), order(), grid());
    }

    std::size_t nvars() const noexcept
    {
        return m_basis->nvars();
    }
    std::size_t order() const noexcept
    {
        return m_basis->order();
    }
    std::size_t grid() const noexcept
    {
        return m_grid;
    }
    const MonomialBasis &basis() const noexcept
    {
        return *m_basis;
    }

    std::span<const double> coeff(std::size_t idx) const
    {
        return {m_data.data() + idx * m_grid, m_grid};
    }
    std::span<double> coeff(std::size_t idx)
    {
        return {m_data.data() + idx * m_grid, m_grid};
    }

    PeriodicFn coefficient(std::size_t idx) const
    {
        auto c = coeff(idx);
        return PeriodicFn(std::vector<double>(c.begin(), c.end()));
    }
    /// Coefficient of x^p; zero when |p| exceeds the truncation order.
    PeriodicFn coefficient(const MultiIndex &p) const
    {
        const auto idx = m_basis->index(p);
        if (idx == MonomialBasis::npos) {
            return PeriodicFn::constant(m_grid, 0.0);
        }
        return coefficient(idx);
    }

    void set(std::size_t idx, const PeriodicFn &c)
    {
        check_grid(c.size());
        std::copy(c.samples().begin(), c.samples().end(), coeff(idx).begin());
    }
    /// Terms beyond the truncation order are dropped silently.
    void set(const MultiIndex &p, const PeriodicFn &c)
    {
        const auto idx = m_basis->index(p);
        if (idx != MonomialBasis::npos) {
            set(idx, c);
        }
    }

    bool term_is_zero(std::size_t idx) const
    {
        auto c = coeff(idx);
        return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
    }

    double term_max_abs(std::size_t idx) const
    {
        double r = 0;
        for (double v : coeff(idx)) {
            r = std::max(r, std::abs(v));
        }
        return r;
    }

    double max_abs() const
    {
        double r = 0;
        for (double v : m_data) {
            r = std::max(r, std::abs(v));
        }
        return r;
    }

    /// max |coefficient| over the monomials of total degree d.
    double max_abs_degree(std::size_t d) const
    {
        double r = 0;
        for (std::size_t i = m_basis->degree_begin(d); i < m_basis->degree_begin(d + 1); ++i) {
            r = std::max(r, term_max_abs(i));
        }
        return r;
    }

    FormalSeries &operator+=(const FormalSeries &o)
    {
        check_same(o);
        for (std::size_t i = 0; i < m_data.size(); ++i) {
            m_data[i] += o.m_data[i];
        }
        return *this;
    }
    FormalSeries &operator-=(const FormalSeries &o)
    {
        check_same(o);
        for (std::size_t i = 0; i < m_data.size(); ++i) {
            m_data[i] -= o.m_data[i];
        }
        return *this;
    }
    FormalSeries &operator*=(double c)
    {
        for (double &v : m_data) {
            v *= c;
        }
        return *this;
    }
    /// Multiplication by a θ-dependent scalar.
    FormalSeries &operator*=(const PeriodicFn &c)
    {
        check_grid(c.size());
        const auto &s = c.samples();
        for (std::size_t idx = 0; idx < m_basis->size(); ++idx) {
            auto row = coeff(idx);
            for (std::size_t m = 0; m < m_grid; ++m) {
                row[m] *= s[m];
            }
        }
        return *this;
    }

    friend FormalSeries operator+(FormalSeries a, const FormalSeries &b)
    {
        return a += b;
    }
    friend FormalSeries operator-(FormalSeries a, const FormalSeries &b)
    {
        return a -= b;
    }
    friend FormalSeries operator-(FormalSeries a)
    {
        return a *= -1.0;
    }
    friend FormalSeries operator*(FormalSeries a, double c)
    {
        return a *= c;
    }
    friend FormalSeries operator*(double c, FormalSeries a)
    {
        return a *= c;
    }
    friend FormalSeries operator*(FormalSeries a, const PeriodicFn &c)
    {
        return a *= c;
    }
    friend FormalSeries operator*(const PeriodicFn &c, FormalSeries a)
    {
        return a *= c;
    }

    /// Truncated product.
    friend FormalSeries operator*(const FormalSeries &a, const FormalSeries &b)
    {
        a.check_same(b);
        FormalSeries out = a.zero_like();
        a.accumulate_product(b, out);
        return out;
    }

    /// out += this * b, truncated at the order.
    void accumulate_product(const FormalSeries &b, FormalSeries &out) const
    {
        const auto &basis = *m_basis;
        const auto nz_b = b.nonzero_terms();
        const std::size_t grid = m_grid;
        for (std::size_t i : nonzero_terms()) {
            const std::size_t di = basis.degree(i);
            const double *ai = m_data.data() + i * grid;
            for (std::size_t j : nz_b) {
                if (di + basis.degree(j) > basis.order()) {
                    break; // nonzero_terms() is in graded order
                }
                const std::size_t k = basis.product(i, j);
                const double *bj = b.m_data.data() + j * grid;
                double *ok = out.m_data.data() + k * grid;
                for (std::size_t m = 0; m < grid; ++m) {
                    ok[m] += ai[m] * bj[m];
                }
            }
        }
    }

    /// Indices of the terms with a nonzero coefficient, in graded order.
    std::vector<std::size_t> nonzero_terms() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < m_basis->size(); ++i) {
            if (!term_is_zero(i)) {
                out.push_back(i);
            }
        }
        return out;
    }

    /// ∂/∂x_k.
    FormalSeries derive_x(std::size_t k) const
    {
        FormalSeries out = zero_like();
        for (std::size_t i = 0; i < m_basis->size(); ++i) {
            const unsigned e = m_basis->exponent(i)[k];
            if (e == 0 || term_is_zero(i)) {
                continue;
            }
            const std::size_t lo = m_basis->lower(i, k);
            auto src = coeff(i);
            auto dst = out.coeff(lo);
            for (std::size_t m = 0; m < m_grid; ++m) {
                dst[m] = e * src[m];
            }
        }
        return out;
    }

    /// ∂/∂θ, applied to each coefficient spectrally.
    FormalSeries derive_theta() const
    {
        return map_coefficients([](const PeriodicFn &c) { return c.derivative(); });
    }

    template <typename F>
    FormalSeries map_coefficients(F &&f) const
    {
        FormalSeries out = zero_like();
        for (std::size_t i = 0; i < m_basis->size(); ++i) {
            if (!term_is_zero(i)) {
                out.set(i, f(coefficient(i)));
            }
        }
        return out;
    }

    /// Terms of total degree <= d.
    FormalSeries truncated(std::size_t d) const
    {
        FormalSeries out = *this;
        std::fill(out.m_data.begin() + static_cast<std::ptrdiff_t>(m_basis->degree_begin(d + 1) * m_grid),
                  out.m_data.end(), 0.0);
        return out;
    }

    /// The homogeneous part of degree d.
    FormalSeries homogeneous(std::size_t d) const
    {
        FormalSeries out = zero_like();
        const std::size_t b = m_basis->degree_begin(d) * m_grid, e = m_basis->degree_begin(d + 1) * m_grid;
        std::copy(m_data.begin() + static_cast<std::ptrdiff_t>(b), m_data.begin() + static_cast<std::ptrdiff_t>(e),
                  out.m_data.begin() + static_cast<std::ptrdiff_t>(b));
        return out;
    }

    /// Same terms re-embedded at another truncation order (extra terms are dropped).
    FormalSeries with_order(std::size_t new_order) const
    {
        FormalSeries out(nvars(), new_order, m_grid);
        for (std::size_t i = 0; i < m_basis->size(); ++i) {
            if (!term_is_zero(i)) {
                out.set(m_basis->exponent(i), coefficient(i));
            }
        }
        return out;
    }

    /// a ∘ F: substitute x_k := F[k](θ, x). Every F[k] must have zero constant term.
    FormalSeries compose(const std::vector<FormalSeries> &subst) const
    {
        if (subst.size() != nvars()) {
            raise(ErrorKind::DimensionMismatch, "substitution needs one series per variable");
        }
        for (const auto &f : subst) {
            check_same(f);
            if (!f.term_is_zero(0)) {
                raise(ErrorKind::InvalidArgument, "substituted series must vanish at x = 0");
            }
        }
        const auto &basis = *m_basis;
        std::vector<std::optional<FormalSeries>> powers(basis.size());
        FormalSeries out = zero_like();
        for (std::size_t idx : nonzero_terms()) {
            const FormalSeries &pw = power(idx, subst, powers);
            const auto c = coeff(idx);
            for (std::size_t t = basis.degree_begin(basis.degree(idx)); t < basis.size(); ++t) {
                auto src = pw.coeff(t);
                auto dst = out.coeff(t);
                for (std::size_t m = 0; m < m_grid; ++m) {
                    dst[m] += c[m] * src[m];
                }
            }
        }
        return out;
    }

    /// Numeric value at (θ, x) through the trigonometric interpolant of each coefficient.
    double evaluate(double theta, std::span<const double> x) const
    {
        double acc = 0;
        for (std::size_t idx : nonzero_terms()) {
            double mono = 1;
            const auto &p = m_basis->exponent(idx);
            for (std::size_t k = 0; k < p.size(); ++k) {
                mono *= std::pow(x[k], static_cast<double>(p[k]));
            }
            acc += coefficient(idx).eval(theta) * mono;
        }
        return acc;
    }

    friend double max_abs_difference(const FormalSeries &a, const FormalSeries &b)
    {
        a.check_same(b);
        double r = 0;
        for (std::size_t i = 0; i < a.m_data.size(); ++i) {
            r = std::max(r, std::abs(a.m_data[i] - b.m_data[i]));
        }
        return r;
    }

    void check_same(const FormalSeries &o) const
    {
        if (o.nvars() != nvars() || o.order() != order() || o.grid() != grid()) {
            raise(ErrorKind::DimensionMismatch, "series shapes differ (n, order, grid)");
        }
    }

private:
    void check_grid(std::size_t g) const
    {
        if (g != m_grid) {
            raise(ErrorKind::DimensionMismatch, "coefficient grid does not match series grid");
        }
    }

    const FormalSeries &power(std::size_t idx, const std::vector<FormalSeries> &subst,
                              std::vector<std::optional<FormalSeries>> &memo) const
    {
        if (memo[idx]) {
            return *memo[idx];
        }
        const auto &p = m_basis->exponent(idx);
        if (total_degree(p) == 0) {
            memo[idx] = constant(nvars(), order(), PeriodicFn::constant(m_grid, 1.0));
            return *memo[idx];
        }
        std::size_t k = 0;
        while (p[k] == 0) {
            ++k;
        }
        const FormalSeries &parent = power(m_basis->lower(idx, k), subst, memo);
        memo[idx] = parent * subst[k];
        return *memo[idx];
    }

    std::shared_ptr<const MonomialBasis> m_basis;
    std::size_t m_grid;
    std::vector<double> m_data;
};

double max_abs_difference(const FormalSeries &a, const FormalSeries &b);

} // namespace pnf

#endif
