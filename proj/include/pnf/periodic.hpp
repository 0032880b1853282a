#ifndef PNF_PERIODIC_HPP
#define PNF_PERIODIC_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include <pnf/error.hpp>

namespace pnf
{

inline constexpr double two_pi = 2 * std::numbers::pi;

namespace detail
{

inline bool is_power_of_two(std::size_t m)
{
    return m != 0 && (m & (m - 1)) == 0;
}

// One FFT object per thread: Eigen's kissfft backend caches twiddle tables
// internally and must not be shared between threads.
inline Eigen::FFT<double> &thread_fft()
{
    thread_local Eigen::FFT<double> fft;
    return fft;
}

inline std::vector<std::complex<double>> forward_fft(const std::vector<double> &x)
{
    std::vector<std::complex<double>> out;
    thread_fft().fwd(out, x);
    return out;
}

inline std::vector<double> inverse_fft(const std::vector<std::complex<double>> &spec)
{
    std::vector<double> out;
    thread_fft().inv(out, spec);
    return out;
}

// Signed wavenumber of FFT bin k on a grid of size m.
inline long wavenumber(std::size_t k, std::size_t m)
{
    return k <= m / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(m);
}

} // namespace detail

/// Smooth 2π-periodic real function stored as samples at θ_m = 2πm/M.
///
/// M is a power of two, at least 4. Arithmetic between two functions requires
/// equal grids; resampling is explicit via resample().
class PeriodicFn
{
public:
    explicit PeriodicFn(std::vector<double> samples) : m_samples(std::move(samples))
    {
        if (m_samples.size() < 4 || !detail::is_power_of_two(m_samples.size())) {
            raise(ErrorKind::InvalidArgument,
                  "grid size must be a power of two >= 4, got " + std::to_string(m_samples.size()));
        }
        for (double v : m_samples) {
            if (!std::isfinite(v)) {
                raise(ErrorKind::InvalidArgument, "non-finite sample in periodic function");
            }
        }
    }

    static PeriodicFn constant(std::size_t grid, double c)
    {
        return PeriodicFn(std::vector<double>(grid, c));
    }

    template <typename F>
    static PeriodicFn from_function(std::size_t grid, F &&f)
    {
        std::vector<double> s(grid);
        for (std::size_t m = 0; m < grid; ++m) {
            s[m] = f(node(grid, m));
        }
        return PeriodicFn(std::move(s));
    }

    /// Coefficients laid out as [c0, a1, b1, a2, b2, ...] for c0 + Σ a_k cos kθ + b_k sin kθ.
    static PeriodicFn from_fourier(std::size_t grid, std::span<const double> coeffs)
    {
        return from_function(grid, [&](double t) {
            double v = coeffs.empty() ? 0.0 : coeffs[0];
            for (std::size_t i = 1; i < coeffs.size(); ++i) {
                const double k = static_cast<double>((i + 1) / 2);
                v += coeffs[i] * ((i % 2 == 1) ? std::cos(k * t) : std::sin(k * t));
            }
            return v;
        });
    }

    static double node(std::size_t grid, std::size_t m)
    {
        return two_pi * static_cast<double>(m) / static_cast<double>(grid);
    }

    std::size_t size() const noexcept
    {
        return m_samples.size();
    }
    double operator[](std::size_t m) const
    {
        return m_samples[m];
    }
    const std::vector<double> &samples() const noexcept
    {
        return m_samples;
    }

    double max_abs() const
    {
        double r = 0;
        for (double v : m_samples) {
            r = std::max(r, std::abs(v));
        }
        return r;
    }
    double min_value() const
    {
        return *std::min_element(m_samples.begin(), m_samples.end());
    }
    double max_value() const
    {
        return *std::max_element(m_samples.begin(), m_samples.end());
    }
    bool is_zero() const
    {
        return std::all_of(m_samples.begin(), m_samples.end(), [](double v) { return v == 0.0; });
    }
    /// Largest deviation from the mean value.
    double variation() const
    {
        const double mu = mean();
        double r = 0;
        for (double v : m_samples) {
            r = std::max(r, std::abs(v - mu));
        }
        return r;
    }

    /// (1/2π)∫₀^{2π} f, exact for band-limited f (trapezoid rule).
    double mean() const
    {
        // compensated sum, so constants come back exactly
        double s = 0, c = 0;
        for (double v : m_samples) {
            const double t = s + v;
            c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
            s = t;
        }
        return (s + c) / static_cast<double>(m_samples.size());
    }

    PeriodicFn &operator+=(const PeriodicFn &o)
    {
        check_grid(o);
        for (std::size_t m = 0; m < size(); ++m) {
            m_samples[m] += o.m_samples[m];
        }
        return *this;
    }
    PeriodicFn &operator-=(const PeriodicFn &o)
    {
        check_grid(o);
        for (std::size_t m = 0; m < size(); ++m) {
            m_samples[m] -= o.m_samples[m];
        }
        return *this;
    }
    PeriodicFn &operator*=(const PeriodicFn &o)
    {
        check_grid(o);
        for (std::size_t m = 0; m < size(); ++m) {
            m_samples[m] *= o.m_samples[m];
        }
        return *this;
    }
    PeriodicFn &operator*=(double c)
    {
        for (double &v : m_samples) {
            v *= c;
        }
        return *this;
    }
    PeriodicFn &operator+=(double c)
    {
        for (double &v : m_samples) {
            v += c;
        }
        return *this;
    }

    friend PeriodicFn operator+(PeriodicFn a, const PeriodicFn &b)
    {
        return a += b;
    }
    friend PeriodicFn operator-(PeriodicFn a, const PeriodicFn &b)
    {
        return a -= b;
    }
    friend PeriodicFn operator*(PeriodicFn a, const PeriodicFn &b)
    {
        return a *= b;
    }
    friend PeriodicFn operator*(PeriodicFn a, double c)
    {
        return a *= c;
    }
    friend PeriodicFn operator*(double c, PeriodicFn a)
    {
        return a *= c;
    }
    friend PeriodicFn operator+(PeriodicFn a, double c)
    {
        return a += c;
    }
    friend PeriodicFn operator-(PeriodicFn a, double c)
    {
        return a += -c;
    }
    friend PeriodicFn operator-(PeriodicFn a)
    {
        return a *= -1.0;
    }

    /// Default zero tolerance: 1e-9 relative to max|f|.
    double default_tol_zero() const
    {
        return 1e-9 * max_abs();
    }

    PeriodicFn reciprocal(double tol_zero) const
    {
        double lo = std::abs(m_samples[0]);
        for (double v : m_samples) {
            lo = std::min(lo, std::abs(v));
        }
        if (lo <= tol_zero) {
            raise(ErrorKind::ZeroDivide, "function vanishes (min |f| = " + std::to_string(lo) + ")");
        }
        return map([](double v) { return 1.0 / v; });
    }
    PeriodicFn reciprocal() const
    {
        return reciprocal(default_tol_zero());
    }

    PeriodicFn exp() const
    {
        return map([](double v) { return std::exp(v); });
    }

    PeriodicFn log(double tol_zero) const
    {
        if (min_value() <= tol_zero) {
            raise(ErrorKind::ZeroDivide, "log of a function that is not strictly positive");
        }
        return map([](double v) { return std::log(v); });
    }
    PeriodicFn log() const
    {
        return log(default_tol_zero());
    }

    template <typename F>
    PeriodicFn map(F &&f) const
    {
        std::vector<double> s(size());
        for (std::size_t m = 0; m < size(); ++m) {
            s[m] = f(m_samples[m]);
        }
        return PeriodicFn(std::move(s));
    }

    std::vector<std::complex<double>> spectrum() const
    {
        return detail::forward_fft(m_samples);
    }

    /// Spectral derivative d/dθ; the Nyquist mode is dropped.
    PeriodicFn derivative() const
    {
        auto spec = spectrum();
        const std::size_t grid = size();
        for (std::size_t k = 0; k < grid; ++k) {
            const long w = detail::wavenumber(k, grid);
            if (k == grid / 2) {
                spec[k] = 0;
            } else {
                spec[k] *= std::complex<double>(0.0, static_cast<double>(w));
            }
        }
        return PeriodicFn(detail::inverse_fft(spec));
    }

    /// Periodic antiderivative of f - mean(f), normalized by F(0) = 0.
    PeriodicFn antiderivative() const
    {
        auto spec = spectrum();
        const std::size_t grid = size();
        spec[0] = 0;
        spec[grid / 2] = 0;
        for (std::size_t k = 1; k < grid; ++k) {
            if (k == grid / 2) {
                continue;
            }
            spec[k] /= std::complex<double>(0.0, static_cast<double>(detail::wavenumber(k, grid)));
        }
        auto s = detail::inverse_fft(spec);
        const double s0 = s[0];
        for (double &v : s) {
            v -= s0;
        }
        return PeriodicFn(std::move(s));
    }

    /// Trigonometric interpolant evaluated at an arbitrary angle.
    double eval(double theta) const
    {
        return eval_spectrum(spectrum(), size(), theta);
    }

    static double eval_spectrum(const std::vector<std::complex<double>> &spec, std::size_t grid, double theta)
    {
        double acc = spec[0].real();
        const std::complex<double> step = std::polar(1.0, theta);
        std::complex<double> rot = step;
        for (std::size_t k = 1; k < grid / 2; ++k) {
            acc += 2.0 * (spec[k] * rot).real();
            rot *= step;
        }
        acc += spec[grid / 2].real() * std::cos(static_cast<double>(grid / 2) * theta);
        return acc / static_cast<double>(grid);
    }

    /// Values of the interpolant at the given angles (one FFT shared by all points).
    std::vector<double> eval_many(std::span<const double> thetas) const
    {
        const auto spec = spectrum();
        std::vector<double> out(thetas.size());
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            out[i] = eval_spectrum(spec, size(), thetas[i]);
        }
        return out;
    }

    /// Spectral resampling onto a grid of size new_grid (zero padding or truncation).
    PeriodicFn resample(std::size_t new_grid) const
    {
        const std::size_t grid = size();
        if (new_grid == grid) {
            return *this;
        }
        if (new_grid < 4 || !detail::is_power_of_two(new_grid)) {
            raise(ErrorKind::InvalidArgument, "resample target must be a power of two >= 4");
        }
        const auto spec = spectrum();
        std::vector<std::complex<double>> out(new_grid, 0.0);
        const double scale = static_cast<double>(new_grid) / static_cast<double>(grid);
        const std::size_t keep = std::min(grid, new_grid) / 2;
        out[0] = spec[0] * scale;
        for (std::size_t k = 1; k < keep; ++k) {
            out[k] = spec[k] * scale;
            out[new_grid - k] = spec[grid - k] * scale;
        }
        if (new_grid > grid) {
            // Split the old Nyquist cosine evenly between ±grid/2.
            out[keep] = 0.5 * spec[keep].real() * scale;
            out[new_grid - keep] = out[keep];
        } else {
            out[keep] = (spec[keep] + spec[grid - keep]).real() * scale;
        }
        return PeriodicFn(detail::inverse_fft(out));
    }

    /// Fraction of spectral energy in wavenumbers |k| >= M/4; an aliasing indicator.
    double tail_energy() const
    {
        const auto spec = spectrum();
        const std::size_t grid = size();
        double total = 0, tail = 0;
        for (std::size_t k = 0; k < grid; ++k) {
            const double e = std::norm(spec[k]);
            total += e;
            if (std::abs(detail::wavenumber(k, grid)) >= static_cast<long>(grid / 4)) {
                tail += e;
            }
        }
        return total > 0 ? tail / total : 0.0;
    }

private:
    void check_grid(const PeriodicFn &o) const
    {
        if (o.size() != size()) {
            raise(ErrorKind::DimensionMismatch,
                  "grid sizes differ: " + std::to_string(size()) + " vs " + std::to_string(o.size()));
        }
    }

    std::vector<double> m_samples;
};

struct MeanAndAntiderivative {
    double mean;
    PeriodicFn antiderivative;
};

inline MeanAndAntiderivative mean_and_antiderivative(const PeriodicFn &f)
{
    return {f.mean(), f.antiderivative()};
}

} // namespace pnf

#endif
