#ifndef XFLOW_CONVEX_HPP
#define XFLOW_CONVEX_HPP

// Sampled convex functions: the z -> e transform, the discrete Legendre
// transform, and exact piecewise-linear convex interpolants.
//
// +infinity (IEEE) is the sentinel for points outside the effective domain.
// NaN, -infinity and DBL_MAX are rejected in samples.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "xflow/errors.hpp"

namespace xflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_inf_sentinel(double v) noexcept { return v == kInf; }

struct SampledFunction {
    std::vector<double> x;
    std::vector<double> f;
};

enum class Quadrature {
    Cubic,           // 4-point Lagrange, O(h^4); default for smooth samples
    PiecewiseLinear  // trapezoid; exact for the piecewise-linear interpolant
};

namespace detail {

inline void check_sample_value(double v, std::size_t i) {
    if (std::isnan(v) || v == -kInf || v == std::numeric_limits<double>::max()) {
        throw std::invalid_argument("sample " + std::to_string(i) +
                                    " is NaN, -inf or the reserved largest finite value");
    }
}

inline void check_samples(std::span<const double> x, std::span<const double> f) {
    if (x.size() != f.size()) {
        throw std::invalid_argument("sample abscissae and values differ in length");
    }
    if (x.size() < 2) {
        throw std::invalid_argument("need at least two samples");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) {
            throw std::invalid_argument("sample abscissa " + std::to_string(i) + " is not finite");
        }
        if (i > 0 && !(x[i] > x[i - 1])) {
            throw std::invalid_argument("sample abscissae must be strictly increasing (index " +
                                        std::to_string(i) + ")");
        }
        check_sample_value(f[i], i);
    }
}

// Number of leading finite samples; the rest must all be +inf.
inline std::size_t finite_prefix(std::span<const double> f) {
    std::size_t n = 0;
    while (n < f.size() && std::isfinite(f[n])) ++n;
    for (std::size_t i = n; i < f.size(); ++i) {
        if (std::isfinite(f[i])) {
            throw NonConvexError("finite value after +inf: effective domain is not an interval", i);
        }
    }
    return n;
}

inline double lagrange4(const std::array<double, 4>& xs, const std::array<double, 4>& fs,
                        double x) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        double w = 1.0;
        for (int j = 0; j < 4; ++j) {
            if (j != i) w *= (x - xs[j]) / (xs[i] - xs[j]);
        }
        s += w * fs[i];
    }
    return s;
}

// Integral over [x[i], x[i+1]] of the cubic through the four nearest samples,
// evaluated exactly with 2-point Gauss-Legendre.
inline double cubic_interval_integral(std::span<const double> x, std::span<const double> f,
                                      std::size_t i) {
    const std::size_t n = x.size();
    std::size_t s = (i == 0) ? 0 : i - 1;
    if (s + 3 >= n) s = n - 4;
    const std::array<double, 4> xs{x[s], x[s + 1], x[s + 2], x[s + 3]};
    const std::array<double, 4> fs{f[s], f[s + 1], f[s + 2], f[s + 3]};
    const double mid = 0.5 * (x[i] + x[i + 1]);
    const double half = 0.5 * (x[i + 1] - x[i]);
    const double g = half / std::sqrt(3.0);
    return half * (lagrange4(xs, fs, mid - g) + lagrange4(xs, fs, mid + g));
}

} // namespace detail

// Throws NonConvexError at the first index whose discrete second difference
// is below -tol (relative to the local slope magnitude).
inline void check_convex(std::span<const double> x, std::span<const double> f,
                         double tol = 1e-9) {
    const std::size_t n = detail::finite_prefix(f);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double left = (f[i] - f[i - 1]) / (x[i] - x[i - 1]);
        const double right = (f[i + 1] - f[i]) / (x[i + 1] - x[i]);
        if (right < left - tol * (1.0 + std::abs(left) + std::abs(right))) {
            throw NonConvexError("samples are not convex at index " + std::to_string(i), i);
        }
    }
}

// Cumulative integral of the samples starting at x[0].
inline std::vector<double> cumulative_integral(std::span<const double> x,
                                               std::span<const double> f,
                                               Quadrature quad = Quadrature::Cubic) {
    const std::size_t n = x.size();
    std::vector<double> out(n, 0.0);
    const bool cubic = quad == Quadrature::Cubic && n >= 4;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double piece = cubic ? detail::cubic_interval_integral(x, f, i)
                                   : 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
        out[i + 1] = out[i] + piece;
    }
    return out;
}

// e(a) = a z(a) - 2 int_0^a z(s) ds on the samples; +inf where z is +inf.
// Requires x[0] == 0, z(0) == 0 and convex samples.
inline SampledFunction e_transform(const SampledFunction& z, Quadrature quad = Quadrature::Cubic) {
    detail::check_samples(z.x, z.f);
    if (z.x.front() != 0.0 || z.f.front() != 0.0) {
        throw std::invalid_argument("e_transform needs z sampled from a = 0 with z(0) = 0");
    }
    const std::size_t n = detail::finite_prefix(z.f);
    check_convex(z.x, z.f);

    SampledFunction e{z.x, std::vector<double>(z.x.size(), kInf)};
    std::span<const double> xs(z.x.data(), n);
    std::span<const double> fs(z.f.data(), n);
    const auto integral = cumulative_integral(xs, fs, quad);
    for (std::size_t i = 0; i < n; ++i) {
        e.f[i] = z.x[i] * z.f[i] - 2.0 * integral[i];
    }
    e.f[0] = 0.0;
    return e;
}

// Discrete Legendre transform: fstar(b) = max_i (x_i b - f_i), exact for the
// piecewise-linear interpolant of the samples. Lower convex hull followed by
// a monotone sweep over the sorted queries.
inline std::vector<double> conjugate(const SampledFunction& samples,
                                     std::span<const double> queries) {
    detail::check_samples(samples.x, samples.f);
    std::vector<double> hx;
    std::vector<double> hf;
    hx.reserve(samples.x.size());
    hf.reserve(samples.x.size());
    for (std::size_t i = 0; i < samples.x.size(); ++i) {
        if (!std::isfinite(samples.f[i])) continue;
        const double xi = samples.x[i];
        const double fi = samples.f[i];
        while (hx.size() >= 2) {
            const std::size_t k = hx.size();
            // Drop the middle point if it lies on or above the chord.
            const double cross = (hx[k - 1] - hx[k - 2]) * (fi - hf[k - 2]) -
                                 (hf[k - 1] - hf[k - 2]) * (xi - hx[k - 2]);
            if (cross <= 0.0) {
                hx.pop_back();
                hf.pop_back();
            } else {
                break;
            }
        }
        hx.push_back(xi);
        hf.push_back(fi);
    }
    if (hx.empty()) {
        throw std::invalid_argument("conjugate of an identically +inf function");
    }

    std::vector<std::size_t> order(queries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return queries[a] < queries[b]; });

    std::vector<double> out(queries.size());
    std::size_t j = 0;
    for (const std::size_t qi : order) {
        const double b = queries[qi];
        while (j + 1 < hx.size() && (hf[j + 1] - hf[j]) <= b * (hx[j + 1] - hx[j])) ++j;
        out[qi] = hx[j] * b - hf[j];
    }
    return out;
}

// Convex piecewise-linear function on finite knots; +inf outside
// [x.front(), x.back()]. Conjugation is exact and O(log n).
class PiecewiseLinearConvex {
public:
    PiecewiseLinearConvex() = default;

    PiecewiseLinearConvex(std::vector<double> x, std::vector<double> f)
        : x_(std::move(x)), f_(std::move(f)) {
        detail::check_samples(x_, f_);
        for (std::size_t i = 0; i < f_.size(); ++i) {
            if (!std::isfinite(f_[i])) {
                throw std::invalid_argument("piecewise-linear knots must be finite");
            }
        }
        check_convex(x_, f_);
        slope_.resize(x_.size() - 1);
        for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
            slope_[i] = (f_[i + 1] - f_[i]) / (x_[i + 1] - x_[i]);
        }
        // Rounding can leave tiny decreases; the checked tolerance allows them.
        for (std::size_t i = 1; i < slope_.size(); ++i) {
            slope_[i] = std::max(slope_[i], slope_[i - 1]);
        }
        breaks_.resize(slope_.size());
        for (std::size_t i = 0; i < slope_.size(); ++i) {
            breaks_[i] = x_[i] * slope_[i] - f_[i];
        }
    }

    double operator()(double a) const {
        if (a < x_.front() || a > x_.back()) return kInf;
        const auto it = std::upper_bound(x_.begin(), x_.end(), a);
        if (it == x_.end()) return f_.back();
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        return f_[i] + slope_[i] * (a - x_[i]);
    }

    double conjugate(double b) const {
        const std::size_t j = static_cast<std::size_t>(
            std::lower_bound(slope_.begin(), slope_.end(), b) - slope_.begin());
        return x_[j] * b - f_[j];
    }

    // Inverse of the conjugate on values above its infimum. At the infimum
    // (0 when x.front() == 0) returns the right end of the flat part.
    double conjugate_inverse(double q) const {
        const double floor_value = -f_.front() + x_.front() * slope_.front();
        if (q < floor_value) {
            throw std::domain_error("value below the range of the conjugate");
        }
        if (q == floor_value) return slope_.front();
        const std::size_t j = static_cast<std::size_t>(
            std::lower_bound(breaks_.begin(), breaks_.end(), q) - breaks_.begin());
        return (q + f_[j]) / x_[j];
    }

    std::span<const double> knots() const noexcept { return x_; }
    std::span<const double> values() const noexcept { return f_; }
    std::span<const double> slopes() const noexcept { return slope_; }

private:
    std::vector<double> x_;
    std::vector<double> f_;
    std::vector<double> slope_;
    std::vector<double> breaks_;  // conjugate value at each slope
};

} // namespace xflow

#endif
