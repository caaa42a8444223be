#ifndef XFLOW_GRID_HPP
#define XFLOW_GRID_HPP

// Periodic cell-centered grids in d = 1, 2, finite-volume stencils and the
// norms used by the a priori estimates.
//
// Cells are stored row-major with axis 0 slowest. Face k of cell c on an
// axis sits between c and its +1 neighbour on that axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "xflow/errors.hpp"

namespace xflow {

struct Grid {
    int dim = 1;
    int cells = 8;       // per axis
    double length = 1.0; // per axis

    static Grid make(int dim, int cells, double length) {
        Grid g{dim, cells, length};
        g.validate();
        return g;
    }

    void validate() const {
        if (dim != 1 && dim != 2) {
            throw ConfigError("grid dimension must be 1 or 2, got " + std::to_string(dim));
        }
        if (cells < 8 || (cells & (cells - 1)) != 0) {
            throw ConfigError("cells per axis must be a power of two >= 8, got " +
                              std::to_string(cells));
        }
        if (!std::isfinite(length) || !(length > 0.0)) {
            throw ConfigError("grid length must be positive");
        }
    }

    double spacing() const noexcept { return length / cells; }

    double cell_volume() const noexcept { return std::pow(spacing(), dim); }

    std::size_t size() const noexcept {
        return dim == 1 ? static_cast<std::size_t>(cells)
                        : static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells);
    }

    double domain_volume() const noexcept { return std::pow(length, dim); }

    // Per-axis cell index of a flat index.
    int coord(std::size_t idx, int axis) const noexcept {
        const auto n = static_cast<std::size_t>(cells);
        if (dim == 1) return static_cast<int>(idx);
        return static_cast<int>(axis == 0 ? idx / n : idx % n);
    }

    std::size_t flat(int i0, int i1 = 0) const noexcept {
        const int n = cells;
        i0 = ((i0 % n) + n) % n;
        if (dim == 1) return static_cast<std::size_t>(i0);
        i1 = ((i1 % n) + n) % n;
        return static_cast<std::size_t>(i0) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(i1);
    }

    // Periodic neighbour of a cell along an axis.
    std::size_t neighbor(std::size_t idx, int axis, int offset) const noexcept {
        if (dim == 1) return flat(static_cast<int>(idx) + offset);
        const int i0 = coord(idx, 0);
        const int i1 = coord(idx, 1);
        return axis == 0 ? flat(i0 + offset, i1) : flat(i0, i1 + offset);
    }

    double center(std::size_t idx, int axis) const noexcept {
        return (coord(idx, axis) + 0.5) * spacing();
    }

    bool operator==(const Grid&) const = default;
};

class Field {
public:
    Field() = default;

    explicit Field(const Grid& grid, double value = 0.0)
        : grid_(grid), values_(grid.size(), value) {
        check_finite(value, 0);
    }

    Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw std::invalid_argument("field has " + std::to_string(values_.size()) +
                                        " values, grid needs " + std::to_string(grid_.size()));
        }
        for (std::size_t i = 0; i < values_.size(); ++i) check_finite(values_[i], i);
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    void set(std::size_t i, double v) {
        check_finite(v, i);
        values_.at(i) = v;
    }

    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }

private:
    static void check_finite(double v, std::size_t i) {
        if (!std::isfinite(v)) {
            throw NumericalAbort("non-finite value stored in field at cell " + std::to_string(i));
        }
    }

    Grid grid_;
    std::vector<double> values_;
};

struct FaceFlux {
    Grid grid;
    std::array<std::vector<double>, 2> axes;

    FaceFlux() = default;
    explicit FaceFlux(const Grid& g, double value = 0.0) : grid(g) {
        for (int k = 0; k < g.dim; ++k) axes[k].assign(g.size(), value);
    }

    std::span<const double> axis(int k) const noexcept { return axes[k]; }
    std::span<double> axis(int k) noexcept { return axes[k]; }
};

inline FaceFlux gradient_faces(const Field& f) {
    const Grid& g = f.grid();
    const double inv_h = 1.0 / g.spacing();
    FaceFlux out(g);
    for (int k = 0; k < g.dim; ++k) {
        auto& a = out.axes[k];
        for (std::size_t i = 0; i < g.size(); ++i) {
            a[i] = (f[g.neighbor(i, k, 1)] - f[i]) * inv_h;
        }
    }
    return out;
}

inline Field divergence(const FaceFlux& J) {
    const Grid& g = J.grid;
    const double inv_h = 1.0 / g.spacing();
    std::vector<double> out(g.size(), 0.0);
    for (int k = 0; k < g.dim; ++k) {
        const auto& a = J.axes[k];
        for (std::size_t i = 0; i < g.size(); ++i) {
            out[i] += (a[i] - a[g.neighbor(i, k, -1)]) * inv_h;
        }
    }
    return Field(g, std::move(out));
}

inline double integrate(const Field& f) {
    double s = 0.0;
    for (const double v : f.values()) s += v;
    return s * f.grid().cell_volume();
}

enum class Norm { L1, L2, Linf };

inline double lp_norm(std::span<const double> v, double cell_volume, Norm p) {
    switch (p) {
    case Norm::L1: {
        double s = 0.0;
        for (const double x : v) s += std::abs(x);
        return s * cell_volume;
    }
    case Norm::L2: {
        double s = 0.0;
        for (const double x : v) s += x * x;
        return std::sqrt(s * cell_volume);
    }
    case Norm::Linf: {
        double s = 0.0;
        for (const double x : v) s = std::max(s, std::abs(x));
        return s;
    }
    }
    return 0.0;
}

inline double lp_norm(const Field& f, Norm p) {
    return lp_norm(f.values(), f.grid().cell_volume(), p);
}

// (sum over axes and faces of |J|^2 h^d)^{1/2}
inline double face_l2_norm(const FaceFlux& J) {
    double s = 0.0;
    for (int k = 0; k < J.grid.dim; ++k) {
        for (const double v : J.axes[k]) s += v * v;
    }
    return std::sqrt(s * J.grid.cell_volume());
}

// sum over axes and faces of a.b h^d
inline double face_dot(const FaceFlux& a, const FaceFlux& b) {
    double s = 0.0;
    for (int k = 0; k < a.grid.dim; ++k) {
        for (std::size_t i = 0; i < a.axes[k].size(); ++i) s += a.axes[k][i] * b.axes[k][i];
    }
    return s * a.grid.cell_volume();
}

struct HMinusOne {
    double seminorm = 0.0; // homogeneous part, zero mode excluded
    double mean = 0.0;     // domain average, reported separately
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

struct FftwPlanDestroy {
    void operator()(fftw_plan_s* p) const noexcept {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

} // namespace detail

// Owns FFTW plans and buffers for one grid. Not safe for concurrent use of
// a single instance; use one per thread.
class SpectralWorkspace {
public:
    explicit SpectralWorkspace(const Grid& grid) : grid_(grid) {
        const std::size_t n = grid.size();
        buffer_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
        std::lock_guard lock(detail::fftw_planner_mutex());
        if (grid.dim == 1) {
            forward_.reset(fftw_plan_dft_1d(grid.cells, buffer_.get(), buffer_.get(), FFTW_FORWARD,
                                            FFTW_ESTIMATE));
            backward_.reset(fftw_plan_dft_1d(grid.cells, buffer_.get(), buffer_.get(),
                                             FFTW_BACKWARD, FFTW_ESTIMATE));
        } else {
            forward_.reset(fftw_plan_dft_2d(grid.cells, grid.cells, buffer_.get(), buffer_.get(),
                                            FFTW_FORWARD, FFTW_ESTIMATE));
            backward_.reset(fftw_plan_dft_2d(grid.cells, grid.cells, buffer_.get(), buffer_.get(),
                                             FFTW_BACKWARD, FFTW_ESTIMATE));
        }
        // Squared discrete wavenumber of the face-gradient stencil per axis.
        const double h = grid.spacing();
        kappa2_.resize(static_cast<std::size_t>(grid.cells));
        for (int k = 0; k < grid.cells; ++k) {
            const double s = 2.0 / h * std::sin(std::numbers::pi * k / grid.cells);
            kappa2_[static_cast<std::size_t>(k)] = s * s;
        }
    }

    const Grid& grid() const noexcept { return grid_; }

    HMinusOne hminus1(std::span<const double> values) {
        load(values);
        fftw_execute(forward_.get());
        const std::size_t n = grid_.size();
        double acc = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            const double k2 = wavenumber2(i);
            const double re = buffer_.get()[i][0];
            const double im = buffer_.get()[i][1];
            acc += (re * re + im * im) / k2;
        }
        const double nd = static_cast<double>(n);
        HMinusOne out;
        out.seminorm = std::sqrt(acc * grid_.cell_volume() / nd);
        out.mean = buffer_.get()[0][0] / nd;
        return out;
    }

    // Periodic Gaussian smoothing with standard deviation `width`.
    std::vector<double> gaussian_smooth(std::span<const double> values, double width) {
        load(values);
        fftw_execute(forward_.get());
        const std::size_t n = grid_.size();
        const double two_pi_over_l = 2.0 * std::numbers::pi / grid_.length;
        for (std::size_t i = 0; i < n; ++i) {
            double k2 = 0.0;
            for (int axis = 0; axis < grid_.dim; ++axis) {
                int k = grid_.coord(i, axis);
                if (k > grid_.cells / 2) k -= grid_.cells;
                const double w = two_pi_over_l * k;
                k2 += w * w;
            }
            const double factor = std::exp(-0.5 * k2 * width * width);
            buffer_.get()[i][0] *= factor;
            buffer_.get()[i][1] *= factor;
        }
        fftw_execute(backward_.get());
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = buffer_.get()[i][0] / static_cast<double>(n);
        return out;
    }

private:
    void load(std::span<const double> values) {
        if (values.size() != grid_.size()) {
            throw std::invalid_argument("spectral workspace: size mismatch");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            buffer_.get()[i][0] = values[i];
            buffer_.get()[i][1] = 0.0;
        }
    }

    double wavenumber2(std::size_t idx) const noexcept {
        double k2 = 0.0;
        for (int axis = 0; axis < grid_.dim; ++axis) {
            k2 += kappa2_[static_cast<std::size_t>(grid_.coord(idx, axis))];
        }
        return k2;
    }

    Grid grid_;
    std::unique_ptr<fftw_complex, detail::FftwFree> buffer_;
    std::unique_ptr<fftw_plan_s, detail::FftwPlanDestroy> forward_;
    std::unique_ptr<fftw_plan_s, detail::FftwPlanDestroy> backward_;
    std::vector<double> kappa2_;
};

inline HMinusOne hminus1_norm(const Field& f) {
    SpectralWorkspace ws(f.grid());
    return ws.hminus1(f.values());
}

inline Field mollify(const Field& f, double width) {
    if (!(width >= f.grid().spacing())) {
        throw std::invalid_argument("mollifier width must be at least one cell");
    }
    SpectralWorkspace ws(f.grid());
    return Field(f.grid(), ws.gaussian_smooth(f.values(), width));
}

// Fraction of |f| mass in the outer band of the periodic box whose width is
// `band` times the half-length. Nonzero values mean the support is close to
// wrapping around.
inline double boundary_mass_fraction(const Field& f, double band = 0.1) {
    const Grid& g = f.grid();
    const double w = band * 0.5 * g.length;
    double inside = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = std::abs(f[i]);
        total += v;
        bool near = false;
        for (int k = 0; k < g.dim; ++k) {
            const double x = g.center(i, k);
            if (x < w || x > g.length - w) near = true;
        }
        if (near) inside += v;
    }
    return total > 0.0 ? inside / total : 0.0;
}

} // namespace xflow

#endif
