#ifndef XFLOW_VELOCITY_HPP
#define XFLOW_VELOCITY_HPP

// External vector field V, sampled at face centers, with its divergence.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "xflow/errors.hpp"
#include "xflow/grid.hpp"
#include "xflow/snapshot.hpp"

namespace xflow {

enum class VelocityKind { Zero, Constant, Rotating, Tabulated };

struct VelocitySpec {
    VelocityKind kind = VelocityKind::Zero;
    std::array<double, 2> constant{0.0, 0.0};
    double omega = 0.0;                     // Rotating: angular rate
    std::array<std::string, 2> files;       // Tabulated: face values per axis

    bool operator==(const VelocitySpec&) const = default;
};

inline std::string to_string(VelocityKind k) {
    switch (k) {
    case VelocityKind::Zero: return "zero";
    case VelocityKind::Constant: return "constant";
    case VelocityKind::Rotating: return "rotating";
    case VelocityKind::Tabulated: return "tabulated";
    }
    return "zero";
}

class VelocityField {
public:
    VelocityField() = default;

    // Rotating: d = 2 uses the periodic cellular vortex
    //   V = w L/(2 pi) (sin kx cos ky, -cos kx sin ky), div V = 0;
    // d = 1 uses V = w L/(2 pi) sin kx with div V = w cos kx.
    VelocityField(const Grid& grid, const VelocitySpec& spec)
        : spec_(spec), faces_(grid), div_cells_(grid.size(), 0.0) {
        const double h = grid.spacing();
        const double L = grid.length;
        const double kw = 2.0 * std::numbers::pi / L;
        switch (spec.kind) {
        case VelocityKind::Zero: break;
        case VelocityKind::Constant:
            for (int a = 0; a < grid.dim; ++a) {
                std::fill(faces_.axes[a].begin(), faces_.axes[a].end(), spec.constant[a]);
            }
            break;
        case VelocityKind::Rotating: {
            const double amp = spec.omega / kw;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (grid.dim == 1) {
                    const double xf = (grid.coord(i, 0) + 1.0) * h;
                    faces_.axes[0][i] = amp * std::sin(kw * xf);
                    div_cells_[i] = spec.omega * std::cos(kw * grid.center(i, 0));
                } else {
                    const double x = grid.center(i, 0);
                    const double y = grid.center(i, 1);
                    const double xf = x + 0.5 * h;
                    const double yf = y + 0.5 * h;
                    faces_.axes[0][i] = amp * std::sin(kw * xf) * std::cos(kw * y);
                    faces_.axes[1][i] = -amp * std::cos(kw * x) * std::sin(kw * yf);
                }
            }
            div_max_ = grid.dim == 1 ? std::abs(spec.omega) : 0.0;
            break;
        }
        case VelocityKind::Tabulated: {
            for (int a = 0; a < grid.dim; ++a) {
                if (spec.files[a].empty()) {
                    throw ConfigError("tabulated velocity needs a face file for axis " +
                                      std::to_string(a));
                }
                Snapshot s;
                try {
                    s = load_snapshot(spec.files[a], grid);
                } catch (const IoError& e) {
                    throw ConfigError(std::string("velocity file: ") + e.what());
                }
                faces_.axes[a].assign(s.field.values().begin(), s.field.values().end());
            }
            const Field div = divergence(faces_);
            div_cells_.assign(div.values().begin(), div.values().end());
            div_max_ = lp_norm(div, Norm::Linf);
            break;
        }
        }
        for (int a = 0; a < grid.dim; ++a) {
            for (const double v : faces_.axes[a]) speed_max_ = std::max(speed_max_, std::abs(v));
        }
    }

    const VelocitySpec& spec() const noexcept { return spec_; }
    const FaceFlux& faces() const noexcept { return faces_; }
    // Cell values of div V (closed form for the presets).
    std::span<const double> divergence_cells() const noexcept { return div_cells_; }
    double divergence_max() const noexcept { return div_max_; }
    double speed_max() const noexcept { return speed_max_; }
    bool is_zero() const noexcept { return spec_.kind == VelocityKind::Zero || speed_max_ == 0.0; }

private:
    VelocitySpec spec_;
    FaceFlux faces_;
    std::vector<double> div_cells_;
    double div_max_ = 0.0;
    double speed_max_ = 0.0;
};

} // namespace xflow

#endif
