#ifndef XFLOW_SOURCES_HPP
#define XFLOW_SOURCES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "xflow/errors.hpp"

namespace xflow {

// Reaction coefficients F_{i,j}(p, n) as {F11, F12, F21, F22}.
using SourceMatrix = std::array<double, 4>;

struct HomeostaticParams {
    double growth = 1.0;    // g1
    double p_home = 1.0;    // homeostatic pressure p_H
    double death1 = 0.0;    // d1, also the 1 -> 2 conversion rate
    double death2 = 0.0;    // d2
};

class SourceModel {
public:
    using Eval = std::function<SourceMatrix(double p, double n)>;

    SourceModel() : eval_([](double, double) { return SourceMatrix{0.0, 0.0, 0.0, 0.0}; }) {}

    SourceModel(Eval eval, double bound, bool nonneg_cross, bool monotone_columns,
                std::string name = "custom")
        : eval_(std::move(eval)), bound_(bound), nonneg_cross_(nonneg_cross),
          monotone_columns_(monotone_columns), name_(std::move(name)) {
        if (!(bound_ >= 0.0) || !std::isfinite(bound_)) {
            throw ConfigError("source bound must be finite and nonnegative");
        }
    }

    static SourceModel none() { return SourceModel(); }

    // F11 = g1 n max(0, 1 - p/p_H) - d1, F12 = 0, F21 = d1, F22 = -d2.
    // p is clamped below at p_min and n is bounded by n_max, which fixes
    // the uniform bound.
    static SourceModel homeostatic(const HomeostaticParams& prm, double n_max, double p_min) {
        if (prm.growth < 0.0 || prm.death1 < 0.0 || prm.death2 < 0.0) {
            throw ConfigError("homeostatic rates must be nonnegative");
        }
        if (!(prm.p_home > 0.0)) throw ConfigError("homeostatic pressure must be positive");
        if (!(n_max >= 0.0)) throw ConfigError("nutrient bound must be nonnegative");
        const double peak = std::max(0.0, 1.0 - p_min / prm.p_home);
        const double bound =
            std::max({prm.growth * n_max * peak + prm.death1, prm.death1, prm.death2});
        auto eval = [prm, p_min](double p, double n) {
            const double pc = std::max(p, p_min);
            const double g = prm.growth * std::max(n, 0.0) * std::max(0.0, 1.0 - pc / prm.p_home);
            return SourceMatrix{g - prm.death1, 0.0, prm.death1, -prm.death2};
        };
        return SourceModel(eval, bound, true, true, "homeostatic");
    }

    SourceMatrix operator()(double p, double n) const { return eval_(p, n); }

    double bound() const noexcept { return bound_; }
    bool nonneg_cross() const noexcept { return nonneg_cross_; }
    bool monotone_columns() const noexcept { return monotone_columns_; }
    const std::string& name() const noexcept { return name_; }
    bool is_none() const noexcept { return name_ == "none"; }

private:
    Eval eval_;
    double bound_ = 0.0;
    bool nonneg_cross_ = true;
    bool monotone_columns_ = true;
    std::string name_ = "none";
};

struct SourceCheck {
    bool bounded = true;        // |F_ij| <= B
    bool cross_nonneg = true;   // F12, F21 >= 0
    bool columns_monotone = true; // p -> F11+F21, F12+F22 nonincreasing (when flagged)
    bool ok() const noexcept { return bounded && cross_nonneg && columns_monotone; }
};

// Samples the (p, n) box and verifies the structural assumptions.
inline SourceCheck check_source_model(const SourceModel& S, double p_lo, double p_hi,
                                      double n_lo, double n_hi, int samples = 64) {
    SourceCheck c;
    const double tol = 1e-12 * (1.0 + S.bound());
    for (int j = 0; j < samples; ++j) {
        const double n = n_lo + (n_hi - n_lo) * j / (samples - 1);
        double prev_col1 = INFINITY;
        double prev_col2 = INFINITY;
        for (int i = 0; i < samples; ++i) {
            const double p = p_lo + (p_hi - p_lo) * i / (samples - 1);
            const auto F = S(p, n);
            for (const double v : F) {
                if (std::abs(v) > S.bound() + tol) c.bounded = false;
            }
            if (F[1] < 0.0 || F[2] < 0.0) c.cross_nonneg = false;
            const double col1 = F[0] + F[2];
            const double col2 = F[1] + F[3];
            if (S.monotone_columns() && (col1 > prev_col1 + tol || col2 > prev_col2 + tol)) {
                c.columns_monotone = false;
            }
            prev_col1 = col1;
            prev_col2 = col2;
        }
    }
    return c;
}

} // namespace xflow

#endif
