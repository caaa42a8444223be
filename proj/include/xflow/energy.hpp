#ifndef XFLOW_ENERGY_HPP
#define XFLOW_ENERGY_HPP

// Energy quadruple (z, z*, e, e*) with the pressure maps q = e'(rho) and
// p = (z*)^{-1}(q).
//
//   z   density -> energy density (convex, lsc, z(0) = 0, +inf for a < 0)
//   z*  pressure -> energy density, nonnegative and nondecreasing
//   e   a z(a) - 2 int_0^a z, the energy whose subgradient is z* o dz
//   e*  conjugate of e
//
// EnergyPair is immutable after construction and safe to share between
// threads.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xflow/convex.hpp"
#include "xflow/errors.hpp"

namespace xflow {

enum class EnergyFamily { PowerLaw, Entropy, Incompressible, Tabulated };

namespace detail {

struct TabulatedEnergyData {
    PiecewiseLinearConvex z;
    PiecewiseLinearConvex e;
    // q(a): linear through (0, 0) and (midpoint_j, slope of e on interval j),
    // constant past the last midpoint.
    std::vector<double> q_nodes_a;
    std::vector<double> q_nodes_q;
};

} // namespace detail

class EnergyPair {
public:
    static EnergyPair power_law(double m) {
        if (!std::isfinite(m) || !(m > 0.0)) {
            throw ConfigError("power-law exponent must be finite and positive, got " +
                              std::to_string(m));
        }
        if (m == 1.0) {
            throw ConfigError("power-law exponent m = 1 is the entropy limit; use entropy_energy");
        }
        EnergyPair E;
        E.family_ = EnergyFamily::PowerLaw;
        E.m_ = m;
        return E;
    }

    static EnergyPair entropy() {
        EnergyPair E;
        E.family_ = EnergyFamily::Entropy;
        return E;
    }

    static EnergyPair incompressible() {
        EnergyPair E;
        E.family_ = EnergyFamily::Incompressible;
        return E;
    }

    // Piecewise-linear z through (a_i, z_i). Trailing +inf values cut the
    // domain; a_0 must be 0 with z_0 = 0.
    static EnergyPair tabulated(std::vector<double> a, std::vector<double> z) {
        try {
            detail::check_samples(a, z);
        } catch (const std::invalid_argument& err) {
            throw ConfigError(std::string("tabulated energy: ") + err.what());
        }
        if (a.front() != 0.0 || z.front() != 0.0) {
            throw ConfigError("tabulated energy must start at a = 0 with z(0) = 0");
        }
        std::size_t n = 0;
        try {
            n = detail::finite_prefix(z);
        } catch (const NonConvexError& err) {
            throw ConfigError(std::string("tabulated energy: ") + err.what());
        }
        if (n < 2) {
            throw ConfigError("tabulated energy needs at least two finite knots");
        }
        a.resize(n);
        z.resize(n);
        auto data = std::make_shared<detail::TabulatedEnergyData>();
        try {
            data->z = PiecewiseLinearConvex(a, z);
            const auto e = e_transform(SampledFunction{a, z}, Quadrature::PiecewiseLinear);
            data->e = PiecewiseLinearConvex(e.x, e.f);
        } catch (const NonConvexError& err) {
            throw ConfigError(std::string("tabulated energy is not convex: ") + err.what());
        }
        const auto slopes = data->e.slopes();
        data->q_nodes_a.push_back(0.0);
        data->q_nodes_q.push_back(0.0);
        for (std::size_t j = 0; j < slopes.size(); ++j) {
            data->q_nodes_a.push_back(0.5 * (a[j] + a[j + 1]));
            data->q_nodes_q.push_back(std::max(slopes[j], data->q_nodes_q.back()));
        }
        EnergyPair E;
        E.family_ = EnergyFamily::Tabulated;
        E.table_ = std::move(data);
        return E;
    }

    EnergyFamily family() const noexcept { return family_; }

    // Power-law exponent; NaN for other families.
    double exponent() const noexcept { return m_; }

    std::string name() const {
        switch (family_) {
        case EnergyFamily::PowerLaw: {
            std::ostringstream os;
            os << "power(m=" << m_ << ")";
            return os.str();
        }
        case EnergyFamily::Entropy: return "entropy";
        case EnergyFamily::Incompressible: return "incompressible";
        case EnergyFamily::Tabulated: return "tabulated";
        }
        return "unknown";
    }

    // Supremum of the finite domain of z (and e).
    double a_max() const noexcept {
        switch (family_) {
        case EnergyFamily::Incompressible: return 1.0;
        case EnergyFamily::Tabulated: return table_->z.knots().back();
        default: return kInf;
        }
    }

    // Right endpoint of the finite domain of z*.
    double b_inf() const noexcept {
        if (family_ == EnergyFamily::PowerLaw && m_ < 1.0) return 1.0 / (1.0 - m_);
        return kInf;
    }

    // False when e' is multivalued somewhere on (0, a_max].
    bool single_valued_eprime() const noexcept {
        return family_ != EnergyFamily::Incompressible;
    }

    double z(double a) const {
        if (std::isnan(a)) return std::nan("");
        if (a < 0.0) return kInf;
        switch (family_) {
        case EnergyFamily::PowerLaw:
            if (a == 0.0) return 0.0;
            return (std::pow(a, m_) - a) / (m_ - 1.0);
        case EnergyFamily::Entropy:
            if (a == 0.0) return 0.0;
            return a * std::log(a) - a;
        case EnergyFamily::Incompressible: return a <= 1.0 ? 0.0 : kInf;
        case EnergyFamily::Tabulated: return table_->z(a);
        }
        return kInf;
    }

    // Derivative of z where it exists (closed-form families only).
    double zprime(double a) const {
        if (!(a > 0.0)) throw std::domain_error("z' is only evaluated for a > 0");
        switch (family_) {
        case EnergyFamily::PowerLaw: return (m_ * std::pow(a, m_ - 1.0) - 1.0) / (m_ - 1.0);
        case EnergyFamily::Entropy: return std::log(a);
        case EnergyFamily::Incompressible:
            if (a < 1.0) return 0.0;
            throw MultivaluedError("z' is multivalued at a = 1 for the incompressible energy");
        case EnergyFamily::Tabulated:
            throw std::domain_error("z' is not provided for tabulated energies");
        }
        return 0.0;
    }

    double zstar(double b) const {
        switch (family_) {
        case EnergyFamily::PowerLaw: {
            const double base = ((m_ - 1.0) * b + 1.0) / m_;
            if (base <= 0.0) return m_ > 1.0 ? 0.0 : kInf;
            return std::pow(base, m_ / (m_ - 1.0));
        }
        case EnergyFamily::Entropy: return std::exp(b);
        case EnergyFamily::Incompressible: return std::max(b, 0.0);
        case EnergyFamily::Tabulated: return table_->z.conjugate(b);
        }
        return kInf;
    }

    double e(double a) const {
        if (std::isnan(a)) return std::nan("");
        if (a < 0.0) return kInf;
        switch (family_) {
        case EnergyFamily::PowerLaw: return std::pow(a, m_ + 1.0) / (m_ + 1.0);
        case EnergyFamily::Entropy: return 0.5 * a * a;
        case EnergyFamily::Incompressible: return a <= 1.0 ? 0.0 : kInf;
        case EnergyFamily::Tabulated: return table_->e(a);
        }
        return kInf;
    }

    double estar(double b) const {
        const double bp = std::max(b, 0.0);
        switch (family_) {
        case EnergyFamily::PowerLaw: return m_ / (m_ + 1.0) * std::pow(bp, (m_ + 1.0) / m_);
        case EnergyFamily::Entropy: return 0.5 * bp * bp;
        case EnergyFamily::Incompressible: return bp;
        case EnergyFamily::Tabulated: return table_->e.conjugate(b);
        }
        return kInf;
    }

    // q = e'(a). Throws MultivaluedError where the subdifferential is not a
    // singleton and std::domain_error outside the domain.
    double eprime(double a) const {
        if (!(a >= 0.0) || a > a_max()) {
            throw std::domain_error("e' queried outside the domain of e");
        }
        switch (family_) {
        case EnergyFamily::PowerLaw: return std::pow(a, m_);
        case EnergyFamily::Entropy: return a;
        case EnergyFamily::Incompressible:
            if (a < 1.0) return 0.0;
            throw MultivaluedError("e' is multivalued at a = 1 for the incompressible energy");
        case EnergyFamily::Tabulated: return interp_q(a).first;
        }
        return 0.0;
    }

    // e''(a), the nonlinear diffusivity of the total density.
    double eprime2(double a) const {
        if (!(a >= 0.0)) throw std::domain_error("e'' queried at negative density");
        switch (family_) {
        case EnergyFamily::PowerLaw:
            if (a == 0.0) return m_ > 1.0 ? 0.0 : kInf;
            return m_ * std::pow(a, m_ - 1.0);
        case EnergyFamily::Entropy: return 1.0;
        case EnergyFamily::Incompressible:
            throw MultivaluedError("incompressible energy has no pointwise diffusivity");
        case EnergyFamily::Tabulated: return interp_q(a).second;
        }
        return 0.0;
    }

    // Bound on secant slopes of q = e'(rho) seen by the explicit scheme:
    // max(e''(a), e'(a)/a).
    double diffusivity(double a) const {
        if (a <= 0.0) {
            const double d0 = eprime2(0.0);
            return std::isfinite(d0) ? d0 : kInf;
        }
        return std::max(eprime2(a), eprime(a) / a);
    }

    // p = (z*)^{-1}(q). At q = 0 returns the continuous extension
    // sup{p : z*(p) = 0} where it exists; rejects q = 0 when p -> -inf.
    double zstarinv(double q) const {
        if (std::isnan(q) || q < 0.0) {
            throw std::domain_error("(z*)^{-1} needs q >= 0");
        }
        switch (family_) {
        case EnergyFamily::PowerLaw:
            if (q == 0.0) {
                if (m_ > 1.0) return -1.0 / (m_ - 1.0);
                throw std::domain_error("(z*)^{-1}(0) is -inf for m < 1");
            }
            return (m_ * std::pow(q, (m_ - 1.0) / m_) - 1.0) / (m_ - 1.0);
        case EnergyFamily::Entropy:
            if (q == 0.0) throw std::domain_error("(z*)^{-1}(0) is -inf for the entropy energy");
            return std::log(q);
        case EnergyFamily::Incompressible: return q;
        case EnergyFamily::Tabulated: return table_->z.conjugate_inverse(q);
        }
        return 0.0;
    }

private:
    EnergyPair() = default;

    std::pair<double, double> interp_q(double a) const {
        const auto& xa = table_->q_nodes_a;
        const auto& xq = table_->q_nodes_q;
        if (a >= xa.back()) return {xq.back(), 0.0};
        const auto it = std::upper_bound(xa.begin(), xa.end(), a);
        const std::size_t i = static_cast<std::size_t>(it - xa.begin()) - 1;
        const double slope = (xq[i + 1] - xq[i]) / (xa[i + 1] - xa[i]);
        return {xq[i] + slope * (a - xa[i]), slope};
    }

    EnergyFamily family_ = EnergyFamily::Entropy;
    double m_ = std::nan("");
    std::shared_ptr<const detail::TabulatedEnergyData> table_;
};

inline EnergyPair power_energy(double m) { return EnergyPair::power_law(m); }
inline EnergyPair entropy_energy() { return EnergyPair::entropy(); }
inline EnergyPair incompressible_energy() { return EnergyPair::incompressible(); }

// Two-column text: "a z(a)" per line, '#' starts a comment, "inf" allowed.
inline EnergyPair parse_tabulated_energy(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<double> a;
    std::vector<double> z;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string sa;
        std::string sz;
        if (!(ls >> sa)) continue;
        std::string extra;
        if (!(ls >> sz) || (ls >> extra)) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected two columns");
        }
        auto parse = [&](const std::string& s) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0') {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
            }
            return v;
        };
        a.push_back(parse(sa));
        z.push_back(parse(sz));
    }
    if (a.empty()) throw ConfigError(origin + ": no knots");
    return EnergyPair::tabulated(std::move(a), std::move(z));
}

inline EnergyPair load_tabulated_energy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read tabulated energy file '" + path + "'");
    return parse_tabulated_energy(in, path);
}

// inf{b : e*(b) >= 1} by bracket expansion and bisection.
inline double beta_bisection(const EnergyPair& E, double tol = 1e-10) {
    double lo = 0.0;  // e*(0) = 0 < 1
    double hi = 1.0;
    while (E.estar(hi) < 1.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw std::domain_error("e* never reaches 1");
    }
    while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (E.estar(mid) >= 1.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

inline double beta(const EnergyPair& E) {
    switch (E.family()) {
    case EnergyFamily::PowerLaw: {
        const double m = E.exponent();
        return std::pow((m + 1.0) / m, m / (m + 1.0));
    }
    case EnergyFamily::Entropy: return std::sqrt(2.0);
    case EnergyFamily::Incompressible: return 1.0;
    case EnergyFamily::Tabulated: return beta_bisection(E);
    }
    return beta_bisection(E);
}

// e(a) + e*(b) - a b; +inf when a is outside the domain of e.
inline double young_gap(const EnergyPair& E, double a, double b) {
    const double ea = E.e(a);
    if (!std::isfinite(ea)) return kInf;
    const double es = E.estar(b);
    if (!std::isfinite(es)) return kInf;
    return ea + es - a * b;
}

struct ConjugateProbe {
    std::vector<double> b_points;
    // gaps[k][j] = |z*_k(b_j) - z*_lim(b_j)|
    std::vector<std::vector<double>> gaps;
    double q_lo = 0.0;
    double q_hi = 0.0;
    // sup over the q-interval of |(z*_k)^{-1}(q) - (z*_lim)^{-1}(q)|
    std::vector<double> inverse_gaps;
};

inline ConjugateProbe conjugate_convergence_probe(std::span<const EnergyPair> sequence,
                                                  const EnergyPair& limit,
                                                  std::span<const double> b_points,
                                                  double q_lo = 0.1, double q_hi = 2.0,
                                                  int q_samples = 401) {
    if (!(q_lo > 0.0) || !(q_hi > q_lo) || q_samples < 2) {
        throw std::invalid_argument("probe q-interval must be a compact subset of (0, inf)");
    }
    ConjugateProbe probe;
    probe.b_points.assign(b_points.begin(), b_points.end());
    probe.q_lo = q_lo;
    probe.q_hi = q_hi;
    for (const auto& E : sequence) {
        std::vector<double> row;
        row.reserve(b_points.size());
        for (const double b : b_points) {
            row.push_back(std::abs(E.zstar(b) - limit.zstar(b)));
        }
        probe.gaps.push_back(std::move(row));
        double worst = 0.0;
        for (int i = 0; i < q_samples; ++i) {
            const double q = q_lo + (q_hi - q_lo) * i / (q_samples - 1);
            worst = std::max(worst, std::abs(E.zstarinv(q) - limit.zstarinv(q)));
        }
        probe.inverse_gaps.push_back(worst);
    }
    return probe;
}

// Power family z_m against the incompressible limit z_inf.
inline ConjugateProbe conjugate_convergence_probe(std::span<const double> exponents,
                                                  std::span<const double> b_points,
                                                  double q_lo = 0.1, double q_hi = 2.0) {
    std::vector<EnergyPair> seq;
    seq.reserve(exponents.size());
    for (const double m : exponents) seq.push_back(EnergyPair::power_law(m));
    return conjugate_convergence_probe(seq, EnergyPair::incompressible(), b_points, q_lo, q_hi);
}

} // namespace xflow

#endif
