#ifndef XFLOW_INITIAL_DATA_HPP
#define XFLOW_INITIAL_DATA_HPP

// Canonical initial data, stored as cell averages.
//
// A generator is written as a kind followed by key=value pairs, e.g.
//   gaussian center=2 width=0.3 amplitude=1
//   barenblatt m=2 t0=0.1 C=1
//   file path=rho1.xflw
// 2-D centers are given as "x,y".

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xflow/errors.hpp"
#include "xflow/grid.hpp"
#include "xflow/snapshot.hpp"

namespace xflow {

struct InitialSpec {
    std::string kind = "zero";
    std::map<std::string, std::string> params;

    bool operator==(const InitialSpec&) const = default;

    std::string to_string() const {
        std::string s = kind;
        for (const auto& [k, v] : params) s += " " + k + "=" + v;
        return s;
    }
};

inline InitialSpec parse_initial_spec(const std::string& text) {
    std::istringstream is(text);
    InitialSpec spec;
    if (!(is >> spec.kind)) throw ConfigError("empty initial-data specification");
    static const std::map<std::string, std::set<std::string>> allowed{
        {"zero", {}},
        {"uniform", {"value"}},
        {"gaussian", {"center", "width", "amplitude"}},
        {"two_bump", {"center1", "center2", "width", "amplitude"}},
        {"barenblatt", {"m", "t0", "C", "center"}},
        {"disk", {"center", "radius", "value"}},
        {"file", {"path"}},
    };
    const auto it = allowed.find(spec.kind);
    if (it == allowed.end()) throw ConfigError("unknown initial-data generator '" + spec.kind + "'");
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("initial-data parameter '" + tok + "' is not key=value");
        }
        const std::string key = tok.substr(0, eq);
        if (!it->second.contains(key)) {
            throw ConfigError("unknown parameter '" + key + "' for generator '" + spec.kind + "'");
        }
        if (!spec.params.emplace(key, tok.substr(eq + 1)).second) {
            throw ConfigError("duplicate parameter '" + key + "'");
        }
    }
    if (spec.kind == "file" && !spec.params.contains("path")) {
        throw ConfigError("file generator needs path=");
    }
    return spec;
}

// Self-similar solution of d_t rho = Laplacian(rho^m) for m > 1:
//   rho(t, x) = t^-a (C - k |x - c|^2 t^(-2a/d))_+^(1/(m-1)),
//   a = d / (d(m-1) + 2),  k = a (m-1) / (2 m d).
struct Barenblatt {
    double m = 2.0;
    double C = 1.0;
    int dim = 1;
    std::array<double, 2> center{0.0, 0.0};

    double alpha() const noexcept { return dim / (dim * (m - 1.0) + 2.0); }
    double k() const noexcept { return alpha() * (m - 1.0) / (2.0 * m * dim); }

    double radius(double t) const noexcept {
        return std::sqrt(C / k()) * std::pow(t, alpha() / dim);
    }

    double at_r2(double t, double r2) const noexcept {
        const double a = alpha();
        const double base = C - k() * r2 * std::pow(t, -2.0 * a / dim);
        if (base <= 0.0) return 0.0;
        return std::pow(t, -a) * std::pow(base, 1.0 / (m - 1.0));
    }
};

namespace detail {

inline double param(const InitialSpec& s, const std::string& key, double fallback) {
    const auto it = s.params.find(key);
    if (it == s.params.end()) return fallback;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw ConfigError("bad number '" + it->second + "' for " + key);
    }
    return v;
}

inline std::array<double, 2> point_param(const InitialSpec& s, const std::string& key,
                                         const Grid& g) {
    std::array<double, 2> c{0.5 * g.length, 0.5 * g.length};
    const auto it = s.params.find(key);
    if (it == s.params.end()) return c;
    std::string text = it->second;
    const auto comma = text.find(',');
    InitialSpec one;
    one.params["v"] = text.substr(0, comma);
    c[0] = param(one, "v", 0.0);
    if (comma != std::string::npos) {
        one.params["v"] = text.substr(comma + 1);
        c[1] = param(one, "v", 0.0);
    } else {
        c[1] = c[0];
    }
    return c;
}

// Nearest periodic image distance along one axis.
inline double periodic_delta(double x, double c, double L) {
    double d = x - c;
    d -= L * std::round(d / L);
    return d;
}

// 3-point Gauss-Legendre on `sub` sub-intervals per axis.
inline Field cell_average(const Grid& g, const std::function<double(double, double)>& f,
                          int sub = 4) {
    static constexpr std::array<double, 3> node{-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr std::array<double, 3> weight{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const double h = g.spacing();
    const double hs = h / sub;
    std::vector<double> out(g.size());
    std::vector<double> xs;
    std::vector<double> ws;
    for (int s = 0; s < sub; ++s) {
        for (int q = 0; q < 3; ++q) {
            xs.push_back((s + 0.5 + 0.5 * node[q]) * hs);
            ws.push_back(0.5 * weight[q] / sub);
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x0 = g.coord(i, 0) * h;
        double acc = 0.0;
        if (g.dim == 1) {
            for (std::size_t a = 0; a < xs.size(); ++a) acc += ws[a] * f(x0 + xs[a], 0.0);
        } else {
            const double y0 = g.coord(i, 1) * h;
            for (std::size_t a = 0; a < xs.size(); ++a) {
                for (std::size_t b = 0; b < xs.size(); ++b) {
                    acc += ws[a] * ws[b] * f(x0 + xs[a], y0 + xs[b]);
                }
            }
        }
        out[i] = acc;
    }
    return Field(g, std::move(out));
}

} // namespace detail

// Cell averages of a Barenblatt profile at time t. In 1-D each cell is split
// at the support edge so the quadrature sees a smooth integrand.
inline Field barenblatt_cell_averages(const Grid& g, const Barenblatt& B, double t) {
    const double R = B.radius(t);
    if (R >= 0.5 * g.length) {
        throw ConfigError("Barenblatt support radius " + std::to_string(R) + " at t = " +
                          std::to_string(t) + " does not fit; need length > " +
                          std::to_string(2.0 * R));
    }
    if (g.dim == 2) {
        return detail::cell_average(
            g,
            [&](double x, double y) {
                const double dx = detail::periodic_delta(x, B.center[0], g.length);
                const double dy = detail::periodic_delta(y, B.center[1], g.length);
                return B.at_r2(t, dx * dx + dy * dy);
            },
            8);
    }
    static constexpr std::array<double, 5> node{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                0.5384693101056831, 0.9061798459386640};
    static constexpr std::array<double, 5> weight{0.2369268850561891, 0.4786286704993665,
                                                  0.5688888888888889, 0.4786286704993665,
                                                  0.2369268850561891};
    const double h = g.spacing();
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double xl = g.coord(i, 0) * h;
        const double dl = detail::periodic_delta(xl, B.center[0], g.length);
        const double lo = std::max(dl, -R);
        const double hi = std::min(dl + h, R);
        if (hi <= lo) continue;
        constexpr int sub = 8;
        const double hs = (hi - lo) / sub;
        double acc = 0.0;
        for (int s = 0; s < sub; ++s) {
            for (int q = 0; q < 5; ++q) {
                const double x = lo + (s + 0.5 + 0.5 * node[q]) * hs;
                acc += 0.5 * weight[q] * hs * B.at_r2(t, x * x);
            }
        }
        out[i] = acc / h;
    }
    return Field(g, std::move(out));
}

inline Barenblatt barenblatt_from_spec(const InitialSpec& s, const Grid& g) {
    Barenblatt B;
    B.m = detail::param(s, "m", 2.0);
    B.C = detail::param(s, "C", 1.0);
    B.dim = g.dim;
    B.center = detail::point_param(s, "center", g);
    if (!(B.m > 1.0)) throw ConfigError("Barenblatt generator needs m > 1");
    if (!(B.C > 0.0)) throw ConfigError("Barenblatt generator needs C > 0");
    return B;
}

// base_dir resolves relative file paths.
inline Field generate_initial(const InitialSpec& s, const Grid& g,
                              const std::string& base_dir = "") {
    using detail::param;
    if (s.kind == "zero") return Field(g, 0.0);
    if (s.kind == "uniform") return Field(g, param(s, "value", 0.0));
    if (s.kind == "gaussian" || s.kind == "two_bump") {
        const double w = param(s, "width", 0.25);
        const double amp = param(s, "amplitude", 1.0);
        if (!(w > 0.0)) throw ConfigError("gaussian width must be positive");
        std::vector<std::array<double, 2>> centers;
        if (s.kind == "gaussian") {
            centers.push_back(detail::point_param(s, "center", g));
        } else {
            auto c1 = detail::point_param(s, "center1", g);
            auto c2 = detail::point_param(s, "center2", g);
            if (!s.params.contains("center1")) c1[0] = 0.35 * g.length;
            if (!s.params.contains("center2")) c2[0] = 0.65 * g.length;
            centers = {c1, c2};
        }
        return detail::cell_average(g, [&](double x, double y) {
            double v = 0.0;
            for (const auto& c : centers) {
                const double dx = detail::periodic_delta(x, c[0], g.length);
                double r2 = dx * dx;
                if (g.dim == 2) {
                    const double dy = detail::periodic_delta(y, c[1], g.length);
                    r2 += dy * dy;
                }
                v += amp * std::exp(-r2 / (w * w));
            }
            return v;
        });
    }
    if (s.kind == "disk") {
        const auto c = detail::point_param(s, "center", g);
        const double r = param(s, "radius", 0.25 * g.length);
        const double value = param(s, "value", 1.0);
        return detail::cell_average(
            g,
            [&](double x, double y) {
                const double dx = detail::periodic_delta(x, c[0], g.length);
                double r2 = dx * dx;
                if (g.dim == 2) {
                    const double dy = detail::periodic_delta(y, c[1], g.length);
                    r2 += dy * dy;
                }
                return r2 <= r * r ? value : 0.0;
            },
            8);
    }
    if (s.kind == "barenblatt") {
        const Barenblatt B = barenblatt_from_spec(s, g);
        const double t0 = param(s, "t0", 0.1);
        if (!(t0 > 0.0)) throw ConfigError("Barenblatt generator needs t0 > 0");
        return barenblatt_cell_averages(g, B, t0);
    }
    if (s.kind == "file") {
        std::string path = s.params.at("path");
        if (!base_dir.empty() && !path.empty() && path.front() != '/') path = base_dir + "/" + path;
        try {
            return load_snapshot(path, g).field;
        } catch (const IoError& e) {
            throw ConfigError(std::string("initial data: ") + e.what());
        }
    }
    throw ConfigError("unknown initial-data generator '" + s.kind + "'");
}

} // namespace xflow

#endif
