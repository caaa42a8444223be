#ifndef XFLOW_SOLVER_HPP
#define XFLOW_SOLVER_HPP

// Explicit upwind finite-volume stepping of the two-species q-form system
//
//   d_t rho_i = div(theta_i grad q + gamma grad rho_i - rho_i V) + S_i,
//   d_t n     = alpha lap n - n (c1 rho1 + c2 rho2),
//
// with rho = rho1 + rho2, q = e'(rho), theta_i = rho_i / rho, and
// S_i = rho1 F_i1 + rho2 F_i2 evaluated at (p, n), p = (z*)^-1(q).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xflow/config.hpp"
#include "xflow/errors.hpp"
#include "xflow/grid.hpp"
#include "xflow/ledger.hpp"
#include "xflow/state.hpp"

namespace xflow {

inline Field total_density(const SimState& s) {
    std::vector<double> rho(s.rho1.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = s.rho1[i] + s.rho2[i];
    return Field(s.rho1.grid(), std::move(rho));
}

struct DerivedFields {
    Field rho;
    Field q;
    Field p;
    Field mu;
    double mu_over_rho_max = 0.0; // over cells with rho > 0
};

inline DerivedFields derived_fields(const SimState& s, const SimConfig& cfg) {
    const Grid& g = s.rho1.grid();
    const std::size_t n = g.size();
    std::vector<double> rho(n), q(n), p(n), mu(n);
    double mor = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = s.rho1[i] + s.rho2[i];
        rho[i] = r;
        if (r > 0.0) {
            q[i] = cfg.energy.eprime(r);
            p[i] = q[i] > 0.0 ? cfg.energy.zstarinv(q[i]) : 0.0;
            const auto F = cfg.sources(p[i], s.nutrient[i]);
            mu[i] = s.rho1[i] * (F[0] + F[2]) + s.rho2[i] * (F[1] + F[3]);
            mor = std::max(mor, std::abs(mu[i] / r));
        }
    }
    return {Field(g, std::move(rho)), Field(g, std::move(q)), Field(g, std::move(p)),
            Field(g, std::move(mu)), mor};
}

// Time step restriction of the explicit scheme. Species diffusion and
// transport share one bound, as do nutrient diffusion and consumption:
//   dt_s = 1 / (2d (D + gamma)/h^2 + d (max|V| + max|grad p| + eps)/h)
//   dt_n = 1 / (2d alpha/h^2 + max(c1 rho1 + c2 rho2))
//   dt   = safety min(dt_s, dt_n, 1/(2B))
// where D = max over occupied cells of max(e''(rho), e'(rho)/rho) and
// grad p is taken on faces between occupied cells.
inline double cfl_dt(const SimState& s, const SimConfig& cfg, const DerivedFields& d) {
    const Grid& g = cfg.grid;
    const double h = g.spacing();
    const double dim = g.dim;
    double D = 0.0;
    double consume = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = d.rho[i];
        if (r > 0.0) D = std::max(D, cfg.energy.diffusivity(r));
        consume = std::max(consume, cfg.c1() * s.rho1[i] + cfg.c2() * s.rho2[i]);
    }
    double gp = 0.0;
    for (int k = 0; k < g.dim; ++k) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = g.neighbor(i, k, 1);
            if (d.rho[i] > 0.0 && d.rho[j] > 0.0) gp = std::max(gp, std::abs(d.p[j] - d.p[i]) / h);
        }
    }
    constexpr double eps = 1e-14;
    const double inf = std::numeric_limits<double>::infinity();
    const double rate_s =
        2.0 * dim * (D + cfg.gamma()) / (h * h) + dim * (cfg.velocity.speed_max() + gp + eps) / h;
    const double rate_n = 2.0 * dim * cfg.alpha() / (h * h) + consume;
    const double dt_s = 1.0 / rate_s;
    const double dt_n = rate_n > 0.0 ? 1.0 / rate_n : inf;
    const double dt_src = cfg.sources.bound() > 0.0 ? 0.5 / cfg.sources.bound() : inf;
    return cfg.cfl_safety() * std::min({dt_s, dt_n, dt_src});
}

inline double cfl_dt(const SimState& s, const SimConfig& cfg) {
    return cfl_dt(s, cfg, derived_fields(s, cfg));
}

struct SpeciesFluxes {
    FaceFlux j1;
    FaceFlux j2;
    FaceFlux total; // -grad q (where the upwind cell is occupied) - gamma grad rho + upwind(rho) V
};

inline SpeciesFluxes species_fluxes(const SimState& s, const SimConfig& cfg,
                                    const DerivedFields& d) {
    const Grid& g = cfg.grid;
    const double inv_h = 1.0 / g.spacing();
    const double gamma = cfg.gamma();
    const FaceFlux& V = cfg.velocity.faces();
    SpeciesFluxes out{FaceFlux(g), FaceFlux(g), FaceFlux(g)};
    for (int k = 0; k < g.dim; ++k) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = g.neighbor(i, k, 1);
            const double G = -(d.q[j] - d.q[i]) * inv_h;
            const std::size_t up = G >= 0.0 ? i : j;
            double th1 = 0.0;
            double th2 = 0.0;
            if (d.rho[up] > 0.0) {
                th1 = s.rho1[up] / d.rho[up];
                th2 = 1.0 - th1;
            }
            const double v = V.axes[k][i];
            const std::size_t upv = v >= 0.0 ? i : j;
            const double a1 = th1 * G - gamma * (s.rho1[j] - s.rho1[i]) * inv_h + s.rho1[upv] * v;
            const double a2 = th2 * G - gamma * (s.rho2[j] - s.rho2[i]) * inv_h + s.rho2[upv] * v;
            out.j1.axes[k][i] = a1;
            out.j2.axes[k][i] = a2;
            out.total.axes[k][i] = (d.rho[up] > 0.0 ? G : 0.0) -
                                   gamma * (d.rho[j] - d.rho[i]) * inv_h + d.rho[upv] * v;
        }
    }
    return out;
}

struct StepResult {
    SimState state;
    double clipped_mass = 0.0; // mass removed by clipping negative undershoots
};

namespace detail {

inline std::string step_dump(const SimState& s, double dt, std::size_t cell, const char* what) {
    std::ostringstream os;
    os.precision(17);
    os << what << " at t = " << s.t << ", dt = " << dt << ", cell " << cell
       << " (rho1 = " << s.rho1[cell] << ", rho2 = " << s.rho2[cell]
       << ", n = " << s.nutrient[cell] << ")";
    return os.str();
}

// Sets negative values to zero; returns the removed (negative) mass.
inline double clip_negative(std::vector<double>& v, double cell_volume) {
    double clipped = 0.0;
    for (double& x : v) {
        if (x < 0.0) {
            if (x < -1e-12) clipped -= x;
            x = 0.0;
        }
    }
    return clipped * cell_volume;
}

} // namespace detail

inline StepResult step(const SimState& s, const SimConfig& cfg, double dt,
                       const DerivedFields& d) {
    const Grid& g = cfg.grid;
    const std::size_t n = g.size();
    const double inv_h = 1.0 / g.spacing();
    const SpeciesFluxes J = species_fluxes(s, cfg, d);

    std::vector<double> r1(s.rho1.values().begin(), s.rho1.values().end());
    std::vector<double> r2(s.rho2.values().begin(), s.rho2.values().end());
    std::vector<double> nn(s.nutrient.values().begin(), s.nutrient.values().end());

    for (std::size_t i = 0; i < n; ++i) {
        double div1 = 0.0;
        double div2 = 0.0;
        double lap_n = 0.0;
        for (int k = 0; k < g.dim; ++k) {
            const std::size_t im = g.neighbor(i, k, -1);
            const std::size_t ip = g.neighbor(i, k, 1);
            div1 += (J.j1.axes[k][i] - J.j1.axes[k][im]) * inv_h;
            div2 += (J.j2.axes[k][i] - J.j2.axes[k][im]) * inv_h;
            lap_n += (s.nutrient[ip] - 2.0 * s.nutrient[i] + s.nutrient[im]) * inv_h * inv_h;
        }
        double S1 = 0.0;
        double S2 = 0.0;
        if (d.rho[i] > 0.0) {
            const auto F = cfg.sources(d.p[i], s.nutrient[i]);
            S1 = s.rho1[i] * F[0] + s.rho2[i] * F[1];
            S2 = s.rho1[i] * F[2] + s.rho2[i] * F[3];
        }
        r1[i] += dt * (S1 - div1);
        r2[i] += dt * (S2 - div2);
        nn[i] += dt * (cfg.alpha() * lap_n -
                       s.nutrient[i] * (cfg.c1() * s.rho1[i] + cfg.c2() * s.rho2[i]));
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(r1[i]) || !std::isfinite(r2[i]) || !std::isfinite(nn[i])) {
            throw NumericalAbort(detail::step_dump(s, dt, i, "non-finite value after step"));
        }
    }
    StepResult out;
    const double vol = g.cell_volume();
    out.clipped_mass = detail::clip_negative(r1, vol) + detail::clip_negative(r2, vol);
    detail::clip_negative(nn, vol);

    const double amax = cfg.energy.a_max();
    if (std::isfinite(amax)) {
        for (std::size_t i = 0; i < n; ++i) {
            if (r1[i] + r2[i] >= amax) {
                throw NumericalAbort(detail::step_dump(s, dt, i, "density reached the energy's domain bound") +
                                     "; use an energy with more headroom (larger m or a_max)");
            }
        }
    }
    out.state.t = s.t + dt;
    out.state.rho1 = Field(g, std::move(r1));
    out.state.rho2 = Field(g, std::move(r2));
    out.state.nutrient = Field(g, std::move(nn));
    return out;
}

inline StepResult step(const SimState& s, const SimConfig& cfg, double dt) {
    return step(s, cfg, dt, derived_fields(s, cfg));
}

// Instantaneous integrals of one state, the integrands of the ledger.
struct StateMetrics {
    double grad_q_sq = 0.0;
    double estar_divv = 0.0;
    double mu_q = 0.0;
    double e_rho = 0.0;
    double rho_l1 = 0.0;
    double rho_l2 = 0.0;
    double rho_linf = 0.0;
    double estar_l1 = 0.0;
    double e_l1 = 0.0;
    double gamma_grad_rho_sq = 0.0;
    double mu_over_rho_max = 0.0;
    double mu_l2 = 0.0;
    double rhov_l2 = 0.0;
    double estar_l2 = 0.0;
    double q_l2 = 0.0;
};

inline StateMetrics state_metrics(const SimConfig& cfg, const DerivedFields& d,
                                  const FaceFlux& grad_q) {
    const Grid& g = cfg.grid;
    const double vol = g.cell_volume();
    const double inv_h = 1.0 / g.spacing();
    const auto divv = cfg.velocity.divergence_cells();
    const FaceFlux& V = cfg.velocity.faces();
    StateMetrics m;
    double es2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = d.rho[i];
        const double q = d.q[i];
        const double es = cfg.energy.estar(q);
        const double er = cfg.energy.e(r);
        m.estar_divv += es * divv[i];
        m.mu_q += d.mu[i] * q;
        m.e_rho += er;
        m.e_l1 += std::abs(er);
        m.estar_l1 += std::abs(es);
        es2 += es * es;
    }
    m.estar_divv *= vol;
    m.mu_q *= vol;
    m.e_rho *= vol;
    m.e_l1 *= vol;
    m.estar_l1 *= vol;
    m.estar_l2 = std::sqrt(es2 * vol);
    m.grad_q_sq = std::pow(face_l2_norm(grad_q), 2);
    m.rho_l1 = lp_norm(d.rho, Norm::L1);
    m.rho_l2 = lp_norm(d.rho, Norm::L2);
    m.rho_linf = lp_norm(d.rho, Norm::Linf);
    m.q_l2 = lp_norm(d.q, Norm::L2);
    m.mu_l2 = lp_norm(d.mu, Norm::L2);
    m.mu_over_rho_max = d.mu_over_rho_max;
    double gr = 0.0;
    double rv = 0.0;
    for (int k = 0; k < g.dim; ++k) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = g.neighbor(i, k, 1);
            const double dr = (d.rho[j] - d.rho[i]) * inv_h;
            gr += dr * dr;
            const double v = V.axes[k][i];
            const double f = (v >= 0.0 ? d.rho[i] : d.rho[j]) * v;
            rv += f * f;
        }
    }
    m.gamma_grad_rho_sq = cfg.gamma() * gr * vol;
    m.rhov_l2 = std::sqrt(rv * vol);
    return m;
}

// What an observer sees for each state k (dt = 0 on the final state).
struct StepView {
    std::size_t k = 0;
    double dt = 0.0;
    const SimState& state;
    const DerivedFields& derived;
    const FaceFlux& grad_q;
};

struct RunOptions {
    std::function<void(const StepView&)> observer;
    std::vector<double> sample_times; // steps land exactly on these
    double fixed_dt = 0.0;            // 0: adaptive; otherwise must respect the CFL bound
    std::size_t max_steps = 50'000'000;
};

struct Trajectory {
    std::vector<SimState> snapshots; // t = 0, every snapshot_every, final
    DissipationLedger ledger;
    SimState final_state;
    std::size_t steps = 0;
    std::string abort_reason; // empty on success
    std::vector<std::string> warnings;

    bool aborted() const noexcept { return !abort_reason.empty(); }
};

// Steps from t = 0 to t_end. A numerical abort ends the run early; the
// partial trajectory is returned with abort_reason set.
inline Trajectory run(const SimConfig& cfg, const RunOptions& opt = {}) {
    const Grid& g = cfg.grid;
    const double T = cfg.t_end();
    const double fixed = opt.fixed_dt > 0.0 ? opt.fixed_dt : cfg.spec.fixed_dt;
    std::vector<double> stops = opt.sample_times;
    if (cfg.spec.snapshot_every > 0.0) {
        for (int k = 1;; ++k) {
            const double ts = k * cfg.spec.snapshot_every;
            if (ts >= T * (1.0 - 1e-12)) break;
            stops.push_back(ts);
        }
    }
    stops.push_back(T);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::remove_if(stops.begin(), stops.end(), [&](double v) { return !(v > 0.0) || v > T; }),
                stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
    auto is_snapshot_time = [&](double t) {
        if (cfg.spec.snapshot_every <= 0.0) return false;
        const double r = t / cfg.spec.snapshot_every;
        return std::abs(r - std::round(r)) < 1e-9;
    };

    Trajectory tr;
    SpectralWorkspace spectral(g);
    SimState s = cfg.initial;
    tr.snapshots.push_back(s);
    LedgerRow acc; // cumulative values so far
    acc.divv_max = cfg.velocity.divergence_max();
    double clipped = 0.0;
    std::size_t next_stop = 0;

    for (std::size_t k = 0;; ++k) {
        DerivedFields d = derived_fields(s, cfg);
        const FaceFlux grad_q = gradient_faces(d.q);
        const StateMetrics m = state_metrics(cfg, d, grad_q);

        LedgerRow row = acc;
        row.t = s.t;
        row.e_rho = m.e_rho;
        row.rho_l1 = m.rho_l1;
        row.rho_l2 = m.rho_l2;
        row.rho_linf = m.rho_linf;
        row.grad_q_l2 = std::sqrt(m.grad_q_sq);
        row.clipped_mass = clipped;
        row.mu_over_rho_max = m.mu_over_rho_max;
        row.mu_l2 = m.mu_l2;
        row.rhov_l2 = m.rhov_l2;
        row.estar_l2 = m.estar_l2;
        row.q_l2 = m.q_l2;

        const bool done = next_stop >= stops.size() || s.t >= T;
        if (done || tr.aborted() || k >= opt.max_steps) {
            if (!done && !tr.aborted()) tr.abort_reason = "step limit reached";
            row.dt = 0.0;
            row.dtrho_hm1 = 0.0;
            tr.ledger.rows.push_back(row);
            if (opt.observer) opt.observer(StepView{k, 0.0, s, d, grad_q});
            break;
        }

        double dt = 0.0;
        try {
            const double limit = cfl_dt(s, cfg, d);
            if (fixed > 0.0) {
                if (fixed > limit * (1.0 + 1e-12)) {
                    std::ostringstream os;
                    os.precision(17);
                    os << "fixed dt " << fixed << " exceeds the stability bound " << limit
                       << " at t = " << s.t;
                    throw NumericalAbort(os.str());
                }
                dt = fixed;
            } else {
                dt = limit;
            }
            const double stop = stops[next_stop];
            bool landed = false;
            if (s.t + dt >= stop * (1.0 - 1e-13)) {
                dt = stop - s.t;
                landed = true;
            }
            if (opt.observer) opt.observer(StepView{k, dt, s, d, grad_q});
            StepResult res = step(s, cfg, dt, d);
            if (landed) {
                res.state.t = stop;
                ++next_stop;
            }

            std::vector<double> dq(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                dq[i] = (res.state.rho1[i] + res.state.rho2[i] - d.rho[i]) / dt;
            }
            row.dt = dt;
            row.dtrho_hm1 = spectral.hminus1(dq).seminorm;
            tr.ledger.rows.push_back(row);

            acc.cum_grad_q_sq += dt * m.grad_q_sq;
            acc.cum_estar_divv += dt * m.estar_divv;
            acc.cum_mu_q += dt * m.mu_q;
            acc.cum_estar_l1 += dt * m.estar_l1;
            acc.cum_e_l1 += dt * m.e_l1;
            acc.cum_gamma_grad_rho_sq += dt * m.gamma_grad_rho_sq;
            clipped += res.clipped_mass;

            s = std::move(res.state);
            ++tr.steps;
            if (landed && is_snapshot_time(s.t) && s.t < T) tr.snapshots.push_back(s);
        } catch (const NumericalAbort& e) {
            tr.abort_reason = e.what();
            // fall through: the next iteration records the last good state
        } catch (const std::domain_error& e) {
            tr.abort_reason = std::string("evaluation outside the energy domain: ") + e.what();
        }
    }
    if (tr.snapshots.back().t != s.t) tr.snapshots.push_back(s);
    tr.final_state = s;
    const double frac = boundary_mass_fraction(total_density(s));
    if (frac > 1e-3) {
        std::ostringstream os;
        os << "fraction " << frac << " of the mass lies near the periodic boundary; "
           << "the domain may be too small for the whole-space problem";
        tr.warnings.push_back(os.str());
    }
    return tr;
}

} // namespace xflow

#endif
