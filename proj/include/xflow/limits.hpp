#ifndef XFLOW_LIMITS_HPP
#define XFLOW_LIMITS_HPP

// Limit studies on a fixed grid: vanishing viscosity (gamma -> 0), the
// incompressible limit (m -> infinity), Barenblatt validation, and grid
// refinement of the diagnostics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "xflow/config.hpp"
#include "xflow/diagnostics.hpp"
#include "xflow/initial_data.hpp"
#include "xflow/solver.hpp"
#include "xflow/table.hpp"

namespace xflow {

// Runs body(i) for i in [0, n) on up to `threads` workers. The first
// exception is rethrown after all workers finish.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Pure porous-medium reference physics: m = 2, d = 1, box of length 4,
// one Gaussian bump, no drift, no sources.
inline ConfigSpec reference_pme_spec(int cells = 256, double t_end = 0.5) {
    ConfigSpec s;
    s.grid = Grid{1, cells, 4.0};
    s.energy.family = "power";
    s.energy.m = 2.0;
    s.t_end = t_end;
    s.rho1 = parse_initial_spec("gaussian center=2 width=0.3 amplitude=1");
    s.rho2 = parse_initial_spec("zero");
    return s;
}

// Fixed step of the reference family: kBalanceDtRef at 256 cells, halved
// with every doubling of the grid.
inline double reference_dt(int cells) { return kBalanceDtRef * 256.0 / cells; }

struct StudyResult {
    Table table;
    std::string abort_reason; // set when a member run aborted; table is partial
    bool aborted() const noexcept { return !abort_reason.empty(); }
};

namespace detail {

inline std::vector<double> flatten(const FaceFlux& f) {
    std::vector<double> out;
    for (int k = 0; k < f.grid.dim; ++k) out.insert(out.end(), f.axes[k].begin(), f.axes[k].end());
    return out;
}

inline double sq_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace detail

// Columns: gamma, dist = ||grad q_gamma - grad q_0||_{L2(Q_T)},
// grad_q = ||grad q_gamma||_{L2(Q_T)}, rel = dist / ||grad q_0||.
// All members share one fixed dt (the stability bound of the largest gamma
// at t = 0), so step k of every member covers the same time interval and
// the distance is summed step by step. Rows are sorted by gamma descending.
inline StudyResult vanishing_viscosity_study(const ConfigSpec& base, std::vector<double> gammas,
                                             const std::string& base_dir = "",
                                             unsigned threads = 1) {
    if (gammas.empty()) throw ConfigError("viscosity study needs at least one gamma");
    for (const double g : gammas) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("gammas must be finite and >= 0");
    }
    std::sort(gammas.begin(), gammas.end(), std::greater<>());
    StudyResult out;
    out.table.columns = {"gamma", "dist", "grad_q", "rel"};

    ConfigSpec widest = base;
    widest.gamma = std::max(gammas.front(), base.gamma);
    const SimConfig wcfg = build_config(widest, base_dir);
    const double dt = cfl_dt(wcfg.initial, wcfg);

    ConfigSpec ref_spec = base;
    ref_spec.gamma = 0.0;
    const SimConfig ref_cfg = build_config(ref_spec, base_dir);
    std::vector<std::vector<double>> ref_grad;
    std::vector<double> ref_dt;
    RunOptions ropt;
    ropt.fixed_dt = dt;
    ropt.observer = [&](const StepView& v) {
        if (v.dt > 0.0) {
            ref_grad.push_back(detail::flatten(v.grad_q));
            ref_dt.push_back(v.dt);
        }
    };
    const Trajectory ref = run(ref_cfg, ropt);
    if (ref.aborted()) {
        out.abort_reason = "reference run (gamma = 0): " + ref.abort_reason;
        return out;
    }
    const double vol = ref_cfg.grid.cell_volume();
    const double ref_norm = std::sqrt(ref.ledger.back().cum_grad_q_sq);

    std::vector<std::vector<double>> rows(gammas.size());
    std::vector<std::string> errors(gammas.size());
    parallel_for(gammas.size(), threads, [&](std::size_t idx) {
        ConfigSpec spec = base;
        spec.gamma = gammas[idx];
        const SimConfig cfg = build_config(spec, base_dir);
        double dist2 = 0.0;
        std::string mismatch;
        RunOptions opt;
        opt.fixed_dt = dt;
        opt.observer = [&](const StepView& v) {
            if (v.dt <= 0.0) return;
            if (v.k >= ref_dt.size() || v.dt != ref_dt[v.k]) {
                if (mismatch.empty()) mismatch = "time grids diverged at step " + std::to_string(v.k);
                return;
            }
            dist2 += v.dt * vol * detail::sq_distance(detail::flatten(v.grad_q), ref_grad[v.k]);
        };
        const Trajectory tr = run(cfg, opt);
        if (tr.aborted()) {
            errors[idx] = "gamma = " + format_double(gammas[idx]) + ": " + tr.abort_reason;
            return;
        }
        if (!mismatch.empty() || tr.steps != ref_dt.size()) {
            errors[idx] = "gamma = " + format_double(gammas[idx]) + ": " +
                          (mismatch.empty() ? std::string("step counts differ") : mismatch);
            return;
        }
        const double dist = std::sqrt(dist2);
        rows[idx] = {gammas[idx], dist, std::sqrt(tr.ledger.back().cum_grad_q_sq),
                     ref_norm > 0.0 ? dist / ref_norm : 0.0};
    });
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        if (!errors[i].empty()) {
            out.abort_reason = errors[i];
            break;
        }
        out.table.add(rows[i]);
    }
    return out;
}

// Columns: m, overshoot = max over Q_T of (rho - 1)_+,
// complementarity = int_0^T int (1 - rho)_+ max(p, 0),
// cauchy = ||grad q_m - grad q_{m_prev}||_{L2(Q_T)} (0 on the first row),
// grad_q = ||grad q_m||_{L2(Q_T)}, rho_max, linf_bound (the rho_linf
// right-hand side at T).
// Members step adaptively; gradients are compared at `samples` + 1 shared,
// equally spaced times that every run lands on exactly, with the
// trapezoid rule in time.
inline StudyResult incompressible_limit_study(const ConfigSpec& base, std::vector<double> exponents,
                                              const std::string& base_dir = "",
                                              unsigned threads = 1, int samples = 200) {
    if (exponents.size() < 1) throw ConfigError("incompressible study needs exponents");
    for (std::size_t i = 0; i < exponents.size(); ++i) {
        if (!(exponents[i] > 1.0)) throw ConfigError("incompressible study needs exponents m > 1");
        if (i && !(exponents[i] > exponents[i - 1])) {
            throw ConfigError("exponents must be strictly increasing");
        }
    }
    if (samples < 2) throw ConfigError("need at least two sample intervals");
    const double T = base.t_end;
    std::vector<double> times;
    for (int j = 1; j <= samples; ++j) times.push_back(T * j / samples);

    struct Member {
        double overshoot = 0.0;
        double complementarity = 0.0;
        double rho_max = 0.0;
        double linf_bound = 0.0;
        double grad_q = 0.0;
        std::vector<std::vector<double>> grads; // at t = 0 and each sample time
        std::string error;
    };
    std::vector<Member> members(exponents.size());

    parallel_for(exponents.size(), threads, [&](std::size_t idx) {
        ConfigSpec spec = base;
        spec.energy.family = "power";
        spec.energy.m = exponents[idx];
        Member& mem = members[idx];
        const SimConfig cfg = build_config(spec, base_dir);
        if (total_density(cfg.initial).max() > 1.0) {
            throw ConfigError("incompressible study needs initial density <= 1");
        }
        const double vol = cfg.grid.cell_volume();
        std::size_t next_sample = 0;
        RunOptions opt;
        opt.sample_times = times;
        opt.observer = [&](const StepView& v) {
            for (std::size_t i = 0; i < v.derived.rho.size(); ++i) {
                const double r = v.derived.rho[i];
                mem.overshoot = std::max(mem.overshoot, r - 1.0);
                mem.rho_max = std::max(mem.rho_max, r);
                if (v.dt > 0.0) {
                    mem.complementarity +=
                        v.dt * vol * std::max(1.0 - r, 0.0) * std::max(v.derived.p[i], 0.0);
                }
            }
            const bool at_sample =
                v.k == 0 || (next_sample < times.size() && v.state.t == times[next_sample]);
            if (at_sample) {
                if (v.k != 0) ++next_sample;
                mem.grads.push_back(detail::flatten(v.grad_q));
            }
        };
        const Trajectory tr = run(cfg, opt);
        if (tr.aborted()) {
            mem.error = "m = " + format_double(exponents[idx]) + ": " + tr.abort_reason;
            return;
        }
        if (mem.grads.size() != times.size() + 1) {
            mem.error = "m = " + format_double(exponents[idx]) + ": missed sample times";
            return;
        }
        mem.overshoot = std::max(mem.overshoot, 0.0);
        mem.grad_q = std::sqrt(tr.ledger.back().cum_grad_q_sq);
        const auto P = monitor_params(cfg);
        for (const auto& e : estimate_monitors(tr.ledger, T, P)) {
            if (e.name == "rho_linf") mem.linf_bound = e.rhs;
        }
    });

    StudyResult out;
    out.table.columns = {"m", "overshoot", "complementarity", "cauchy", "grad_q", "rho_max",
                         "linf_bound"};
    const double dtau = T / samples;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (!members[i].error.empty()) {
            out.abort_reason = members[i].error;
            break;
        }
        double cauchy = 0.0;
        if (i > 0) {
            const double vol = base.grid.cell_volume();
            double acc = 0.0;
            for (std::size_t j = 0; j < members[i].grads.size(); ++j) {
                const double w = (j == 0 || j + 1 == members[i].grads.size()) ? 0.5 : 1.0;
                acc += w * dtau * vol * detail::sq_distance(members[i].grads[j], members[i - 1].grads[j]);
            }
            cauchy = std::sqrt(acc);
        }
        const Member& m = members[i];
        out.table.add({exponents[i], m.overshoot, m.complementarity, cauchy, m.grad_q, m.rho_max,
                       m.linf_bound});
    }
    return out;
}

struct BarenblattSetup {
    double m = 2.0;
    double t0 = 0.1;
    double T = 0.6;    // physical end time
    double C = 1.0;
    double length = 8.0;
    double cfl_safety = 0.9;
};

// Columns: N, l1_error (relative to mass), order = log2(err_N / err_2N)
// (NaN on the finest grid), mass_numeric, mass_exact.
inline StudyResult barenblatt_validation(const BarenblattSetup& b, const std::vector<int>& grids,
                                         unsigned threads = 1) {
    if (grids.empty()) throw ConfigError("Barenblatt validation needs grid sizes");
    if (!(b.T >= b.t0)) throw ConfigError("Barenblatt validation needs T >= t0");
    std::vector<std::vector<double>> rows(grids.size());
    std::vector<std::string> errors(grids.size());
    parallel_for(grids.size(), threads, [&](std::size_t idx) {
        ConfigSpec s;
        s.grid = Grid{1, grids[idx], b.length};
        s.energy.family = "power";
        s.energy.m = b.m;
        s.t_end = b.T - b.t0;
        s.cfl_safety = b.cfl_safety;
        s.rho1 = parse_initial_spec("barenblatt m=" + format_double(b.m) + " t0=" +
                                    format_double(b.t0) + " C=" + format_double(b.C));
        s.grid.validate();
        Barenblatt B = barenblatt_from_spec(s.rho1, s.grid);
        const Field exact = barenblatt_cell_averages(s.grid, B, b.T); // throws if the box is too small
        const SimConfig cfg = build_config(s);
        const Trajectory tr = run(cfg);
        if (tr.aborted()) {
            errors[idx] = "N = " + std::to_string(grids[idx]) + ": " + tr.abort_reason;
            return;
        }
        const Field rho = total_density(tr.final_state);
        double diff = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i) diff += std::abs(rho[i] - exact[i]);
        diff *= s.grid.cell_volume();
        const double mass_exact = integrate(exact);
        rows[idx] = {static_cast<double>(grids[idx]), diff / mass_exact,
                     std::numeric_limits<double>::quiet_NaN(), integrate(rho), mass_exact};
    });
    StudyResult out;
    out.table.columns = {"N", "l1_error", "order", "mass_numeric", "mass_exact"};
    for (std::size_t i = 0; i < grids.size(); ++i) {
        if (!errors[i].empty()) {
            out.abort_reason = errors[i];
            break;
        }
        out.table.add(rows[i]);
    }
    auto& R = out.table.rows;
    for (std::size_t i = 0; i < R.size(); ++i) {
        for (std::size_t j = 0; j < R.size(); ++j) {
            if (R[j][0] == 2.0 * R[i][0] && R[j][1] > 0.0) R[i][2] = std::log2(R[i][1] / R[j][1]);
        }
    }
    return out;
}

enum class DtPolicy { Adaptive, Reference };

// Columns: N, h, dt (largest step), balance (B/scale at T), then one ratio
// column per estimate in estimate_names() order.
// DtPolicy::Reference steps with reference_dt(N), so h and dt halve
// together.
inline StudyResult refinement_study(const ConfigSpec& base, const std::vector<int>& grids,
                                    DtPolicy policy = DtPolicy::Adaptive,
                                    const std::string& base_dir = "", unsigned threads = 1) {
    std::vector<std::vector<double>> rows(grids.size());
    std::vector<std::string> errors(grids.size());
    parallel_for(grids.size(), threads, [&](std::size_t idx) {
        ConfigSpec spec = base;
        spec.grid.cells = grids[idx];
        const SimConfig cfg = build_config(spec, base_dir);
        RunOptions opt;
        if (policy == DtPolicy::Reference) opt.fixed_dt = reference_dt(grids[idx]);
        const Trajectory tr = run(cfg, opt);
        if (tr.aborted()) {
            errors[idx] = "N = " + std::to_string(grids[idx]) + ": " + tr.abort_reason;
            return;
        }
        const double T = tr.final_state.t;
        const double dt = max_dt(tr.ledger, T);
        const auto bal = dissipation_balance(tr.ledger, T, cfg.gamma(), cfg.grid.spacing(), dt);
        std::vector<double> row{static_cast<double>(grids[idx]), cfg.grid.spacing(), dt,
                                bal.relative};
        for (const auto& e : estimate_monitors(tr.ledger, T, monitor_params(cfg))) {
            row.push_back(e.ratio);
        }
        rows[idx] = std::move(row);
    });
    StudyResult out;
    out.table.columns = {"N", "h", "dt", "balance"};
    for (const auto& n : estimate_names()) out.table.columns.push_back(n);
    for (std::size_t i = 0; i < grids.size(); ++i) {
        if (!errors[i].empty()) {
            out.abort_reason = errors[i];
            break;
        }
        out.table.add(rows[i]);
    }
    return out;
}

// max/min - 1 over a column, the refinement variation of a monitor ratio.
inline double relative_spread(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo <= 0.0) return *hi > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return *hi / *lo - 1.0;
}

} // namespace xflow

#endif
