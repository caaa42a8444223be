// Acceptance run: one PASS/FAIL line per criterion, with the measured
// quantities and the wall time. Exit status is nonzero if any line fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "xflow/config.hpp"
#include "xflow/convex.hpp"
#include "xflow/diagnostics.hpp"
#include "xflow/energy.hpp"
#include "xflow/limits.hpp"
#include "xflow/solver.hpp"

using namespace xflow;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [violated: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int n, const char* title, const std::function<void(Verdict&)>& body) {
    Verdict v;
    v.detail.precision(4);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.pass = false;
        v.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("CRITERION %d %s  %s:%s (%.1f s)\n", n, v.pass ? "PASS" : "FAIL", title,
                v.detail.str().c_str(), secs);
    std::fflush(stdout);
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
    return x;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Non-increasing with at most `allowed` violations.
bool nonincreasing(const std::vector<double>& v, int allowed, double slack = 0.0) {
    int bad = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[i - 1] + slack) ++bad;
    }
    return bad <= allowed;
}

// The {power m = 2, entropy} x {sources off, on} x {V zero, rotating}
// matrix on the reference box, two species.
struct MatrixRun {
    std::string label;
    std::vector<EstimateReport> estimates;
    double duality = 0.0;
    bool aborted = false;
};

const std::vector<MatrixRun>& estimate_matrix() {
    static const std::vector<MatrixRun> runs = [] {
        std::vector<MatrixRun> out;
        for (const std::string family : {"power", "entropy"}) {
            for (const bool sources : {false, true}) {
                for (const bool rotating : {false, true}) {
                    ConfigSpec s = reference_pme_spec(256, 0.5);
                    s.energy.family = family;
                    s.rho2 = parse_initial_spec("gaussian center=2.6 width=0.25 amplitude=0.5");
                    if (sources) {
                        s.sources.model = "homeostatic";
                        s.sources.homeostatic = {1.0, 1.0, 0.3, 0.2};
                    }
                    if (rotating) {
                        s.velocity.kind = VelocityKind::Rotating;
                        s.velocity.omega = 1.0;
                    }
                    const SimConfig cfg = build_config(s);
                    MatrixRun r;
                    r.label = family + (sources ? "/src" : "/nosrc") + (rotating ? "/rot" : "/still");
                    RunOptions opt;
                    opt.observer = [&](const StepView& v) {
                        r.duality = std::max(r.duality, duality_residual(v.state, cfg));
                    };
                    const Trajectory tr = run(cfg, opt);
                    r.aborted = tr.aborted();
                    if (!r.aborted) r.estimates = estimate_monitors(tr.ledger, 0.5, monitor_params(cfg));
                    out.push_back(std::move(r));
                }
            }
        }
        return out;
    }();
    return runs;
}

const StudyResult& reference_refinement() {
    static const StudyResult r =
        refinement_study(reference_pme_spec(), {128, 256, 512}, DtPolicy::Reference, "", threads());
    return r;
}

double row_value(const StudyResult& r, double N, const std::string& col) {
    for (const auto& row : r.table.rows) {
        if (row[0] == N) return row[r.table.column(col)];
    }
    throw std::out_of_range("no row for N = " + std::to_string(N));
}

} // namespace

int main() {
    criterion(1, "Table-1 transform oracle", [](Verdict& v) {
        const auto a = linspace(0.0, 4.0, 4097);
        const auto b = linspace(0.0, 4.0, 4097);
        const auto fine = linspace(0.0, 4.0, 16385);
        double worst_e = 0.0;
        double worst_s = 0.0;
        std::vector<EnergyPair> energies{power_energy(1.5), power_energy(2.0), power_energy(3.0),
                                         power_energy(5.0), entropy_energy()};
        for (const auto& E : energies) {
            auto e_closed = [&](double x) {
                return E.family() == EnergyFamily::Entropy ? 0.5 * x * x
                                                           : std::pow(x, E.exponent() + 1.0) / (E.exponent() + 1.0);
            };
            auto estar_closed = [&](double y) {
                if (E.family() == EnergyFamily::Entropy) return 0.5 * y * y;
                const double m = E.exponent();
                return m / (m + 1.0) * std::pow(y, (m + 1.0) / m);
            };
            SampledFunction z{a, {}};
            for (const double x : a) z.f.push_back(E.z(x));
            const auto e = e_transform(z);
            for (std::size_t i = 0; i < a.size(); ++i) worst_e = std::max(worst_e, std::abs(e.f[i] - e_closed(a[i])));

            // e*, from e_transform on a finer primal grid followed by the
            // discrete conjugate, queried on the 4097 points
            SampledFunction zf{fine, {}};
            for (const double x : fine) zf.f.push_back(E.z(x));
            const auto es = conjugate(e_transform(zf), b);
            for (std::size_t j = 0; j < b.size(); ++j) worst_s = std::max(worst_s, std::abs(es[j] - estar_closed(b[j])));
        }
        v.detail << " max|e - closed| = " << worst_e << ", max|e* - closed| = " << worst_s;
        v.require(worst_e <= 1e-6, "e error <= 1e-6");
        v.require(worst_s <= 1e-6, "e* error <= 1e-6");
    });

    criterion(2, "Young inequality and duality residual", [](Verdict& v) {
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> A(0.0, 4.0);
        std::uniform_real_distribution<double> B(-10.0, 40.0);
        const std::vector<EnergyPair> energies{power_energy(1.5), power_energy(2.0), power_energy(3.0),
                                               power_energy(5.0), entropy_energy(), incompressible_energy()};
        double min_gap = kInf;
        double max_eq = 0.0;
        for (const auto& E : energies) {
            for (int k = 0; k < 100000; ++k) {
                const double a = std::min(A(rng), E.a_max());
                min_gap = std::min(min_gap, young_gap(E, a, B(rng)));
                if (E.single_valued_eprime() && a > 0.0) {
                    max_eq = std::max(max_eq, std::abs(young_gap(E, a, E.eprime(a))));
                }
            }
        }
        double dual = 0.0;
        bool aborted = false;
        for (const auto& r : estimate_matrix()) {
            dual = std::max(dual, r.duality);
            aborted = aborted || r.aborted;
        }
        v.detail << " min gap = " << min_gap << ", max gap at q = e'(a) = " << max_eq
                 << ", max duality residual over 8 trajectories = " << dual;
        v.require(min_gap >= -1e-12, "gap >= -1e-12");
        v.require(max_eq <= 1e-10, "equality gap <= 1e-10");
        v.require(!aborted, "trajectories complete");
        v.require(dual <= 1e-10, "duality residual <= 1e-10");
    });

    criterion(3, "conjugate convergence m -> infinity", [](Verdict& v) {
        const std::vector<double> ms{4, 16, 64, 256};
        const std::vector<double> bs{0.25, 0.5, 0.75};
        const auto probe = conjugate_convergence_probe(ms, bs, 0.1, 0.9);
        for (std::size_t j = 0; j < bs.size(); ++j) {
            std::vector<double> col;
            for (const auto& row : probe.gaps) col.push_back(row[j]);
            v.detail << " b=" << bs[j] << ": gap(256) = " << col.back() << ";";
            v.require(col.back() <= 0.02, "gap at m = 256 <= 0.02");
            v.require(nonincreasing(col, 1), "gaps decrease in m");
        }
        v.detail << " inverse gaps on [0.1, 0.9]:";
        for (const double g : probe.inverse_gaps) v.detail << ' ' << g;
        v.require(nonincreasing(probe.inverse_gaps, 1), "inverse gaps decrease in m");
    });

    criterion(4, "exact-constant estimates on the 8-run matrix", [](Verdict& v) {
        int checked = 0;
        double worst_l1 = 0.0;
        double worst_linf = 0.0;
        for (const auto& r : estimate_matrix()) {
            v.require(!r.aborted, r.label + " completes");
            for (const auto& e : r.estimates) {
                if (!e.exact) continue;
                ++checked;
                v.require(e.pass, r.label + " " + e.name);
                if (e.name == "l1_growth") worst_l1 = std::max(worst_l1, e.ratio);
                if (e.name == "rho_linf") worst_linf = std::max(worst_linf, e.ratio);
            }
        }
        v.detail << " " << checked << " exact checks, max lhs/rhs: l1_growth " << worst_l1
                 << ", rho_linf " << worst_linf;
        v.require(checked == 32, "all four exact estimates on all eight runs");
    });

    criterion(5, "dissipation balance on the reference run", [](Verdict& v) {
        const auto& r = reference_refinement();
        v.require(!r.aborted(), "runs complete: " + r.abort_reason);
        const double b256 = std::abs(row_value(r, 256, "balance"));
        const double b512 = std::abs(row_value(r, 512, "balance"));
        v.detail << " |B|/scale = " << b256 << " (N=256, dt=" << row_value(r, 256, "dt") << "), "
                 << b512 << " (N=512, dt=" << row_value(r, 512, "dt") << "), reduction " << b256 / b512;
        v.require(b256 <= 0.05, "|B|/scale <= 5% at N = 256");
        v.require(b256 / b512 >= 1.3, "refinement reduces the balance error by >= 1.3");
    });

    criterion(6, "viscous one-sidedness across gamma", [](Verdict& v) {
        std::vector<double> B;
        double slack = 0.0;
        for (const double g : {0.0, 1e-3, 1e-2, 1e-1}) {
            ConfigSpec s = reference_pme_spec();
            s.gamma = g;
            const SimConfig cfg = build_config(s);
            RunOptions opt;
            opt.fixed_dt = reference_dt(256);
            const Trajectory tr = run(cfg, opt);
            v.require(!tr.aborted(), "gamma run completes: " + tr.abort_reason);
            const auto b = dissipation_balance(tr.ledger, 0.5, g, cfg.grid.spacing(), opt.fixed_dt);
            B.push_back(b.balance);
            slack = std::max(slack, b.tolerance * b.scale);
            v.require(b.pass, "balance verdict for gamma = " + format_double(g));
        }
        v.detail << " B(gamma = 0, 1e-3, 1e-2, 1e-1) =";
        for (const double x : B) v.detail << ' ' << x;
        v.detail << ", tol*scale = " << slack;
        v.require(nonincreasing(B, 0, slack), "B nonincreasing in gamma up to tol");
    });

    criterion(7, "Barenblatt oracle", [](Verdict& v) {
        BarenblattSetup b; // m = 2, t0 = 0.1, T = 0.6
        const auto r = barenblatt_validation(b, {256, 512}, threads());
        v.require(!r.aborted(), "runs complete: " + r.abort_reason);
        const double e256 = row_value(r, 256, "l1_error");
        const double e512 = row_value(r, 512, "l1_error");
        const double mass_gap = std::abs(row_value(r, 512, "mass_numeric") - row_value(r, 512, "mass_exact"));
        v.detail << " L1 error/mass = " << e512 << " (N=512), " << e256 << " (N=256), improvement "
                 << e256 / e512 << ", mass gap " << mass_gap;
        v.require(e512 <= 0.02, "error <= 2% at N = 512");
        v.require(e256 / e512 >= 1.4, "doubling N improves by >= 1.4");
        v.require(mass_gap <= 1e-10 * row_value(r, 512, "mass_exact"), "mass agreement");
    });

    criterion(8, "vanishing-viscosity limit", [](Verdict& v) {
        const auto r = vanishing_viscosity_study(reference_pme_spec(256, 0.25), {1e-1, 1e-2, 1e-3, 1e-4},
                                                 "", threads());
        v.require(!r.aborted(), "runs complete: " + r.abort_reason);
        const auto d = r.table.values("dist");
        const auto rel = r.table.values("rel");
        v.detail << " dist =";
        for (const double x : d) v.detail << ' ' << x;
        v.detail << ", dist/|grad q_0| at 1e-4 = " << rel.back();
        bool strict = true;
        for (std::size_t i = 1; i < d.size(); ++i) strict = strict && d[i] < d[i - 1];
        v.require(strict, "strictly decreasing");
        v.require(rel.back() <= 0.1, "<= 10% at gamma = 1e-4");
    });

    criterion(9, "incompressible limit", [](Verdict& v) {
        ConfigSpec s;
        s.grid = Grid{1, 256, 8.0};
        s.energy.family = "power";
        s.energy.m = 2.0;
        s.t_end = 3.0;
        s.rho1 = parse_initial_spec("gaussian center=4 width=0.5 amplitude=0.9");
        s.sources.model = "homeostatic";
        s.sources.homeostatic = {1.0, 2.0, 0.0, 0.0};
        const auto r = incompressible_limit_study(s, {2, 4, 8, 16, 32, 64}, "", threads());
        v.require(!r.aborted(), "runs complete: " + r.abort_reason);
        const auto ov = r.table.values("overshoot");
        const auto cp = r.table.values("complementarity");
        auto cauchy = r.table.values("cauchy");
        cauchy.erase(cauchy.begin()); // first row has no predecessor
        v.detail << " overshoot =";
        for (const double x : ov) v.detail << ' ' << x;
        v.detail << "; complementarity m=64/m=2 = " << cp.back() / cp.front() << "; cauchy =";
        for (const double x : cauchy) v.detail << ' ' << x;
        v.require(nonincreasing(ov, 0), "overshoot nonincreasing");
        v.require(ov.back() <= 0.05, "overshoot <= 0.05 at m = 64");
        v.require(cp.back() <= 0.2 * cp.front(), "complementarity at m = 64 <= 20% of m = 2");
        v.require(nonincreasing(cauchy, 0), "Cauchy column decreasing");
    });

    criterion(10, "bounded-up-to-constant estimates under refinement", [](Verdict& v) {
        const auto& r = reference_refinement();
        v.require(!r.aborted(), "runs complete: " + r.abort_reason);
        for (const char* name : {"grad_q_control", "energy_control", "dual_energy_extra", "q_extra"}) {
            const auto col = r.table.values(name);
            const double spread = relative_spread(col);
            v.detail << ' ' << name << " " << col[0] << ".." << col.back() << " spread " << spread << ";";
            v.require(spread <= 0.1, std::string(name) + " varies <= 10%");
            for (const double x : col) v.require(x <= 100.0, std::string(name) + " <= 100");
        }
    });

    criterion(11, "structural exactness", [](Verdict& v) {
        ConfigSpec s = reference_pme_spec(256, 0.2);
        s.rho2 = parse_initial_spec("gaussian center=2 width=0.2 amplitude=0.4");
        s.alpha = 0.5;
        s.c1 = 1.0;
        s.c2 = 0.5;
        s.sources.model = "homeostatic";
        s.sources.homeostatic = {1.0, 1.0, 0.3, 0.2};
        const SimConfig cfg = build_config(s);
        const std::size_t n = cfg.grid.size();

        // mass law, scalar identity, positivity and mirror symmetry, step by step
        SimState st = cfg.initial;
        double mass_err = 0.0;
        double split_err = 0.0;
        double sym_err = 0.0;
        double clipped = 0.0;
        double min_value = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const auto d = derived_fields(st, cfg);
            const double dt = cfl_dt(st, cfg, d);
            const auto res = step(st, cfg, dt, d);
            const auto div = divergence(species_fluxes(st, cfg, d).total);
            const Field rho = total_density(res.state);
            for (std::size_t i = 0; i < n; ++i) {
                split_err = std::max(split_err, std::abs(rho[i] - (d.rho[i] + dt * (d.mu[i] - div[i]))) /
                                                    (1.0 + d.rho[i]));
                sym_err = std::max({sym_err, std::abs(res.state.rho1[i] - res.state.rho1[n - 1 - i]),
                                    std::abs(res.state.rho2[i] - res.state.rho2[n - 1 - i])});
            }
            const double m0 = integrate(d.rho);
            mass_err = std::max(mass_err, std::abs(integrate(rho) - m0 - dt * integrate(d.mu)) / m0);
            min_value = std::min({min_value, res.state.rho1.min(), res.state.rho2.min(), res.state.nutrient.min()});
            clipped += res.clipped_mass;
            st = res.state;
        }

        // conservative single-species run: mass constant
        const SimConfig pme = build_config(reference_pme_spec(256, 0.5));
        const Trajectory a = run(pme);
        const double m0 = integrate(pme.initial.rho1);
        const double drift = std::abs(integrate(a.final_state.rho1) - m0) / m0;

        // deterministic replay
        const Trajectory b = run(pme);
        bool same = a.ledger.rows.size() == b.ledger.rows.size();
        for (std::size_t k = 0; same && k < a.ledger.rows.size(); ++k) {
            same = std::memcmp(&a.ledger.rows[k], &b.ledger.rows[k], sizeof(LedgerRow)) == 0;
        }

        v.detail << " per-step mass-law error " << mass_err << ", rho split error " << split_err
                 << ", min value " << min_value << ", clipped " << clipped << ", symmetry error "
                 << sym_err << ", PME mass drift " << drift << " over " << a.steps
                 << " steps, replay " << (same ? "bit-identical" : "differs");
        v.require(mass_err <= 1e-13, "mass law per step");
        v.require(split_err <= 1e-13, "rho = rho1 + rho2 satisfies the scalar update");
        v.require(min_value >= 0.0 && clipped == 0.0, "positivity");
        v.require(sym_err <= 1e-12, "mirror symmetry over 1000 steps");
        v.require(drift <= 1e-12 * static_cast<double>(a.steps), "mass conserved");
        v.require(same, "deterministic replay");
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
