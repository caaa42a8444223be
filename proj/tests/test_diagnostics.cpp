#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "xflow/diagnostics.hpp"
#include "xflow/solver.hpp"

using namespace xflow;
using testing_support::bump_spec;
using testing_support::initial;

namespace {

ConfigSpec busy_spec(int cells = 64) {
    ConfigSpec s = bump_spec(cells, 0.1);
    s.rho2 = initial("gaussian center=2.6 width=0.25 amplitude=0.5");
    s.gamma = 0.01;
    s.alpha = 0.5;
    s.c1 = 1.0;
    s.c2 = 0.5;
    s.velocity.kind = VelocityKind::Rotating;
    s.velocity.omega = 1.0;
    s.sources.model = "homeostatic";
    s.sources.homeostatic = {1.0, 1.0, 0.3, 0.2};
    return s;
}

const EstimateReport& find(const std::vector<EstimateReport>& v, const std::string& name) {
    for (const auto& e : v) {
        if (e.name == name) return e;
    }
    throw std::out_of_range(name);
}

} // namespace

TEST(Balance, ZeroDataHasZeroTerms) {
    ConfigSpec s = bump_spec(64, 0.1);
    s.rho1 = initial("zero");
    const auto cfg = build_config(s);
    const auto tr = run(cfg);
    const auto& L = tr.ledger;
    const auto b = dissipation_balance(L, 0.1, 0.0, cfg.grid.spacing(), max_dt(L, 0.1));
    EXPECT_EQ(b.balance, 0.0);
    EXPECT_EQ(b.scale, 0.0);
    EXPECT_TRUE(b.pass);
    for (const auto& e : estimate_monitors(L, 0.1, monitor_params(cfg))) {
        EXPECT_EQ(e.lhs, 0.0) << e.name;
        EXPECT_TRUE(e.pass) << e.name;
    }
}

TEST(Balance, PureDiffusionWithinTolerance) {
    const auto cfg = build_config(bump_spec(128, 0.1));
    const auto tr = run(cfg);
    const auto b = dissipation_balance(tr.ledger, 0.1, 0.0, cfg.grid.spacing(), max_dt(tr.ledger, 0.1));
    EXPECT_TRUE(b.pass) << b.relative << " vs " << b.tolerance;
    EXPECT_GT(b.scale, 0.0);
}

TEST(Balance, UnknownCheckpointThrows) {
    const auto tr = run(build_config(bump_spec(64, 0.05)));
    EXPECT_THROW(dissipation_balance(tr.ledger, 0.07, 0.0, 0.1, 0.1), std::out_of_range);
    EXPECT_THROW(dissipation_balance(DissipationLedger{}, 0.0, 0.0, 0.1, 0.1), std::out_of_range);
}

TEST(Balance, ViscosityOnlyAddsDissipation) {
    ConfigSpec s0 = bump_spec(128, 0.1);
    s0.fixed_dt = 2e-4;
    ConfigSpec s1 = s0;
    s1.gamma = 0.1;
    const auto c0 = build_config(s0);
    const auto c1 = build_config(s1);
    const auto t0 = run(c0);
    const auto t1 = run(c1);
    ASSERT_FALSE(t1.aborted()) << t1.abort_reason;
    const double h = c0.grid.spacing();
    const auto b0 = dissipation_balance(t0.ledger, 0.1, 0.0, h, 2e-4);
    const auto b1 = dissipation_balance(t1.ledger, 0.1, 0.1, h, 2e-4);
    EXPECT_TRUE(b1.pass);
    EXPECT_LE(b1.balance, b0.balance + b0.tolerance * b0.scale);
}

TEST(Monitors, ConservativeRunHasL1Equality) {
    const auto cfg = build_config(bump_spec(128, 0.1));
    const auto tr = run(cfg);
    const auto est = estimate_monitors(tr.ledger, 0.1, monitor_params(cfg));
    const auto& l1 = find(est, "l1_growth");
    EXPECT_NEAR(l1.lhs, l1.rhs, 1e-12 * l1.rhs);
    EXPECT_TRUE(l1.pass);
    const auto& g = find(est, "gamma_grad_rho");
    EXPECT_EQ(g.lhs, 0.0);
    EXPECT_TRUE(g.pass);
    EXPECT_EQ(est.size(), estimate_names().size());
}

TEST(Monitors, ExactConstantsHoldWithDriftSourcesAndViscosity) {
    const auto cfg = build_config(busy_spec(128));
    const auto tr = run(cfg);
    ASSERT_FALSE(tr.aborted());
    const auto est = estimate_monitors(tr.ledger, 0.1, monitor_params(cfg));
    for (const auto& e : est) {
        EXPECT_TRUE(e.pass) << e.name << " lhs " << e.lhs << " rhs " << e.rhs;
        if (!e.exact) {
            EXPECT_LE(e.ratio, 100.0);
        }
    }
    EXPECT_GT(find(est, "gamma_grad_rho").lhs, 0.0);
}

TEST(Monitors, CumulativeColumnsNondecreasing) {
    const auto tr = run(build_config(busy_spec(64)));
    const auto& R = tr.ledger.rows;
    for (std::size_t k = 1; k < R.size(); ++k) {
        EXPECT_GE(R[k].cum_grad_q_sq, R[k - 1].cum_grad_q_sq);
        EXPECT_GE(R[k].cum_estar_l1, R[k - 1].cum_estar_l1);
        EXPECT_GE(R[k].cum_e_l1, R[k - 1].cum_e_l1);
        EXPECT_GE(R[k].cum_gamma_grad_rho_sq, R[k - 1].cum_gamma_grad_rho_sq);
        EXPECT_GT(R[k].t, R[k - 1].t);
    }
}

TEST(Duality, ClosedFormEnergiesAlongTrajectory) {
    for (const char* family : {"power", "entropy"}) {
        ConfigSpec s = busy_spec(64);
        s.energy.family = family;
        const auto cfg = build_config(s);
        double worst = 0.0;
        bool beta_ok = true;
        RunOptions opt;
        opt.observer = [&](const StepView& v) {
            worst = std::max(worst, duality_residual(v.state, cfg));
            beta_ok = beta_ok && beta_link_check(v.state, cfg).pass;
        };
        ASSERT_FALSE(run(cfg, opt).aborted());
        EXPECT_LE(worst, 1e-10) << family;
        EXPECT_TRUE(beta_ok) << family;
    }
}

TEST(Duality, VacuumIsZero) {
    ConfigSpec s = bump_spec(64, 0.1);
    s.rho1 = initial("zero");
    const auto cfg = build_config(s);
    EXPECT_EQ(duality_residual(cfg.initial, cfg), 0.0);
}

TEST(Duality, TabulatedResidualShrinksWithKnotDensity) {
    const auto dir = testing_support::scratch_dir("tab");
    std::vector<double> residual;
    for (const int knots : {257, 1025, 4097}) {
        const std::string name = "z" + std::to_string(knots) + ".txt";
        {
            std::ofstream f(dir / name);
            f.precision(17);
            for (int i = 0; i < knots; ++i) {
                const double a = 4.0 * i / (knots - 1);
                f << a << ' ' << a * a - a << '\n';
            }
        }
        ConfigSpec s = bump_spec(64, 0.0);
        s.energy.family = "tabulated";
        s.energy.table = name;
        const auto cfg = build_config(s, dir.string());
        residual.push_back(duality_residual(cfg.initial, cfg));
    }
    std::filesystem::remove_all(dir);
    EXPECT_LT(residual[1], residual[0]);
    EXPECT_LT(residual[2], residual[1]);
    EXPECT_LT(residual[2], 1e-4);
}

TEST(BetaLink, HoldsOnArbitraryPressures) {
    ConfigSpec s = bump_spec(64, 0.0);
    s.rho1 = initial("gaussian center=2 width=0.5 amplitude=3");
    for (const double m : {0.5, 2.0, 6.0}) {
        s.energy.m = m;
        const auto cfg = build_config(s);
        const auto r = beta_link_check(cfg.initial, cfg);
        EXPECT_TRUE(r.pass) << "m = " << m << ", gap " << r.max_gap << ", margin " << r.worst_margin;
        EXPECT_LE(r.max_gap, beta(cfg.energy) * (1.0 + 1e-12));
    }
}

TEST(LedgerCsv, EmptyLedgerIsHeaderOnly) {
    std::ostringstream os;
    write_ledger_csv(os, DissipationLedger{});
    const std::string text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
    EXPECT_EQ(text.rfind("t,dt,", 0), 0u);
    std::istringstream is(text);
    EXPECT_TRUE(read_ledger_csv(is).empty());
}

TEST(LedgerCsv, RoundTripIsBitIdentical) {
    const auto cfg = build_config(busy_spec(64));
    const auto tr = run(cfg);
    std::stringstream ss;
    write_ledger_csv(ss, tr.ledger);
    const auto back = read_ledger_csv(ss);
    ASSERT_EQ(back.rows.size(), tr.ledger.rows.size());
    for (std::size_t k = 0; k < back.rows.size(); ++k) {
        ASSERT_EQ(std::memcmp(&back.rows[k], &tr.ledger.rows[k], sizeof(LedgerRow)), 0) << "row " << k;
    }
    const auto a = estimate_monitors(tr.ledger, 0.1, monitor_params(cfg));
    const auto b = estimate_monitors(back, 0.1, monitor_params(cfg));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(std::memcmp(&a[i].ratio, &b[i].ratio, sizeof(double)), 0) << a[i].name;
    }
}

TEST(LedgerCsv, TenThousandStepsFitInFiveMegabytes) {
    ConfigSpec s = busy_spec(64);
    s.fixed_dt = 1e-4;
    s.t_end = 1.0;
    const auto tr = run(build_config(s));
    ASSERT_FALSE(tr.aborted()) << tr.abort_reason;
    ASSERT_GE(tr.ledger.rows.size(), 10000u);
    DissipationLedger first;
    first.rows.assign(tr.ledger.rows.begin(), tr.ledger.rows.begin() + 10000);
    std::ostringstream os;
    write_ledger_csv(os, first);
    EXPECT_LE(os.str().size(), 5'000'000u);
}

TEST(LedgerCsv, RejectsMalformedInput) {
    std::istringstream bad_header("t,dt\n0,0\n");
    EXPECT_THROW(read_ledger_csv(bad_header), IoError);

    std::ostringstream os;
    DissipationLedger L;
    L.rows.resize(1);
    write_ledger_csv(os, L);
    std::string text = os.str();
    std::istringstream short_row(text + "1,2,3\n");
    EXPECT_THROW(read_ledger_csv(short_row), IoError);
    std::istringstream bad_number(text.substr(0, text.find('\n') + 1) + std::string("x") +
                                  text.substr(text.find('\n') + 2));
    EXPECT_THROW(read_ledger_csv(bad_number), IoError);
    std::istringstream empty("");
    EXPECT_THROW(read_ledger_csv(empty), IoError);
}

TEST(Tolerance, AnchoredAtReference) {
    EXPECT_DOUBLE_EQ(tol_balance(kBalanceHRef, kBalanceDtRef), 0.05);
    EXPECT_NEAR(tol_balance(kBalanceHRef / 2, kBalanceDtRef / 2), 0.025, 1e-15);
}
