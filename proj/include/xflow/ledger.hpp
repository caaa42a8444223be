#ifndef XFLOW_LEDGER_HPP
#define XFLOW_LEDGER_HPP

// Per-step record of every term in the energy balance plus the norms the
// a priori estimates need.
//
// Row k describes state k at time t_k; dt is the step taken from it (0 on
// the last row). cum_* columns integrate over [0, t_k] with the rule the
// explicit scheme itself uses (left endpoint). dtrho_hm1 is the H^-1
// seminorm of the difference quotient of step k.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "xflow/errors.hpp"

namespace xflow {

struct LedgerRow {
    double t = 0.0;
    double dt = 0.0;
    double cum_grad_q_sq = 0.0;
    double cum_estar_divv = 0.0;
    double cum_mu_q = 0.0;
    double e_rho = 0.0;
    double rho_l1 = 0.0;
    double rho_l2 = 0.0;
    double rho_linf = 0.0;
    double dtrho_hm1 = 0.0;
    double grad_q_l2 = 0.0;
    double cum_estar_l1 = 0.0;
    double cum_e_l1 = 0.0;
    double cum_gamma_grad_rho_sq = 0.0;
    double clipped_mass = 0.0;
    // instantaneous extras used by the estimate monitors
    double mu_over_rho_max = 0.0;
    double mu_l2 = 0.0;
    double rhov_l2 = 0.0;
    double divv_max = 0.0;
    double estar_l2 = 0.0;
    double q_l2 = 0.0;

    bool operator==(const LedgerRow&) const = default;
};

inline constexpr std::size_t kLedgerColumns = 21;

inline constexpr std::array<std::string_view, kLedgerColumns> kLedgerHeader{
    "t",           "dt",        "cum_grad_q_sq", "cum_estar_divv", "cum_mu_q",
    "e_rho",       "rho_l1",    "rho_l2",        "rho_linf",       "dtrho_hm1",
    "grad_q_l2",   "cum_estar_l1", "cum_e_l1",   "cum_gamma_grad_rho_sq",
    "clipped_mass", "mu_over_rho_max", "mu_l2",  "rhov_l2",        "divv_max",
    "estar_l2",    "q_l2"};

namespace detail {

inline std::array<double*, kLedgerColumns> columns(LedgerRow& r) {
    return {&r.t,           &r.dt,        &r.cum_grad_q_sq, &r.cum_estar_divv, &r.cum_mu_q,
            &r.e_rho,       &r.rho_l1,    &r.rho_l2,        &r.rho_linf,       &r.dtrho_hm1,
            &r.grad_q_l2,   &r.cum_estar_l1, &r.cum_e_l1,   &r.cum_gamma_grad_rho_sq,
            &r.clipped_mass, &r.mu_over_rho_max, &r.mu_l2,  &r.rhov_l2,        &r.divv_max,
            &r.estar_l2,    &r.q_l2};
}

} // namespace detail

struct DissipationLedger {
    std::vector<LedgerRow> rows;

    bool empty() const noexcept { return rows.empty(); }
    const LedgerRow& back() const { return rows.back(); }

    // Index of the row at time T (exact match within 1e-12 relative).
    std::size_t index_at(double T) const {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (std::abs(rows[k].t - T) <= 1e-12 * std::max(1.0, std::abs(T))) return k;
        }
        throw std::out_of_range("time " + std::to_string(T) + " is not a ledger checkpoint");
    }
};

// Shortest round-trip text for every value.
inline void write_ledger_csv(std::ostream& os, const DissipationLedger& L) {
    for (std::size_t c = 0; c < kLedgerColumns; ++c) {
        if (c) os << ',';
        os << kLedgerHeader[c];
    }
    os << '\n';
    char buf[40];
    std::string line;
    for (LedgerRow r : L.rows) {
        line.clear();
        const auto cols = detail::columns(r);
        for (std::size_t c = 0; c < kLedgerColumns; ++c) {
            if (c) line += ',';
            const auto res = std::to_chars(buf, buf + sizeof(buf), *cols[c]);
            line.append(buf, res.ptr);
        }
        line += '\n';
        os << line;
    }
}

inline void write_ledger_csv(const std::string& path, const DissipationLedger& L) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_ledger_csv(out, L);
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline DissipationLedger read_ledger_csv(std::istream& in, const std::string& origin = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw IoError(origin + ": empty ledger file");
    {
        std::istringstream hs(line);
        std::string name;
        std::size_t c = 0;
        while (std::getline(hs, name, ',')) {
            if (c >= kLedgerColumns || name != kLedgerHeader[c]) {
                throw IoError(origin + ": unexpected ledger header");
            }
            ++c;
        }
        if (c != kLedgerColumns) throw IoError(origin + ": unexpected ledger header");
    }
    DissipationLedger L;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        LedgerRow r;
        const auto cols = detail::columns(r);
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t c = 0; c < kLedgerColumns; ++c) {
            const auto res = std::from_chars(p, end, *cols[c]);
            if (res.ec != std::errc()) {
                throw IoError(origin + ":" + std::to_string(lineno) + ": bad number");
            }
            p = res.ptr;
            if (c + 1 < kLedgerColumns) {
                if (p == end || *p != ',') {
                    throw IoError(origin + ":" + std::to_string(lineno) + ": too few columns");
                }
                ++p;
            }
        }
        if (p != end) throw IoError(origin + ":" + std::to_string(lineno) + ": too many columns");
        L.rows.push_back(r);
    }
    return L;
}

inline DissipationLedger read_ledger_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_ledger_csv(in, path);
}

} // namespace xflow

#endif
