#ifndef XFLOW_IO_HPP
#define XFLOW_IO_HPP

// Run directories, manifests, study tables and plot data.
//
// A run directory holds
//   config.ini      verbatim copy of the configuration
//   ledger.csv      one row per step (see ledger.hpp)
//   snapshots/      rho1_NNNNN.xflw, rho2_NNNNN.xflw, n_NNNNN.xflw
//   manifest.json   hash, version, wall times, snapshot index, abort reason

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "xflow/config.hpp"
#include "xflow/diagnostics.hpp"
#include "xflow/errors.hpp"
#include "xflow/ledger.hpp"
#include "xflow/snapshot.hpp"
#include "xflow/solver.hpp"
#include "xflow/table.hpp"

namespace xflow {

inline constexpr const char* kVersion = "0.3.0";

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return os.str();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Output root: XFLOW_OUTPUT_ROOT prefixes relative output directories.
inline std::string resolve_output_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    const char* root = std::getenv("XFLOW_OUTPUT_ROOT");
    if (root && *root && fs::path(dir).is_relative()) return (fs::path(root) / dir).string();
    return dir;
}

inline unsigned thread_count_from_env(unsigned fallback = 1) {
    const char* v = std::getenv("XFLOW_THREADS");
    if (!v || !*v) return fallback;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) throw ConfigError("XFLOW_THREADS must be an integer in [1, 1024]");
    return static_cast<unsigned>(n);
}

struct RunOutcome {
    Trajectory trajectory;
    nlohmann::json manifest;
};

namespace detail {

inline void ensure_dir(const std::filesystem::path& p) {
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

inline nlohmann::json save_state(const std::filesystem::path& dir, const std::string& tag,
                                 const SimState& s) {
    nlohmann::json files;
    const std::pair<const char*, const Field*> fields[] = {
        {"rho1", &s.rho1}, {"rho2", &s.rho2}, {"n", &s.nutrient}};
    for (const auto& [name, f] : fields) {
        const std::string file = std::string("snapshots/") + name + "_" + tag + ".xflw";
        save_snapshot((dir / file).string(), *f, s.t);
        files[name] = file;
    }
    return files;
}

} // namespace detail

// Runs the configuration and persists everything, including a partial
// trajectory and the last good state when the run aborts.
inline RunOutcome run_to_directory(const std::string& config_text, const std::string& base_dir,
                                   const std::string& out_dir) {
    namespace fs = std::filesystem;
    const SimConfig cfg = parse_config(config_text, base_dir); // fail closed before any output
    const fs::path dir(out_dir);
    detail::ensure_dir(dir / "snapshots");
    write_text_file((dir / "config.ini").string(), config_text);

    const auto start = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out;
    out.trajectory = run(cfg);
    const Trajectory& tr = out.trajectory;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json snaps = nlohmann::json::array();
    char tag[16];
    const std::size_t nsnap = cfg.spec.write_snapshots ? tr.snapshots.size() : 0;
    for (std::size_t i = 0; i < nsnap; ++i) {
        std::snprintf(tag, sizeof(tag), "%05zu", i);
        snaps.push_back({{"t", tr.snapshots[i].t}, {"files", detail::save_state(dir, tag, tr.snapshots[i])}});
    }
    write_ledger_csv((dir / "ledger.csv").string(), tr.ledger);

    nlohmann::json& m = out.manifest;
    m["version"] = kVersion;
    m["config_hash"] = sha256_hex(config_text);
    m["base_dir"] = base_dir;
    m["start_time"] = utc_timestamp(start);
    m["end_time"] = utc_timestamp(std::chrono::system_clock::now());
    m["wall_seconds"] = wall;
    m["steps"] = tr.steps;
    m["grid"] = {{"dim", cfg.grid.dim}, {"cells", cfg.grid.cells}, {"length", cfg.grid.length}};
    m["snapshots"] = snaps;
    m["warnings"] = tr.warnings;
    if (tr.aborted()) {
        m["abort_reason"] = tr.abort_reason;
        m["abort_state"] = detail::save_state(dir, "abort", tr.final_state);
    } else {
        m["abort_reason"] = nullptr;
    }
    write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
    return out;
}

inline nlohmann::json load_manifest(const std::string& dir) {
    const std::string path = (std::filesystem::path(dir) / "manifest.json").string();
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

// Every listed snapshot exists and parses on the manifest grid, and the
// config copy matches the recorded hash.
inline void verify_run_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    const nlohmann::json m = load_manifest(dir);
    const std::string text = read_text_file((fs::path(dir) / "config.ini").string());
    if (sha256_hex(text) != m.at("config_hash").get<std::string>()) {
        throw IoError(dir + ": config.ini does not match the manifest hash");
    }
    const Grid g{m.at("grid").at("dim").get<int>(), m.at("grid").at("cells").get<int>(),
                 m.at("grid").at("length").get<double>()};
    for (const auto& s : m.at("snapshots")) {
        for (const auto& [name, file] : s.at("files").items()) {
            const Snapshot snap = load_snapshot((fs::path(dir) / file.get<std::string>()).string(), g);
            if (snap.t != s.at("t").get<double>()) {
                throw IoError(dir + ": snapshot time mismatch in " + file.get<std::string>());
            }
        }
    }
}

struct LoadedRun {
    SimConfig config;
    DissipationLedger ledger;
    std::vector<SimState> snapshots;
    nlohmann::json manifest;
};

inline LoadedRun load_run_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    verify_run_directory(dir);
    LoadedRun r;
    r.manifest = load_manifest(dir);
    r.config = parse_config(read_text_file((fs::path(dir) / "config.ini").string()),
                            r.manifest.value("base_dir", std::string()));
    r.ledger = read_ledger_csv((fs::path(dir) / "ledger.csv").string());
    for (const auto& s : r.manifest.at("snapshots")) {
        const auto& f = s.at("files");
        auto load = [&](const char* key) {
            return load_snapshot((fs::path(dir) / f.at(key).get<std::string>()).string(), r.config.grid);
        };
        const Snapshot a = load("rho1");
        r.snapshots.push_back(SimState{a.t, a.field, load("rho2").field, load("n").field});
    }
    return r;
}

// Full-precision CSV of a study table.
inline void write_table_csv(std::ostream& os, const Table& t) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
        os << '\n';
    }
}

inline void write_table_csv(const std::string& path, const Table& t) {
    std::ostringstream os;
    write_table_csv(os, t);
    write_text_file(path, os.str());
}

// Whitespace-separated columns with a '#' header; 17 significant digits.
inline void emit_plot_data(std::ostream& os, const Table& t, const std::vector<std::string>& cols) {
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(t.column(c));
    os << '#';
    for (const auto& c : cols) os << ' ' << c;
    os << '\n';
    char buf[40];
    for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[idx[k]]);
            os << (k ? " " : "") << buf;
        }
        os << '\n';
    }
}

inline void emit_plot_data(const std::string& path, const Table& t,
                           const std::vector<std::string>& cols) {
    std::ostringstream os;
    emit_plot_data(os, t, cols);
    write_text_file(path, os.str());
}

struct RunReport {
    BalanceReport balance;
    std::vector<EstimateReport> estimates;
    double duality_residual = 0.0; // max over snapshots
    bool beta_link = true;         // over snapshots
    bool tabulated = false;        // residual measures tabulation error, not a pass/fail check
};

inline RunReport report_run(const LoadedRun& run, std::optional<double> T = std::nullopt) {
    const double t = T ? *T : run.ledger.back().t;
    RunReport r;
    r.balance = dissipation_balance(run.ledger, t, run.config.gamma(), run.config.grid.spacing(),
                                    max_dt(run.ledger, t));
    r.estimates = estimate_monitors(run.ledger, t, monitor_params(run.config));
    r.tabulated = run.config.energy.family() == EnergyFamily::Tabulated;
    for (const auto& s : run.snapshots) {
        r.duality_residual = std::max(r.duality_residual, duality_residual(s, run.config));
        r.beta_link = r.beta_link && beta_link_check(s, run.config).pass;
    }
    return r;
}

inline void print_report(std::ostream& os, const RunReport& r) {
    auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-20s %14s %14s %12s  %s\n", "check", "lhs", "rhs", "ratio",
                  "verdict");
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-20s %14.6e %14.6e %12.4e  %s\n", "energy_balance",
                  r.balance.balance, r.balance.tolerance * r.balance.scale, r.balance.relative,
                  verdict(r.balance.pass));
    os << buf;
    for (const auto& e : r.estimates) {
        std::snprintf(buf, sizeof(buf), "%-20s %14.6e %14.6e %12.4e  %s%s\n", e.name.c_str(), e.lhs,
                      e.rhs, e.ratio, verdict(e.pass), e.exact ? "" : " (up to a constant)");
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-20s %14.6e %14s %12s  %s\n", "duality_residual",
                  r.duality_residual, "1e-10", "",
                  r.tabulated ? "INFO" : verdict(r.duality_residual <= 1e-10));
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-20s %14s %14s %12s  %s\n", "beta_link", "", "", "",
                  verdict(r.beta_link));
    os << buf;
}

inline void write_report_csv(std::ostream& os, const RunReport& r) {
    os << "check,lhs,rhs,ratio,pass\n";
    os << "energy_balance," << format_double(r.balance.balance) << ','
       << format_double(r.balance.tolerance * r.balance.scale) << ','
       << format_double(r.balance.relative) << ',' << (r.balance.pass ? 1 : 0) << '\n';
    for (const auto& e : r.estimates) {
        os << e.name << ',' << format_double(e.lhs) << ',' << format_double(e.rhs) << ','
           << format_double(e.ratio) << ',' << (e.pass ? 1 : 0) << '\n';
    }
    os << "duality_residual," << format_double(r.duality_residual) << ",1e-10,,"
       << (r.duality_residual <= 1e-10 ? 1 : 0) << '\n';
}

} // namespace xflow

#endif
