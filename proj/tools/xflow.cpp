// xflow command-line driver.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical abort, 4 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xflow/config.hpp"
#include "xflow/diagnostics.hpp"
#include "xflow/io.hpp"
#include "xflow/limits.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw xflow::ConfigError(std::string("bad value '") + item + "' in " + what);
        }
    }
    if (out.empty()) throw xflow::ConfigError(std::string("empty list for ") + what);
    return out;
}

struct ConfigFile {
    std::string text;
    std::string base_dir;
};

ConfigFile read_config(const std::string& path) {
    ConfigFile c;
    try {
        c.text = xflow::read_text_file(path);
    } catch (const xflow::IoError& e) {
        throw xflow::ConfigError(e.what());
    }
    c.base_dir = fs::absolute(path).parent_path().string();
    return c;
}

void write_study(const xflow::StudyResult& r, const std::string& out_dir, const std::string& stem,
                 const std::vector<std::string>& plot_cols) {
    const std::string dir = xflow::resolve_output_dir(out_dir);
    fs::create_directories(dir);
    xflow::write_table_csv((fs::path(dir) / (stem + ".csv")).string(), r.table);
    xflow::emit_plot_data((fs::path(dir) / (stem + ".dat")).string(), r.table, plot_cols);
    xflow::write_table_csv(std::cout, r.table);
}

int finish_study(const xflow::StudyResult& r) {
    if (r.aborted()) {
        std::cerr << "study aborted: " << r.abort_reason << "\n";
        return kNumerical;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"xflow: two-species cross-diffusion solver and energy audits"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;

    auto* run_cmd = app.add_subcommand("run", "run one configuration into a directory");
    run_cmd->add_option("--config", config_path, "configuration file")->required();
    run_cmd->add_option("--out", out_dir, "output directory")->required();

    std::string traj_dir;
    std::optional<double> report_T;
    auto* report_cmd = app.add_subcommand("report", "audit a run directory");
    report_cmd->add_option("--traj", traj_dir, "run directory")->required();
    report_cmd->add_option("--T", report_T, "checkpoint time (default: final)");

    std::string gammas = "1e-1,1e-2,1e-3,1e-4";
    auto* visc_cmd = app.add_subcommand("viscosity-study", "gamma -> 0 sweep");
    visc_cmd->add_option("--config", config_path)->required();
    visc_cmd->add_option("--gammas", gammas, "comma-separated viscosities");
    visc_cmd->add_option("--out", out_dir)->default_val("viscosity-study");

    std::string exponents = "2,4,8,16,32,64";
    int samples = 200;
    auto* inc_cmd = app.add_subcommand("incompressible-study", "m -> infinity sweep");
    inc_cmd->add_option("--config", config_path)->required();
    inc_cmd->add_option("--exponents", exponents, "comma-separated exponents m");
    inc_cmd->add_option("--samples", samples, "shared comparison times");
    inc_cmd->add_option("--out", out_dir)->default_val("incompressible-study");

    auto* validate_cmd = app.add_subcommand("validate", "validation against exact solutions");
    validate_cmd->require_subcommand(1);
    xflow::BarenblattSetup bsetup;
    std::string grids = "128,256,512";
    auto* bar_cmd = validate_cmd->add_subcommand("barenblatt", "porous-medium self-similar solution");
    bar_cmd->add_option("--m", bsetup.m, "exponent m > 1");
    bar_cmd->add_option("--grids", grids, "comma-separated cell counts");
    bar_cmd->add_option("--t0", bsetup.t0, "initial time");
    bar_cmd->add_option("--T", bsetup.T, "final time");
    bar_cmd->add_option("--length", bsetup.length, "box length");
    bar_cmd->add_option("--out", out_dir)->default_val("barenblatt");

    bool reference = false;
    auto* emit_cmd = app.add_subcommand("emit-config", "print a configuration with every default filled in");
    emit_cmd->add_option("--config", config_path, "configuration to normalize");
    emit_cmd->add_flag("--reference", reference, "print the reference porous-medium configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        const unsigned threads = xflow::thread_count_from_env();
        if (*run_cmd) {
            const ConfigFile c = read_config(config_path);
            const auto out = xflow::run_to_directory(c.text, c.base_dir, xflow::resolve_output_dir(out_dir));
            for (const auto& w : out.trajectory.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "steps: " << out.trajectory.steps << ", t = " << out.trajectory.final_state.t << "\n";
            if (out.trajectory.aborted()) {
                std::cerr << "numerical abort: " << out.trajectory.abort_reason << "\n";
                return kNumerical;
            }
            return kOk;
        }
        if (*report_cmd) {
            const auto loaded = xflow::load_run_directory(traj_dir);
            const auto rep = xflow::report_run(loaded, report_T);
            xflow::print_report(std::cout, rep);
            std::ofstream csv(fs::path(traj_dir) / "report.csv");
            if (!csv) throw xflow::IoError("cannot write report.csv in " + traj_dir);
            xflow::write_report_csv(csv, rep);
            return kOk;
        }
        if (*visc_cmd) {
            const ConfigFile c = read_config(config_path);
            const auto spec = xflow::parse_config_spec(c.text);
            const auto r = xflow::vanishing_viscosity_study(spec, parse_list(gammas, "--gammas"),
                                                            c.base_dir, threads);
            write_study(r, out_dir, "viscosity", {"gamma", "dist"});
            return finish_study(r);
        }
        if (*inc_cmd) {
            const ConfigFile c = read_config(config_path);
            const auto spec = xflow::parse_config_spec(c.text);
            const auto r = xflow::incompressible_limit_study(
                spec, parse_list(exponents, "--exponents"), c.base_dir, threads, samples);
            write_study(r, out_dir, "incompressible",
                        {"m", "overshoot", "complementarity", "cauchy"});
            return finish_study(r);
        }
        if (*bar_cmd) {
            std::vector<int> ns;
            for (const double v : parse_list(grids, "--grids")) ns.push_back(static_cast<int>(v));
            const auto r = xflow::barenblatt_validation(bsetup, ns, threads);
            write_study(r, out_dir, "barenblatt", {"N", "l1_error"});
            return finish_study(r);
        }
        if (*emit_cmd) {
            if (reference) {
                std::cout << xflow::emit_config(xflow::reference_pme_spec());
            } else if (!config_path.empty()) {
                const ConfigFile c = read_config(config_path);
                const auto spec = xflow::parse_config_spec(c.text);
                xflow::build_config(spec, c.base_dir);
                std::cout << xflow::emit_config(spec);
            } else {
                throw xflow::ConfigError("emit-config needs --config or --reference");
            }
            return kOk;
        }
    } catch (const xflow::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const xflow::NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kNumerical;
    } catch (const xflow::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const std::out_of_range& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
