// Command-line front end: run a scenario, compare controller variants, or
// check a scenario file without simulating.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exo/output.hpp"
#include "exo/scenario.hpp"
#include "exo/sim_engine.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kSchema = 2, kNumeric = 3, kIo = 4 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

template <typename F>
void write_file(const fs::path& path, F&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    body(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void check_physical(const exo::SimConfig& cfg) {
    const std::vector<exo::Issue> issues = exo::validate(cfg);
    if (issues.empty()) return;
    for (const exo::Issue& i : issues) std::cerr << "error: " << i.path << ": " << i.message << "\n";
    throw exo::ConfigError(issues.front().path, issues.front().message);
}

void write_run(const fs::path& dir, const exo::RunResult& r, const exo::SimConfig& cfg,
               const std::vector<std::string>& plots, const std::string& label) {
    ensure_dir(dir);
    write_file(dir / "trace.csv", [&](std::ostream& os) { exo::write_trace_csv(os, r.trace); });
    write_file(dir / "metrics.txt", [&](std::ostream& os) { exo::write_metrics(os, r, label); });
    if (cfg.log_weights) {
        write_file(dir / "weights.csv", [&](std::ostream& os) { exo::write_weights_csv(os, r, cfg.dt); });
    }
    for (const std::string& col : plots) {
        const std::string svg =
            exo::render_svg(col + " (" + label + ")", "t [s]", {exo::trace_series(r.trace, col, label)});
        write_file(dir / (col + ".svg"), [&](std::ostream& os) { os << svg; });
    }
}

/// Runs one configuration; on a numeric abort the partial trace is still written.
exo::RunResult run_and_write(const fs::path& dir, const exo::SimConfig& cfg,
                             const std::vector<std::string>& plots, const std::string& label) {
    try {
        exo::RunResult r = exo::run(cfg);
        write_run(dir, r, cfg, plots, label);
        return r;
    } catch (const exo::SimulationAborted& e) {
        exo::RunResult partial;
        partial.trace = e.trace;
        partial.window_begin = cfg.metrics_window_start;
        partial.window_end = partial.trace.empty() ? 0.0 : partial.trace.back().t + cfg.dt;
        partial.metrics = exo::compute_metrics(partial.trace, cfg.metrics_window_start, cfg.dt);
        exo::SimConfig no_weights = cfg;
        no_weights.log_weights = false;
        write_run(dir, partial, no_weights, {}, label);
        throw;
    }
}

std::string help_footer() {
    std::string s =
        "\nExit codes:\n"
        "  0  success\n"
        "  1  usage error (bad flags, --seed, fewer than two variants)\n"
        "  2  schema or validation error in the scenario\n"
        "  3  numeric abort (NaN/Inf or diverging estimate); partial trace written\n"
        "  4  I/O error (missing scenario, unwritable output directory)\n"
        "\nOutputs: trace.csv, metrics.txt, <column>.svg per plot, weights.csv with --log-weights;\n"
        "compare adds comparison.txt and overlay_<column>.svg, one subdirectory per variant.\n"
        "\nScenario keys (JSON with comments; defaults shown, [assumed] = engineering choice):\n"
        "  name = \"scenario\"\n"
        "  plots = [\"e1\", \"tau_hm\", \"u_applied\"]   (any trace column)\n"
        "  sweep = {\"path\": \"<dotted numeric key>\", \"values\": [...]}   (optional)\n";
    std::string keys = exo::describe(exo::to_json_value(exo::SimConfig{}));
    std::string indented;
    std::size_t start = 0;
    while (start < keys.size()) {
        const std::size_t end = keys.find('\n', start);
        indented += "  " + keys.substr(start, end - start) + "\n";
        start = end + 1;
    }
    std::string columns;
    for (const std::string& c : exo::trace_columns()) columns += (columns.empty() ? "" : " ") + c;
    return s + indented + "\nTrace columns: " + columns + "\n";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (ch != ' ') {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop simulator for a hydraulically actuated ankle exoskeleton"};
    app.require_subcommand(1);
    app.footer(help_footer());

    std::string scenario_path;
    std::string out_dir = "out";
    std::vector<std::string> variants;
    std::string plots_arg;
    std::string seed_arg;
    bool log_weights = false;

    auto add_common = [&](CLI::App* sub, bool outputs) {
        sub->add_option("--scenario", scenario_path, "Scenario file (JSON with comments)")->required();
        if (outputs) {
            sub->add_option("--out", out_dir, "Output directory (created if missing)")->capture_default_str();
            sub->add_option("--plots", plots_arg,
                            "Comma-separated trace columns to plot, overrides the scenario");
            sub->add_flag("--log-weights", log_weights, "Also dump the full weight vector per step");
        }
        sub->add_option("--seed", seed_arg,
                        "Not supported: the simulation has no random component, so a seed has no effect");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "Simulate one scenario (every sweep value, if any)");
    add_common(run_cmd, true);
    run_cmd->add_option("--variant", variants, "Controller to use instead of simulation.controller");

    CLI::App* cmp_cmd = app.add_subcommand("compare", "Run several controller variants on one scenario");
    add_common(cmp_cmd, true);
    cmp_cmd->add_option("--variant", variants,
                        "Variant to include, repeatable (Cascade, Pd, CascadeNoXi, Open); default Cascade and Pd");

    CLI::App* chk_cmd = app.add_subcommand("check", "Validate a scenario and print the resolved parameters");
    add_common(chk_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    if (!seed_arg.empty()) {
        std::cerr << "error: --seed is not supported: runs are deterministic and use no random numbers\n";
        return kUsage;
    }

    try {
        exo::Scenario sc = exo::load_scenario(scenario_path);
        if (log_weights) sc.config.log_weights = true;
        if (!plots_arg.empty()) {
            sc.plots = split_list(plots_arg);
            const std::vector<std::string> cols = exo::trace_columns();
            for (const std::string& p : sc.plots) {
                if (std::find(cols.begin(), cols.end(), p) == cols.end()) {
                    std::cerr << "error: --plots: unknown trace column '" << p << "'\n";
                    return kUsage;
                }
            }
        }

        if (chk_cmd->parsed()) {
            const std::vector<exo::Issue> issues = exo::validate(sc.config);
            std::cout << "# scenario: " << sc.name << "\n" << exo::describe(sc.resolved);
            if (sc.sweep) {
                std::cout << "sweep.path = " << sc.sweep->path << "\nsweep.values =";
                for (const double v : sc.sweep->values) std::cout << ' ' << exo::format_number(v);
                std::cout << "\n";
            }
            for (const exo::Issue& i : issues) std::cerr << "error: " << i.path << ": " << i.message << "\n";
            if (!issues.empty()) return kSchema;
            std::cout << "# valid\n";
            return kOk;
        }

        const fs::path out(out_dir);

        if (run_cmd->parsed()) {
            if (variants.size() > 1) {
                std::cerr << "error: run takes at most one --variant; use compare for several\n";
                return kUsage;
            }
            if (!variants.empty()) sc.config.controller = exo::controller_from_name(variants.front());
            const std::string label(exo::to_string(sc.config.controller));
            if (!sc.sweep) {
                check_physical(sc.config);
                const exo::RunResult r = run_and_write(out, sc.config, sc.plots, label);
                exo::write_metrics(std::cout, r, label);
                return kOk;
            }
            std::vector<exo::VariantResult> rows;
            for (std::size_t i = 0; i < sc.sweep->values.size(); ++i) {
                exo::SimConfig cfg = exo::apply_sweep(sc, sc.sweep->values[i]);
                if (!variants.empty()) cfg.controller = sc.config.controller;
                cfg.log_weights = sc.config.log_weights;
                check_physical(cfg);
                const std::string name = sc.sweep->path + "=" + exo::format_number(sc.sweep->values[i]);
                const exo::RunResult r = run_and_write(out / ("sweep_" + std::to_string(i)), cfg, sc.plots, name);
                rows.push_back({name, r.metrics});
            }
            const std::string table = exo::comparison_table(rows);
            ensure_dir(out);
            write_file(out / "sweep.txt", [&](std::ostream& os) { os << table; });
            std::cout << table;
            return kOk;
        }

        // compare
        if (variants.empty()) variants = {"Cascade", "Pd"};
        if (variants.size() < 2) {
            std::cerr << "error: compare needs at least two --variant values\n";
            return kUsage;
        }
        check_physical(sc.config);
        std::vector<exo::VariantResult> rows;
        std::vector<std::vector<exo::TraceRecord>> traces;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < variants.size(); ++i) {
            exo::SimConfig cfg = sc.config;
            cfg.controller = exo::controller_from_name(variants[i]);
            std::string name(exo::to_string(cfg.controller));
            // repeated variants get a numeric suffix so their directories stay apart
            if (std::find(names.begin(), names.end(), name) != names.end()) name += "_" + std::to_string(i);
            names.push_back(name);
            exo::RunResult r = run_and_write(out / name, cfg, sc.plots, name);
            rows.push_back({name, r.metrics});
            traces.push_back(std::move(r.trace));
        }
        const std::string table = exo::comparison_table(rows);
        ensure_dir(out);
        write_file(out / "comparison.txt", [&](std::ostream& os) { os << table; });
        for (const std::string& col : sc.plots) {
            std::vector<exo::Series> series;
            for (std::size_t i = 0; i < traces.size(); ++i) series.push_back(exo::trace_series(traces[i], col, names[i]));
            const std::string svg = exo::render_svg(col, "t [s]", series);
            write_file(out / ("overlay_" + col + ".svg"), [&](std::ostream& os) { os << svg; });
        }
        std::cout << table;
        return kOk;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const exo::SimulationAborted& e) {
        std::cerr << "error: simulation aborted: " << e.what() << " (" << e.trace.size()
                  << " steps written)\n";
        return kNumeric;
    } catch (const exo::NumericError& e) {
        std::cerr << "error: numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const exo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSchema;
    } catch (const exo::GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSchema;
    }
}
