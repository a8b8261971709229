// Command line front end: run simulations, validate scenario files and
// inspection traces, and print the admission truth table.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"

#include "layersim/engine.hpp"
#include "layersim/errors.hpp"
#include "layersim/pipeline.hpp"
#include "layersim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 1; // invalid scenario / failed trace check
constexpr int kExitUsage = 2;    // unusable invocation or I/O failure

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir, const std::string& format, bool trace) {
    const layersim::ParseResult parsed = layersim::load_scenario_file(scenario_path);
    if (!parsed.ok()) {
        for (const layersim::Diagnostic& d : parsed.diagnostics) {
            std::cerr << scenario_path << ": " << layersim::format_diagnostic(d) << "\n";
        }
        return kExitBadInput;
    }

    const layersim::RunResult result = layersim::run_scenario(*parsed.scenario, seed);
    layersim::write_report(result.report, out_dir, format);
    if (trace) {
        const std::filesystem::path path = std::filesystem::path(out_dir) / "trace.log";
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot write '" << path.string() << "'\n";
            return kExitUsage;
        }
        for (const std::string& line : result.trace_lines) {
            out << line << "\n";
        }
    }

    const layersim::RunReport& report = result.report;
    std::cout << "scenario: " << scenario_path << "\n"
              << "seed: " << report.config_echo.seed << "\n"
              << "digest: " << report.config_echo.scenario_digest << "\n"
              << "packets: " << report.totals.packets_injected << " injected, "
              << report.totals.packets_delivered << " delivered, "
              << report.totals.packets_dropped << " dropped, "
              << report.totals.in_flight_at_end << " in flight\n";
    for (const auto& [name, lan] : report.per_lan) {
        std::cout << name << ": " << lan.sessions_started << " started, " << lan.established
                  << " established, " << lan.denied << " denied, "
                  << lan.blocked_after_established << " blocked late\n";
    }
    std::cout << "report written to " << out_dir << " (" << format << ")\n";
    return kExitOk;
}

int cmd_validate(const std::string& scenario_path, const std::string& trace_path) {
    const layersim::ParseResult parsed = layersim::load_scenario_file(scenario_path);
    if (!parsed.ok()) {
        for (const layersim::Diagnostic& d : parsed.diagnostics) {
            std::cout << scenario_path << ": " << layersim::format_diagnostic(d) << "\n";
        }
        std::cout << "invalid: " << parsed.diagnostics.size() << " problem(s)\n";
        return kExitBadInput;
    }
    std::cout << "scenario ok\n";

    if (trace_path.empty()) {
        return kExitOk;
    }
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot read '" << trace_path << "'\n";
        return kExitUsage;
    }
    std::map<std::string, std::vector<layersim::TraceEvent>> per_session;
    std::vector<std::string> order;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto ev = layersim::parse_trace_line(line);
        if (!ev.has_value()) {
            std::cout << "trace line " << line_no << ": unparseable\n";
            return kExitBadInput;
        }
        auto [it, inserted] = per_session.try_emplace(ev->session_id);
        if (inserted) {
            order.push_back(ev->session_id);
        }
        it->second.push_back(*ev);
    }
    std::size_t bad = 0;
    for (const std::string& id : order) {
        if (!layersim::verify_no_skip(per_session.at(id))) {
            std::cout << "session " << id << ": layer sequence violation\n";
            ++bad;
        }
    }
    std::cout << "trace: " << order.size() << " session(s), " << bad << " violation(s)\n";
    return bad == 0 ? kExitOk : kExitBadInput;
}

// All 32 combinations of the five predicates with the expected outcome,
// straight from the first-fail chain semantics.
int cmd_truthtable() {
    std::cout << "fw meta vault ips_clean am_clean -> decision (failing layer)\n";
    for (int mask = 0; mask < 32; ++mask) {
        const bool bits[5] = {
            (mask & 16) != 0, (mask & 8) != 0, (mask & 4) != 0,
            (mask & 2) != 0,  (mask & 1) != 0,
        };
        int failing = -1;
        for (int i = 0; i < 5; ++i) {
            if (!bits[i]) {
                failing = i;
                break;
            }
        }
        for (int i = 0; i < 5; ++i) {
            std::cout << (bits[i] ? "1  " : "0  ");
        }
        if (failing < 0) {
            std::cout << "-> PERMIT\n";
        } else {
            std::cout << "-> DENY ("
                      << layersim::layer_name(layersim::kInspectionLayers[failing]) << ")\n";
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator for layered session inspection"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::string format = "json";
    std::optional<std::uint64_t> seed;
    bool trace = false;

    CLI::App* run = app.add_subcommand("run", "Simulate a scenario and write the report");
    run->add_option("--scenario", scenario_path, "Scenario file")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--out", out_dir, "Output directory (default: out)");
    run->add_option("--format", format, "Report format: json, csv or both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    run->add_flag("--trace", trace, "Also write the inspection trace (trace.log)");

    std::string trace_path;
    CLI::App* validate =
        app.add_subcommand("validate", "Check a scenario file, optionally a trace");
    validate->add_option("--scenario", scenario_path, "Scenario file")->required();
    validate->add_option("--trace", trace_path, "Inspection trace to check for layer skips");

    CLI::App* truthtable =
        app.add_subcommand("truthtable", "Print the 32-row admission truth table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) {
            return cmd_run(scenario_path, seed, out_dir, format, trace);
        }
        if (validate->parsed()) {
            return cmd_validate(scenario_path, trace_path);
        }
        if (truthtable->parsed()) {
            return cmd_truthtable();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
