// Command-line front end: single-system analysis reports and Monte-Carlo
// schedulability experiments with CSV output.

#include "rtsched/rtsched.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <thread>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitUnschedulable = 3;

int cmd_analyze(const std::string& path, bool strict, const std::string& format) {
    rtsched::SystemConfig sys;
    try {
        sys = rtsched::config::load_system_file(path);
    } catch (const rtsched::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    rtsched::report::AnalysisReport rep;
    try {
        rep = rtsched::report::analyze(sys);
    } catch (const rtsched::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (!rep.violations.empty()) {
        std::cerr << rtsched::report::format_text(rep);
        return kExitConfig;
    }
    std::cout << (format == "csv" ? rtsched::report::format_csv(rep)
                                  : rtsched::report::format_text(rep));
    if (strict && !rep.all_ok) return kExitUnschedulable;
    return kExitOk;
}

int cmd_experiment(const std::string& path, const std::string& out, int jobs,
                   std::int64_t seed_override) {
    rtsched::exp::ExperimentSpec spec;
    try {
        spec = rtsched::exp::load_experiment_file(path);
    } catch (const rtsched::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs <= 0) jobs = 1;
    try {
        rtsched::exp::run_experiment(spec, out, jobs, &std::cerr);
    } catch (const rtsched::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    std::cout << "wrote " << out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"schedulability analysis toolkit for partitioned multi-core systems"};
    app.require_subcommand(1);

    std::string analyze_path, format = "text";
    bool strict = false;
    auto* analyze = app.add_subcommand("analyze", "analyze one system configuration");
    analyze->add_option("file", analyze_path, "system configuration file")->required();
    analyze->add_flag("--strict", strict, "exit 3 when any analysis fails");
    analyze->add_option("--format", format, "text or csv")
        ->check(CLI::IsMember({"text", "csv"}));

    std::string exp_path, out_path;
    int jobs = 0;
    std::int64_t seed = -1;
    auto* experiment =
        app.add_subcommand("experiment", "run a Monte-Carlo schedulability sweep");
    experiment->add_option("file", exp_path, "experiment specification file")->required();
    experiment->add_option("--out", out_path, "output CSV path")->required();
    experiment->add_option("--jobs", jobs, "worker threads (default: all cores)");
    experiment->add_option("--seed", seed, "override the base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (analyze->parsed()) return cmd_analyze(analyze_path, strict, format);
    if (experiment->parsed()) return cmd_experiment(exp_path, out_path, jobs, seed);
    return kExitUsage;
}
