#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "collapse_lab/acceptance.hpp"
#include "collapse_lab/runner.hpp"
#include "collapse_lab/scenario.hpp"

namespace {

using namespace collapse_lab;

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kAcceptance = 3 };

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool quiet = false;
};

void print_manifest(const runner::RunManifest& m) {
    std::cout << "scenario " << m.name << " (" << m.kind << "), seed " << m.seed << ", config " << m.config_hash << "\n";
    for (const auto& o : m.outputs) std::cout << "  " << m.output_dir << "/" << o.file << "  (" << o.rows << " rows)\n";
    std::cout << "  " << m.output_dir << "/manifest.json\n";
    if (m.kind == "timescale") {
        const auto& s = m.summary;
        std::printf("  formula value: %.6g s\n  quoted value:  %.6g s  <- does not follow from the formula (ratio %.3g)\n",
                    s.at("formula_seconds").get<double>(), s.at("quoted_seconds").get<double>(),
                    s.at("formula_over_quoted").get<double>());
    }
    std::cout << m.summary.dump(2) << "\n";
    std::fflush(stdout);
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
}

int run_scenario(const RunArgs& a, std::optional<scenario::Kind> kind) {
    scenario::ScenarioConfig cfg = a.config.empty() ? scenario::default_config(*kind) : scenario::parse_config(a.config, kind);
    if (a.seed) cfg.master_seed = *a.seed;
    if (a.out) cfg.output_dir = *a.out;
    const auto m = runner::execute(cfg);
    if (!a.quiet) print_manifest(m);
    return kOk;
}

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntime;
    }
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--seed", a.seed, "override master_seed");
    cmd->add_option("--out", a.out, "override output_dir");
    cmd->add_flag("-q,--quiet", a.quiet, "do not print the summary");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"collapse-lab: local-entanglement, incoherence and slip simulations"};
    app.set_version_flag("--version", std::string(runner::kToolVersion));
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "execute a scenario config");
    run->add_option("config", run_args.config, "scenario JSON file")->required();
    add_run_options(run, run_args);

    std::string only, accept_out = "collapse-lab-acceptance";
    bool list = false;
    auto* accept = app.add_subcommand("accept", "run the acceptance criteria");
    accept->add_option("--only", only, "run a single criterion by name or number");
    accept->add_option("--out", accept_out, "directory for scenario outputs and acceptance.json");
    accept->add_flag("--list", list, "list criteria and exit");

    auto* schema = app.add_subcommand("schema", "print the config JSON schema");

    std::vector<std::pair<scenario::Kind, CLI::App*>> kinds;
    std::vector<RunArgs> kind_args(scenario::kind_names().size());
    for (std::size_t i = 0; i < scenario::kind_names().size(); ++i) {
        const auto [kind, name] = scenario::kind_names()[i];
        auto* cmd = app.add_subcommand(name, std::string("run a '") + name + "' scenario (defaults when no config is given)");
        cmd->add_option("config", kind_args[i].config, "scenario JSON file of this kind");
        add_run_options(cmd, kind_args[i]);
        kinds.emplace_back(kind, cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    if (*run) return guarded([&] { return run_scenario(run_args, std::nullopt); });
    if (*schema) {
        std::cout << scenario::schema().dump(2) << "\n";
        return kOk;
    }
    if (*accept) {
        return guarded([&] {
            if (list) {
                for (const auto& c : acceptance::criteria()) std::cout << c.id << "  " << c.name << "\n";
                return int{kOk};
            }
            acceptance::Suite suite(accept_out);
            const auto rep = suite.run(only, [](const acceptance::Verdict& v) {
                std::cout << acceptance::format_line(v) << std::endl;
            });
            std::cout << (rep.all_pass() ? "ALL PASS" : "SOME CRITERIA FAILED") << " (" << accept_out << "/acceptance.json)\n";
            return rep.all_pass() ? int{kOk} : int{kAcceptance};
        });
    }
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (*kinds[i].second) return guarded([&] { return run_scenario(kind_args[i], kinds[i].first); });
    return kValidation;
}
