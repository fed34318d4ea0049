// orchestra: validate, run, train, evaluate and compare scheduler scenarios.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "orchestra/report.hpp"
#include "orchestra/scenario.hpp"
#include "orchestra/simulator.hpp"

namespace fs = std::filesystem;
using namespace orchestra;

namespace {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kSchema = 3, kUnreadable = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("orchestra");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("ORCHESTRA_LOG");
    const std::string level = env == nullptr ? "off" : env;
    if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else {
        spdlog::set_level(spdlog::level::warn);
    }
}

void require_readable(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + what + " " + path.string());
}

Scenario load(const fs::path& path, std::optional<std::uint64_t> seed) {
    Scenario s = load_scenario(path);
    if (seed) s.seed = *seed;
    return s;
}

RunOptions trace_options() {
    RunOptions opts;
    if (spdlog::should_log(spdlog::level::debug)) {
        opts.on_trace = [](const std::string& line) { spdlog::debug("{}", line); };
    }
    return opts;
}

int finish_run(const fs::path& out, const Scenario& s, const RunResult& r) {
    write_run_outputs(out, s, r);
    if (r.report.halted) {
        spdlog::error("run halted: {}", r.report.halt_reason);
        std::cerr << "error: run halted: " << r.report.halt_reason << " (partial trace in " << (out / "trace.jsonl").string()
                  << ")\n";
        return kRuntime;
    }
    const Summary sum = summarize(r.report);
    std::cout << s.name << ": arrived " << r.report.arrived << ", completed " << r.report.completed << ", pending "
              << r.report.pending << ", mean cpu util " << sum.mean_cpu_util << ", p95 delay " << sum.p95_delay
              << "s -> " << out.string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Discrete-event simulator for a Kubernetes-style scheduler"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    int episodes = 0;
    std::string policy_path;
    std::vector<std::string> modes;

    auto* validate = app.add_subcommand("validate", "Check a scenario file against the schema");
    validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

    auto* run = app.add_subcommand("run", "Run a scenario and write metrics.csv, summary.json, trace.jsonl");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--seed", seed, "Workload seed (overrides the scenario's, default 0)");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train a Q-learning policy over repeated episodes");
    train->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    train->add_option("--episodes", episodes, "Number of training episodes")->required()->check(CLI::PositiveNumber);
    train->add_option("--policy", policy_path, "Policy output file (default <out>/policy.json)");
    train->add_option("--seed", seed, "Workload seed");
    train->add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Run a scenario with a trained policy, greedily");
    eval->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    eval->add_option("--policy", policy_path, "Policy file")->required();
    eval->add_option("--seed", seed, "Workload seed");
    eval->add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* compare = app.add_subcommand("compare", "Run several modes on the same workload and tabulate them");
    compare->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    compare->add_option("--modes", modes,
                        "Modes: static:<profile>, rl:<policy>, scenario; options /ca=on|off /gang=on|off /defrag=on|off")
        ->required()
        ->delimiter(',');
    compare->add_option("--seed", seed, "Workload seed");
    compare->add_option("--out", out_dir, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        require_readable(scenario_path, "scenario file");
        const fs::path out = fs::absolute(out_dir);

        if (*validate) {
            const Scenario s = load(scenario_path, seed);
            std::size_t nodes = 0;
            for (const auto& g : s.node_groups) nodes += static_cast<std::size_t>(g.count);
            std::cout << "ok: " << s.name << " (" << nodes << " nodes, " << s.workload.templates.size()
                      << " templates, " << s.services.size() << " services)\n";
            return kOk;
        }
        if (*run) {
            const Scenario s = load(scenario_path, seed);
            spdlog::info("running {} with seed {}", s.name, s.seed);
            return finish_run(out, s, run_scenario(s, trace_options()));
        }
        if (*train) {
            const Scenario s = load(scenario_path, seed);
            const fs::path policy_file = policy_path.empty() ? out / "policy.json" : fs::absolute(policy_path);
            spdlog::info("training {} for {} episodes", s.name, episodes);
            const TrainingResult r = train_policy(s, episodes);
            for (const auto& e : r.episodes) {
                spdlog::info("episode {} epsilon {:.3f} mean reward {:.4f}", e.episode, e.epsilon, e.mean_reward);
            }
            fs::create_directories(policy_file.parent_path());
            save_policy(r.policy, policy_file);
            write_file(out / "rewards.csv", rewards_csv(r.episodes));
            std::cout << "trained " << episodes << " episodes -> " << policy_file.string() << "\n";
            return kOk;
        }
        if (*eval) {
            require_readable(policy_path, "policy file");
            Scenario s = load(scenario_path, seed);
            s.mode = PolicyMode::RlEval;
            s.policy_file = fs::absolute(policy_path);
            validate_scenario(s);
            return finish_run(out, s, run_scenario(s, trace_options()));
        }
        if (*compare) {
            const Scenario s = load(scenario_path, seed);
            if (modes.size() < 2) throw UsageError("--modes needs at least two modes");
            for (const auto& m : modes) {
                const RunMode mode = parse_mode(m);
                if (mode.policy_file) require_readable(*mode.policy_file, "policy file");
            }
            const auto rows = compare_runs(s, modes);
            write_file(out / "comparison.csv", comparison_csv(rows));
            write_file(out / "comparison.json", comparison_json(s, rows));
            std::cout << comparison_csv(rows);
            bool halted = false;
            for (const auto& r : rows) halted |= r.halted;
            return halted ? kRuntime : kOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const SchemaError& e) {
        std::cerr << "schema error at " << e.path() << ": " << e.what() << "\n";
        return kSchema;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUnreadable;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
