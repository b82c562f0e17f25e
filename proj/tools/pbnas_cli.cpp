// pbnas: benchmark generation and predictor-based search experiments.
//
//   pbnas bench-gen --layers 5 --ops 3 --seed 7 --out table.txt
//   pbnas search --config configs/default.json --jobs 4
//   pbnas hist   --config configs/default.json
//   pbnas gain   --config configs/default.json
//   pbnas run    --config configs/default.json     (all of the above outputs)

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pbnas/bench_oracle.hpp"
#include "pbnas/errors.hpp"
#include "pbnas/experiment.hpp"

namespace fs = std::filesystem;
using namespace pbnas;

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
    std::vector<std::string> variants;
    bool timing = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config, "experiment config (JSON)")->required();
    cmd->add_option("--seed", a.seed, "master seed, overrides the config");
    cmd->add_option("--out", a.out, "output directory, overrides the config");
    cmd->add_option("--jobs", a.jobs, "runs executed in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--variant", a.variants, "only run the named variant (repeatable)");
    cmd->add_flag("--timing", a.timing, "record wall-clock phase seconds in the traces (breaks byte-identity)");
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    body(out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
    std::cerr << "wrote " << path.string() << '\n';
}

int run_experiment_command(const CommonArgs& a, bool traces, bool hist, bool gain) {
    ExperimentConfig cfg = load_config(a.config);
    if (a.seed) set_master_seed(cfg, *a.seed);
    if (!a.out.empty()) cfg.output_dir = a.out;
    RunOptions opts;
    opts.jobs = a.jobs;
    opts.measure_time = a.timing;
    opts.only = a.variants;

    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentRuns runs = run_experiment(cfg, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "ran " << runs.variants.size() << " variant(s) x " << cfg.repeats << " repeat(s) in " << secs
              << " s\n";

    fs::create_directories(cfg.output_dir);
    if (traces) {
        write_file(cfg.output_dir / "traces.csv", [&](std::ostream& o) { write_traces_csv(o, cfg, runs); });
        write_file(cfg.output_dir / "convergence.csv", [&](std::ostream& o) { write_convergence_csv(o, cfg, runs); });
        write_file(cfg.output_dir / "summary.json", [&](std::ostream& o) { write_summary_json(o, cfg, runs); });
    }
    if (hist) {
        write_file(cfg.output_dir / "histogram.csv", [&](std::ostream& o) { write_histogram_csv(o, cfg, runs); });
    }
    if (gain) {
        write_file(cfg.output_dir / "gain.csv", [&](std::ostream& o) { write_gains_csv(o, cfg, runs); });
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"predictor-based architecture search experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SpaceSpec spec{5, 3, 0, true};
    std::uint64_t bench_seed = 7;
    std::string bench_out;
    bool multi_source = false;
    std::uint64_t guard = kDefaultEnumerationGuard;
    auto* gen = app.add_subcommand("bench-gen", "enumerate a space and write its synthetic benchmark as a table");
    gen->add_option("--layers", spec.num_layers, "nodes per architecture (L)")->check(CLI::Range(1, 64));
    gen->add_option("--ops", spec.num_op_types, "operation types (d)")->check(CLI::Range(1, 64));
    gen->add_option("--max-edges", spec.max_edges, "edge budget, 0 for none")->check(CLI::NonNegativeNumber);
    gen->add_flag("--multi-source", multi_source, "drop the single source/sink requirement");
    gen->add_option("--seed", bench_seed, "synthetic benchmark seed");
    gen->add_option("--guard", guard, "refuse spaces with more encodings than this");
    gen->add_option("--out", bench_out, "output table path")->required();

    CommonArgs search_args, hist_args, gain_args, run_args;
    auto* search = app.add_subcommand("search", "run every variant; write traces, convergence and summary");
    add_common(search, search_args);
    auto* hist = app.add_subcommand("hist", "histogram of proposed-candidate validation errors per variant");
    add_common(hist, hist_args);
    auto* gain = app.add_subcommand("gain", "sample-efficiency gain curves per variant");
    add_common(gain, gain_args);
    auto* run = app.add_subcommand("run", "search, hist and gain outputs from a single set of runs");
    add_common(run, run_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            spec.require_single_source_sink = !multi_source;
            spec.check();
            const Benchmark table = to_tabular(Benchmark::synthetic(spec, bench_seed), guard);
            save_tabular(table, bench_out);
            std::cerr << "wrote " << table.records().size() << " records to " << bench_out << '\n';
            return 0;
        }
        if (*search) return run_experiment_command(search_args, true, false, false);
        if (*hist) return run_experiment_command(hist_args, false, true, false);
        if (*gain) return run_experiment_command(gain_args, false, false, true);
        if (*run) return run_experiment_command(run_args, true, true, true);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
