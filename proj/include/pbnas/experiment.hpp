#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pbnas/bench_oracle.hpp"
#include "pbnas/candidate_samplers.hpp"
#include "pbnas/efficiency_gain.hpp"
#include "pbnas/search_loop.hpp"

namespace pbnas {

inline constexpr const char* kToolVersion = "0.1.0";

enum class VariantMode {
    kRandom,     // uniform candidates, no predictor
    kFullSpace,  // predictor scores every unevaluated member of S
    kSampler,    // predictor scores N' members built by `sampler`
};

struct VariantSpec {
    std::string name;
    VariantMode mode = VariantMode::kRandom;
    SamplerConfig sampler;
};

struct BenchmarkSource {
    std::optional<std::filesystem::path> table;  // tabular file, else synthetic
    SpaceSpec spec{5, 3, 0, true};
    std::uint64_t seed = 7;
};

struct ExperimentConfig {
    BenchmarkSource benchmark;
    SearchConfig search;  // seed unused; runs derive theirs from master_seed
    std::vector<VariantSpec> variants;
    int repeats = 20;
    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir = "out";
    int hist_bins = 50;
    std::size_t gain_grid_points = 100;
    std::size_t gain_space_sample = 100000;  // |S| sample when S cannot be enumerated
    double gain_report_fraction = 0.05;      // J at this fraction of [oracle, p99(S)]
    std::uint64_t enumeration_guard = kDefaultEnumerationGuard;

    // Canonical JSON text and its hash; the hash heads every CSV.
    std::string canonical;
    std::string hash;
};

// Throws ConfigError naming the offending field path (e.g. "variants[1].size").
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
// Re-hashes after command-line overrides.
void set_master_seed(ExperimentConfig& cfg, std::uint64_t seed);

std::uint64_t run_seed(std::uint64_t master_seed, const std::string& variant, int repeat);

struct VariantRuns {
    VariantSpec spec;
    std::vector<SearchTrace> traces;
    ErrorSample candidates;                // pooled C (iterations >= 1)
    std::optional<ErrorSample> reduced;    // pooled S' (predictor variants)
};

struct ExperimentRuns {
    std::optional<Oracles> oracles;  // only for enumerable benchmarks
    ErrorSample space;  // S
    std::size_t space_size = 0;
    std::vector<VariantRuns> variants;
};

struct RunOptions {
    int jobs = 1;
    bool measure_time = false;
    std::vector<std::string> only;  // variant filter; empty keeps all
};

Benchmark load_benchmark(const ExperimentConfig& cfg);
ExperimentRuns run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct ConvergencePoint {
    int iteration = 0;
    double n_evaluated = 0.0;  // mean over runs
    double mean_val = 0.0, std_val = 0.0;
    double mean_test = 0.0, std_test = 0.0;
};

// Per-iteration mean and sample std of y* over the runs of one variant.
std::vector<ConvergencePoint> convergence(const VariantRuns& runs);

struct HistogramBin {
    double lo = 0.0, hi = 0.0;
    std::uint64_t count = 0;
    double density = 0.0;
};

// Fixed-width bins over [0, 1]; the last bin is closed.
std::vector<HistogramBin> histogram(const ErrorSample& sample, int bins);

std::vector<double> gain_grid(const ExperimentConfig& cfg, const ExperimentRuns& runs);
double report_target(const ExperimentConfig& cfg, const ExperimentRuns& runs);
GainCurve variant_gain(const ExperimentRuns& runs, const VariantRuns& v, std::span<const double> grid);

// Writers; each CSV starts with "# pbnas <version> config=<hash>".
void write_traces_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs);
void write_convergence_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs);
void write_histogram_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs);
void write_gains_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs);
void write_summary_json(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs);

}  // namespace pbnas
