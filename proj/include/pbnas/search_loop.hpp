#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "pbnas/bench_oracle.hpp"
#include "pbnas/candidate_samplers.hpp"
#include "pbnas/gcn_predictor.hpp"

namespace pbnas {

struct SearchConfig {
    int candidates_per_iteration = 4;  // K
    int iterations = 1;                // T
    int init_size = 4;                 // |T_0|
    SamplerConfig sampler;
    PredictorConfig predictor;
    TrainHyper train;
    std::uint64_t seed = 0;

    void check() const;
};

struct IterationRecord {
    int iteration = 0;  // 0 is the random initial set
    std::vector<ArchKey> candidates;
    std::vector<double> val_errors;
    std::vector<double> test_errors;
    std::size_t n_evaluated = 0;
    double y_star_val = 0.0;
    double y_star_test = 0.0;  // test error of the arg-min-val architecture so far
    double seconds_train = 0.0;
    double seconds_sample = 0.0;
    double seconds_score = 0.0;
    bool short_pick = false;          // fewer than K candidates were available
    bool predictor_fallback = false;  // training had no ranking signal; candidates drawn uniformly
};

struct SearchTrace {
    std::vector<IterationRecord> iterations;
    // T_t and Y_t in evaluation order.
    std::vector<Architecture> evaluated;
    std::vector<double> val_errors;
    std::vector<double> test_errors;

    // 1-based evaluation index of the first architecture with val error <= target, or 0.
    std::size_t first_hit(double target) const;
};

struct PickResult {
    std::vector<std::size_t> indices;  // into the input list, best first
    bool short_pick = false;
};

/// The K highest-scoring architectures not yet evaluated, in descending score
/// order with ties broken by ascending ArchKey.
PickResult pick_best_k(std::span<const Architecture> archs, std::span<const double> scores, std::size_t k,
                       const KeySet& evaluated);

struct SearchHooks {
    // Replaces the trained predictor's scores (e.g. an oracle scorer in tests).
    std::function<std::vector<double>(std::span<const Architecture>)> scorer;
    // Sees every reduced set S' before scoring.
    std::function<void(int iteration, std::span<const Architecture>)> on_reduced_set;
    bool measure_time = false;
};

SearchTrace run_search(const SearchConfig& cfg, const Benchmark& bench, const SearchSpace& space,
                       const SearchHooks& hooks = {});

// Uniform candidates without replacement, no predictor.
SearchTrace run_random_baseline(const SearchConfig& cfg, const Benchmark& bench, const SearchSpace& space,
                                const SearchHooks& hooks = {});

void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, int run_id, const SearchTrace& trace);

}  // namespace pbnas
