#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "pbnas/arch_space.hpp"

namespace pbnas {

// Errors are 1 - accuracy. Every run value lies in [0, 1].
struct EvalRecord {
    Architecture arch;
    std::vector<double> val_errors;
    std::vector<double> test_errors;

    double mean_val() const;
    double mean_test() const;
};

/// Parameters of the closed-form stand-in benchmark.
///
/// phi(A) holds the upper-triangular adjacency bits followed by the flattened
/// one-hot features. The mean validation error is
///   0.02 + 0.9 * logistic(scale * (w.phi + phi.Q.phi / |phi| - offset))
/// where scale and offset are calibrated so that the 1st and 99th percentiles
/// of random architectures land near 0.05 and 0.85.
struct SyntheticModel {
    std::uint64_t seed = 0;
    std::vector<double> w;
    std::vector<double> q;  // |phi| x |phi|, symmetric, row-major
    double scale = 1.0;
    double offset = 0.0;

    std::size_t dim() const { return w.size(); }
    std::vector<double> phi(const Architecture& arch) const;
    double raw(std::span<const double> phi) const;
    double base_val(const Architecture& arch) const;
    EvalRecord evaluate(const Architecture& arch) const;

    static constexpr double kFloor = 0.02;
    static constexpr double kRange = 0.9;
    static constexpr double kTestNoise = 0.01;
    static constexpr double kRunJitter = 0.002;
    static constexpr int kRuns = 3;
};

class Benchmark {
public:
    // Validates every record against `spec` and rejects duplicate encodings.
    static Benchmark tabular(const SpaceSpec& spec, std::vector<EvalRecord> records);
    static Benchmark synthetic(const SpaceSpec& spec, std::uint64_t seed);

    const SpaceSpec& spec() const { return spec_; }
    bool is_tabular() const { return !model_; }
    const SyntheticModel* synthetic_model() const { return model_.get(); }

    // Tabular records in file order; empty in synthetic mode.
    std::span<const EvalRecord> records() const { return records_; }

    // Throws LookupError for architectures missing from a table.
    EvalRecord evaluate(const Architecture& arch) const;
    double query_val(const Architecture& arch) const;
    double query_test(const Architecture& arch) const;

    bool enumerable(std::uint64_t guard = kDefaultEnumerationGuard) const;
    // Table order, or enumeration order for the synthetic mode.
    std::vector<Architecture> architectures(std::uint64_t guard = kDefaultEnumerationGuard) const;

private:
    Benchmark() = default;

    const EvalRecord& lookup(const Architecture& arch) const;

    SpaceSpec spec_;
    std::vector<EvalRecord> records_;
    std::unordered_map<ArchKey, std::size_t> index_;
    std::shared_ptr<const SyntheticModel> model_;
};

// Line format:
//   spec L d max_edges flags          (flags bit 0: single source/sink)
//   <L d | bits | ops> | v1 v2 ... | t1 t2 ...
// Blank lines and lines starting with '#' are skipped.
Benchmark load_tabular(const std::filesystem::path& path);
Benchmark read_tabular(std::istream& in);
void save_tabular(const Benchmark& bench, const std::filesystem::path& path);
void write_tabular(const Benchmark& bench, std::ostream& out);

// Tabular copy of an enumerable benchmark (used to materialise synthetic spaces).
Benchmark to_tabular(const Benchmark& bench, std::uint64_t guard = kDefaultEnumerationGuard);

struct Oracles {
    double val = 0.0;
    double test = 0.0;
};

// Exact minima of the mean errors; throws EnumerationTooLarge for spaces that
// cannot be enumerated.
Oracles oracles(const Benchmark& bench, std::uint64_t guard = kDefaultEnumerationGuard);

}  // namespace pbnas
