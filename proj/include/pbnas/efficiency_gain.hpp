#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace pbnas {

/// Validation errors of a set under study (S, S' or C). Entries may carry a
/// multiplicity so that pooled samples (e.g. the full space seen once per
/// iteration) need not be materialised element by element.
class ErrorSample {
public:
    ErrorSample() = default;
    explicit ErrorSample(std::vector<double> values);
    ErrorSample(std::vector<double> values, std::vector<std::uint64_t> weights);

    void add(double value, std::uint64_t weight = 1);

    bool empty() const { return total_ == 0; }
    std::uint64_t size() const { return total_; }
    // Number of entries with value <= target.
    std::uint64_t count_at_most(double target) const;
    // Linear-interpolation percentile of the weighted sample, q in [0, 1].
    double percentile(double q) const;
    double min() const;
    double mean() const;
    // Distinct values ascending with their multiplicities.
    std::span<const double> values() const;
    std::span<const std::uint64_t> weights() const;

private:
    void sort() const;

    mutable std::vector<double> values_;
    mutable std::vector<std::uint64_t> weights_;
    mutable std::vector<std::uint64_t> cumulative_;
    mutable bool sorted_ = true;
    std::uint64_t total_ = 0;
};

/// P(first success at draw k) when drawing without replacement from `set_size`
/// items of which `successes` succeed: (M / k) * C(K-M, k-1) / C(K, k).
/// Returns 0 for k outside [1, K-M+1]; throws std::invalid_argument if M > K.
double trial_pmf(std::uint64_t set_size, std::uint64_t successes, std::uint64_t k);

// (K + 1) / (M + 1); M = 0 gives the sentinel K + 1.
double expected_trials(std::uint64_t set_size, std::uint64_t successes);

struct SuccessCount {
    std::uint64_t successes = 0;  // M
    std::uint64_t set_size = 0;   // K
};

SuccessCount estimate_m(const ErrorSample& sample, double target);

// 10 log10(base / reduced)
double gain_db(double expected_base, double expected_reduced);

struct GainPoint {
    double target = 0.0;
    SuccessCount s;
    SuccessCount c;
    std::optional<SuccessCount> s_prime;
    double expected_s = 0.0;
    double expected_c = 0.0;
    std::optional<double> expected_s_prime;
    double gain_db = 0.0;
    std::optional<double> gain_e_db;
    std::optional<double> gain_p_db;
    // Some set has no success at this target, so an expectation is the K + 1 sentinel.
    bool flagged = false;
};

struct GainCurve {
    std::vector<GainPoint> points;

    // Linear interpolation of the total gain in target (clamped to the grid ends).
    double gain_at(double target) const;
};

GainCurve gain_curve(const ErrorSample& sample_s, const ErrorSample& sample_c, std::span<const double> grid,
                     const ErrorSample* sample_s_prime = nullptr);

// `points` evenly spaced values over [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t points);

// Columns: J_target,K_S,M_S,E_S,K_C,M_C,E_C,gain_db,gain_e_db,gain_p_db,flagged
void write_gain_csv(std::ostream& out, const GainCurve& curve);

}  // namespace pbnas
