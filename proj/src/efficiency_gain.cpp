#include "pbnas/efficiency_gain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace pbnas {

ErrorSample::ErrorSample(std::vector<double> values)
    : values_(std::move(values)), weights_(values_.size(), 1), sorted_(false), total_(values_.size()) {}

ErrorSample::ErrorSample(std::vector<double> values, std::vector<std::uint64_t> weights)
    : values_(std::move(values)), weights_(std::move(weights)), sorted_(false) {
    if (values_.size() != weights_.size()) throw std::invalid_argument("values and weights differ in length");
    total_ = std::accumulate(weights_.begin(), weights_.end(), std::uint64_t{0});
}

void ErrorSample::add(double value, std::uint64_t weight) {
    if (weight == 0) return;
    values_.push_back(value);
    weights_.push_back(weight);
    total_ += weight;
    sorted_ = false;
}

void ErrorSample::sort() const {
    if (sorted_) return;
    std::vector<std::size_t> order(values_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values_[a] < values_[b]; });
    std::vector<double> v;
    std::vector<std::uint64_t> w;
    for (std::size_t i : order) {
        if (weights_[i] == 0) continue;
        if (!v.empty() && v.back() == values_[i]) {
            w.back() += weights_[i];
        } else {
            v.push_back(values_[i]);
            w.push_back(weights_[i]);
        }
    }
    values_ = std::move(v);
    weights_ = std::move(w);
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
    sorted_ = true;
}

std::uint64_t ErrorSample::count_at_most(double target) const {
    sort();
    const auto it = std::upper_bound(values_.begin(), values_.end(), target);
    if (it == values_.begin()) return 0;
    return cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double ErrorSample::percentile(double q) const {
    if (empty()) throw std::invalid_argument("percentile of an empty sample");
    sort();
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(total_ - 1);
    const auto lo = static_cast<std::uint64_t>(std::floor(pos));
    auto value_at = [&](std::uint64_t rank) {
        // rank is 0-based in the expanded multiset
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), rank);
        return values_[static_cast<std::size_t>(it - cumulative_.begin())];
    };
    const double a = value_at(lo);
    const double b = value_at(std::min(lo + 1, total_ - 1));
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

double ErrorSample::min() const {
    if (empty()) throw std::invalid_argument("min of an empty sample");
    sort();
    return values_.front();
}

double ErrorSample::mean() const {
    if (empty()) throw std::invalid_argument("mean of an empty sample");
    sort();
    double sum = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) sum += values_[i] * static_cast<double>(weights_[i]);
    return sum / static_cast<double>(total_);
}

std::span<const double> ErrorSample::values() const {
    sort();
    return values_;
}

std::span<const std::uint64_t> ErrorSample::weights() const {
    sort();
    return weights_;
}

double trial_pmf(std::uint64_t set_size, std::uint64_t successes, std::uint64_t k) {
    if (successes > set_size) throw std::invalid_argument("trial_pmf: successes exceed set size");
    if (successes == 0 || k < 1 || k > set_size - successes + 1) return 0.0;
    const auto K = static_cast<double>(set_size);
    const auto M = static_cast<double>(successes);
    // (M/k) C(K-M, k-1) / C(K, k) = (M/K) prod_{i=0}^{k-2} (K-M-i)/(K-1-i),
    // each factor being 1 - (M-1)/(K-1-i)
    if (k <= 4096) {
        double log_p = std::log(M / K);
        double comp = 0.0;  // Neumaier compensation
        for (std::uint64_t i = 0; i + 2 <= k; ++i) {
            const double term = std::log1p(-(M - 1.0) / (K - 1.0 - static_cast<double>(i)));
            const double t = log_p + term;
            comp += std::abs(log_p) >= std::abs(term) ? (log_p - t) + term : (term - t) + log_p;
            log_p = t;
        }
        return std::exp(log_p + comp);
    }
    const auto kk = static_cast<double>(k);
    const double log_p = std::log(M) - std::lgamma(K - M - kk + 2.0) + std::lgamma(K - M + 1.0) +
                         std::lgamma(K - kk + 1.0) - std::lgamma(K + 1.0);
    return std::exp(log_p);
}

double expected_trials(std::uint64_t set_size, std::uint64_t successes) {
    if (successes > set_size) throw std::invalid_argument("expected_trials: successes exceed set size");
    return static_cast<double>(set_size + 1) / static_cast<double>(successes + 1);
}

SuccessCount estimate_m(const ErrorSample& sample, double target) {
    return {sample.count_at_most(target), sample.size()};
}

double gain_db(double expected_base, double expected_reduced) {
    return 10.0 * std::log10(expected_base / expected_reduced);
}

double GainCurve::gain_at(double target) const {
    if (points.empty()) throw std::invalid_argument("empty gain curve");
    if (target <= points.front().target) return points.front().gain_db;
    if (target >= points.back().target) return points.back().gain_db;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (target <= points[i].target) {
            const auto& a = points[i - 1];
            const auto& b = points[i];
            const double w = (target - a.target) / (b.target - a.target);
            return a.gain_db + w * (b.gain_db - a.gain_db);
        }
    }
    return points.back().gain_db;
}

GainCurve gain_curve(const ErrorSample& sample_s, const ErrorSample& sample_c, std::span<const double> grid,
                     const ErrorSample* sample_s_prime) {
    if (sample_s.empty() || sample_c.empty() || (sample_s_prime && sample_s_prime->empty())) {
        throw std::invalid_argument("gain_curve needs non-empty samples");
    }
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("gain grid must be sorted");
    GainCurve curve;
    curve.points.reserve(grid.size());
    for (double target : grid) {
        GainPoint p;
        p.target = target;
        p.s = estimate_m(sample_s, target);
        p.c = estimate_m(sample_c, target);
        p.expected_s = expected_trials(p.s.set_size, p.s.successes);
        p.expected_c = expected_trials(p.c.set_size, p.c.successes);
        p.gain_db = gain_db(p.expected_s, p.expected_c);
        p.flagged = p.s.successes == 0 || p.c.successes == 0;
        if (sample_s_prime) {
            p.s_prime = estimate_m(*sample_s_prime, target);
            p.expected_s_prime = expected_trials(p.s_prime->set_size, p.s_prime->successes);
            p.gain_e_db = gain_db(p.expected_s, *p.expected_s_prime);
            p.gain_p_db = gain_db(*p.expected_s_prime, p.expected_c);
            p.flagged = p.flagged || p.s_prime->successes == 0;
        }
        curve.points.push_back(p);
    }
    return curve;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
    std::vector<double> g;
    if (points == 0) return g;
    if (points == 1) return {lo};
    g.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    g.back() = hi;
    return g;
}

namespace {

void put(std::ostream& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
}

}  // namespace

void write_gain_csv(std::ostream& out, const GainCurve& curve) {
    out << "J_target,K_S,M_S,E_S,K_C,M_C,E_C,gain_db,gain_e_db,gain_p_db,flagged\n";
    for (const auto& p : curve.points) {
        put(out, p.target);
        out << ',' << p.s.set_size << ',' << p.s.successes << ',';
        put(out, p.expected_s);
        out << ',' << p.c.set_size << ',' << p.c.successes << ',';
        put(out, p.expected_c);
        out << ',';
        put(out, p.gain_db);
        out << ',';
        if (p.gain_e_db) put(out, *p.gain_e_db);
        out << ',';
        if (p.gain_p_db) put(out, *p.gain_p_db);
        out << ',' << (p.flagged ? 1 : 0) << '\n';
    }
}

}  // namespace pbnas
