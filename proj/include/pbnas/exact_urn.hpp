#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>

namespace pbnas {

using Rational = boost::multiprecision::cpp_rational;

inline boost::multiprecision::cpp_int binomial_exact(std::uint64_t n, std::uint64_t r) {
    if (r > n) return 0;
    boost::multiprecision::cpp_int c = 1;
    for (std::uint64_t i = 1; i <= r; ++i) {
        c *= n - r + i;
        c /= i;
    }
    return c;
}

// Exact rational form of trial_pmf: (M / k) * C(K-M, k-1) / C(K, k).
inline Rational trial_pmf_exact(std::uint64_t set_size, std::uint64_t successes, std::uint64_t k) {
    if (successes > set_size) throw std::invalid_argument("successes exceed set size");
    if (successes == 0 || k < 1 || k > set_size - successes + 1) return Rational(0);
    Rational p{boost::multiprecision::cpp_int(successes), boost::multiprecision::cpp_int(k)};
    p *= Rational(binomial_exact(set_size - successes, k - 1), binomial_exact(set_size, k));
    return p;
}

inline Rational expected_trials_exact(std::uint64_t set_size, std::uint64_t successes) {
    if (successes > set_size) throw std::invalid_argument("successes exceed set size");
    return Rational(static_cast<long long>(set_size + 1), static_cast<long long>(successes + 1));
}

}  // namespace pbnas
