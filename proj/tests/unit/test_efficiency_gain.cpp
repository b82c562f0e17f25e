#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pbnas/efficiency_gain.hpp"
#include "pbnas/exact_urn.hpp"
#include "pbnas/random.hpp"

using namespace pbnas;

TEST(TrialPmf, TwoItemsOneSuccess) {
    EXPECT_DOUBLE_EQ(trial_pmf(2, 1, 1), 0.5);
    EXPECT_DOUBLE_EQ(trial_pmf(2, 1, 2), 0.5);
    EXPECT_EQ(trial_pmf(2, 1, 3), 0.0);
    EXPECT_EQ(trial_pmf(2, 1, 0), 0.0);
    EXPECT_EQ(trial_pmf(5, 0, 1), 0.0);
    EXPECT_THROW(trial_pmf(2, 3, 1), std::invalid_argument);
}

TEST(TrialPmf, MatchesEveryOrderingOfSixItems) {
    // Items 0 and 1 are the successes; count the first success position over all 6! orders.
    std::vector<int> order{0, 1, 2, 3, 4, 5};
    std::vector<int> first(7, 0);
    int total = 0;
    do {
        const auto it = std::find_if(order.begin(), order.end(), [](int x) { return x < 2; });
        ++first[it - order.begin() + 1];
        ++total;
    } while (std::next_permutation(order.begin(), order.end()));
    ASSERT_EQ(total, 720);
    for (std::uint64_t k = 1; k <= 6; ++k) {
        EXPECT_NEAR(trial_pmf(6, 2, k), first[k] / 720.0, 1e-15) << k;
        EXPECT_EQ(trial_pmf_exact(6, 2, k), Rational(first[k], 720)) << k;
    }
}

TEST(TrialPmf, SumsToOne) {
    for (std::uint64_t K = 1; K <= 200; ++K) {
        for (std::uint64_t M = 1; M <= K; ++M) {
            double s = 0.0;
            for (std::uint64_t k = 1; k <= K - M + 1; ++k) s += trial_pmf(K, M, k);
            ASSERT_NEAR(s, 1.0, 1e-10) << K << " " << M;
        }
    }
}

TEST(TrialPmf, LargeSetsUseTheGammaPath) {
    // k > 4096 switches to lgamma; compare both sides of the switch with the product form.
    const std::uint64_t K = 100000, M = 10;
    for (std::uint64_t k : {4000ull, 4096ull, 4097ull, 5000ull, 20000ull}) {
        long double log_p = std::log((long double)M / K);
        for (std::uint64_t i = 0; i + 2 <= k; ++i) log_p += std::log((long double)(K - M - i) / (K - 1 - i));
        EXPECT_NEAR(trial_pmf(K, M, k), (double)std::exp(log_p), 1e-9 * (double)std::exp(log_p)) << k;
    }
}

TEST(ExpectedTrials, EndpointsAndSentinel) {
    EXPECT_EQ(expected_trials(4, 4), 1.0);
    EXPECT_EQ(expected_trials(7, 7), 1.0);
    EXPECT_EQ(expected_trials(10, 0), 11.0);
    EXPECT_THROW(expected_trials(3, 4), std::invalid_argument);
    EXPECT_THROW(expected_trials_exact(3, 4), std::invalid_argument);
}

TEST(ExpectedTrials, IsThePmfMeanExactly) {
    for (std::uint64_t K = 1; K <= 8; ++K) {
        for (std::uint64_t M = 1; M <= K; ++M) {
            Rational mean = 0, mass = 0;
            for (std::uint64_t k = 1; k <= K; ++k) {
                const Rational p = trial_pmf_exact(K, M, k);
                mean += p * k;
                mass += p;
            }
            EXPECT_EQ(mass, Rational(1));
            EXPECT_EQ(mean, expected_trials_exact(K, M));
            EXPECT_NEAR(static_cast<double>(mean), expected_trials(K, M), 1e-12);
        }
    }
}

TEST(ExpectedTrials, IsThePmfMeanInFloatingPoint) {
    for (std::uint64_t K = 1; K <= 200; ++K) {
        for (std::uint64_t M = 1; M <= K; ++M) {
            double mean = 0.0;
            for (std::uint64_t k = 1; k <= K - M + 1; ++k) mean += k * trial_pmf(K, M, k);
            ASSERT_NEAR(mean, expected_trials(K, M), 1e-12 * expected_trials(K, M)) << K << " " << M;
        }
    }
}

TEST(ExpectedTrials, Monotone) {
    for (std::uint64_t K = 1; K <= 60; ++K) {
        for (std::uint64_t M = 0; M <= K; ++M) {
            if (M > 0) EXPECT_LE(expected_trials(K, M), expected_trials(K, M - 1));
            EXPECT_GE(expected_trials(K + 1, M), expected_trials(K, M));
        }
    }
}

TEST(ExpectedTrials, UrnSimulation) {
    const std::uint64_t K = 1000, M = 10;
    Rng rng(17);
    const int draws = 100000;
    std::vector<int> urn(K, 0);
    std::fill(urn.begin(), urn.begin() + M, 1);
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < draws; ++t) {
        // partial Fisher-Yates until the first success
        for (std::size_t i = 0; i < K; ++i) {
            std::swap(urn[i], urn[i + uniform_index(rng, K - i)]);
            if (urn[i]) {
                sum += static_cast<double>(i + 1);
                sq += static_cast<double>((i + 1) * (i + 1));
                break;
            }
        }
    }
    const double mean = sum / draws;
    const double sd = std::sqrt(sq / draws - mean * mean);
    EXPECT_NEAR(mean, 91.0, 3.0 * sd / std::sqrt(draws));
}

TEST(EstimateM, Counts) {
    const ErrorSample s({0.1, 0.2, 0.3});
    auto r = estimate_m(s, 0.2);
    EXPECT_EQ(r.successes, 2u);
    EXPECT_EQ(r.set_size, 3u);
    EXPECT_EQ(estimate_m(s, 0.05).successes, 0u);
    EXPECT_EQ(estimate_m(s, 0.3).successes, 3u);
    EXPECT_EQ(estimate_m(s, 7.0).successes, 3u);
}

TEST(ErrorSampleWeights, BehaveLikeRepetition) {
    ErrorSample w;
    w.add(0.4, 3);
    w.add(0.1);
    w.add(0.4, 2);
    const ErrorSample flat({0.4, 0.4, 0.4, 0.1, 0.4, 0.4});
    EXPECT_EQ(w.size(), 6u);
    EXPECT_EQ(w.count_at_most(0.4), flat.count_at_most(0.4));
    EXPECT_EQ(w.count_at_most(0.2), 1u);
    EXPECT_DOUBLE_EQ(w.mean(), flat.mean());
    EXPECT_DOUBLE_EQ(w.percentile(0.5), flat.percentile(0.5));
    EXPECT_EQ(w.min(), 0.1);
    EXPECT_EQ(std::vector<double>(w.values().begin(), w.values().end()), (std::vector<double>{0.1, 0.4}));
    EXPECT_EQ(std::vector<std::uint64_t>(w.weights().begin(), w.weights().end()),
              (std::vector<std::uint64_t>{1, 5}));
}

TEST(GainDb, CalibrationPoints) {
    EXPECT_EQ(gain_db(37.0, 37.0), 0.0);
    EXPECT_NEAR(gain_db(1e5, 1.0), 50.0, 1e-12);
    EXPECT_NEAR(gain_db(300.0, 1.0), 24.77, 0.005);
    EXPECT_NEAR(gain_db(1.0, 300.0), -24.77, 0.005);
}

TEST(GainCurve, SameSampleIsZeroEverywhere) {
    Rng rng(3);
    std::vector<double> v;
    for (int i = 0; i < 500; ++i) v.push_back(uniform01(rng));
    const ErrorSample s(v);
    const auto grid = linear_grid(0.0, 1.0, 50);
    for (const auto& p : gain_curve(s, s, grid).points) EXPECT_EQ(p.gain_db, 0.0);
}

TEST(GainCurve, BestHalfClosedForm) {
    const std::vector<double> all{0.9, 0.15, 0.4, 0.7, 0.05, 0.3, 0.55, 0.2, 0.85, 0.6};
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    const std::vector<double> best(sorted.begin(), sorted.begin() + 5);
    const double n = 10.0;
    const double target = 0.5 * (sorted[4] + sorted[5]);  // median of S
    const double m_s = 5.0, m_c = 5.0;
    const double expected = 10.0 * std::log10((n + 1) / (m_s + 1) * (m_c + 1) / (n / 2 + 1));
    const std::vector<double> grid{target};
    const auto curve = gain_curve(ErrorSample(all), ErrorSample(best), grid);
    EXPECT_NEAR(curve.points[0].gain_db, expected, 1e-12);
    // direct computation from the counts
    EXPECT_EQ(curve.points[0].s.successes, 5u);
    EXPECT_EQ(curve.points[0].c.successes, 5u);
    EXPECT_NEAR(curve.points[0].gain_db, 10.0 * std::log10((11.0 / 6.0) / (6.0 / 6.0)), 1e-12);
    // a lower target: only 0.05 and 0.15 qualify in both
    const std::vector<double> low{0.15};
    const auto c2 = gain_curve(ErrorSample(all), ErrorSample(best), low);
    EXPECT_NEAR(c2.points[0].gain_db, 10.0 * std::log10((11.0 / 3.0) / (6.0 / 3.0)), 1e-12);
}

TEST(GainCurve, InvariantToSampleOrder) {
    Rng rng(4);
    std::vector<double> s, c, sp;
    for (int i = 0; i < 300; ++i) s.push_back(uniform01(rng));
    for (int i = 0; i < 80; ++i) c.push_back(0.5 * uniform01(rng));
    for (int i = 0; i < 120; ++i) sp.push_back(0.8 * uniform01(rng));
    const auto grid = linear_grid(0.01, 0.9, 40);
    const ErrorSample es(s), ec(c), esp(sp);
    const auto a = gain_curve(es, ec, grid, &esp);
    std::reverse(s.begin(), s.end());
    std::rotate(c.begin(), c.begin() + 17, c.end());
    for (std::size_t i = sp.size() - 1; i > 0; --i) std::swap(sp[i], sp[uniform_index(rng, i + 1)]);
    const ErrorSample es2(s), ec2(c), esp2(sp);
    const auto b = gain_curve(es2, ec2, grid, &esp2);
    std::ostringstream oa, ob;
    write_gain_csv(oa, a);
    write_gain_csv(ob, b);
    EXPECT_EQ(oa.str(), ob.str());
}

TEST(GainCurve, DecompositionAddsUp) {
    Rng rng(5);
    std::vector<double> s, c, sp;
    for (int i = 0; i < 1000; ++i) s.push_back(uniform01(rng));
    for (int i = 0; i < 100; ++i) c.push_back(0.3 * uniform01(rng));
    for (int i = 0; i < 300; ++i) sp.push_back(0.6 * uniform01(rng));
    const ErrorSample es(s), ec(c), esp(sp);
    const auto curve = gain_curve(es, ec, linear_grid(0.0, 1.0, 100), &esp);
    int unflagged = 0;
    for (const auto& p : curve.points) {
        ASSERT_TRUE(p.gain_e_db && p.gain_p_db);
        if (p.flagged) continue;
        ++unflagged;
        EXPECT_NEAR(*p.gain_e_db + *p.gain_p_db, p.gain_db, 1e-12);
    }
    EXPECT_GT(unflagged, 90);
    EXPECT_TRUE(curve.points.front().flagged);  // J = 0: nobody succeeds
    EXPECT_EQ(curve.points.front().expected_s, 1001.0);
}

TEST(GainCurve, RejectsBadInput) {
    const ErrorSample s({0.1, 0.2});
    const std::vector<double> unsorted{0.3, 0.1};
    EXPECT_THROW(gain_curve(s, s, unsorted), std::invalid_argument);
    const std::vector<double> grid{0.1};
    EXPECT_THROW(gain_curve(s, ErrorSample{}, grid), std::invalid_argument);
}

TEST(GainCurve, InterpolatesBetweenPoints) {
    GainCurve c;
    c.points.resize(2);
    c.points[0].target = 0.1;
    c.points[0].gain_db = 2.0;
    c.points[1].target = 0.3;
    c.points[1].gain_db = 6.0;
    EXPECT_DOUBLE_EQ(c.gain_at(0.2), 4.0);
    EXPECT_DOUBLE_EQ(c.gain_at(0.0), 2.0);
    EXPECT_DOUBLE_EQ(c.gain_at(1.0), 6.0);
}

TEST(LinearGrid, Endpoints) {
    const auto g = linear_grid(0.02, 0.85, 100);
    ASSERT_EQ(g.size(), 100u);
    EXPECT_EQ(g.front(), 0.02);
    EXPECT_EQ(g.back(), 0.85);
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    EXPECT_EQ(linear_grid(0.3, 0.9, 1), std::vector<double>{0.3});
}
