#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "pbnas/bench_oracle.hpp"
#include "pbnas/errors.hpp"

using namespace pbnas;

namespace {

const SpaceSpec kDefault{5, 3, 0, true};

std::string table_text(const Benchmark& b) {
    std::ostringstream os;
    write_tabular(b, os);
    return os.str();
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(q * (v.size() - 1))];
}

}  // namespace

TEST(Synthetic, SameSeedSameValues) {
    const auto a = Benchmark::synthetic(kDefault, 7), b = Benchmark::synthetic(kDefault, 7);
    const auto c = Benchmark::synthetic(kDefault, 8);
    Rng rng(1);
    int differs = 0;
    for (int i = 0; i < 200; ++i) {
        const auto arch = random_architecture(kDefault, rng);
        const auto ra = a.evaluate(arch), rb = b.evaluate(arch);
        EXPECT_EQ(ra.val_errors, rb.val_errors);
        EXPECT_EQ(ra.test_errors, rb.test_errors);
        differs += c.query_val(arch) != ra.mean_val();
    }
    EXPECT_GT(differs, 190);
}

TEST(Synthetic, RecordsHaveThreeRunsInsideTheSupport) {
    const auto b = Benchmark::synthetic(kDefault, 7);
    for (const auto& arch : enumerate(kDefault)) {
        const auto r = b.evaluate(arch);
        ASSERT_EQ(r.val_errors.size(), 3u);
        ASSERT_EQ(r.test_errors.size(), 3u);
        ASSERT_GE(r.mean_val(), 0.02 - 0.002);
        ASSERT_LE(r.mean_val(), 0.92 + 0.002);
        for (double v : r.val_errors) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
        // test error sits within the noise band around the validation error
        ASSERT_LE(std::abs(r.mean_test() - r.mean_val()), 0.01 + 2 * 0.002 + 1e-12);
    }
}

TEST(Synthetic, CalibratedPercentiles) {
    const auto b = Benchmark::synthetic(kDefault, 7);
    Rng rng(99);
    std::vector<double> vals;
    for (int i = 0; i < 20000; ++i) vals.push_back(b.synthetic_model()->base_val(random_architecture(kDefault, rng)));
    EXPECT_NEAR(quantile(vals, 0.01), 0.05, 0.01);
    EXPECT_NEAR(quantile(vals, 0.99), 0.85, 0.02);
}

TEST(Synthetic, OneBitNeighboursAreClose) {
    const auto b = Benchmark::synthetic(kDefault, 7);
    const auto* m = b.synthetic_model();
    double w_max = 0.0, q_max = 0.0;
    for (double v : m->w) w_max = std::max(w_max, std::abs(v));
    for (double v : m->q) q_max = std::max(q_max, std::abs(v));
    // logistic' <= 1/4
    const double per_bit = 0.9 * m->scale * 0.25 * (w_max + 2.0 * q_max);

    Rng rng(5);
    double total = 0.0;
    long count = 0;
    for (int t = 0; t < 2000; ++t) {
        const auto a = random_architecture(kDefault, rng);
        const double va = m->base_val(a);
        for (int i = 0; i < 5; ++i) {
            for (int j = i + 1; j < 5; ++j) {
                auto n = a;
                n.set_edge(i, j, !a.edge(i, j));
                const double dv = std::abs(m->base_val(n) - va);
                ASSERT_LE(dv, per_bit);
                if (is_valid(n, kDefault)) total += dv, ++count;
            }
            for (int op = 0; op < 3; ++op) {
                if (op == *a.op(i)) continue;
                auto n = a;
                n.set_op(i, op);
                ASSERT_LE(std::abs(m->base_val(n) - va), 2.0 * per_bit);
            }
        }
    }
    ASSERT_GT(count, 0);
    EXPECT_LE(total / count, 0.1);
}

TEST(Synthetic, RejectsNonMembers) {
    const auto b = Benchmark::synthetic(kDefault, 7);
    Architecture a(5, 3);
    a.set_op(0, 0);
    EXPECT_THROW(b.evaluate(a), LookupError);
    EXPECT_THROW(b.evaluate(Architecture(4, 3)), std::exception);
}

TEST(Tabular, ReadsTwoLineFile) {
    std::istringstream in(
        "# comment\n"
        "spec 2 1 0 1\n"
        "\n"
        "2 1 | 1 | 0 0 | 0.25 0.35 | 0.5\n");
    const auto b = read_tabular(in);
    ASSERT_EQ(b.records().size(), 1u);
    EXPECT_TRUE(b.is_tabular());
    EXPECT_DOUBLE_EQ(b.query_val(b.records()[0].arch), 0.3);
    EXPECT_DOUBLE_EQ(b.query_test(b.records()[0].arch), 0.5);
    const auto o = oracles(b);
    EXPECT_DOUBLE_EQ(o.val, 0.3);
    EXPECT_DOUBLE_EQ(o.test, 0.5);
}

TEST(Tabular, ErrorsCarryLineNumbers) {
    auto expect_line = [](const std::string& text, std::size_t line, const std::string& fragment) {
        std::istringstream in(text);
        try {
            read_tabular(in);
            ADD_FAILURE() << "accepted: " << text;
        } catch (const DataError& e) {
            EXPECT_EQ(e.line(), line) << e.what();
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    const std::string head = "spec 3 1 0 1\n";
    expect_line(head + "3 1 | 101 | 0 0 0 | 0.1 | 0.1\n3 1 | 111 | 0 0 0 | 1.5 | 0.1\n", 3, "range");
    expect_line(head + "3 1 | 101 | 0 0 0 | 0.1 | 0.1\n3 1 | 101 | 0 0 0 | 0.2 | 0.1\n", 3, "duplicate");
    expect_line(head + "3 1 | 001 | 0 0 0 | 0.1 | 0.1\n", 2, "path");
    expect_line(head + "3 1 | 101 | 0 0 0 | 0.1\n", 2, "fields");
    expect_line(head + "3 1 | 101 | 0 0 0 | 0.1 x | 0.1\n", 2, "number");
    expect_line(head + "3 1 | 101 | 0 0 0 |  | 0.1\n", 2, "no validation");
    expect_line("spec 3\n", 1, "header");
    std::istringstream empty("# nothing\n");
    EXPECT_THROW(read_tabular(empty), DataError);
    EXPECT_THROW(load_tabular("/nonexistent/table.txt"), DataError);
}

TEST(Tabular, ByteIdenticalRoundTrip) {
    const auto table = to_tabular(Benchmark::synthetic(SpaceSpec{4, 2, 0, true}, 3));
    const std::string text = table_text(table);
    std::istringstream in(text);
    const auto back = read_tabular(in);
    EXPECT_EQ(table_text(back), text);
    ASSERT_EQ(back.records().size(), table.records().size());
    for (std::size_t i = 0; i < back.records().size(); ++i) {
        EXPECT_EQ(back.records()[i].val_errors, table.records()[i].val_errors);
        EXPECT_EQ(back.records()[i].test_errors, table.records()[i].test_errors);
    }
}

TEST(Tabular, CheckedInFixtureMatchesRegeneration) {
    const auto loaded = load_tabular(std::string(PBNAS_TEST_DATA) + "/l4d2_seed3.txt");
    EXPECT_EQ(loaded.records().size(), 160u);
    EXPECT_EQ(table_text(loaded), table_text(to_tabular(Benchmark::synthetic(SpaceSpec{4, 2, 0, true}, 3))));
}

TEST(Tabular, MissingArchitectureIsALookupError) {
    const auto full = to_tabular(Benchmark::synthetic(SpaceSpec{4, 2, 0, true}, 3));
    std::vector<EvalRecord> some(full.records().begin(), full.records().begin() + 10);
    const auto part = Benchmark::tabular(full.spec(), some);
    EXPECT_NO_THROW(part.query_val(full.records()[9].arch));
    EXPECT_THROW(part.query_val(full.records()[10].arch), LookupError);
    EXPECT_EQ(part.architectures().size(), 10u);
}

TEST(Tabular, ConstructorValidates) {
    const SpaceSpec spec{3, 1, 0, true};
    Architecture a(3, 1);
    a.set_edge(0, 1, true);
    a.set_edge(1, 2, true);
    for (int l = 0; l < 3; ++l) a.set_op(l, 0);
    EXPECT_THROW(Benchmark::tabular(spec, {{a, {0.1}, {0.1}}, {a, {0.2}, {0.2}}}), DataError);
    EXPECT_THROW(Benchmark::tabular(spec, {{a, {-0.1}, {0.1}}}), DataError);
    EXPECT_THROW(Benchmark::tabular(spec, {{a, {0.1}, {}}}), DataError);
}

TEST(Oracles, MatchBruteForceMinimum) {
    const SpaceSpec spec{4, 2, 0, true};
    const auto b = Benchmark::synthetic(spec, 11);
    double best_val = std::numeric_limits<double>::infinity(), best_test = best_val;
    for (const auto& a : enumerate(spec)) {
        const auto r = b.evaluate(a);
        best_val = std::min(best_val, r.mean_val());
        best_test = std::min(best_test, r.mean_test());
    }
    const auto o = oracles(b);
    EXPECT_EQ(o.val, best_val);
    EXPECT_EQ(o.test, best_test);
    EXPECT_EQ(oracles(to_tabular(b)).val, best_val);
}

TEST(Oracles, LargeSpacesAreNotEnumerable) {
    const auto b = Benchmark::synthetic(SpaceSpec{7, 5, 0, true}, 1);
    EXPECT_FALSE(b.enumerable());
    EXPECT_THROW(oracles(b), EnumerationTooLarge);
    EXPECT_TRUE(Benchmark::synthetic(kDefault, 1).enumerable());
}
