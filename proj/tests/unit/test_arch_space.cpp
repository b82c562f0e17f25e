#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "pbnas/arch_space.hpp"
#include "pbnas/errors.hpp"

using namespace pbnas;

namespace {

// Independent validity check used as a brute-force oracle: depth-first search
// from the source and, on the reversed graph, from the sink.
bool brute_valid(const std::vector<int>& adj, const std::vector<int>& ops, int n, int d, const SpaceSpec& spec) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            if (adj[i * n + j]) return false;
    for (int l = 0; l < n; ++l)
        if (ops[l] < 0 || ops[l] >= d) return false;
    int edges = std::accumulate(adj.begin(), adj.end(), 0);
    if (spec.max_edges > 0 && edges > spec.max_edges) return false;
    if (!spec.require_single_source_sink) return true;
    auto reach = [&](int start, bool forward) {
        std::vector<int> seen(n, 0), stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v) {
                int e = forward ? adj[u * n + v] : adj[v * n + u];
                if (e && !seen[v]) seen[v] = 1, stack.push_back(v);
            }
        }
        return seen;
    };
    auto from_src = reach(0, true), to_sink = reach(n - 1, false);
    for (int i = 0; i < n; ++i)
        if (!from_src[i] || !to_sink[i]) return false;
    return true;
}

std::uint64_t brute_count(const SpaceSpec& spec) {
    const int n = spec.num_layers, d = spec.num_op_types;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::uint64_t ops_total = 1;
    for (int l = 0; l < n; ++l) ops_total *= static_cast<std::uint64_t>(d);
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < (1ULL << pairs.size()); ++mask) {
        std::vector<int> adj(n * n, 0);
        for (std::size_t p = 0; p < pairs.size(); ++p)
            if (mask >> p & 1) adj[pairs[p].first * n + pairs[p].second] = 1;
        for (std::uint64_t o = 0; o < ops_total; ++o) {
            std::vector<int> ops(n);
            std::uint64_t x = o;
            for (int l = 0; l < n; ++l) ops[l] = static_cast<int>(x % d), x /= d;
            count += brute_valid(adj, ops, n, d, spec) ? 1 : 0;
        }
    }
    return count;
}

Architecture chain(int n, int d, int op = 0) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    std::vector<int> ops(n, op % d);
    return Architecture::from_edges(n, d, e, ops);
}

}  // namespace

TEST(SpaceSpec, RejectsMalformed) {
    EXPECT_THROW((SpaceSpec{1, 1, 0, true}.check()), std::invalid_argument);
    EXPECT_THROW((SpaceSpec{3, 0, 0, true}.check()), std::invalid_argument);
    EXPECT_THROW((SpaceSpec{3, 1, 4, true}.check()), std::invalid_argument);
    EXPECT_NO_THROW((SpaceSpec{3, 1, 3, true}.check()));
}

TEST(Validate, MinimalChainIsValid) {
    SpaceSpec spec{2, 1, 0, true};
    EXPECT_TRUE(validate(chain(2, 1), spec).ok());
}

TEST(Validate, RowWithTwoHotEntriesIsReported) {
    SpaceSpec spec{3, 3, 0, true};
    Architecture a = chain(3, 3);
    a.set_feature(1, 1, true);
    const auto r = validate(a, spec);
    ASSERT_TRUE(r.has(Rule::kNotOneHot));
    EXPECT_NE(r.violations.front().message.find("row 1 not one-hot"), std::string::npos);
    EXPECT_FALSE(is_valid(a, spec));
}

TEST(Validate, EdgeBudgetCountsEdgesDirectly) {
    SpaceSpec spec{7, 2, 9, true};
    Architecture a = chain(7, 2);  // 6 edges
    a.set_edge(0, 2, true);
    a.set_edge(0, 3, true);
    a.set_edge(1, 4, true);
    a.set_edge(2, 6, true);
    ASSERT_EQ(a.edge_count(), 10);
    const auto r = validate(a, spec);
    ASSERT_TRUE(r.has(Rule::kEdgeBudget));
    EXPECT_EQ(r.violations.size(), 1u);
    a.set_edge(2, 6, false);
    EXPECT_TRUE(validate(a, spec).ok());
}

TEST(Validate, OffPathAndTriangularity) {
    SpaceSpec spec{4, 1, 0, true};
    Architecture a = chain(4, 1);
    a.set_edge(1, 2, false);  // 2 no longer reachable from 0
    EXPECT_TRUE(validate(a, spec).has(Rule::kOffPath));
    EXPECT_TRUE(validate(a, SpaceSpec{4, 1, 0, false}).ok());

    Architecture b = chain(4, 1);
    b.set_edge(2, 1, true);
    EXPECT_TRUE(validate(b, spec).has(Rule::kNotUpperTriangular));
}

TEST(Validate, ShapeMismatchIsAHardError) {
    EXPECT_THROW(validate(chain(3, 2), SpaceSpec{4, 2, 0, true}), DimensionError);
    EXPECT_THROW(validate(chain(3, 2), SpaceSpec{3, 3, 0, true}), DimensionError);
    EXPECT_FALSE(is_valid(chain(3, 2), SpaceSpec{3, 3, 0, true}));
}

TEST(Enumerate, SmallCountsByHand) {
    EXPECT_EQ(enumerate(SpaceSpec{2, 1, 0, true}).size(), 1u);
    // {0->1, 1->2} and {0->1, 0->2, 1->2}; {0->2} alone leaves node 1 isolated.
    const auto three = enumerate(SpaceSpec{3, 1, 0, true});
    ASSERT_EQ(three.size(), 2u);
    EXPECT_EQ(three[0].edge_count() + three[1].edge_count(), 5);
}

TEST(Enumerate, MatchesBruteForceFilter) {
    for (const SpaceSpec& spec : {SpaceSpec{4, 2, 0, true}, SpaceSpec{4, 2, 3, true}, SpaceSpec{4, 2, 0, false},
                                  SpaceSpec{3, 3, 0, true}, SpaceSpec{5, 1, 0, true}, SpaceSpec{5, 2, 5, true}}) {
        EXPECT_EQ(enumerate(spec).size(), brute_count(spec))
            << spec.num_layers << " " << spec.num_op_types << " " << spec.max_edges;
    }
}

TEST(Enumerate, EveryMemberValidDistinctAndOrdered) {
    SpaceSpec spec{5, 2, 0, true};
    const auto all = enumerate(spec);
    EXPECT_EQ(all.size(), 122u * 32u);
    std::set<ArchKey> keys;
    for (const auto& a : all) {
        EXPECT_TRUE(validate(a, spec).ok());
        keys.insert(arch_key(a));
    }
    EXPECT_EQ(keys.size(), all.size());
    EXPECT_EQ(enumerate(spec), all);
}

TEST(Enumerate, GuardRefusesLargeSpaces) {
    SpaceSpec spec{7, 5, 0, true};
    try {
        enumerate(spec);
        FAIL() << "expected EnumerationTooLarge";
    } catch (const EnumerationTooLarge& e) {
        EXPECT_NE(std::string(e.what()).find("random_architecture"), std::string::npos);
    }
    EXPECT_THROW(enumerate(SpaceSpec{4, 2, 0, true}, 100), EnumerationTooLarge);
}

TEST(RandomArchitecture, DeterministicPerSeed) {
    SpaceSpec spec{6, 4, 0, true};
    Rng a(42), b(42);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(random_architecture(spec, a), random_architecture(spec, b));
}

TEST(RandomArchitecture, AlwaysValid) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) ASSERT_TRUE(is_valid(random_architecture(spec, rng), spec));
}

TEST(RandomArchitecture, EdgeCountMeanMatchesGeneratorDistribution) {
    // Rejection from fair coins is uniform over the valid masks: for L=3 those
    // have 2 and 3 edges, so the mean is 2.5 with per-draw std 0.5.
    SpaceSpec spec{3, 2, 0, true};
    Rng rng(9);
    const int draws = 10000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) sum += random_architecture(spec, rng).edge_count();
    EXPECT_NEAR(sum / draws, 2.5, 3.0 * 0.5 / std::sqrt(draws));
}

TEST(RandomArchitecture, TooConstrainedThrows) {
    SpaceSpec spec{7, 1, 6, true};  // only the chain fits; a fair coin rarely finds it
    Rng rng(3);
    EXPECT_THROW(random_architecture(spec, rng, 5), SpaceTooConstrained);
}

TEST(Mutate, ZeroProbabilityIsIdentity) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_architecture(spec, rng);
        EXPECT_EQ(mutate(a, 0.0, spec, rng), a);
    }
}

TEST(Mutate, FlippingTheOnlyEdgeIsRepaired) {
    SpaceSpec spec{2, 1, 0, true};
    Rng rng(5);
    const auto a = chain(2, 1);
    EXPECT_FALSE(mutate_once(a, 1.0, rng).edge(0, 1));
    const auto m = mutate(a, 1.0, spec, rng);
    EXPECT_TRUE(is_valid(m, spec));
    EXPECT_EQ(m, a);
}

TEST(Mutate, PerBitFlipRateBeforeRepair) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(6);
    const auto a = random_architecture(spec, rng);
    const double p = 0.05;
    const int trials = 100000;
    long flips = 0, row_changes = 0;
    for (int t = 0; t < trials; ++t) {
        const auto m = mutate_once(a, p, rng);
        for (int i = 0; i < 5; ++i) {
            for (int j = i + 1; j < 5; ++j) flips += m.edge(i, j) != a.edge(i, j);
            for (int j = 0; j <= i; ++j) ASSERT_FALSE(m.edge(i, j));
            ASSERT_TRUE(m.op(i).has_value());
        }
        for (int l = 0; l < 5; ++l) row_changes += m.op(l) != a.op(l);
    }
    const double n_bits = 10.0 * trials;
    EXPECT_NEAR(flips / n_bits, p, 3.0 * std::sqrt(p * (1 - p) / n_bits));
    // A replaced row lands on a different op with probability (d-1)/d.
    const double q = p * 2.0 / 3.0, n_rows = 5.0 * trials;
    EXPECT_NEAR(row_changes / n_rows, q, 3.0 * std::sqrt(q * (1 - q) / n_rows));
}

TEST(Crossover, IdenticalParentsGiveTheParent) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_architecture(spec, rng);
        EXPECT_EQ(crossover(a, a, spec, rng), a);
    }
}

TEST(Crossover, ElementsComeFromAParentAtRateOneHalf) {
    const int n = 5, d = 3;
    Architecture ones(n, d), zeros(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) ones.set_edge(i, j, true);
        ones.set_op(i, 0);
        zeros.set_op(i, 2);
    }
    Rng rng(8);
    const int trials = 100000;
    long from_first = 0, rows_first = 0;
    for (int t = 0; t < trials; ++t) {
        const auto c = crossover_once(ones, zeros, rng);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) from_first += c.edge(i, j);
            const auto op = c.op(i);
            ASSERT_TRUE(op == 0 || op == 2);
            rows_first += op == 0;
        }
    }
    const double bits = 10.0 * trials, rows = 5.0 * trials;
    EXPECT_NEAR(from_first / bits, 0.5, 3.0 * 0.5 / std::sqrt(bits));
    EXPECT_NEAR(rows_first / rows, 0.5, 3.0 * 0.5 / std::sqrt(rows));
}

TEST(Crossover, OutputBitsArePositionwiseFromParents) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(10);
    for (int t = 0; t < 1000; ++t) {
        const auto a = random_architecture(spec, rng), b = random_architecture(spec, rng);
        const auto c = crossover_once(a, b, rng);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) ASSERT_TRUE(c.edge(i, j) == a.edge(i, j) || c.edge(i, j) == b.edge(i, j));
            ASSERT_TRUE(c.op(i) == a.op(i) || c.op(i) == b.op(i));
        }
        EXPECT_TRUE(is_valid(crossover(a, b, spec, rng), spec));
    }
}

TEST(Permute, IdentityInverseAndDegreeMultisets) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_architecture(spec, rng);
        std::vector<int> id{0, 1, 2, 3, 4};
        EXPECT_EQ(permute(a, id), a);
        std::vector<int> p = id;
        for (int i = 4; i > 0; --i) std::swap(p[i], p[uniform_index(rng, i + 1)]);
        std::vector<int> inv(5);
        for (int i = 0; i < 5; ++i) inv[p[i]] = i;
        const auto b = permute(a, p);
        EXPECT_EQ(permute(b, inv), a);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) ASSERT_EQ(b.edge(i, j), a.edge(p[i], p[j]));
            ASSERT_EQ(b.op(i), a.op(p[i]));
        }
        auto degrees = [](const Architecture& x, bool rows) {
            std::multiset<int> s;
            for (int i = 0; i < 5; ++i) {
                int c = 0;
                for (int j = 0; j < 5; ++j) c += rows ? x.edge(i, j) : x.edge(j, i);
                s.insert(c);
            }
            return s;
        };
        EXPECT_EQ(degrees(a, true), degrees(b, true));
        EXPECT_EQ(degrees(a, false), degrees(b, false));
    }
    EXPECT_THROW(permute(chain(3, 1), std::vector<int>{0, 0, 1}), std::invalid_argument);
}

TEST(ArchKey, EqualMatricesEqualKeysAndOneBitDiffers) {
    auto a = chain(5, 3), b = chain(5, 3);
    EXPECT_EQ(arch_key(a), arch_key(b));
    b.set_edge(0, 4, true);
    EXPECT_NE(arch_key(a), arch_key(b));
    auto c = chain(5, 3);
    c.set_op(4, 2);
    EXPECT_NE(arch_key(a), arch_key(c));
}

TEST(ArchKey, NoCollisionsAmongRandomArchitectures) {
    SpaceSpec spec{7, 5, 0, true};
    Rng rng(12);
    std::map<ArchKey, std::string> seen;
    for (int i = 0; i < 100000; ++i) {
        const auto a = random_architecture(spec, rng);
        const std::string enc = encode_architecture(a);
        const auto [it, fresh] = seen.emplace(arch_key(a), enc);
        if (!fresh) ASSERT_EQ(it->second, enc);
    }
}

TEST(TextForm, RoundTripAndErrors) {
    SpaceSpec spec{5, 3, 0, true};
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_architecture(spec, rng);
        EXPECT_EQ(parse_architecture(encode_architecture(a)), a);
    }
    EXPECT_EQ(encode_architecture(chain(3, 2, 1)), "3 2 | 101 | 1 1 1");
    EXPECT_THROW(parse_architecture("3 2 | 10 | 1 1 1"), DataError);
    EXPECT_THROW(parse_architecture("3 2 | 101 | 1 1 2"), DataError);
    EXPECT_THROW(parse_architecture("3 2 101 1 1 1"), DataError);
}
