#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pbnas/random.hpp"

namespace pbnas {

struct SpaceSpec {
    int num_layers = 0;
    int num_op_types = 0;
    int max_edges = 0;  // 0 = unlimited
    bool require_single_source_sink = true;

    int upper_pairs() const { return num_layers * (num_layers - 1) / 2; }
    // Throws std::invalid_argument when the spec itself is malformed.
    void check() const;

    friend bool operator==(const SpaceSpec&, const SpaceSpec&) = default;
};

/// A network graph: `adjacency(i, j) == 1` means layer i feeds layer j, and
/// row l of the feature matrix is the one-hot op encoding of layer l.
///
/// The type stores any binary matrices of the right shape; whether they form a
/// legal member of a space is decided by validate().
class Architecture {
public:
    Architecture() = default;
    Architecture(int layers, int ops);

    /// Builds an upper-triangular architecture from an edge list and one op per layer.
    static Architecture from_edges(int layers, int ops,
                                   std::span<const std::pair<int, int>> edges,
                                   std::span<const int> op_per_layer);

    int layers() const { return layers_; }
    int ops() const { return ops_; }

    bool edge(int from, int to) const { return adjacency_[idx(from, to)] != 0; }
    void set_edge(int from, int to, bool on) { adjacency_[idx(from, to)] = on ? 1 : 0; }

    bool feature(int layer, int op) const { return features_[layer * ops_ + op] != 0; }
    void set_feature(int layer, int op, bool on) { features_[layer * ops_ + op] = on ? 1 : 0; }

    // Replaces row `layer` by the one-hot vector for `op`.
    void set_op(int layer, int op);
    // Index of the hot entry, or nullopt when the row is not one-hot.
    std::optional<int> op(int layer) const;

    int edge_count() const;
    bool upper_triangular() const;

    std::span<const std::uint8_t> adjacency_bits() const { return adjacency_; }
    std::span<const std::uint8_t> feature_bits() const { return features_; }

    friend bool operator==(const Architecture&, const Architecture&) = default;

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i * layers_ + j); }

    int layers_ = 0;
    int ops_ = 0;
    std::vector<std::uint8_t> adjacency_;
    std::vector<std::uint8_t> features_;
};

/// Canonical byte string of an exact encoding. Ordering is lexicographic on
/// the bytes and is used as the deterministic tie-breaker everywhere.
struct ArchKey {
    std::string bytes;

    friend auto operator<=>(const ArchKey&, const ArchKey&) = default;
    friend bool operator==(const ArchKey&, const ArchKey&) = default;
};

ArchKey arch_key(const Architecture& arch);

enum class Rule {
    kNotUpperTriangular,
    kNotOneHot,
    kOffPath,
    kEdgeBudget,
};

struct Violation {
    Rule rule;
    std::string message;
};

struct ValidityReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(Rule rule) const;
};

// Throws DimensionError if the matrices do not match the spec's shape.
ValidityReport validate(const Architecture& arch, const SpaceSpec& spec);
// Same rules as validate() without building messages; shapes must match.
bool is_valid(const Architecture& arch, const SpaceSpec& spec);

inline constexpr int kRandomArchitectureAttempts = 1000;
inline constexpr std::uint64_t kDefaultEnumerationGuard = 10'000'000;
inline constexpr int kOperatorAttempts = 100;

// Independent fair coin per upper-triangular edge and a uniform op per layer,
// rejected until valid. Throws SpaceTooConstrained after `attempts` draws.
Architecture random_architecture(const SpaceSpec& spec, Rng& rng,
                                 int attempts = kRandomArchitectureAttempts);

/// Number of raw encodings (2^pairs * d^L) that enumeration would scan, saturated.
std::uint64_t encoding_count(const SpaceSpec& spec);

/// Visits every valid architecture exactly once. Order: adjacency bit masks
/// ascending, then op tuples in lexicographic order (layer 0 most significant).
/// Throws EnumerationTooLarge when encoding_count exceeds `guard`.
void for_each_architecture(const SpaceSpec& spec,
                           const std::function<void(const Architecture&)>& visit,
                           std::uint64_t guard = kDefaultEnumerationGuard);
std::vector<Architecture> enumerate(const SpaceSpec& spec,
                                    std::uint64_t guard = kDefaultEnumerationGuard);

// Single unrepaired proposals; may return invalid architectures.
Architecture mutate_once(const Architecture& arch, double p_mutate, Rng& rng);
Architecture crossover_once(const Architecture& a1, const Architecture& a2, Rng& rng);

// Proposals re-drawn until valid (kOperatorAttempts), then random_architecture.
Architecture mutate(const Architecture& arch, double p_mutate, const SpaceSpec& spec, Rng& rng);
Architecture crossover(const Architecture& a1, const Architecture& a2, const SpaceSpec& spec,
                       Rng& rng);

/// Relabels layers: result(i, j) = arch(perm[i], perm[j]) and row i of the
/// features is row perm[i], i.e. P A P^T and P X. The result may leave the
/// upper-triangular form and is meant for predictor inputs only.
Architecture permute(const Architecture& arch, std::span<const int> perm);

// Text form `L d | upper-triangular bits | op per layer`.
std::string encode_architecture(const Architecture& arch);
Architecture parse_architecture(std::string_view text);

}  // namespace pbnas

template <>
struct std::hash<pbnas::ArchKey> {
    std::size_t operator()(const pbnas::ArchKey& k) const noexcept {
        return static_cast<std::size_t>(pbnas::fnv1a64(k.bytes));
    }
};
