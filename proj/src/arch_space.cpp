#include "pbnas/arch_space.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pbnas/errors.hpp"

namespace pbnas {

void SpaceSpec::check() const {
    if (num_layers < 2) {
        throw std::invalid_argument("space needs at least 2 layers");
    }
    if (num_op_types < 1) {
        throw std::invalid_argument("space needs at least 1 op type");
    }
    if (max_edges < 0 || max_edges > upper_pairs()) {
        throw std::invalid_argument("max_edges must lie in [0, L(L-1)/2]");
    }
}

Architecture::Architecture(int layers, int ops)
    : layers_(layers),
      ops_(ops),
      adjacency_(static_cast<std::size_t>(layers * layers), 0),
      features_(static_cast<std::size_t>(layers * ops), 0) {
    if (layers < 1 || ops < 1) {
        throw DimensionError("architecture needs at least one layer and one op type");
    }
}

Architecture Architecture::from_edges(int layers, int ops,
                                      std::span<const std::pair<int, int>> edges,
                                      std::span<const int> op_per_layer) {
    if (static_cast<int>(op_per_layer.size()) != layers) {
        throw DimensionError("op list length differs from layer count");
    }
    Architecture a(layers, ops);
    for (auto [i, j] : edges) {
        if (i < 0 || j < 0 || i >= layers || j >= layers) {
            throw DimensionError("edge endpoint out of range");
        }
        a.set_edge(i, j, true);
    }
    for (int l = 0; l < layers; ++l) {
        if (op_per_layer[l] < 0 || op_per_layer[l] >= ops) {
            throw DimensionError("op index out of range");
        }
        a.set_op(l, op_per_layer[l]);
    }
    return a;
}

void Architecture::set_op(int layer, int op) {
    std::fill_n(features_.begin() + layer * ops_, ops_, std::uint8_t{0});
    features_[layer * ops_ + op] = 1;
}

std::optional<int> Architecture::op(int layer) const {
    std::optional<int> hot;
    for (int k = 0; k < ops_; ++k) {
        if (feature(layer, k)) {
            if (hot) {
                return std::nullopt;
            }
            hot = k;
        }
    }
    return hot;
}

int Architecture::edge_count() const {
    return static_cast<int>(std::count(adjacency_.begin(), adjacency_.end(), std::uint8_t{1}));
}

bool Architecture::upper_triangular() const {
    for (int i = 0; i < layers_; ++i) {
        for (int j = 0; j <= i; ++j) {
            if (edge(i, j)) {
                return false;
            }
        }
    }
    return true;
}

ArchKey arch_key(const Architecture& arch) {
    const auto adj = arch.adjacency_bits();
    const auto feat = arch.feature_bits();
    const std::size_t nbits = adj.size() + feat.size();
    std::string bytes(2 + (nbits + 7) / 8, '\0');
    bytes[0] = static_cast<char>(arch.layers());
    bytes[1] = static_cast<char>(arch.ops());
    std::size_t bit = 0;
    auto push = [&](std::uint8_t v) {
        if (v) {
            bytes[2 + bit / 8] = static_cast<char>(static_cast<unsigned char>(bytes[2 + bit / 8]) |
                                                   (0x80u >> (bit % 8)));
        }
        ++bit;
    };
    for (auto v : adj) push(v);
    for (auto v : feat) push(v);
    return ArchKey{std::move(bytes)};
}

bool ValidityReport::has(Rule rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [rule](const Violation& v) { return v.rule == rule; });
}

namespace {

void check_shape(const Architecture& arch, const SpaceSpec& spec) {
    if (arch.layers() != spec.num_layers || arch.ops() != spec.num_op_types) {
        std::ostringstream os;
        os << "architecture is " << arch.layers() << "x" << arch.ops() << " but space is "
           << spec.num_layers << "x" << spec.num_op_types;
        throw DimensionError(os.str());
    }
}

// Nodes reachable from node 0 along edges, and nodes that reach node L-1.
bool all_on_source_sink_path(const Architecture& arch) {
    const int n = arch.layers();
    std::vector<char> fwd(n, 0), bwd(n, 0);
    fwd[0] = 1;
    bwd[n - 1] = 1;
    // Fixed-point iteration handles arbitrary (also non-triangular) matrices.
    for (bool changed = true; changed;) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (!arch.edge(i, j)) continue;
                if (fwd[i] && !fwd[j]) fwd[j] = 1, changed = true;
                if (bwd[j] && !bwd[i]) bwd[i] = 1, changed = true;
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!fwd[i] || !bwd[i]) return false;
    }
    return true;
}

}  // namespace

ValidityReport validate(const Architecture& arch, const SpaceSpec& spec) {
    check_shape(arch, spec);
    ValidityReport report;
    if (!arch.upper_triangular()) {
        report.violations.push_back({Rule::kNotUpperTriangular, "adjacency not strictly upper-triangular"});
    }
    for (int l = 0; l < arch.layers(); ++l) {
        if (!arch.op(l)) {
            report.violations.push_back({Rule::kNotOneHot, "row " + std::to_string(l) + " not one-hot"});
        }
    }
    if (spec.require_single_source_sink) {
        for (int i = 0; i < arch.layers(); ++i) {
            if (arch.edge(i, 0)) {
                report.violations.push_back({Rule::kOffPath, "source layer has inputs"});
                break;
            }
        }
        for (int j = 0; j < arch.layers(); ++j) {
            if (arch.edge(arch.layers() - 1, j)) {
                report.violations.push_back({Rule::kOffPath, "sink layer has outputs"});
                break;
            }
        }
        if (!all_on_source_sink_path(arch)) {
            report.violations.push_back({Rule::kOffPath, "layer not on a source-to-sink path"});
        }
    }
    if (spec.max_edges > 0 && arch.edge_count() > spec.max_edges) {
        report.violations.push_back(
            {Rule::kEdgeBudget, "edge budget: " + std::to_string(arch.edge_count()) + " > " +
                                    std::to_string(spec.max_edges)});
    }
    return report;
}

bool is_valid(const Architecture& arch, const SpaceSpec& spec) {
    if (arch.layers() != spec.num_layers || arch.ops() != spec.num_op_types) {
        return false;
    }
    if (!arch.upper_triangular()) return false;
    for (int l = 0; l < arch.layers(); ++l) {
        if (!arch.op(l)) return false;
    }
    if (spec.max_edges > 0 && arch.edge_count() > spec.max_edges) return false;
    return !spec.require_single_source_sink || all_on_source_sink_path(arch);
}

Architecture random_architecture(const SpaceSpec& spec, Rng& rng, int attempts) {
    spec.check();
    const int n = spec.num_layers;
    Architecture a(n, spec.num_op_types);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                a.set_edge(i, j, (rng() >> 63) != 0);
            }
        }
        for (int l = 0; l < n; ++l) {
            a.set_op(l, static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.num_op_types))));
        }
        if (is_valid(a, spec)) {
            return a;
        }
    }
    throw SpaceTooConstrained("space too constrained: no valid architecture after " +
                              std::to_string(attempts) + " random draws");
}

std::uint64_t encoding_count(const SpaceSpec& spec) {
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t count = 1;
    auto mul = [&](std::uint64_t f) {
        count = (count > kMax / f) ? kMax : count * f;
    };
    for (int p = 0; p < spec.upper_pairs(); ++p) mul(2);
    for (int l = 0; l < spec.num_layers; ++l) mul(static_cast<std::uint64_t>(spec.num_op_types));
    return count;
}

void for_each_architecture(const SpaceSpec& spec,
                           const std::function<void(const Architecture&)>& visit,
                           std::uint64_t guard) {
    spec.check();
    const std::uint64_t total = encoding_count(spec);
    if (total > guard) {
        throw EnumerationTooLarge("space has " + std::to_string(total) +
                                  " encodings, above the enumeration guard of " +
                                  std::to_string(guard) + "; use random_architecture instead");
    }
    const int n = spec.num_layers;
    const int d = spec.num_op_types;
    const int pairs = spec.upper_pairs();

    Architecture a(n, d);
    std::vector<int> ops(static_cast<std::size_t>(n), 0);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs); ++mask) {
        int bit = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j, ++bit) {
                a.set_edge(i, j, ((mask >> (pairs - 1 - bit)) & 1u) != 0);
            }
        }
        for (int l = 0; l < n; ++l) a.set_op(l, 0);
        if (!is_valid(a, spec)) continue;

        std::fill(ops.begin(), ops.end(), 0);
        while (true) {
            visit(a);
            int l = n - 1;
            while (l >= 0 && ops[l] == d - 1) {
                ops[l] = 0;
                a.set_op(l, 0);
                --l;
            }
            if (l < 0) break;
            ++ops[l];
            a.set_op(l, ops[l]);
        }
    }
}

std::vector<Architecture> enumerate(const SpaceSpec& spec, std::uint64_t guard) {
    std::vector<Architecture> out;
    for_each_architecture(spec, [&](const Architecture& a) { out.push_back(a); }, guard);
    return out;
}

Architecture mutate_once(const Architecture& arch, double p_mutate, Rng& rng) {
    Architecture out = arch;
    const int n = arch.layers();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (bernoulli(rng, p_mutate)) {
                out.set_edge(i, j, !arch.edge(i, j));
            }
        }
    }
    for (int l = 0; l < n; ++l) {
        if (bernoulli(rng, p_mutate)) {
            out.set_op(l, static_cast<int>(uniform_index(rng, static_cast<std::size_t>(arch.ops()))));
        }
    }
    return out;
}

Architecture crossover_once(const Architecture& a1, const Architecture& a2, Rng& rng) {
    if (a1.layers() != a2.layers() || a1.ops() != a2.ops()) {
        throw DimensionError("crossover parents have different shapes");
    }
    Architecture out = a1;
    const int n = a1.layers();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((rng() >> 63) != 0) {
                out.set_edge(i, j, a2.edge(i, j));
            }
        }
    }
    for (int l = 0; l < n; ++l) {
        if ((rng() >> 63) != 0) {
            for (int k = 0; k < a1.ops(); ++k) {
                out.set_feature(l, k, a2.feature(l, k));
            }
        }
    }
    return out;
}

Architecture mutate(const Architecture& arch, double p_mutate, const SpaceSpec& spec, Rng& rng) {
    for (int attempt = 0; attempt < kOperatorAttempts; ++attempt) {
        Architecture out = mutate_once(arch, p_mutate, rng);
        if (is_valid(out, spec)) return out;
    }
    return random_architecture(spec, rng);
}

Architecture crossover(const Architecture& a1, const Architecture& a2, const SpaceSpec& spec,
                       Rng& rng) {
    for (int attempt = 0; attempt < kOperatorAttempts; ++attempt) {
        Architecture out = crossover_once(a1, a2, rng);
        if (is_valid(out, spec)) return out;
    }
    return random_architecture(spec, rng);
}

Architecture permute(const Architecture& arch, std::span<const int> perm) {
    const int n = arch.layers();
    if (static_cast<int>(perm.size()) != n) {
        throw DimensionError("permutation length differs from layer count");
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int p : perm) {
        if (p < 0 || p >= n || seen[p]) {
            throw std::invalid_argument("not a permutation");
        }
        seen[p] = 1;
    }
    Architecture out(n, arch.ops());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out.set_edge(i, j, arch.edge(perm[i], perm[j]));
        }
        for (int k = 0; k < arch.ops(); ++k) {
            out.set_feature(i, k, arch.feature(perm[i], k));
        }
    }
    return out;
}

std::string encode_architecture(const Architecture& arch) {
    if (!arch.upper_triangular()) {
        throw std::invalid_argument("only upper-triangular architectures have a text form");
    }
    std::string out = std::to_string(arch.layers()) + " " + std::to_string(arch.ops()) + " | ";
    for (int i = 0; i < arch.layers(); ++i) {
        for (int j = i + 1; j < arch.layers(); ++j) {
            out.push_back(arch.edge(i, j) ? '1' : '0');
        }
    }
    out += " |";
    for (int l = 0; l < arch.layers(); ++l) {
        const auto op = arch.op(l);
        if (!op) {
            throw std::invalid_argument("row " + std::to_string(l) + " not one-hot");
        }
        out += ' ';
        out += std::to_string(*op);
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<int> parse_ints(std::string_view s) {
    std::vector<int> out;
    s = trim(s);
    while (!s.empty()) {
        int v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{}) {
            throw DataError("expected integer near '" + std::string(s.substr(0, 12)) + "'");
        }
        out.push_back(v);
        s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
        if (!s.empty() && s.front() != ' ' && s.front() != '\t') {
            throw DataError("expected integer near '" + std::string(s.substr(0, 12)) + "'");
        }
        s = trim(s);
    }
    return out;
}

}  // namespace

Architecture parse_architecture(std::string_view text) {
    const auto bar1 = text.find('|');
    const auto bar2 = bar1 == std::string_view::npos ? bar1 : text.find('|', bar1 + 1);
    if (bar2 == std::string_view::npos || text.find('|', bar2 + 1) != std::string_view::npos) {
        throw DataError("architecture needs exactly three '|'-separated fields");
    }
    const auto head = parse_ints(text.substr(0, bar1));
    if (head.size() != 2 || head[0] < 1 || head[1] < 1 || head[0] > 64 || head[1] > 255) {
        throw DataError("architecture header must be 'L d'");
    }
    const int n = head[0];
    const int d = head[1];
    const auto bits = trim(text.substr(bar1 + 1, bar2 - bar1 - 1));
    if (static_cast<int>(bits.size()) != n * (n - 1) / 2) {
        throw DataError("expected " + std::to_string(n * (n - 1) / 2) + " adjacency bits, got " +
                        std::to_string(bits.size()));
    }
    const auto ops = parse_ints(text.substr(bar2 + 1));
    if (static_cast<int>(ops.size()) != n) {
        throw DataError("expected " + std::to_string(n) + " op indices, got " + std::to_string(ops.size()));
    }
    Architecture a(n, d);
    std::size_t b = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j, ++b) {
            if (bits[b] != '0' && bits[b] != '1') {
                throw DataError("adjacency bits must be 0 or 1");
            }
            a.set_edge(i, j, bits[b] == '1');
        }
    }
    for (int l = 0; l < n; ++l) {
        if (ops[l] < 0 || ops[l] >= d) {
            throw DataError("op index " + std::to_string(ops[l]) + " out of range");
        }
        a.set_op(l, ops[l]);
    }
    return a;
}

}  // namespace pbnas
