#include "pbnas/candidate_samplers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pbnas/errors.hpp"

namespace pbnas {

SearchSpace SearchSpace::enumerated(const SpaceSpec& spec, std::uint64_t guard) {
    return from_members(spec, enumerate(spec, guard));
}

SearchSpace SearchSpace::from_members(const SpaceSpec& spec, std::vector<Architecture> members) {
    spec.check();
    SearchSpace s;
    s.spec_ = spec;
    s.enumerable_ = true;
    s.members_ = std::move(members);
    s.keys_.reserve(s.members_.size());
    s.index_.reserve(s.members_.size());
    for (std::size_t i = 0; i < s.members_.size(); ++i) {
        s.keys_.push_back(arch_key(s.members_[i]));
        if (!s.index_.emplace(s.keys_.back(), i).second) {
            throw std::invalid_argument("search space members must be distinct");
        }
    }
    return s;
}

SearchSpace SearchSpace::generator(const SpaceSpec& spec) {
    spec.check();
    SearchSpace s;
    s.spec_ = spec;
    return s;
}

std::optional<std::size_t> SearchSpace::index_of(const ArchKey& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string to_string(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::kUniform: return "uniform";
        case SamplerKind::kMl: return "ml";
        case SamplerKind::kEvolutionary: return "evolutionary";
    }
    return "unknown";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
    if (name == "uniform") return SamplerKind::kUniform;
    if (name == "ml") return SamplerKind::kMl;
    if (name == "evolutionary") return SamplerKind::kEvolutionary;
    throw std::invalid_argument("unknown sampler kind '" + name + "'");
}

void SamplerConfig::check() const {
    if (size < 1) throw std::invalid_argument("sampler size N' must be at least 1");
    if (kind == SamplerKind::kEvolutionary) {
        if (evo.parents < 1) throw std::invalid_argument("parent count P must be at least 1");
        if (!(evo.alpha >= 0.0 && evo.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
        if (!(evo.p_mutate > 0.0 && evo.p_mutate < 1.0)) throw std::invalid_argument("p_mutate must lie in (0, 1)");
    }
    if (kind == SamplerKind::kMl) {
        if (ml.steps < 0) throw std::invalid_argument("ml steps must be non-negative");
        if (!(ml.temperature > 0.0)) throw std::invalid_argument("softmax temperature must be positive");
    }
}

namespace {

bool taken(const ArchKey& key, const KeySet& exclude, const KeySet& extra) {
    return exclude.contains(key) || extra.contains(key);
}

// Fills `out` (and `seen`) up to `target` with uniform draws avoiding exclude and seen.
void fill_uniform(const SearchSpace& space, std::size_t target, const KeySet& exclude, KeySet& seen,
                  std::vector<Architecture>& out, Rng& rng) {
    if (out.size() >= target) return;
    KeySet merged = exclude;
    merged.insert(seen.begin(), seen.end());
    auto extra = uniform_sample(space, target - out.size(), merged, rng);
    for (auto& a : extra) {
        seen.insert(arch_key(a));
        out.push_back(std::move(a));
    }
}

}  // namespace

std::vector<Architecture> uniform_sample(const SearchSpace& space, std::size_t count, const KeySet& exclude,
                                         Rng& rng) {
    std::vector<Architecture> out;
    if (count == 0) return out;
    if (space.enumerable()) {
        std::vector<std::size_t> avail;
        avail.reserve(space.size());
        const auto keys = space.keys();
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (!exclude.contains(keys[i])) avail.push_back(i);
        }
        if (count > avail.size()) {
            throw SpaceExhausted("space exhausted: requested " + std::to_string(count) + " architectures, " +
                                 std::to_string(avail.size()) + " available");
        }
        out.reserve(count);
        if (count == avail.size()) {
            for (std::size_t i : avail) out.push_back(space.members()[i]);
            return out;
        }
        for (std::size_t i = 0; i < count; ++i) {
            std::swap(avail[i], avail[i + uniform_index(rng, avail.size() - i)]);
            out.push_back(space.members()[avail[i]]);
        }
        return out;
    }

    KeySet seen;
    int rejections = 0;
    while (out.size() < count) {
        Architecture a = random_architecture(space.spec(), rng);
        ArchKey key = arch_key(a);
        if (taken(key, exclude, seen)) {
            if (++rejections > 1000 * kEvoConsecutiveRejections) {
                throw SpaceExhausted("space exhausted: generator keeps returning excluded architectures");
            }
            continue;
        }
        rejections = 0;
        seen.insert(std::move(key));
        out.push_back(std::move(a));
    }
    return out;
}

bool repair_architecture(Architecture& arch, const SpaceSpec& spec) {
    const int n = arch.layers();
    if (spec.require_single_source_sink) {
        for (int j = 1; j < n; ++j) {
            bool has_input = false;
            for (int i = 0; i < j && !has_input; ++i) has_input = arch.edge(i, j);
            if (!has_input) arch.set_edge(j - 1, j, true);
        }
        for (int i = 0; i + 1 < n; ++i) {
            bool has_output = false;
            for (int j = i + 1; j < n && !has_output; ++j) has_output = arch.edge(i, j);
            if (!has_output) arch.set_edge(i, i + 1, true);
        }
    }
    return is_valid(arch, spec);
}

namespace {

Architecture binarize(const Matrix& shadow_adj, const Matrix& shadow_feat) {
    const int n = static_cast<int>(shadow_adj.rows());
    const int d = static_cast<int>(shadow_feat.cols());
    Architecture a(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) a.set_edge(i, j, shadow_adj(i, j) > 0.0);
        Eigen::Index best = 0;
        shadow_feat.row(i).maxCoeff(&best);
        a.set_op(i, static_cast<int>(best));
    }
    return a;
}

}  // namespace

std::vector<Architecture> ml_sample(const PredictorParams& params, const PredictorConfig& config,
                                    const SearchSpace& space, const SamplerConfig& cfg, const KeySet& exclude,
                                    Rng& rng) {
    cfg.check();
    const SpaceSpec& spec = space.spec();
    const int n = spec.num_layers;
    const int d = spec.num_op_types;
    if (config.input_width != d) throw DimensionError("predictor input width differs from op count");

    std::vector<Architecture> out;
    KeySet seen;
    Matrix shadow_adj(n, n);
    Matrix shadow_feat(n, d);
    for (std::size_t slot = 0; slot < cfg.size; ++slot) {
        bool filled = false;
        for (int attempt = 0; attempt < kMlAttemptsPerSlot && !filled; ++attempt) {
            shadow_adj.setZero();
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) shadow_adj(i, j) = uniform_symmetric(rng);
            }
            for (int i = 0; i < n; ++i) {
                for (int k = 0; k < d; ++k) shadow_feat(i, k) = uniform_symmetric(rng);
            }
            for (int step = 0; step < cfg.ml.steps; ++step) {
                const auto relaxed = RelaxedArch::from(binarize(shadow_adj, shadow_feat));
                const auto fr = forward(params, config, relaxed);
                const auto g = backward_inputs(fr.cache, params, config, 1.0);
                for (int i = 0; i < n; ++i) {
                    for (int j = i + 1; j < n; ++j) shadow_adj(i, j) += cfg.ml.step_size * g.adjacency(i, j);
                }
                for (int i = 0; i < n; ++i) {
                    Vector grow = g.features.row(i).transpose();
                    if (!cfg.ml.identity_ste) {
                        const Vector z = shadow_feat.row(i).transpose() / cfg.ml.temperature;
                        const Vector e = (z.array() - z.maxCoeff()).exp();
                        const Vector s = e / e.sum();
                        grow = (s.cwiseProduct(grow) - s * s.dot(grow)) / cfg.ml.temperature;
                    }
                    shadow_feat.row(i) += cfg.ml.step_size * grow.transpose();
                }
            }
            Architecture a = binarize(shadow_adj, shadow_feat);
            if (!repair_architecture(a, spec)) continue;
            ArchKey key = arch_key(a);
            if (taken(key, exclude, seen)) continue;
            if (space.enumerable() && !space.index_of(key)) continue;
            seen.insert(std::move(key));
            out.push_back(std::move(a));
            filled = true;
        }
        if (!filled) fill_uniform(space, out.size() + 1, exclude, seen, out, rng);
    }
    return out;
}

std::vector<Architecture> evolutionary_sample(std::span<const PopulationMember> population,
                                              const SamplerConfig& cfg, const SearchSpace& space,
                                              const KeySet& exclude, Rng& rng) {
    cfg.check();
    if (population.empty()) throw std::invalid_argument("evolutionary sampling needs a non-empty population");
    const SpaceSpec& spec = space.spec();

    struct Ranked {
        const Architecture* arch;
        double err;
        ArchKey key;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(population.size());
    for (const auto& m : population) ranked.push_back({&m.arch, m.val_error, arch_key(m.arch)});
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        return a.err != b.err ? a.err < b.err : a.key < b.key;
    });
    const std::size_t parents = std::min(ranked.size(), static_cast<std::size_t>(cfg.evo.parents));

    std::vector<Architecture> out;
    out.reserve(cfg.size);
    KeySet seen;
    const double mutation_quota = cfg.evo.alpha * static_cast<double>(cfg.size);
    int rejections = 0;
    while (out.size() < cfg.size) {
        const Architecture& a1 = *ranked[uniform_index(rng, parents)].arch;
        const Architecture& a2 = *ranked[uniform_index(rng, parents)].arch;
        Architecture child = static_cast<double>(out.size()) < mutation_quota
                                 ? mutate(a1, cfg.evo.p_mutate, spec, rng)
                                 : crossover(a1, a2, spec, rng);
        ArchKey key = arch_key(child);
        const bool outside = space.enumerable() && !space.index_of(key);
        if (outside || taken(key, exclude, seen)) {
            if (++rejections >= kEvoConsecutiveRejections) {
                fill_uniform(space, cfg.size, exclude, seen, out, rng);
                break;
            }
            continue;
        }
        rejections = 0;
        seen.insert(std::move(key));
        out.push_back(std::move(child));
    }
    return out;
}

}  // namespace pbnas
