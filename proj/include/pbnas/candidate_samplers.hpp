#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pbnas/arch_space.hpp"
#include "pbnas/gcn_predictor.hpp"

namespace pbnas {

using KeySet = std::unordered_set<ArchKey>;

/// The search space S, either materialised (enumerable) or represented by
/// the random_architecture generator.
class SearchSpace {
public:
    static SearchSpace enumerated(const SpaceSpec& spec, std::uint64_t guard = kDefaultEnumerationGuard);
    // Uses the given member list as S (e.g. the records of a table).
    static SearchSpace from_members(const SpaceSpec& spec, std::vector<Architecture> members);
    static SearchSpace generator(const SpaceSpec& spec);

    const SpaceSpec& spec() const { return spec_; }
    bool enumerable() const { return enumerable_; }
    // Size of S; only meaningful when enumerable.
    std::size_t size() const { return members_.size(); }
    std::span<const Architecture> members() const { return members_; }
    std::span<const ArchKey> keys() const { return keys_; }
    std::optional<std::size_t> index_of(const ArchKey& key) const;

private:
    SpaceSpec spec_;
    bool enumerable_ = false;
    std::vector<Architecture> members_;
    std::vector<ArchKey> keys_;
    std::unordered_map<ArchKey, std::size_t> index_;
};

enum class SamplerKind { kUniform, kMl, kEvolutionary };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

struct MlOptions {
    int steps = 100;
    double step_size = 0.1;
    double temperature = 1.0;
    // Pass feature gradients straight to the shadows instead of through the softmax Jacobian.
    bool identity_ste = false;
};

struct EvoOptions {
    int parents = 16;
    double alpha = 0.5;
    double p_mutate = 0.05;
};

struct SamplerConfig {
    SamplerKind kind = SamplerKind::kUniform;
    std::size_t size = 100;  // N'; callers clamp to the available space
    MlOptions ml;
    EvoOptions evo;

    void check() const;
};

/// N' distinct members of S outside `exclude`, uniformly without replacement.
/// Enumerable spaces are sampled exactly (returning every available member in
/// enumeration order when N' equals the available count); generator spaces
/// draw random_architecture and reject repeats. Throws SpaceExhausted when
/// fewer than N' members are available.
std::vector<Architecture> uniform_sample(const SearchSpace& space, std::size_t count, const KeySet& exclude,
                                         Rng& rng);

/// Gradient ascent of the predictor score on continuous shadow matrices
/// binarised in the forward pass (straight-through in the backward pass).
std::vector<Architecture> ml_sample(const PredictorParams& params, const PredictorConfig& config,
                                    const SearchSpace& space, const SamplerConfig& cfg, const KeySet& exclude,
                                    Rng& rng);

// Makes an upper-triangular binary graph valid by adding chain edges i-1 -> i
// to inputless layers and i -> i+1 to outputless layers. Returns false when
// the result still violates the space (edge budget).
bool repair_architecture(Architecture& arch, const SpaceSpec& spec);

struct PopulationMember {
    Architecture arch;
    double val_error = 0.0;
};

/// Mutation/crossover around the P best members of the population. The first
/// ceil(alpha * N') elements come from the mutation branch, the rest from crossover.
std::vector<Architecture> evolutionary_sample(std::span<const PopulationMember> population,
                                              const SamplerConfig& cfg, const SearchSpace& space,
                                              const KeySet& exclude, Rng& rng);

inline constexpr int kMlAttemptsPerSlot = 10;
inline constexpr int kEvoConsecutiveRejections = 1000;

}  // namespace pbnas
