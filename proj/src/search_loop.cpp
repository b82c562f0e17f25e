#include "pbnas/search_loop.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "pbnas/errors.hpp"

namespace pbnas {

void SearchConfig::check() const {
    if (candidates_per_iteration < 1) throw std::invalid_argument("K must be at least 1");
    if (iterations < 1) throw std::invalid_argument("iterations T must be at least 1");
    if (init_size < 2) throw std::invalid_argument("init_size must be at least 2");
    sampler.check();
}

std::size_t SearchTrace::first_hit(double target) const {
    for (std::size_t i = 0; i < val_errors.size(); ++i) {
        if (val_errors[i] <= target) return i + 1;
    }
    return 0;
}

PickResult pick_best_k(std::span<const Architecture> archs, std::span<const double> scores, std::size_t k,
                       const KeySet& evaluated) {
    if (archs.size() != scores.size()) throw DimensionError("architecture and score lists differ in length");
    // Keys are built only where needed: for score ties and for the walk below.
    std::vector<std::optional<ArchKey>> keys(archs.size());
    auto key_of = [&](std::size_t i) -> const ArchKey& {
        if (!keys[i]) keys[i] = arch_key(archs[i]);
        return *keys[i];
    };
    std::vector<std::size_t> order(archs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return key_of(a) < key_of(b);
    });
    PickResult out;
    for (std::size_t i : order) {
        if (out.indices.size() == k) break;
        if (!evaluated.contains(key_of(i))) out.indices.push_back(i);
    }
    out.short_pick = out.indices.size() < k;
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

class TraceBuilder {
public:
    explicit TraceBuilder(const Benchmark& bench) : bench_(bench) {}

    void evaluate(std::vector<Architecture> batch, IterationRecord& rec) {
        for (auto& a : batch) {
            const EvalRecord r = bench_.evaluate(a);
            const double v = r.mean_val();
            const double t = r.mean_test();
            rec.candidates.push_back(arch_key(a));
            rec.val_errors.push_back(v);
            rec.test_errors.push_back(t);
            if (v < best_val_) {
                best_val_ = v;
                best_test_ = t;
            }
            keys_.insert(rec.candidates.back());
            trace_.evaluated.push_back(std::move(a));
            trace_.val_errors.push_back(v);
            trace_.test_errors.push_back(t);
        }
        rec.n_evaluated = trace_.evaluated.size();
        rec.y_star_val = best_val_;
        rec.y_star_test = best_test_;
    }

    void commit(IterationRecord rec) { trace_.iterations.push_back(std::move(rec)); }

    const KeySet& keys() const { return keys_; }
    const SearchTrace& trace() const { return trace_; }
    SearchTrace take() { return std::move(trace_); }

private:
    const Benchmark& bench_;
    SearchTrace trace_;
    KeySet keys_;
    double best_val_ = std::numeric_limits<double>::infinity();
    double best_test_ = std::numeric_limits<double>::infinity();
};

std::size_t available_count(const SearchSpace& space, const KeySet& evaluated) {
    if (!space.enumerable()) return std::numeric_limits<std::size_t>::max();
    return space.size() - std::min(space.size(), evaluated.size());
}

std::vector<Architecture> take_indices(std::vector<Architecture>& from, const std::vector<std::size_t>& idx) {
    std::vector<Architecture> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(std::move(from[i]));
    return out;
}

SearchTrace run_loop(const SearchConfig& cfg, const Benchmark& bench, const SearchSpace& space,
                     const SearchHooks& hooks, bool use_predictor) {
    cfg.check();
    if (!(space.spec() == bench.spec())) throw std::invalid_argument("search space and benchmark specs differ");
    Rng rng(cfg.seed);
    TraceBuilder builder(bench);
    const auto k = static_cast<std::size_t>(cfg.candidates_per_iteration);

    {
        IterationRecord rec;
        rec.iteration = 0;
        builder.evaluate(uniform_sample(space, static_cast<std::size_t>(cfg.init_size), {}, rng), rec);
        builder.commit(std::move(rec));
    }

    for (int t = 1; t <= cfg.iterations; ++t) {
        const std::size_t available = available_count(space, builder.keys());
        if (available == 0) break;
        IterationRecord rec;
        rec.iteration = t;

        if (!use_predictor) {
            auto t0 = Clock::now();
            auto cands = uniform_sample(space, std::min(k, available), builder.keys(), rng);
            if (hooks.measure_time) rec.seconds_sample = seconds_since(t0);
            if (hooks.on_reduced_set) hooks.on_reduced_set(t, cands);
            rec.short_pick = cands.size() < k;
            builder.evaluate(std::move(cands), rec);
            builder.commit(std::move(rec));
            continue;
        }

        const SearchTrace& sofar = builder.trace();
        PredictorParams params;
        bool have_predictor = static_cast<bool>(hooks.scorer);
        auto t0 = Clock::now();
        if (!hooks.scorer) {
            std::vector<TrainExample> examples;
            examples.reserve(sofar.evaluated.size());
            for (std::size_t i = 0; i < sofar.evaluated.size(); ++i) {
                examples.push_back({sofar.evaluated[i], sofar.val_errors[i]});
            }
            TrainHyper hyper = cfg.train;
            const std::uint64_t init_seed = rng();
            hyper.seed = rng();
            try {
                params = train(PredictorParams::initialize(cfg.predictor, init_seed), cfg.predictor, hyper, examples)
                             .params;
                have_predictor = true;
            } catch (const NoRankingSignal&) {
                rec.predictor_fallback = true;
            }
        }
        if (hooks.measure_time) rec.seconds_train = seconds_since(t0);

        t0 = Clock::now();
        std::vector<Architecture> reduced;
        if (!have_predictor) {
            reduced = uniform_sample(space, std::min(k, available), builder.keys(), rng);
        } else {
            SamplerConfig sc = cfg.sampler;
            sc.size = std::min(sc.size, available);
            switch (sc.kind) {
                case SamplerKind::kUniform:
                    reduced = uniform_sample(space, sc.size, builder.keys(), rng);
                    break;
                case SamplerKind::kMl:
                    reduced = ml_sample(params, cfg.predictor, space, sc, builder.keys(), rng);
                    break;
                case SamplerKind::kEvolutionary: {
                    std::vector<PopulationMember> pop;
                    pop.reserve(sofar.evaluated.size());
                    for (std::size_t i = 0; i < sofar.evaluated.size(); ++i) {
                        pop.push_back({sofar.evaluated[i], sofar.val_errors[i]});
                    }
                    reduced = evolutionary_sample(pop, sc, space, builder.keys(), rng);
                    break;
                }
            }
        }
        if (hooks.measure_time) rec.seconds_sample = seconds_since(t0);
        if (hooks.on_reduced_set) hooks.on_reduced_set(t, reduced);

        t0 = Clock::now();
        std::vector<double> scores;
        if (!have_predictor) {
            scores.assign(reduced.size(), 0.0);
        } else if (hooks.scorer) {
            scores = hooks.scorer(reduced);
        } else {
            scores = score_set(params, cfg.predictor, reduced);
        }
        const PickResult pick = pick_best_k(reduced, scores, k, builder.keys());
        if (hooks.measure_time) rec.seconds_score = seconds_since(t0);
        rec.short_pick = pick.short_pick;
        builder.evaluate(take_indices(reduced, pick.indices), rec);
        builder.commit(std::move(rec));
    }
    return builder.take();
}

void put_double(std::ostream& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
}

}  // namespace

SearchTrace run_search(const SearchConfig& cfg, const Benchmark& bench, const SearchSpace& space,
                       const SearchHooks& hooks) {
    return run_loop(cfg, bench, space, hooks, true);
}

SearchTrace run_random_baseline(const SearchConfig& cfg, const Benchmark& bench, const SearchSpace& space,
                                const SearchHooks& hooks) {
    return run_loop(cfg, bench, space, hooks, false);
}

void write_trace_header(std::ostream& out) {
    out << "run_id,iteration,n_evaluated,y_star_val,y_star_test,phase_seconds_train,phase_seconds_sample,"
           "phase_seconds_score\n";
}

void write_trace_rows(std::ostream& out, int run_id, const SearchTrace& trace) {
    for (const auto& rec : trace.iterations) {
        out << run_id << ',' << rec.iteration << ',' << rec.n_evaluated << ',';
        put_double(out, rec.y_star_val);
        out << ',';
        put_double(out, rec.y_star_test);
        out << ',';
        put_double(out, rec.seconds_train);
        out << ',';
        put_double(out, rec.seconds_sample);
        out << ',';
        put_double(out, rec.seconds_score);
        out << '\n';
    }
}

}  // namespace pbnas
