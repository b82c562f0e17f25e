#include "pbnas/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pbnas/errors.hpp"
#include "pbnas/random.hpp"

namespace pbnas {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

// Reads the keys of one JSON object; finish() rejects whatever was not read.
class Fields {
public:
    Fields(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    const json& need(const std::string& key) {
        const json* v = find(key);
        if (!v) fail(at(key), "missing required key");
        return *v;
    }

    template <class Int>
    void integer(const std::string& key, Int& out, long long lo, long long hi = std::numeric_limits<long long>::max()) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number_integer()) fail(at(key), "expected an integer");
        const auto x = v->get<long long>();
        if (x < lo || x > hi) {
            fail(at(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                              std::to_string(x));
        }
        out = static_cast<Int>(x);
    }

    void seed(const std::string& key, std::uint64_t& out) {
        const json* v = find(key);
        if (!v) return;
        if (v->is_number_unsigned()) {
            out = v->get<std::uint64_t>();
        } else if (v->is_number_integer() && v->get<long long>() >= 0) {
            out = static_cast<std::uint64_t>(v->get<long long>());
        } else {
            fail(at(key), "expected a non-negative integer");
        }
    }

    // Closed interval unless `open_lo`.
    void number(const std::string& key, double& out, double lo, double hi, bool open_lo = false) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number()) fail(at(key), "expected a number");
        const double x = v->get<double>();
        if (!(open_lo ? x > lo : x >= lo) || !(x <= hi)) {
            std::ostringstream msg;
            msg << "must lie in " << (open_lo ? "(" : "[") << lo << ", " << hi << "], got " << x;
            fail(at(key), msg.str());
        }
        out = x;
    }

    void boolean(const std::string& key, bool& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_boolean()) fail(at(key), "expected true or false");
        out = v->get<bool>();
    }

    void string(const std::string& key, std::string& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_string()) fail(at(key), "expected a string");
        out = v->get<std::string>();
    }

    void finish() const {
        for (const auto& item : node_.items()) {
            if (!seen_.contains(item.key())) fail(at(item.key()), "unknown key");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string hex64(std::uint64_t h) {
    char buf[17];
    auto [ptr, ec] = std::to_chars(buf, buf + 16, h, 16);
    std::string s(buf, ptr);
    return std::string(16 - s.size(), '0') + s;
}

void parse_benchmark(const json& node, BenchmarkSource& out, const std::filesystem::path& base_dir) {
    Fields f(node, "benchmark");
    const json* table = f.find("table");
    const json* synth = f.find("synthetic");
    if ((table != nullptr) == (synth != nullptr)) fail("benchmark", "give exactly one of 'table' or 'synthetic'");
    if (table) {
        if (!table->is_string()) fail("benchmark.table", "expected a path string");
        std::filesystem::path p = table->get<std::string>();
        out.table = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    } else {
        Fields s(*synth, "benchmark.synthetic");
        s.integer("layers", out.spec.num_layers, 1, 64);
        s.integer("ops", out.spec.num_op_types, 1, 64);
        s.integer("max_edges", out.spec.max_edges, 0);
        s.boolean("single_source_sink", out.spec.require_single_source_sink);
        s.seed("seed", out.seed);
        s.finish();
    }
    f.finish();
}

VariantSpec parse_variant(const json& node, const std::string& path) {
    Fields f(node, path);
    VariantSpec v;
    if (!f.need("name").is_string()) fail(f.at("name"), "expected a string");
    f.string("name", v.name);
    if (v.name.empty()) fail(f.at("name"), "must not be empty");
    std::string sampler = "none";
    f.string("sampler", sampler);
    if (sampler == "none") {
        v.mode = VariantMode::kRandom;
    } else if (sampler == "full") {
        v.mode = VariantMode::kFullSpace;
        v.sampler.kind = SamplerKind::kUniform;
    } else {
        v.mode = VariantMode::kSampler;
        try {
            v.sampler.kind = sampler_kind_from_string(sampler);
        } catch (const std::invalid_argument&) {
            fail(f.at("sampler"), "expected none, full, uniform, evolutionary or ml; got '" + sampler + "'");
        }
        f.integer("size", v.sampler.size, 1);
        if (v.sampler.kind == SamplerKind::kEvolutionary) {
            f.integer("parents", v.sampler.evo.parents, 1);
            f.number("alpha", v.sampler.evo.alpha, 0.0, 1.0);
            f.number("p_mutate", v.sampler.evo.p_mutate, 0.0, 1.0, true);
            if (v.sampler.evo.p_mutate >= 1.0) fail(f.at("p_mutate"), "must be below 1");
        }
        if (v.sampler.kind == SamplerKind::kMl) {
            f.integer("steps", v.sampler.ml.steps, 0);
            f.number("step_size", v.sampler.ml.step_size, 0.0, 1e6, true);
            f.number("temperature", v.sampler.ml.temperature, 0.0, 1e6, true);
            f.boolean("identity_ste", v.sampler.ml.identity_ste);
        }
    }
    f.finish();
    return v;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("<root>: not valid JSON (") + e.what() + ")");
    }
    ExperimentConfig cfg;
    Fields f(root, "");
    parse_benchmark(f.need("benchmark"), cfg.benchmark, base_dir);

    if (const json* s = f.find("search")) {
        Fields sf(*s, "search");
        sf.integer("candidates_per_iteration", cfg.search.candidates_per_iteration, 1);
        sf.integer("iterations", cfg.search.iterations, 1);
        sf.integer("init_size", cfg.search.init_size, 2);
        sf.finish();
    }
    if (const json* p = f.find("predictor")) {
        Fields pf(*p, "predictor");
        pf.integer("gcn_layers", cfg.search.predictor.gcn_layers, 1, 64);
        pf.integer("hidden", cfg.search.predictor.hidden, 1, 1 << 16);
        pf.finish();
    }
    cfg.search.predictor.input_width = cfg.benchmark.spec.num_op_types;
    if (const json* t = f.find("train")) {
        Fields tf(*t, "train");
        tf.integer("epochs", cfg.search.train.epochs, 1);
        tf.number("lr", cfg.search.train.lr, 0.0, 1e6, true);
        tf.number("momentum", cfg.search.train.momentum, 0.0, 1.0);
        if (cfg.search.train.momentum >= 1.0) fail("train.momentum", "must be below 1");
        tf.integer("max_pairs_per_epoch", cfg.search.train.max_pairs_per_epoch, 1, std::numeric_limits<int>::max());
        tf.integer("batch_pairs", cfg.search.train.batch_pairs, 1, std::numeric_limits<int>::max());
        tf.finish();
    }

    const json& variants = f.need("variants");
    if (!variants.is_array() || variants.empty()) fail("variants", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const std::string path = "variants[" + std::to_string(i) + "]";
        cfg.variants.push_back(parse_variant(variants[i], path));
        if (!names.insert(cfg.variants.back().name).second) {
            fail(path + ".name", "duplicate variant name '" + cfg.variants.back().name + "'");
        }
    }

    f.integer("repeats", cfg.repeats, 1, 1000000);
    f.seed("seed", cfg.master_seed);
    std::string out_dir;
    f.string("output_dir", out_dir);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (const json* h = f.find("histogram")) {
        Fields hf(*h, "histogram");
        hf.integer("bins", cfg.hist_bins, 1, 1000000);
        hf.finish();
    }
    if (const json* g = f.find("gain")) {
        Fields gf(*g, "gain");
        gf.integer("grid_points", cfg.gain_grid_points, 2, 1000000);
        gf.integer("space_sample", cfg.gain_space_sample, 1);
        gf.number("report_fraction", cfg.gain_report_fraction, 0.0, 1.0);
        gf.finish();
    }
    f.seed("enumeration_guard", cfg.enumeration_guard);
    f.finish();

    cfg.canonical = root.dump();
    cfg.hash = hex64(fnv1a64(cfg.canonical));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::stringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

void set_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.master_seed = seed;
    json root = json::parse(cfg.canonical);
    root["seed"] = seed;
    cfg.canonical = root.dump();
    cfg.hash = hex64(fnv1a64(cfg.canonical));
}

std::uint64_t run_seed(std::uint64_t master_seed, const std::string& variant, int repeat) {
    return mix_seed(mix_seed(master_seed, fnv1a64(variant)), static_cast<std::uint64_t>(repeat));
}

Benchmark load_benchmark(const ExperimentConfig& cfg) {
    if (cfg.benchmark.table) return load_tabular(*cfg.benchmark.table);
    return Benchmark::synthetic(cfg.benchmark.spec, cfg.benchmark.seed);
}

namespace {

struct RunOutcome {
    SearchTrace trace;
    std::vector<std::uint32_t> reduced_counts;  // per member of an enumerable S
    std::vector<double> reduced_values;         // generator spaces
};

RunOutcome run_one(const ExperimentConfig& cfg, const VariantSpec& v, int repeat, const Benchmark& bench,
                   const SearchSpace& space, bool measure_time) {
    SearchConfig sc = cfg.search;
    sc.seed = run_seed(cfg.master_seed, v.name, repeat);
    RunOutcome out;
    SearchHooks hooks;
    hooks.measure_time = measure_time;
    if (v.mode == VariantMode::kRandom) return {run_random_baseline(sc, bench, space, hooks), {}, {}};

    sc.sampler = v.sampler;
    if (v.mode == VariantMode::kFullSpace) sc.sampler.size = space.size();
    if (space.enumerable()) out.reduced_counts.assign(space.size(), 0);
    hooks.on_reduced_set = [&](int, std::span<const Architecture> archs) {
        for (const auto& a : archs) {
            if (space.enumerable()) {
                const auto idx = space.index_of(arch_key(a));
                if (idx) ++out.reduced_counts[*idx];
            } else {
                out.reduced_values.push_back(bench.query_val(a));
            }
        }
    };
    out.trace = run_search(sc, bench, space, hooks);
    return out;
}

}  // namespace

ExperimentRuns run_experiment(const ExperimentConfig& config, const RunOptions& opts) {
    ExperimentConfig cfg = config;
    std::vector<VariantSpec> chosen;
    for (const auto& v : cfg.variants) {
        if (opts.only.empty() || std::find(opts.only.begin(), opts.only.end(), v.name) != opts.only.end()) {
            chosen.push_back(v);
        }
    }
    for (const auto& name : opts.only) {
        if (std::none_of(cfg.variants.begin(), cfg.variants.end(), [&](const VariantSpec& v) { return v.name == name; })) {
            throw ConfigError("--variant: no variant named '" + name + "' in the config");
        }
    }

    const Benchmark bench = load_benchmark(cfg);
    const SpaceSpec& spec = bench.spec();
    // A table brings its own op count.
    cfg.search.predictor.input_width = spec.num_op_types;
    SearchSpace space = bench.is_tabular()          ? SearchSpace::from_members(spec, bench.architectures())
                        : bench.enumerable(cfg.enumeration_guard) ? SearchSpace::enumerated(spec, cfg.enumeration_guard)
                                                                  : SearchSpace::generator(spec);

    ExperimentRuns runs;
    std::vector<double> member_val;
    if (space.enumerable()) {
        runs.oracles = oracles(bench, cfg.enumeration_guard);
        member_val.reserve(space.size());
        for (const auto& a : space.members()) member_val.push_back(bench.query_val(a));
        runs.space = ErrorSample(member_val);
        runs.space_size = space.size();
    } else {
        Rng rng(mix_seed(cfg.master_seed, fnv1a64("space-sample")));
        for (std::size_t i = 0; i < cfg.gain_space_sample; ++i) {
            runs.space.add(bench.query_val(random_architecture(spec, rng)));
        }
        runs.space_size = 0;
    }
    for (const auto& v : chosen) {
        if (v.mode == VariantMode::kFullSpace && !space.enumerable()) {
            throw ConfigError("variant '" + v.name + "': sampler 'full' needs an enumerable space");
        }
    }

    struct Job {
        std::size_t variant;
        int repeat;
    };
    std::vector<Job> jobs;
    for (std::size_t v = 0; v < chosen.size(); ++v) {
        for (int r = 0; r < cfg.repeats; ++r) jobs.push_back({v, r});
    }
    std::vector<RunOutcome> outcomes(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                outcomes[j] = run_one(cfg, chosen[jobs[j].variant], jobs[j].repeat, bench, space, opts.measure_time);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = jobs.size();
            }
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, opts.jobs));
    if (workers == 1 || jobs.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, jobs.size()); ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    for (std::size_t v = 0; v < chosen.size(); ++v) {
        VariantRuns vr;
        vr.spec = chosen[v];
        std::vector<std::uint64_t> counts;
        if (chosen[v].mode != VariantMode::kRandom) {
            vr.reduced.emplace();
            if (space.enumerable()) counts.assign(space.size(), 0);
        }
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].variant != v) continue;
            RunOutcome& o = outcomes[j];
            for (const auto& rec : o.trace.iterations) {
                if (rec.iteration == 0) continue;
                for (double e : rec.val_errors) vr.candidates.add(e);
            }
            if (vr.reduced) {
                for (std::size_t i = 0; i < o.reduced_counts.size(); ++i) counts[i] += o.reduced_counts[i];
                for (double e : o.reduced_values) vr.reduced->add(e);
            }
            vr.traces.push_back(std::move(o.trace));
        }
        if (vr.reduced && !counts.empty()) {
            for (std::size_t i = 0; i < counts.size(); ++i) vr.reduced->add(member_val[i], counts[i]);
        }
        runs.variants.push_back(std::move(vr));
    }
    return runs;
}

std::vector<ConvergencePoint> convergence(const VariantRuns& runs) {
    std::size_t longest = 0;
    for (const auto& t : runs.traces) longest = std::max(longest, t.iterations.size());
    std::vector<ConvergencePoint> out;
    for (std::size_t i = 0; i < longest; ++i) {
        std::vector<const IterationRecord*> recs;
        for (const auto& t : runs.traces) {
            // Runs that stopped early (exhausted space) keep their last value.
            if (!t.iterations.empty()) recs.push_back(&t.iterations[std::min(i, t.iterations.size() - 1)]);
        }
        ConvergencePoint p;
        p.iteration = static_cast<int>(i);
        const auto n = static_cast<double>(recs.size());
        for (const auto* r : recs) {
            p.n_evaluated += static_cast<double>(r->n_evaluated) / n;
            p.mean_val += r->y_star_val / n;
            p.mean_test += r->y_star_test / n;
        }
        if (recs.size() > 1) {
            for (const auto* r : recs) {
                p.std_val += (r->y_star_val - p.mean_val) * (r->y_star_val - p.mean_val);
                p.std_test += (r->y_star_test - p.mean_test) * (r->y_star_test - p.mean_test);
            }
            p.std_val = std::sqrt(p.std_val / (n - 1.0));
            p.std_test = std::sqrt(p.std_test / (n - 1.0));
        }
        out.push_back(p);
    }
    return out;
}

std::vector<HistogramBin> histogram(const ErrorSample& sample, int bins) {
    if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    const double width = 1.0 / bins;
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        out[static_cast<std::size_t>(b)].lo = b * width;
        out[static_cast<std::size_t>(b)].hi = b + 1 == bins ? 1.0 : (b + 1) * width;
    }
    const auto values = sample.values();
    const auto weights = sample.weights();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int b = std::clamp(static_cast<int>(std::floor(values[i] * bins)), 0, bins - 1);
        out[static_cast<std::size_t>(b)].count += weights[i];
    }
    if (!sample.empty()) {
        for (auto& bin : out) bin.density = static_cast<double>(bin.count) / static_cast<double>(sample.size()) / width;
    }
    return out;
}

namespace {

double grid_low(const ExperimentRuns& runs) {
    return runs.oracles ? runs.oracles->val : runs.space.min();
}

}  // namespace

std::vector<double> gain_grid(const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    return linear_grid(grid_low(runs), runs.space.percentile(0.99), cfg.gain_grid_points);
}

double report_target(const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    const double lo = grid_low(runs);
    return lo + cfg.gain_report_fraction * (runs.space.percentile(0.99) - lo);
}

GainCurve variant_gain(const ExperimentRuns& runs, const VariantRuns& v, std::span<const double> grid) {
    return gain_curve(runs.space, v.candidates, grid, v.reduced ? &*v.reduced : nullptr);
}

namespace {

void put(std::ostream& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
}

void banner(std::ostream& out, const ExperimentConfig& cfg) {
    out << "# pbnas " << kToolVersion << " config=" << cfg.hash << '\n';
}

// Copies `text` to out with "<label>," in front of each line; the first line
// (a header) gets "<header_label>," instead.
void prefixed(std::ostream& out, const std::string& text, const std::string& label, const std::string* header_label) {
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && header_label) {
            out << *header_label << ',' << line << '\n';
        } else {
            out << label << ',' << line << '\n';
        }
        first = false;
    }
}

}  // namespace

void write_traces_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    banner(out, cfg);
    std::ostringstream header;
    write_trace_header(header);
    out << "variant," << header.str();
    for (const auto& v : runs.variants) {
        for (std::size_t r = 0; r < v.traces.size(); ++r) {
            std::ostringstream rows;
            write_trace_rows(rows, static_cast<int>(r), v.traces[r]);
            prefixed(out, rows.str(), v.spec.name, nullptr);
        }
    }
}

void write_convergence_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    banner(out, cfg);
    out << "variant,iteration,n_evaluated,mean_y_star_val,std_y_star_val,mean_y_star_test,std_y_star_test\n";
    for (const auto& v : runs.variants) {
        for (const auto& p : convergence(v)) {
            out << v.spec.name << ',' << p.iteration << ',';
            put(out, p.n_evaluated);
            for (double x : {p.mean_val, p.std_val, p.mean_test, p.std_test}) {
                out << ',';
                put(out, x);
            }
            out << '\n';
        }
    }
}

void write_histogram_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    banner(out, cfg);
    out << "variant,bin_lo,bin_hi,count,density\n";
    for (const auto& v : runs.variants) {
        for (const auto& b : histogram(v.candidates, cfg.hist_bins)) {
            out << v.spec.name << ',';
            put(out, b.lo);
            out << ',';
            put(out, b.hi);
            out << ',' << b.count << ',';
            put(out, b.density);
            out << '\n';
        }
    }
}

void write_gains_csv(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    banner(out, cfg);
    const auto grid = gain_grid(cfg, runs);
    bool first = true;
    const std::string header_label = "variant";
    for (const auto& v : runs.variants) {
        std::ostringstream text;
        write_gain_csv(text, variant_gain(runs, v, grid));
        std::string body = text.str();
        if (!first) body.erase(0, body.find('\n') + 1);
        prefixed(out, body, v.spec.name, first ? &header_label : nullptr);
        first = false;
    }
}

void write_summary_json(std::ostream& out, const ExperimentConfig& cfg, const ExperimentRuns& runs) {
    json root;
    root["tool"] = "pbnas";
    root["version"] = kToolVersion;
    root["config_hash"] = cfg.hash;
    root["seed"] = cfg.master_seed;
    root["repeats"] = cfg.repeats;
    json bench;
    bench["mode"] = cfg.benchmark.table ? "tabular" : "synthetic";
    bench["space_size"] = runs.space_size;
    root["benchmark"] = bench;
    if (runs.oracles) {
        root["val_oracle"] = runs.oracles->val;
        root["test_oracle"] = runs.oracles->test;
    } else {
        root["val_oracle"] = nullptr;
        root["test_oracle"] = nullptr;
    }
    const double target = report_target(cfg, runs);
    root["report_target"] = target;
    root["report_fraction"] = cfg.gain_report_fraction;
    json variants = json::array();
    const std::vector<double> at{target};
    for (const auto& v : runs.variants) {
        json j;
        j["name"] = v.spec.name;
        j["runs"] = v.traces.size();
        const auto conv = convergence(v);
        if (!conv.empty()) {
            const auto& last = conv.back();
            j["final_n_evaluated"] = last.n_evaluated;
            j["final_y_star_val_mean"] = last.mean_val;
            j["final_y_star_val_std"] = last.std_val;
            j["final_y_star_test_mean"] = last.mean_test;
            j["final_y_star_test_std"] = last.std_test;
        }
        std::size_t fallbacks = 0;
        for (const auto& t : v.traces) {
            for (const auto& r : t.iterations) fallbacks += r.predictor_fallback ? 1 : 0;
        }
        j["predictor_fallbacks"] = fallbacks;
        if (!v.candidates.empty()) {
            j["candidate_mean_val"] = v.candidates.mean();
            const GainPoint p = variant_gain(runs, v, at).points.front();
            j["gain_db"] = p.gain_db;
            j["gain_e_db"] = p.gain_e_db ? json(*p.gain_e_db) : json(nullptr);
            j["gain_p_db"] = p.gain_p_db ? json(*p.gain_p_db) : json(nullptr);
            j["gain_flagged"] = p.flagged;
        }
        variants.push_back(j);
    }
    root["variants"] = variants;
    out << root.dump(2) << '\n';
}

}  // namespace pbnas
