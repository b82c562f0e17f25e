#include "pbnas/bench_oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "pbnas/errors.hpp"

namespace pbnas {

namespace {

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double logistic(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double clip01(double x) {
    return std::clamp(x, 0.0, 1.0);
}

// Deterministic value in [-1, 1) keyed by seed, architecture and a stream tag.
double hashed_symmetric(std::uint64_t seed, const ArchKey& key, std::uint64_t stream) {
    const std::uint64_t h = mix_seed(mix_seed(seed, fnv1a64(key.bytes)), stream);
    return 2.0 * unit_from_hash(h) - 1.0;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void check_errors(const std::vector<double>& errs, const char* what) {
    if (errs.empty()) {
        throw DataError(std::string("record has no ") + what + " runs");
    }
    for (double e : errs) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw DataError(std::string(what) + " error out of [0, 1] range");
        }
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<double> parse_doubles(std::string_view s) {
    std::vector<double> out;
    std::size_t i = 0;
    while (true) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        if (i >= s.size()) break;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
        if (ec != std::errc{}) {
            throw DataError("expected a number near '" + std::string(s.substr(i, 12)) + "'");
        }
        i = static_cast<std::size_t>(ptr - s.data());
        if (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') {
            throw DataError("expected a number near '" + std::string(s.substr(i, 12)) + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

double EvalRecord::mean_val() const { return mean(val_errors); }
double EvalRecord::mean_test() const { return mean(test_errors); }

std::vector<double> SyntheticModel::phi(const Architecture& arch) const {
    std::vector<double> out;
    out.reserve(dim());
    for (int i = 0; i < arch.layers(); ++i) {
        for (int j = i + 1; j < arch.layers(); ++j) {
            out.push_back(arch.edge(i, j) ? 1.0 : 0.0);
        }
    }
    for (auto b : arch.feature_bits()) {
        out.push_back(b ? 1.0 : 0.0);
    }
    if (out.size() != dim()) {
        throw DimensionError("architecture does not match the synthetic benchmark's space");
    }
    return out;
}

double SyntheticModel::raw(std::span<const double> x) const {
    const std::size_t n = dim();
    double linear = 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] == 0.0) continue;
        linear += w[i] * x[i];
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += q[i * n + j] * x[j];
        }
        quad += x[i] * row;
    }
    return linear + quad / static_cast<double>(n);
}

double SyntheticModel::base_val(const Architecture& arch) const {
    const auto x = phi(arch);
    return kFloor + kRange * logistic(scale * (raw(x) - offset));
}

EvalRecord SyntheticModel::evaluate(const Architecture& arch) const {
    const ArchKey key = arch_key(arch);
    const double val = base_val(arch);
    const double test = clip01(val + kTestNoise * hashed_symmetric(seed, key, 1));
    EvalRecord rec{arch, {}, {}};
    for (int r = 0; r < kRuns; ++r) {
        rec.val_errors.push_back(clip01(val + kRunJitter * hashed_symmetric(seed, key, 100 + r)));
        rec.test_errors.push_back(clip01(test + kRunJitter * hashed_symmetric(seed, key, 200 + r)));
    }
    return rec;
}

Benchmark Benchmark::tabular(const SpaceSpec& spec, std::vector<EvalRecord> records) {
    spec.check();
    Benchmark b;
    b.spec_ = spec;
    b.index_.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto report = validate(r.arch, spec);
        if (!report.ok()) {
            throw DataError("invalid architecture in record " + std::to_string(i) + ": " +
                            report.violations.front().message);
        }
        check_errors(r.val_errors, "validation");
        check_errors(r.test_errors, "test");
        if (!b.index_.emplace(arch_key(r.arch), i).second) {
            throw DataError("duplicate architecture in record " + std::to_string(i));
        }
    }
    b.records_ = std::move(records);
    return b;
}

Benchmark Benchmark::synthetic(const SpaceSpec& spec, std::uint64_t seed) {
    spec.check();
    auto model = std::make_shared<SyntheticModel>();
    model->seed = seed;
    const std::size_t n = static_cast<std::size_t>(spec.upper_pairs() + spec.num_layers * spec.num_op_types);

    Rng rng(mix_seed(seed, 0));
    model->w.resize(n);
    for (auto& v : model->w) v = uniform_symmetric(rng);
    model->q.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = uniform_symmetric(rng);
            model->q[i * n + j] = v;
            model->q[j * n + i] = v;
        }
    }

    Rng calib(mix_seed(seed, 1));
    std::vector<double> raws;
    raws.reserve(10'000);
    for (int i = 0; i < 10'000; ++i) {
        raws.push_back(model->raw(model->phi(random_architecture(spec, calib))));
    }
    const double lo = percentile(raws, 0.01);
    const double hi = percentile(raws, 0.99);
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    const double z_lo = logit((0.05 - SyntheticModel::kFloor) / SyntheticModel::kRange);
    const double z_hi = logit((0.85 - SyntheticModel::kFloor) / SyntheticModel::kRange);
    if (hi > lo) {
        model->scale = (z_hi - z_lo) / (hi - lo);
        model->offset = lo - z_lo / model->scale;
    }

    Benchmark b;
    b.spec_ = spec;
    b.model_ = std::move(model);
    return b;
}

const EvalRecord& Benchmark::lookup(const Architecture& arch) const {
    const auto it = index_.find(arch_key(arch));
    if (it == index_.end()) {
        throw LookupError("architecture not in benchmark table: " +
                          (arch.upper_triangular() ? encode_architecture(arch) : std::string("<permuted>")));
    }
    return records_[it->second];
}

EvalRecord Benchmark::evaluate(const Architecture& arch) const {
    if (model_) {
        if (!is_valid(arch, spec_)) {
            throw LookupError("architecture is not a member of the synthetic space");
        }
        return model_->evaluate(arch);
    }
    return lookup(arch);
}

double Benchmark::query_val(const Architecture& arch) const {
    if (model_) return evaluate(arch).mean_val();
    return lookup(arch).mean_val();
}

double Benchmark::query_test(const Architecture& arch) const {
    if (model_) return evaluate(arch).mean_test();
    return lookup(arch).mean_test();
}

bool Benchmark::enumerable(std::uint64_t guard) const {
    return !model_ || encoding_count(spec_) <= guard;
}

std::vector<Architecture> Benchmark::architectures(std::uint64_t guard) const {
    if (!model_) {
        std::vector<Architecture> out;
        out.reserve(records_.size());
        for (const auto& r : records_) out.push_back(r.arch);
        return out;
    }
    return enumerate(spec_, guard);
}

Benchmark to_tabular(const Benchmark& bench, std::uint64_t guard) {
    if (bench.is_tabular()) return bench;
    std::vector<EvalRecord> recs;
    for_each_architecture(
        bench.spec(), [&](const Architecture& a) { recs.push_back(bench.evaluate(a)); }, guard);
    return Benchmark::tabular(bench.spec(), std::move(recs));
}

Benchmark read_tabular(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::optional<SpaceSpec> spec;
    std::vector<EvalRecord> records;
    std::unordered_map<ArchKey, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s(line);
        if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
        if (s.find_first_not_of(" \t") == std::string_view::npos || s.front() == '#') continue;
        if (!spec) {
            std::istringstream hs{std::string(s)};
            std::string tag;
            SpaceSpec sp;
            int flags = 0;
            if (!(hs >> tag >> sp.num_layers >> sp.num_op_types >> sp.max_edges >> flags) || tag != "spec") {
                throw DataError("expected header 'spec L d max_edges flags'", lineno);
            }
            std::string extra;
            if (hs >> extra) throw DataError("trailing text after header", lineno);
            sp.require_single_source_sink = (flags & 1) != 0;
            try {
                sp.check();
            } catch (const std::invalid_argument& e) {
                throw DataError(e.what(), lineno);
            }
            spec = sp;
            continue;
        }
        // Five '|' separated fields: L d, bits, ops, val runs, test runs.
        std::vector<std::size_t> bars;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '|') bars.push_back(i);
        }
        if (bars.size() != 4) {
            throw DataError("expected 5 '|'-separated fields, found " + std::to_string(bars.size() + 1),
                            lineno);
        }
        EvalRecord rec;
        try {
            rec.arch = parse_architecture(s.substr(0, bars[2]));
            rec.val_errors = parse_doubles(s.substr(bars[2] + 1, bars[3] - bars[2] - 1));
            rec.test_errors = parse_doubles(s.substr(bars[3] + 1));
            check_errors(rec.val_errors, "validation");
            check_errors(rec.test_errors, "test");
        } catch (const DataError& e) {
            throw DataError(e.what(), lineno);
        }
        if (rec.arch.layers() != spec->num_layers || rec.arch.ops() != spec->num_op_types) {
            throw DataError("architecture shape differs from header", lineno);
        }
        const auto report = validate(rec.arch, *spec);
        if (!report.ok()) {
            throw DataError("invalid architecture: " + report.violations.front().message, lineno);
        }
        if (!seen.emplace(arch_key(rec.arch), records.size()).second) {
            throw DataError("duplicate architecture", lineno);
        }
        records.push_back(std::move(rec));
    }
    if (!spec) {
        throw DataError("missing 'spec' header");
    }
    return Benchmark::tabular(*spec, std::move(records));
}

Benchmark load_tabular(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return read_tabular(in);
}

void write_tabular(const Benchmark& bench, std::ostream& out) {
    if (!bench.is_tabular()) {
        throw std::invalid_argument("write_tabular needs a tabular benchmark; use to_tabular first");
    }
    const auto& sp = bench.spec();
    out << "spec " << sp.num_layers << ' ' << sp.num_op_types << ' ' << sp.max_edges << ' '
        << (sp.require_single_source_sink ? 1 : 0) << '\n';
    for (const auto& r : bench.records()) {
        out << encode_architecture(r.arch) << " |";
        for (double v : r.val_errors) out << ' ' << format_double(v);
        out << " |";
        for (double v : r.test_errors) out << ' ' << format_double(v);
        out << '\n';
    }
}

void save_tabular(const Benchmark& bench, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    write_tabular(bench, out);
}

Oracles oracles(const Benchmark& bench, std::uint64_t guard) {
    Oracles o{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    auto visit = [&](const EvalRecord& r) {
        o.val = std::min(o.val, r.mean_val());
        o.test = std::min(o.test, r.mean_test());
    };
    if (bench.is_tabular()) {
        if (bench.records().empty()) throw DataError("empty benchmark has no oracle");
        for (const auto& r : bench.records()) visit(r);
    } else {
        for_each_architecture(
            bench.spec(), [&](const Architecture& a) { visit(bench.evaluate(a)); }, guard);
    }
    return o;
}

}  // namespace pbnas
