#include "pbnas/gcn_predictor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "pbnas/errors.hpp"
#include "pbnas/random.hpp"

namespace pbnas {

void PredictorConfig::check() const {
    if (gcn_layers < 1) throw std::invalid_argument("predictor needs at least one graph-conv layer");
    if (hidden < 1) throw std::invalid_argument("predictor hidden width must be positive");
    if (input_width < 1) throw std::invalid_argument("predictor input width must be positive");
}

PredictorParams PredictorParams::zeros(const PredictorConfig& config) {
    config.check();
    PredictorParams p;
    int fan_in = config.input_width;
    for (int g = 0; g < config.gcn_layers; ++g) {
        p.weights.push_back(Matrix::Zero(fan_in, config.hidden));
        fan_in = config.hidden;
    }
    p.w_out = Vector::Zero(config.hidden);
    p.b_out = 0.0;
    return p;
}

PredictorParams PredictorParams::initialize(const PredictorConfig& config, std::uint64_t seed) {
    PredictorParams p = zeros(config);
    Rng rng(seed);
    for (auto& w : p.weights) {
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = bound * uniform_symmetric(rng);
            }
        }
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(config.hidden + 1));
    for (Eigen::Index i = 0; i < p.w_out.size(); ++i) {
        p.w_out(i) = bound * uniform_symmetric(rng);
    }
    return p;
}

std::size_t PredictorParams::size() const {
    std::size_t n = static_cast<std::size_t>(w_out.size()) + 1;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    return n;
}

void PredictorParams::check_shape(const PredictorConfig& config) const {
    bool ok = static_cast<int>(weights.size()) == config.gcn_layers && w_out.size() == config.hidden;
    int fan_in = config.input_width;
    for (std::size_t g = 0; ok && g < weights.size(); ++g) {
        ok = weights[g].rows() == fan_in && weights[g].cols() == config.hidden;
        fan_in = config.hidden;
    }
    if (!ok) throw DimensionError("predictor parameters do not match the configuration");
}

void PredictorParams::axpy(double alpha, const PredictorParams& other) {
    for (std::size_t g = 0; g < weights.size(); ++g) weights[g] += alpha * other.weights[g];
    w_out += alpha * other.w_out;
    b_out += alpha * other.b_out;
}

void PredictorParams::scale(double alpha) {
    for (auto& w : weights) w *= alpha;
    w_out *= alpha;
    b_out *= alpha;
}

double PredictorParams::get(std::size_t flat) const {
    for (const auto& w : weights) {
        if (flat < static_cast<std::size_t>(w.size())) {
            return w(static_cast<Eigen::Index>(flat) / w.cols(), static_cast<Eigen::Index>(flat) % w.cols());
        }
        flat -= static_cast<std::size_t>(w.size());
    }
    if (flat < static_cast<std::size_t>(w_out.size())) return w_out(static_cast<Eigen::Index>(flat));
    if (flat == static_cast<std::size_t>(w_out.size())) return b_out;
    throw std::out_of_range("parameter index out of range");
}

void PredictorParams::set(std::size_t flat, double value) {
    for (auto& w : weights) {
        if (flat < static_cast<std::size_t>(w.size())) {
            w(static_cast<Eigen::Index>(flat) / w.cols(), static_cast<Eigen::Index>(flat) % w.cols()) = value;
            return;
        }
        flat -= static_cast<std::size_t>(w.size());
    }
    if (flat < static_cast<std::size_t>(w_out.size())) {
        w_out(static_cast<Eigen::Index>(flat)) = value;
        return;
    }
    if (flat == static_cast<std::size_t>(w_out.size())) {
        b_out = value;
        return;
    }
    throw std::out_of_range("parameter index out of range");
}

bool operator==(const PredictorParams& a, const PredictorParams& b) {
    if (a.weights.size() != b.weights.size() || a.w_out.size() != b.w_out.size()) return false;
    for (std::size_t g = 0; g < a.weights.size(); ++g) {
        if (a.weights[g].rows() != b.weights[g].rows() || a.weights[g].cols() != b.weights[g].cols() ||
            a.weights[g] != b.weights[g]) {
            return false;
        }
    }
    return a.w_out == b.w_out && a.b_out == b.b_out;
}

RelaxedArch RelaxedArch::from(const Architecture& arch) {
    RelaxedArch r{Matrix(arch.layers(), arch.layers()), Matrix(arch.layers(), arch.ops())};
    for (int i = 0; i < arch.layers(); ++i) {
        for (int j = 0; j < arch.layers(); ++j) r.adjacency(i, j) = arch.edge(i, j) ? 1.0 : 0.0;
        for (int k = 0; k < arch.ops(); ++k) r.features(i, k) = arch.feature(i, k) ? 1.0 : 0.0;
    }
    return r;
}

namespace {

Vector degrees(const Matrix& adjacency) {
    Vector deg = adjacency.rowwise().sum().array() + 1.0;
    if ((deg.array() <= 0.0).any()) {
        throw std::domain_error("relaxed adjacency has a non-positive degree");
    }
    return deg;
}

void check_input(const PredictorConfig& config, const RelaxedArch& input) {
    if (input.adjacency.rows() != input.adjacency.cols() || input.features.rows() != input.adjacency.rows() ||
        input.features.cols() != config.input_width || input.adjacency.rows() < 1) {
        throw DimensionError("predictor input shape does not match the configuration");
    }
}

}  // namespace

Matrix normalize_adjacency(const Matrix& adjacency) {
    if (adjacency.rows() != adjacency.cols()) throw DimensionError("adjacency must be square");
    const Vector deg = degrees(adjacency);
    Matrix tilde = adjacency + Matrix::Identity(adjacency.rows(), adjacency.cols());
    return deg.array().rsqrt().matrix().asDiagonal() * tilde;
}

ForwardResult forward(const PredictorParams& params, const PredictorConfig& config, const RelaxedArch& input) {
    check_input(config, input);
    params.check_shape(config);
    ForwardResult out;
    auto& c = out.cache;
    c.adjacency = input.adjacency;
    c.degree = degrees(input.adjacency);
    c.norm_adjacency = normalize_adjacency(input.adjacency);
    Matrix h = input.features;
    for (const auto& w : params.weights) {
        c.inputs.push_back(h);
        c.aggregated.push_back(c.norm_adjacency * h);
        c.pre.push_back(c.aggregated.back() * w);
        h = c.pre.back().cwiseMax(0.0);
    }
    c.last = h;
    c.pooled = h.colwise().mean().transpose();
    out.score = params.w_out.dot(c.pooled) + params.b_out;
    return out;
}

double score(const PredictorParams& params, const PredictorConfig& config, const RelaxedArch& input) {
    check_input(config, input);
    const Matrix norm = normalize_adjacency(input.adjacency);
    Matrix h = input.features;
    for (const auto& w : params.weights) {
        h = ((norm * h) * w).cwiseMax(0.0);
    }
    return params.w_out.dot(h.colwise().mean().transpose()) + params.b_out;
}

double score(const PredictorParams& params, const PredictorConfig& config, const Architecture& arch) {
    return score(params, config, RelaxedArch::from(arch));
}

namespace {

void check_cache(const ForwardCache& cache, const PredictorParams& params) {
    if (cache.pre.size() != params.weights.size() || cache.pooled.size() != params.w_out.size()) {
        throw DimensionError("forward cache does not match the parameters");
    }
}

// Adds d(upstream * score)/d(params) into grad and returns dScore/dX_0 scaled by upstream.
// When d_norm is non-null, also accumulates dScore/dN.
Matrix backprop(const ForwardCache& cache, const PredictorParams& params, double upstream,
                PredictorParams* grad, Matrix* d_norm) {
    const auto layers = static_cast<double>(cache.last.rows());
    if (grad) {
        grad->b_out += upstream;
        grad->w_out += upstream * cache.pooled;
    }
    // Every node row receives the same share of the pooled gradient.
    Matrix dh = Matrix::Ones(cache.last.rows(), 1) * (upstream / layers * params.w_out.transpose());
    for (std::size_t g = params.weights.size(); g-- > 0;) {
        const Matrix dz = dh.cwiseProduct((cache.pre[g].array() > 0.0).cast<double>().matrix());
        if (grad) grad->weights[g].noalias() += cache.aggregated[g].transpose() * dz;
        const Matrix dm = dz * params.weights[g].transpose();
        if (d_norm) d_norm->noalias() += dm * cache.inputs[g].transpose();
        dh = cache.norm_adjacency.transpose() * dm;
    }
    return dh;
}

}  // namespace

PredictorParams backward_params(const ForwardCache& cache, const PredictorParams& params,
                                const PredictorConfig& config, double upstream) {
    check_cache(cache, params);
    PredictorParams grad = PredictorParams::zeros(config);
    backprop(cache, params, upstream, &grad, nullptr);
    return grad;
}

InputGradient backward_inputs(const ForwardCache& cache, const PredictorParams& params,
                              const PredictorConfig& config, double upstream) {
    (void)config;
    check_cache(cache, params);
    const auto n = cache.adjacency.rows();
    Matrix d_norm = Matrix::Zero(n, n);
    InputGradient g;
    g.features = backprop(cache, params, upstream, nullptr, &d_norm);

    // N_ij = At_ij * deg_i^-1/2 with deg_i = sum_k At_ik and At = A + I.
    const Matrix tilde = cache.adjacency + Matrix::Identity(n, n);
    g.adjacency.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double inv_sqrt = 1.0 / std::sqrt(cache.degree(i));
        const double row_term = -0.5 * inv_sqrt / cache.degree(i) * d_norm.row(i).dot(tilde.row(i));
        for (Eigen::Index j = 0; j < n; ++j) {
            g.adjacency(i, j) = d_norm(i, j) * inv_sqrt + row_term;
        }
    }
    return g;
}

PairLoss pairwise_loss(double score_i, double score_j, int y) {
    const double delta = score_i - score_j;
    // softplus(x) = log(1 + e^x), stable for large |x|.
    auto softplus = [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); };
    const double p1 = delta >= 0 ? 1.0 / (1.0 + std::exp(-delta)) : std::exp(delta) / (1.0 + std::exp(delta));
    PairLoss out;
    out.loss = y == 1 ? softplus(-delta) : softplus(delta);
    out.grad_i = p1 - static_cast<double>(y);
    out.grad_j = -out.grad_i;
    return out;
}

void TrainHyper::check() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (max_pairs_per_epoch < 1 || batch_pairs < 1) throw std::invalid_argument("pair counts must be positive");
}

double cosine_lr(double base_lr, long step, long total_steps) {
    if (total_steps <= 1) return base_lr;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

// Several architectures of equal size stacked row-wise; block b occupies rows
// [b * nodes, (b + 1) * nodes). Lets the dense W_g products run as one GEMM.
struct Stack {
    Eigen::Index nodes = 0;
    Matrix norm;      // block b holds N_b
    Matrix features;  // block b holds X_0 of architecture b

    Eigen::Index count() const { return nodes ? norm.rows() / nodes : 0; }
    void resize(Eigen::Index archs, Eigen::Index n, Eigen::Index d) {
        nodes = n;
        norm.resize(archs * n, n);
        features.resize(archs * n, d);
    }
};

struct StackCache {
    std::vector<Matrix> aggregated;
    std::vector<Matrix> pre;
    Matrix pooled;
    Vector scores;
};

void put_arch(Stack& s, Eigen::Index b, const Architecture& a) {
    const Eigen::Index n = s.nodes;
    for (Eigen::Index i = 0; i < n; ++i) {
        double deg = 1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = (i == j || a.edge(static_cast<int>(i), static_cast<int>(j))) ? 1.0 : 0.0;
            s.norm(b * n + i, j) = v;
            if (i != j) deg += v;
        }
        s.norm.row(b * n + i) /= std::sqrt(deg);
        for (Eigen::Index k = 0; k < s.features.cols(); ++k) {
            s.features(b * n + i, k) = a.feature(static_cast<int>(i), static_cast<int>(k)) ? 1.0 : 0.0;
        }
    }
}

// out = blockdiag(N_b) h, or blockdiag(N_b^T) h. Plain loops: the blocks are
// tiny and per-block Eigen products cost more in setup than in arithmetic.
void apply_blocks(const Stack& s, const Matrix& h, Matrix& out, bool transpose) {
    const Eigen::Index n = s.nodes;
    const Eigen::Index rows = h.rows();
    out.resize(rows, h.cols());
    const double* nm = s.norm.data();  // column-major, rows x n
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
        const double* hc = h.data() + c * rows;
        double* oc = out.data() + c * rows;
        for (Eigen::Index base = 0; base < rows; base += n) {
            for (Eigen::Index i = 0; i < n; ++i) {
                double acc = 0.0;
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double w = transpose ? nm[i * rows + base + j] : nm[j * rows + base + i];
                    acc += w * hc[base + j];
                }
                oc[base + i] = acc;
            }
        }
    }
}

void stack_forward(const PredictorParams& params, const Stack& s, StackCache& c) {
    const std::size_t layers = params.weights.size();
    c.aggregated.resize(layers);
    c.pre.resize(layers);
    const Matrix* h = &s.features;
    Matrix act;
    for (std::size_t g = 0; g < layers; ++g) {
        apply_blocks(s, *h, c.aggregated[g], false);
        c.pre[g].noalias() = c.aggregated[g] * params.weights[g];
        act = c.pre[g].cwiseMax(0.0);
        h = &act;
    }
    const Eigen::Index n = s.nodes;
    c.pooled.resize(s.count(), act.cols());
    for (Eigen::Index b = 0; b < s.count(); ++b) {
        c.pooled.row(b) = act.middleRows(b * n, n).colwise().mean();
    }
    c.scores = (c.pooled * params.w_out).array() + params.b_out;
}

// Adds the gradient of sum_b dscore_b * score_b into grad.
void stack_backward(const PredictorParams& params, const Stack& s, const StackCache& c, const Vector& dscore,
                    PredictorParams& grad) {
    const Eigen::Index n = s.nodes;
    grad.b_out += dscore.sum();
    grad.w_out.noalias() += c.pooled.transpose() * dscore;
    Matrix dh(s.norm.rows(), params.w_out.size());
    for (Eigen::Index b = 0; b < s.count(); ++b) {
        dh.middleRows(b * n, n).rowwise() = (dscore(b) / static_cast<double>(n)) * params.w_out.transpose();
    }
    Matrix dz, dm;
    for (std::size_t g = params.weights.size(); g-- > 0;) {
        dz = dh.cwiseProduct((c.pre[g].array() > 0.0).cast<double>().matrix());
        grad.weights[g].noalias() += c.aggregated[g].transpose() * dz;
        if (g == 0) break;
        dm.noalias() = dz * params.weights[g].transpose();
        apply_blocks(s, dm, dh, true);
    }
}

// Distinct ordered-pair indices in [0, total), Floyd's algorithm then shuffled.
std::vector<std::uint64_t> sample_pairs(std::uint64_t total, std::uint64_t count, Rng& rng) {
    std::vector<std::uint64_t> out;
    out.reserve(count);
    if (count >= total) {
        for (std::uint64_t p = 0; p < total; ++p) out.push_back(p);
    } else {
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(count * 2);
        for (std::uint64_t j = total - count; j < total; ++j) {
            const std::uint64_t t = uniform_index(rng, j + 1);
            const std::uint64_t pick = chosen.insert(t).second ? t : j;
            if (pick == j) chosen.insert(j);
            out.push_back(pick);
        }
    }
    for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[uniform_index(rng, i)]);
    }
    return out;
}

}  // namespace

TrainResult train(const PredictorParams& init, const PredictorConfig& config, const TrainHyper& hyper,
                  std::span<const TrainExample> train_set) {
    hyper.check();
    init.check_shape(config);
    const std::size_t n = train_set.size();
    if (n < 2) throw NoRankingSignal("no ranking signal: need at least two architectures");
    const bool any_distinct = std::any_of(train_set.begin(), train_set.end(), [&](const TrainExample& e) {
        return e.val_error != train_set.front().val_error;
    });
    if (!any_distinct) throw NoRankingSignal("no ranking signal: all validation errors tie");

    const SpaceSpec shape{train_set.front().arch.layers(), train_set.front().arch.ops()};
    for (const auto& e : train_set) {
        if (e.arch.layers() != shape.num_layers || e.arch.ops() != config.input_width) {
            throw DimensionError("training architectures must share one shape matching the predictor");
        }
    }
    const Eigen::Index nodes = shape.num_layers;
    Stack all;
    all.resize(static_cast<Eigen::Index>(n), nodes, config.input_width);
    for (std::size_t a = 0; a < n; ++a) put_arch(all, static_cast<Eigen::Index>(a), train_set[a].arch);

    const std::uint64_t total_pairs = static_cast<std::uint64_t>(n) * (n - 1);
    const std::uint64_t per_epoch = std::min<std::uint64_t>(total_pairs, static_cast<std::uint64_t>(hyper.max_pairs_per_epoch));
    const auto batch = static_cast<std::uint64_t>(hyper.batch_pairs);
    const long steps_per_epoch = static_cast<long>((per_epoch + batch - 1) / batch);
    const long total_steps = steps_per_epoch * hyper.epochs;

    TrainResult result;
    result.params = init;
    result.step_losses.reserve(static_cast<std::size_t>(total_steps));
    PredictorParams velocity = PredictorParams::zeros(config);
    PredictorParams grad = PredictorParams::zeros(config);
    Rng rng(hyper.seed);

    std::ofstream log;
    if (!hyper.loss_log.empty()) {
        log.open(hyper.loss_log);
        log << "epoch,mean_loss\n";
    }

    // slot[a] is the row block of example a in this step's stack, or -1.
    std::vector<Eigen::Index> slot(n, -1);
    std::vector<std::size_t> touched;
    struct Pair { std::size_t i, j; int y; };
    std::vector<Pair> valid;
    Stack stack;
    StackCache cache;
    Vector dscore;

    long step = 0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const auto pairs = sample_pairs(total_pairs, per_epoch, rng);
        double epoch_loss = 0.0;
        long epoch_batches = 0;
        for (std::uint64_t start = 0; start < pairs.size(); start += batch, ++step) {
            const std::uint64_t stop = std::min<std::uint64_t>(start + batch, pairs.size());
            valid.clear();
            for (std::uint64_t p = start; p < stop; ++p) {
                const std::size_t i = static_cast<std::size_t>(pairs[p] / (n - 1));
                const std::size_t r = static_cast<std::size_t>(pairs[p] % (n - 1));
                const std::size_t j = r < i ? r : r + 1;
                const double ei = train_set[i].val_error;
                const double ej = train_set[j].val_error;
                if (ei == ej) continue;
                valid.push_back({i, j, ei < ej ? 1 : 0});
            }
            const double lr = cosine_lr(hyper.lr, step, total_steps);
            if (valid.empty()) continue;

            touched.clear();
            for (const auto& pr : valid) {
                for (std::size_t a : {pr.i, pr.j}) {
                    if (slot[a] < 0) {
                        slot[a] = static_cast<Eigen::Index>(touched.size());
                        touched.push_back(a);
                    }
                }
            }
            const auto m = static_cast<Eigen::Index>(touched.size());
            stack.resize(m, nodes, config.input_width);
            for (Eigen::Index b = 0; b < m; ++b) {
                const auto a = static_cast<Eigen::Index>(touched[static_cast<std::size_t>(b)]);
                stack.norm.middleRows(b * nodes, nodes) = all.norm.middleRows(a * nodes, nodes);
                stack.features.middleRows(b * nodes, nodes) = all.features.middleRows(a * nodes, nodes);
            }
            stack_forward(result.params, stack, cache);

            const double inv = 1.0 / static_cast<double>(valid.size());
            double loss = 0.0;
            dscore.setZero(m);
            for (const auto& pr : valid) {
                const auto pl = pairwise_loss(cache.scores(slot[pr.i]), cache.scores(slot[pr.j]), pr.y);
                loss += pl.loss;
                dscore(slot[pr.i]) += pl.grad_i * inv;
                dscore(slot[pr.j]) += pl.grad_j * inv;
            }
            loss *= inv;
            for (std::size_t a : touched) slot[a] = -1;

            grad.scale(0.0);
            stack_backward(result.params, stack, cache, dscore, grad);
            velocity.scale(hyper.momentum);
            velocity.axpy(1.0, grad);
            result.params.axpy(-lr, velocity);

            result.step_losses.push_back(loss);
            epoch_loss += loss;
            ++epoch_batches;
        }
        if (log.is_open()) {
            log << epoch << ',' << (epoch_batches ? epoch_loss / static_cast<double>(epoch_batches) : 0.0) << '\n';
        }
    }
    result.steps = step;
    return result;
}

std::vector<double> score_set(const PredictorParams& params, const PredictorConfig& config,
                              std::span<const Architecture> archs) {
    params.check_shape(config);
    std::vector<double> out;
    out.reserve(archs.size());
    constexpr std::size_t kChunk = 256;
    Stack stack;
    StackCache cache;
    for (std::size_t start = 0; start < archs.size(); start += kChunk) {
        const std::size_t stop = std::min(archs.size(), start + kChunk);
        const int nodes = archs[start].layers();
        stack.resize(static_cast<Eigen::Index>(stop - start), nodes, config.input_width);
        for (std::size_t a = start; a < stop; ++a) {
            if (archs[a].layers() != nodes || archs[a].ops() != config.input_width) {
                throw DimensionError("scored architectures must share one shape matching the predictor");
            }
            put_arch(stack, static_cast<Eigen::Index>(a - start), archs[a]);
        }
        stack_forward(params, stack, cache);
        for (Eigen::Index b = 0; b < cache.scores.size(); ++b) out.push_back(cache.scores(b));
    }
    return out;
}

namespace {

void put_hex(std::ostream& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
    out.write(buf, ptr - buf);
}

double get_hex(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw DataError("checkpoint truncated");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, std::chars_format::hex);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw DataError("bad checkpoint value '" + tok + "'");
    return v;
}

}  // namespace

void write_params(const PredictorParams& params, const PredictorConfig& config, std::ostream& out) {
    params.check_shape(config);
    out << "pbnas-params 1\n" << config.gcn_layers << ' ' << config.hidden << ' ' << config.input_width << '\n';
    for (std::size_t i = 0; i < params.size(); ++i) {
        put_hex(out, params.get(i));
        out << '\n';
    }
}

PredictorParams read_params(std::istream& in, PredictorConfig* config_out) {
    std::string magic;
    int version = 0;
    PredictorConfig config;
    if (!(in >> magic >> version) || magic != "pbnas-params" || version != 1) {
        throw DataError("not a version-1 predictor checkpoint");
    }
    if (!(in >> config.gcn_layers >> config.hidden >> config.input_width)) {
        throw DataError("checkpoint header truncated");
    }
    try {
        config.check();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    PredictorParams p = PredictorParams::zeros(config);
    for (std::size_t i = 0; i < p.size(); ++i) p.set(i, get_hex(in));
    if (config_out) *config_out = config;
    return p;
}

}  // namespace pbnas
