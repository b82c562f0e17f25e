#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pbnas/arch_space.hpp"

namespace pbnas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct PredictorConfig {
    int gcn_layers = 3;
    int hidden = 256;
    int input_width = 0;  // number of op types

    void check() const;
};

/// Graph-conv weights W_1..W_G (input_width x hidden, then hidden x hidden)
/// followed by a single linear output neuron. Also used as the gradient type.
struct PredictorParams {
    std::vector<Matrix> weights;
    Vector w_out;
    double b_out = 0.0;

    static PredictorParams zeros(const PredictorConfig& config);
    // Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
    static PredictorParams initialize(const PredictorConfig& config, std::uint64_t seed);

    std::size_t size() const;
    void check_shape(const PredictorConfig& config) const;

    // this += alpha * other
    void axpy(double alpha, const PredictorParams& other);
    void scale(double alpha);

    // Flat views in a fixed order (weights row-major, then w_out, then b_out).
    double get(std::size_t flat) const;
    void set(std::size_t flat, double value);

    friend bool operator==(const PredictorParams& a, const PredictorParams& b);
};

// Real-valued adjacency (L x L) and features (L x d); binary graphs are a special case.
struct RelaxedArch {
    Matrix adjacency;
    Matrix features;

    static RelaxedArch from(const Architecture& arch);
};

struct ForwardCache {
    Matrix adjacency;        // A as given
    Vector degree;           // row sums of A + I
    Matrix norm_adjacency;   // D^-1/2 (A + I)
    std::vector<Matrix> inputs;      // X_{g-1}
    std::vector<Matrix> aggregated;  // N X_{g-1}
    std::vector<Matrix> pre;         // N X_{g-1} W_g
    Matrix last;                     // X_G after the rectifier
    Vector pooled;
};

struct ForwardResult {
    double score = 0.0;
    ForwardCache cache;
};

struct InputGradient {
    Matrix adjacency;
    Matrix features;
};

/// D^-1/2 (A + I) with D = diag((A + I) 1). One-sided: rows are scaled, columns are not.
Matrix normalize_adjacency(const Matrix& adjacency);

// Higher score means a better (lower error) architecture.
ForwardResult forward(const PredictorParams& params, const PredictorConfig& config,
                      const RelaxedArch& input);
double score(const PredictorParams& params, const PredictorConfig& config, const Architecture& arch);
double score(const PredictorParams& params, const PredictorConfig& config, const RelaxedArch& input);

// Gradient of upstream * score.
PredictorParams backward_params(const ForwardCache& cache, const PredictorParams& params,
                                const PredictorConfig& config, double upstream);
// Gradient of upstream * score w.r.t. the relaxed adjacency (through the
// degree normalisation) and features.
InputGradient backward_inputs(const ForwardCache& cache, const PredictorParams& params,
                              const PredictorConfig& config, double upstream);

struct PairLoss {
    double loss = 0.0;
    double grad_i = 0.0;
    double grad_j = 0.0;
};

/// Cross-entropy of the label y under p(y = 1) = logistic(score_i - score_j).
/// y = 1 means architecture i has the lower validation error.
PairLoss pairwise_loss(double score_i, double score_j, int y);

struct TrainHyper {
    int epochs = 2000;
    double lr = 0.01;
    double momentum = 0.9;
    int max_pairs_per_epoch = 512;
    int batch_pairs = 64;
    std::uint64_t seed = 0;
    std::filesystem::path loss_log;  // per-epoch CSV when non-empty

    void check() const;
};

// Cosine decay from lr at step 0 to exactly zero at the last step.
double cosine_lr(double base_lr, long step, long total_steps);

struct TrainExample {
    Architecture arch;
    double val_error = 0.0;
};

struct TrainResult {
    PredictorParams params;
    std::vector<double> step_losses;  // mean pair loss of each minibatch
    long steps = 0;
};

/// Minimises the mean pairwise loss with momentum SGD. Starts from `init`
/// (callers re-initialise per search iteration). Throws NoRankingSignal when
/// every example has the same error.
TrainResult train(const PredictorParams& init, const PredictorConfig& config, const TrainHyper& hyper,
                  std::span<const TrainExample> train_set);

std::vector<double> score_set(const PredictorParams& params, const PredictorConfig& config,
                              std::span<const Architecture> archs);

// Text checkpoint with hex-float values, exact on round trip.
void write_params(const PredictorParams& params, const PredictorConfig& config, std::ostream& out);
PredictorParams read_params(std::istream& in, PredictorConfig* config_out = nullptr);

}  // namespace pbnas
