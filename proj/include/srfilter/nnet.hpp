#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace srfilter {

// Data matrices are row-major with one row per sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Feedforward binary classifier shape: input, hidden widths..., 1.
// Hidden layers use ReLU; the output is a logistic sigmoid.
struct MLPSpec {
    std::vector<std::size_t> layer_sizes;

    void validate() const;
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }
    std::size_t last_hidden() const { return layer_sizes[layer_sizes.size() - 2]; }

    static MLPSpec with_hidden(std::size_t input_dim, const std::vector<std::size_t>& hidden);
};

struct DenseLayer {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd bias;    // out
};

struct MLPParams {
    MLPSpec spec;
    std::vector<DenseLayer> layers;

    bool all_finite() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    double validation_fraction = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_stability = 1e-8;

    void validate() const;
};

// He initialisation: weights ~ N(0, 2 / fan_in), biases zero.
MLPParams init_params(const MLPSpec& spec, std::uint64_t seed);

// Output probability for a single input.
double forward(const MLPParams& params, std::span<const double> x);

struct ForwardTrace {
    // activations[0] is the input, activations[l] the post-ReLU output of
    // hidden layer l; the output layer is summarised by logit/probability.
    std::vector<Eigen::VectorXd> activations;
    double logit = 0.0;
    double probability = 0.5;
};

ForwardTrace forward_trace(const MLPParams& params, std::span<const double> x);

// Batched evaluation; rows of x are samples.
Eigen::VectorXd predict_logit(const MLPParams& params, const Matrix& x);
Eigen::VectorXd predict(const MLPParams& params, const Matrix& x);
// Post-ReLU activations of the last hidden layer, one row per sample.
Matrix last_hidden_activations(const MLPParams& params, const Matrix& x);

// Probability clamp applied inside the loss only.
inline constexpr double kLossClamp = 1e-12;

struct LossGrad {
    double loss = 0.0;
    std::vector<DenseLayer> grads;
};

// Mean binary cross-entropy over the batch and its exact gradient.
LossGrad loss_and_grad(const MLPParams& params, const Matrix& x, const Eigen::VectorXd& labels);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainResult {
    MLPParams params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_validation_loss = 0.0;
};

// Called at the start of every epoch (1-based) with the training and
// validation partition inputs, which it may modify in place (e.g. to redraw
// augmentation noise).
using EpochHook = std::function<void(std::size_t epoch, Matrix& train_inputs, Matrix& validation_inputs)>;

// Adam minimisation of the BCE with a seeded validation split, per-epoch
// reshuffling and early stopping; returns the best-validation parameters.
TrainResult train(const MLPSpec& spec, const TrainConfig& config, const Matrix& x, const Eigen::VectorXd& labels,
                  std::uint64_t seed, const EpochHook& hook = {});

// Text model format: "mlp v1", layer sizes, then per layer one line per weight
// row followed by one bias line.
std::string format_mlp(const MLPParams& params);
// Parses starting at lines[pos]; advances pos past the block.
MLPParams parse_mlp(std::span<const std::string> lines, std::size_t& pos, const std::string& where);
void save_mlp(const MLPParams& params, const std::filesystem::path& path);
MLPParams load_mlp(const std::filesystem::path& path);

} // namespace srfilter
