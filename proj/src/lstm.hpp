#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "date.hpp"
#include "features.hpp"

namespace aqua {

// Deterministic RNG: mt19937_64 with an explicit 53-bit uniform mapping so
// streams do not depend on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return state_(); }

    // Uniform on [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Fisher-Yates.
    void shuffle(std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 state_;
};

// Uniform on [-L, L] with L = sqrt(6/(fan_in + fan_out)).
Eigen::MatrixXd glorot_uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng,
                                    std::size_t rows, std::size_t cols);

struct TrainConfig {
    double learning_rate = 0.001;
    double decay_rate = 0.97;  // per-epoch exponential lr decay
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    std::size_t window = 4;  // sequence length W
    double dropout_rate = 0.2;
    std::size_t hidden_dim = 50;
    bool pad_windows = false;
    std::uint64_t seed = 42;
    // z-score statistics from the training split.
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    double target_mean = 0.0;
    double target_std = 1.0;

    void validate() const;
    double effective_lr(std::size_t epoch) const;
};

// Single-hidden-layer LSTM with a scalar linear head. Gate matrices are
// hidden x input, recurrent matrices hidden x hidden.
struct LstmModel {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    double dropout_rate = 0.0;
    std::uint64_t rng_seed = 0;

    Eigen::MatrixXd W_f, W_i, W_o, W_c;
    Eigen::MatrixXd U_f, U_i, U_o, U_c;
    Eigen::VectorXd b_f, b_i, b_o, b_c;
    Eigen::VectorXd head_w;
    double head_b = 0.0;

    // Visits parameter blocks in a fixed order (weights, recurrents,
    // biases, head); used by the optimizer and snapshot IO.
    void for_each_param(const std::function<void(Eigen::Map<Eigen::VectorXd>)>& fn);
    std::size_t param_count() const;
};

LstmModel make_lstm(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                    std::uint64_t seed);

struct LstmCache {
    Eigen::MatrixXd window;  // W x input_dim
    std::vector<Eigen::VectorXd> f, i, o, g, c, h, tanh_c;
    Eigen::VectorXd dropout_mask;  // inverted-dropout scaling, 1s when inactive
    double prediction = 0.0;
};

// Standard LSTM recurrence from zero initial state; inverted dropout on the
// final hidden vector only when dropout_active.
double lstm_forward(const LstmModel& model, const Eigen::MatrixXd& window, bool dropout_active,
                    Rng& rng, LstmCache* cache = nullptr);

struct LstmGradients {
    Eigen::MatrixXd W_f, W_i, W_o, W_c;
    Eigen::MatrixXd U_f, U_i, U_o, U_c;
    Eigen::VectorXd b_f, b_i, b_o, b_c;
    Eigen::VectorXd head_w;
    double head_b = 0.0;

    void setZero(const LstmModel& model);
    void for_each_param(const std::function<void(Eigen::Map<Eigen::VectorXd>)>& fn);
};

// Exact BPTT gradients; loss_grad is dL/dprediction. Accumulates into grads.
void lstm_backward(const LstmModel& model, const LstmCache& cache, double loss_grad,
                   LstmGradients& grads);

struct AdamState {
    std::vector<Eigen::VectorXd> m;  // one flat block per parameter
    std::vector<Eigen::VectorXd> v;
    std::size_t t = 0;
};

AdamState make_adam_state(LstmModel& model);

// One bias-corrected Adam update at the given effective learning rate.
// Throws DataError on non-finite gradients (names the block index).
void adam_step(LstmModel& model, LstmGradients& grads, AdamState& state, double lr_effective,
               const TrainConfig& config);

struct Sequence {
    Eigen::MatrixXd window;  // W x input_dim
    double target = 0.0;
    std::string station;
    Date date;  // final-step date
};

struct SequenceSet {
    std::vector<Sequence> sequences;
    std::size_t window_len = 0;
};

// Per-station chronological windows of length W; target at the final step.
// Stations with fewer than W records contribute no windows unless pad mode
// left-pads with the earliest record. Output ordered by final-step date
// (ties by station).
SequenceSet build_sequences(const FeatureMatrix& matrix, const std::vector<double>& targets,
                            std::size_t window_len, bool pad = false);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean training MSE per epoch
};

// Minibatch Adam on mean squared error; deterministic per config seed.
// Throws DivergenceError with epoch/step on NaN loss.
TrainResult train(LstmModel& model, const SequenceSet& sequences, const TrainConfig& config);

// Pure inference (dropout off).
std::vector<double> predict(const LstmModel& model, const SequenceSet& sequences);

// z-score helpers; stats with stddev below 1e-12 normalize by 1.
void fit_normalization(const FeatureMatrix& matrix, const std::vector<double>& target,
                       TrainConfig& config);
FeatureMatrix apply_feature_normalization(const FeatureMatrix& matrix, const TrainConfig& config);
std::vector<double> normalize_targets(const std::vector<double>& raw, const TrainConfig& config);
std::vector<double> denormalize_targets(const std::vector<double>& normed,
                                        const TrainConfig& config);

inline constexpr const char* kSnapshotHeader = "AQUASERIES-LSTM-v1";

// Snapshot: header line, JSON manifest (dims, config, seed, normalization
// stats, feature names), then parameters as little-endian f64.
std::string serialize_model(const LstmModel& model, const TrainConfig& config,
                            const std::vector<std::string>& feature_names);
struct ModelSnapshot {
    LstmModel model;
    TrainConfig config;
    std::vector<std::string> feature_names;
};
ModelSnapshot parse_model(const std::string& bytes, const std::string& origin);
void save_model(const LstmModel& model, const TrainConfig& config,
                const std::vector<std::string>& feature_names,
                const std::filesystem::path& path);
ModelSnapshot load_model(const std::filesystem::path& path);

}  // namespace aqua
