#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "paff/optim.hpp"
#include "paff/tensor.hpp"

namespace paff {

/// Architecture and training hyper-parameters. Defaults follow the
/// published configuration; only the seed has no canonical value.
struct ModelConfig {
    std::size_t conv_layers = 4;
    std::size_t conv_filters = 128;
    std::vector<std::size_t> conv_windows = {8, 6, 4, 2};
    double conv_dropout = 0.5;
    std::size_t lstm_hidden = 32;  // per direction
    double lstm_dropout = 0.8;
    std::size_t epochs = 1000;
    double initial_lr = 1e-3;
    double lr_floor = 1e-4;
    std::size_t patience = 100;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    std::size_t concat_dim() const { return conv_filters + 2 * lstm_hidden; }
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::ordered_json& j);
};

struct TrainSample {
    std::vector<double> sequence;  // z-normalized, padded
    double target = 0.0;           // normalized valence in [0, 1]
};

struct TrainResult {
    std::vector<double> loss_history;  // per-epoch mean squared error
    std::size_t rejected_steps = 0;    // non-finite-gradient updates skipped
};

/// Two-stream regression network: a 4-layer convolutional stream with
/// global average pooling and a BiLSTM stream, concatenated into a dense
/// scalar valence estimate. Dropout stays active for MC inference.
class AffectModel {
public:
    static AffectModel build(const ModelConfig& config, std::size_t input_len);

    /// Stochastic scalar forward pass (dropout masks drawn from rng).
    double forward_stochastic(const std::vector<double>& sequence, RngStream& rng) const;
    /// Deterministic forward pass (all dropout off).
    double predict(const std::vector<double>& sequence) const;
    /// Tape-building forward used by the training loop; exposed for
    /// gradient checking.
    Tensor forward(Tape& tape, const std::vector<double>& sequence, bool stochastic,
                   RngStream& rng) const;

    TrainResult train(const std::vector<TrainSample>& samples);
    TrainResult train(const std::vector<TrainSample>& samples, const ModelConfig& overrides);

    void save_checkpoint(const std::string& path) const;
    static AffectModel load_checkpoint(const std::string& path);

    const ModelConfig& config() const { return config_; }
    std::size_t input_len() const { return input_len_; }
    std::vector<Tensor> parameters();
    const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
        return params_;
    }
    std::size_t parameter_count() const;

    // Training-run metadata carried in checkpoints.
    std::size_t epochs_completed = 0;
    double final_loss = 0.0;

private:
    AffectModel() = default;

    ModelConfig config_;
    std::size_t input_len_ = 0;
    std::vector<std::pair<std::string, Tensor>> params_;
    LstmParams lstm_forward_;
    LstmParams lstm_backward_;
};

}  // namespace paff
