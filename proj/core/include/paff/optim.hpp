#pragma once

#include <limits>
#include <vector>

#include "paff/rng.hpp"
#include "paff/tensor.hpp"

namespace paff {

/// Bias-corrected Adam accumulators for a fixed parameter list.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    void init(const std::vector<Tensor>& params);
};

/// One Adam update from the gradients currently held by `params`.
/// A non-finite gradient rejects the whole step and returns false.
bool adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

/// Halves the learning rate after `patience` epochs without improvement,
/// clamped at floor_lr.
struct PlateauScheduler {
    double current_lr = 1e-3;
    double floor_lr = 1e-4;
    std::size_t patience = 100;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_improvement = 0;

    /// Feed one epoch loss; returns the learning rate to use next.
    double step(double epoch_loss);
};

/// i.i.d. N(0, 2/fan_in) draws.
Tensor he_normal_init(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng);

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform_init(std::vector<std::size_t> shape, std::size_t fan_in,
                           std::size_t fan_out, RngStream& rng);

/// Random n x n orthogonal matrix (Gram-Schmidt on a normal draw).
std::vector<double> orthogonal_matrix(std::size_t n, RngStream& rng);

}  // namespace paff
