#include "paff/optim.hpp"

#include <cmath>

#include "paff/errors.hpp"

namespace paff {

void AdamState::init(const std::vector<Tensor>& params) {
    step_count = 0;
    first_moment.clear();
    second_moment.clear();
    for (const auto& p : params) {
        first_moment.emplace_back(p.size(), 0.0);
        second_moment.emplace_back(p.size(), 0.0);
    }
}

bool adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    if (state.first_moment.size() != params.size())
        throw ValidationError("adam_step: state not initialized for this parameter list");
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        for (double g : p.grad())
            if (!std::isfinite(g)) return false;  // step rejected
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const bool has_grad = p.has_grad();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = has_grad ? p.grad()[j] : 0.0;
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p.values()[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
    return true;
}

double PlateauScheduler::step(double epoch_loss) {
    if (!std::isfinite(epoch_loss)) throw NumericError("scheduler: non-finite epoch loss");
    if (epoch_loss < best_loss - 1e-6) {
        best_loss = epoch_loss;
        epochs_since_improvement = 0;
    } else {
        epochs_since_improvement += 1;
        if (epochs_since_improvement >= patience) {
            current_lr = std::max(floor_lr, 0.5 * current_lr);
            epochs_since_improvement = 0;
        }
    }
    return current_lr;
}

Tensor he_normal_init(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng) {
    if (fan_in == 0) throw ValidationError("he_normal_init: fan_in must be >= 1");
    Tensor t(std::move(shape), true);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.values()) v = std_dev * rng.next_normal();
    return t;
}

Tensor glorot_uniform_init(std::vector<std::size_t> shape, std::size_t fan_in,
                           std::size_t fan_out, RngStream& rng) {
    Tensor t(std::move(shape), true);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.values()) v = rng.uniform(-limit, limit);
    return t;
}

std::vector<double> orthogonal_matrix(std::size_t n, RngStream& rng) {
    std::vector<double> m(n * n);
    for (auto& v : m) v = rng.next_normal();
    // Modified Gram-Schmidt over rows.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += m[i * n + j] * m[k * n + j];
            for (std::size_t j = 0; j < n; ++j) m[i * n + j] -= dot * m[k * n + j];
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) norm += m[i * n + j] * m[i * n + j];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate draw; fall back to a unit vector.
            for (std::size_t j = 0; j < n; ++j) m[i * n + j] = (j == i % n) ? 1.0 : 0.0;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] /= norm;
    }
    return m;
}

}  // namespace paff
