#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "paff/rng.hpp"

namespace paff {

/// N-dimensional real array with an optional gradient buffer. Copies are
/// shallow (shared storage), so a Tensor can sit both in a parameter list
/// and on a tape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, bool requires_grad = false);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values,
           bool requires_grad = false);
    /// Keeps brace-literal values from binding to the requires_grad flag.
    Tensor(std::vector<std::size_t> shape, std::initializer_list<double> values,
           bool requires_grad = false)
        : Tensor(std::move(shape), std::vector<double>(values), requires_grad) {}
    static Tensor scalar(double value);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->values.size(); }
    /// Storage is shared between copies, so accessors are shallow-const.
    std::vector<double>& values() const { return impl_->values; }
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

    /// Gradient buffer, allocated (zeroed) on first access.
    std::vector<double>& grad() const;
    bool has_grad() const { return !impl_->grad.empty(); }
    void zero_grad() const;

    /// True for tensors produced by a recorded op; gradients flow through
    /// them even when requires_grad is false.
    bool on_tape() const { return impl_->on_tape; }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        std::vector<std::size_t> shape;
        std::vector<double> values;
        std::vector<double> grad;
        bool requires_grad = false;
        bool on_tape = false;
    };
    std::shared_ptr<Impl> impl_;
    friend class Tape;
};

/// Reverse-mode tape. Ops append a backward closure in execution order;
/// backward() replays them once in reverse. With recording disabled the
/// same ops run forward-only (used for MC-dropout inference).
class Tape {
public:
    void set_recording(bool flag) { recording_ = flag; }
    bool recording() const { return recording_; }

    // -- primitives -------------------------------------------------------
    /// input [L, C], kernels [w, C, F], bias [F] -> [L, F].
    /// Stride 1, same-length zero padding, window centred at floor(w/2).
    Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);
    /// x [n], W [n, m], b [m] -> [m].
    Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);
    Tensor relu(const Tensor& x);
    Tensor sigmoid(const Tensor& x);
    Tensor tanh(const Tensor& x);
    /// Inverted dropout, active whenever rate > 0 (training and MC inference).
    Tensor dropout(const Tensor& x, double rate, RngStream& rng);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& x, double factor);
    Tensor concat(const std::vector<Tensor>& parts);
    Tensor row(const Tensor& x, std::size_t index);       // [L, C] -> [C]
    Tensor slice(const Tensor& x, std::size_t from, std::size_t len);
    Tensor mean_rows(const Tensor& x);                    // [L, F] -> [F]
    Tensor sum(const Tensor& x);                          // -> scalar
    Tensor squared_error(const Tensor& pred, double target);  // [1] -> scalar

    /// Reverse accumulation from a scalar loss into every reachable
    /// gradient buffer.
    void backward(const Tensor& loss);

    std::size_t op_count() const { return ops_.size(); }

private:
    Tensor make_output(std::vector<std::size_t> shape);
    void record(std::function<void()> fn);
    static bool needs_grad(const Tensor& t) { return t.requires_grad() || t.on_tape(); }

    std::vector<std::function<void()>> ops_;
    bool recording_ = true;
};

/// Combined input+recurrent LSTM weights; gate order i, f, g, o.
struct LstmParams {
    Tensor weight;  // [input_dim + hidden, 4*hidden]
    Tensor bias;    // [4*hidden]
};

/// Final hidden state of a unidirectional pass over input [L, C].
Tensor lstm_last_hidden(Tape& tape, const Tensor& input, const LstmParams& params,
                        std::size_t hidden, bool reverse);

/// Concatenated final forward and backward hidden states -> [2*hidden].
Tensor bilstm(Tape& tape, const Tensor& input, const LstmParams& forward_params,
              const LstmParams& backward_params, std::size_t hidden);

}  // namespace paff
