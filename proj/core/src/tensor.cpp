#include "paff/tensor.hpp"

#include <cmath>

#include "paff/errors.hpp"

namespace paff {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ValidationError("Tensor: zero dimension");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, bool requires_grad) {
    impl_ = std::make_shared<Impl>();
    impl_->values.assign(shape_product(shape), 0.0);
    impl_->shape = std::move(shape);
    impl_->requires_grad = requires_grad;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad) {
    if (shape_product(shape) != values.size())
        throw ValidationError("Tensor: shape does not match value count");
    impl_ = std::make_shared<Impl>();
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) {
    return Tensor({1}, std::vector<double>{value});
}

double Tensor::item() const {
    if (size() != 1) throw ValidationError("Tensor::item: not a scalar");
    return impl_->values[0];
}

std::vector<double>& Tensor::grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() const {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tape::make_output(std::vector<std::size_t> shape) {
    Tensor out{std::move(shape)};
    if (recording_) out.impl_->on_tape = true;
    return out;
}

void Tape::record(std::function<void()> fn) {
    if (recording_) ops_.push_back(std::move(fn));
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw ValidationError("backward: loss must be a scalar");
    Tensor l = loss;
    l.grad()[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

Tensor Tape::conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    if (input.shape().size() != 2 || kernels.shape().size() != 3 || bias.shape().size() != 1)
        throw ValidationError("conv1d: expected input [L,C], kernels [w,C,F], bias [F]");
    const std::size_t len = input.shape()[0], channels = input.shape()[1];
    const std::size_t window = kernels.shape()[0], filters = kernels.shape()[2];
    if (kernels.shape()[1] != channels || bias.shape()[0] != filters)
        throw ValidationError("conv1d: shape mismatch");
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(window / 2);

    Tensor out = make_output({len, filters});
    const double* in = input.values().data();
    const double* k = kernels.values().data();
    const double* b = bias.values().data();
    double* o = out.values().data();
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t f = 0; f < filters; ++f) o[t * filters + f] = b[f];
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t i = 0; i < window; ++i) {
            const std::ptrdiff_t s =
                static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(i) - offset;
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) continue;
            for (std::size_t c = 0; c < channels; ++c) {
                const double xv = in[static_cast<std::size_t>(s) * channels + c];
                const double* krow = k + (i * channels + c) * filters;
                double* orow = o + t * filters;
                for (std::size_t f = 0; f < filters; ++f) orow[f] += xv * krow[f];
            }
        }
    }

    record([input, kernels, bias, out, len, channels, window, filters, offset]() mutable {
        const double* go = out.grad().data();
        const double* in = input.values().data();
        const double* k = kernels.values().data();
        const bool need_input = needs_grad(input);
        double* gin = need_input ? input.grad().data() : nullptr;
        double* gk = needs_grad(kernels) ? kernels.grad().data() : nullptr;
        double* gb = needs_grad(bias) ? bias.grad().data() : nullptr;
        if (gb)
            for (std::size_t t = 0; t < len; ++t)
                for (std::size_t f = 0; f < filters; ++f) gb[f] += go[t * filters + f];
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t i = 0; i < window; ++i) {
                const std::ptrdiff_t s =
                    static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(i) - offset;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) continue;
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t in_idx = static_cast<std::size_t>(s) * channels + c;
                    const double* krow = k + (i * channels + c) * filters;
                    const double* gorow = go + t * filters;
                    if (gk) {
                        double* gkrow = gk + (i * channels + c) * filters;
                        const double xv = in[in_idx];
                        for (std::size_t f = 0; f < filters; ++f) gkrow[f] += xv * gorow[f];
                    }
                    if (gin) {
                        double acc = 0.0;
                        for (std::size_t f = 0; f < filters; ++f) acc += krow[f] * gorow[f];
                        gin[in_idx] += acc;
                    }
                }
            }
        }
    });
    return out;
}

Tensor Tape::dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.shape().size() != 1 || weight.shape().size() != 2 || bias.shape().size() != 1)
        throw ValidationError("dense: expected x [n], W [n,m], b [m]");
    const std::size_t n = x.shape()[0], m = weight.shape()[1];
    if (weight.shape()[0] != n || bias.shape()[0] != m)
        throw ValidationError("dense: shape mismatch");

    Tensor out = make_output({m});
    const double* xv = x.values().data();
    const double* w = weight.values().data();
    double* o = out.values().data();
    for (std::size_t j = 0; j < m; ++j) o[j] = bias.values()[j];
    for (std::size_t i = 0; i < n; ++i) {
        const double v = xv[i];
        const double* wrow = w + i * m;
        for (std::size_t j = 0; j < m; ++j) o[j] += v * wrow[j];
    }

    record([x, weight, bias, out, n, m]() mutable {
        const double* go = out.grad().data();
        const double* xv = x.values().data();
        const double* w = weight.values().data();
        double* gx = needs_grad(x) ? x.grad().data() : nullptr;
        double* gw = needs_grad(weight) ? weight.grad().data() : nullptr;
        double* gb = needs_grad(bias) ? bias.grad().data() : nullptr;
        if (gb)
            for (std::size_t j = 0; j < m; ++j) gb[j] += go[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double* wrow = w + i * m;
            if (gw) {
                double* gwrow = gw + i * m;
                const double v = xv[i];
                for (std::size_t j = 0; j < m; ++j) gwrow[j] += v * go[j];
            }
            if (gx) {
                double acc = 0.0;
                for (std::size_t j = 0; j < m; ++j) acc += wrow[j] * go[j];
                gx[i] += acc;
            }
        }
    });
    return out;
}

Tensor Tape::relu(const Tensor& x) {
    Tensor out = make_output(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.values()[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
    record([x, out]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        // subgradient 0 at exactly 0
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (x.values()[i] > 0.0) gx[i] += go[i];
    });
    return out;
}

Tensor Tape::sigmoid(const Tensor& x) {
    Tensor out = make_output(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.values()[i] = 1.0 / (1.0 + std::exp(-x.values()[i]));
    record([x, out]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double s = out.values()[i];
            gx[i] += go[i] * s * (1.0 - s);
        }
    });
    return out;
}

Tensor Tape::tanh(const Tensor& x) {
    Tensor out = make_output(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.values()[i] = std::tanh(x.values()[i]);
    record([x, out]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double th = out.values()[i];
            gx[i] += go[i] * (1.0 - th * th);
        }
    });
    return out;
}

Tensor Tape::dropout(const Tensor& x, double rate, RngStream& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout: rate must be in [0, 1)");
    if (rate == 0.0) return x;
    Tensor out = make_output(x.shape());
    auto mask = std::make_shared<std::vector<double>>(x.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < x.size(); ++i) {
        (*mask)[i] = rng.next_double() < rate ? 0.0 : keep_scale;
        out.values()[i] = x.values()[i] * (*mask)[i];
    }
    record([x, out, mask]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * (*mask)[i];
    });
    return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ValidationError("add: shape mismatch");
    Tensor out = make_output(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
    record([a, b, out]() mutable {
        const auto& go = out.grad();
        if (needs_grad(a)) {
            auto& ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
        }
        if (needs_grad(b)) {
            auto& gb = b.grad();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i];
        }
    });
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ValidationError("mul: shape mismatch");
    Tensor out = make_output(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
    record([a, b, out]() mutable {
        const auto& go = out.grad();
        if (needs_grad(a)) {
            auto& ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * b.values()[i];
        }
        if (needs_grad(b)) {
            auto& gb = b.grad();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * a.values()[i];
        }
    });
    return out;
}

Tensor Tape::scale(const Tensor& x, double factor) {
    Tensor out = make_output(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.values()[i] = x.values()[i] * factor;
    record([x, out, factor]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
    return out;
}

Tensor Tape::concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ValidationError("concat: no inputs");
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 1) throw ValidationError("concat: 1-D tensors only");
        total += p.size();
    }
    Tensor out = make_output({total});
    std::size_t pos = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.values().begin() + pos);
        pos += p.size();
    }
    record([parts, out]() mutable {
        const auto& go = out.grad();
        std::size_t pos = 0;
        for (auto& p : parts) {
            if (needs_grad(p)) {
                auto& gp = p.grad();
                for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[pos + i];
            }
            pos += p.size();
        }
    });
    return out;
}

Tensor Tape::row(const Tensor& x, std::size_t index) {
    if (x.shape().size() != 2) throw ValidationError("row: expected [L,C]");
    const std::size_t cols = x.shape()[1];
    if (index >= x.shape()[0]) throw ValidationError("row: index out of range");
    Tensor out = make_output({cols});
    std::copy(x.values().begin() + index * cols, x.values().begin() + (index + 1) * cols,
              out.values().begin());
    record([x, out, index, cols]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (std::size_t i = 0; i < cols; ++i) gx[index * cols + i] += go[i];
    });
    return out;
}

Tensor Tape::slice(const Tensor& x, std::size_t from, std::size_t len) {
    if (x.shape().size() != 1 || from + len > x.size())
        throw ValidationError("slice: out of range");
    Tensor out = make_output({len});
    std::copy(x.values().begin() + from, x.values().begin() + from + len,
              out.values().begin());
    record([x, out, from, len]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        for (std::size_t i = 0; i < len; ++i) gx[from + i] += go[i];
    });
    return out;
}

Tensor Tape::mean_rows(const Tensor& x) {
    if (x.shape().size() != 2) throw ValidationError("mean_rows: expected [L,F]");
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    Tensor out = make_output({cols});
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t f = 0; f < cols; ++f) out.values()[f] += x.values()[t * cols + f];
    for (std::size_t f = 0; f < cols; ++f) out.values()[f] /= static_cast<double>(rows);
    record([x, out, rows, cols]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const auto& go = out.grad();
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t t = 0; t < rows; ++t)
            for (std::size_t f = 0; f < cols; ++f) gx[t * cols + f] += go[f] * inv;
    });
    return out;
}

Tensor Tape::sum(const Tensor& x) {
    Tensor out = make_output({1});
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    out.values()[0] = acc;
    record([x, out]() mutable {
        if (!needs_grad(x)) return;
        auto& gx = x.grad();
        const double g = out.grad()[0];
        for (auto& v : gx) v += g;
    });
    return out;
}

Tensor Tape::squared_error(const Tensor& pred, double target) {
    if (pred.size() != 1) throw ValidationError("squared_error: prediction must be scalar");
    Tensor out = make_output({1});
    const double diff = pred.values()[0] - target;
    out.values()[0] = diff * diff;
    record([pred, out, diff]() mutable {
        if (!needs_grad(pred)) return;
        pred.grad()[0] += 2.0 * diff * out.grad()[0];
    });
    return out;
}

Tensor lstm_last_hidden(Tape& tape, const Tensor& input, const LstmParams& params,
                        std::size_t hidden, bool reverse) {
    if (input.shape().size() != 2) throw ValidationError("lstm: expected input [L,C]");
    const std::size_t len = input.shape()[0], channels = input.shape()[1];
    if (params.weight.shape() !=
            std::vector<std::size_t>{channels + hidden, 4 * hidden} ||
        params.bias.shape() != std::vector<std::size_t>{4 * hidden})
        throw ValidationError("lstm: parameter shape mismatch");

    Tensor h({hidden});
    Tensor c({hidden});
    for (std::size_t step = 0; step < len; ++step) {
        const std::size_t t = reverse ? len - 1 - step : step;
        const Tensor xh = tape.concat({tape.row(input, t), h});
        const Tensor z = tape.dense(xh, params.weight, params.bias);
        const Tensor gate_i = tape.sigmoid(tape.slice(z, 0, hidden));
        const Tensor gate_f = tape.sigmoid(tape.slice(z, hidden, hidden));
        const Tensor cand = tape.tanh(tape.slice(z, 2 * hidden, hidden));
        const Tensor gate_o = tape.sigmoid(tape.slice(z, 3 * hidden, hidden));
        c = tape.add(tape.mul(gate_f, c), tape.mul(gate_i, cand));
        h = tape.mul(gate_o, tape.tanh(c));
    }
    return h;
}

Tensor bilstm(Tape& tape, const Tensor& input, const LstmParams& forward_params,
              const LstmParams& backward_params, std::size_t hidden) {
    const Tensor fwd = lstm_last_hidden(tape, input, forward_params, hidden, false);
    const Tensor bwd = lstm_last_hidden(tape, input, backward_params, hidden, true);
    return tape.concat({fwd, bwd});
}

}  // namespace paff
