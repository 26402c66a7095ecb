#include "paff/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "paff/errors.hpp"

namespace paff {

using json = nlohmann::ordered_json;

void ModelConfig::validate() const {
    if (conv_layers == 0 || conv_windows.size() != conv_layers)
        throw ValidationError("ModelConfig: conv_windows must list one window per layer");
    for (std::size_t i = 1; i < conv_windows.size(); ++i)
        if (conv_windows[i] >= conv_windows[i - 1])
            throw ValidationError("ModelConfig: conv windows must strictly decrease with depth");
    if (conv_filters == 0 || lstm_hidden == 0)
        throw ValidationError("ModelConfig: zero-width layer");
    if (conv_dropout < 0.0 || conv_dropout >= 1.0 || lstm_dropout < 0.0 || lstm_dropout >= 1.0)
        throw ValidationError("ModelConfig: dropout rates must be in [0, 1)");
    if (batch_size == 0 || epochs == 0) throw ValidationError("ModelConfig: zero epochs/batch");
    if (initial_lr <= 0.0 || lr_floor <= 0.0 || lr_floor > initial_lr)
        throw ValidationError("ModelConfig: invalid learning rates");
}

json ModelConfig::to_json() const {
    json j;
    j["conv_layers"] = conv_layers;
    j["conv_filters"] = conv_filters;
    j["conv_windows"] = conv_windows;
    j["conv_dropout"] = conv_dropout;
    j["lstm_hidden"] = lstm_hidden;
    j["lstm_dropout"] = lstm_dropout;
    j["epochs"] = epochs;
    j["initial_lr"] = initial_lr;
    j["lr_floor"] = lr_floor;
    j["patience"] = patience;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.conv_layers = j.at("conv_layers").get<std::size_t>();
    c.conv_filters = j.at("conv_filters").get<std::size_t>();
    c.conv_windows = j.at("conv_windows").get<std::vector<std::size_t>>();
    c.conv_dropout = j.at("conv_dropout").get<double>();
    c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    c.lstm_dropout = j.at("lstm_dropout").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.initial_lr = j.at("initial_lr").get<double>();
    c.lr_floor = j.at("lr_floor").get<double>();
    c.patience = j.at("patience").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

AffectModel AffectModel::build(const ModelConfig& config, std::size_t input_len) {
    config.validate();
    if (input_len < config.conv_windows.front())
        throw ValidationError("build_model: input_len shorter than the widest conv window");

    AffectModel model;
    model.config_ = config;
    model.input_len_ = input_len;
    RngStream rng(config.seed);

    std::size_t in_channels = 1;
    for (std::size_t l = 0; l < config.conv_layers; ++l) {
        const std::size_t w = config.conv_windows[l];
        RngStream layer_rng = rng.split(l);
        Tensor kernels =
            he_normal_init({w, in_channels, config.conv_filters}, w * in_channels, layer_rng);
        Tensor bias({config.conv_filters}, true);
        model.params_.emplace_back("conv" + std::to_string(l + 1) + ".kernels", kernels);
        model.params_.emplace_back("conv" + std::to_string(l + 1) + ".bias", bias);
        in_channels = config.conv_filters;
    }

    // BiLSTM: input rows Glorot-uniform, recurrent rows orthogonal per
    // gate block, forget-gate bias at 1.
    const std::size_t hidden = config.lstm_hidden;
    const auto make_lstm = [&](std::uint64_t salt) {
        RngStream lrng = rng.split(100 + salt);
        Tensor weight({1 + hidden, 4 * hidden}, true);
        auto& w = weight.values();
        const std::size_t cols = 4 * hidden;
        for (std::size_t gate = 0; gate < 4; ++gate) {
            RngStream grng = lrng.split(gate);
            Tensor in_block = glorot_uniform_init({1, hidden}, 1, hidden, grng);
            for (std::size_t j = 0; j < hidden; ++j)
                w[0 * cols + gate * hidden + j] = in_block.values()[j];
            const auto rec = orthogonal_matrix(hidden, grng);
            for (std::size_t r = 0; r < hidden; ++r)
                for (std::size_t j = 0; j < hidden; ++j)
                    w[(1 + r) * cols + gate * hidden + j] = rec[r * hidden + j];
        }
        Tensor bias({4 * hidden}, true);
        for (std::size_t j = 0; j < hidden; ++j) bias.values()[hidden + j] = 1.0;
        return LstmParams{weight, bias};
    };
    model.lstm_forward_ = make_lstm(0);
    model.lstm_backward_ = make_lstm(1);
    model.params_.emplace_back("lstm_fw.weight", model.lstm_forward_.weight);
    model.params_.emplace_back("lstm_fw.bias", model.lstm_forward_.bias);
    model.params_.emplace_back("lstm_bw.weight", model.lstm_backward_.weight);
    model.params_.emplace_back("lstm_bw.bias", model.lstm_backward_.bias);

    RngStream drng = rng.split(200);
    Tensor dense_w = glorot_uniform_init({config.concat_dim(), 1}, config.concat_dim(), 1, drng);
    Tensor dense_b({1}, true);
    model.params_.emplace_back("dense.weight", dense_w);
    model.params_.emplace_back("dense.bias", dense_b);
    return model;
}

Tensor AffectModel::forward(Tape& tape, const std::vector<double>& sequence, bool stochastic,
                            RngStream& rng) const {
    if (sequence.size() != input_len_)
        throw ValidationError("forward: sequence length " + std::to_string(sequence.size()) +
                              " does not match model input_len " + std::to_string(input_len_));
    const double conv_rate = stochastic ? config_.conv_dropout : 0.0;
    const double lstm_rate = stochastic ? config_.lstm_dropout : 0.0;

    Tensor x({input_len_, 1}, sequence);
    Tensor h = x;
    for (std::size_t l = 0; l < config_.conv_layers; ++l) {
        const Tensor& kernels = params_[2 * l].second;
        const Tensor& bias = params_[2 * l + 1].second;
        h = tape.relu(tape.dropout(tape.conv1d(h, kernels, bias), conv_rate, rng));
    }
    const Tensor conv_vec = tape.mean_rows(h);

    const Tensor lstm_vec = tape.dropout(
        bilstm(tape, x, lstm_forward_, lstm_backward_, config_.lstm_hidden), lstm_rate, rng);

    const Tensor& dense_w = params_[params_.size() - 2].second;
    const Tensor& dense_b = params_[params_.size() - 1].second;
    return tape.dense(tape.concat({conv_vec, lstm_vec}), dense_w, dense_b);
}

double AffectModel::forward_stochastic(const std::vector<double>& sequence,
                                       RngStream& rng) const {
    Tape tape;
    tape.set_recording(false);
    return forward(tape, sequence, true, rng).item();
}

double AffectModel::predict(const std::vector<double>& sequence) const {
    Tape tape;
    tape.set_recording(false);
    RngStream unused(0);
    return forward(tape, sequence, false, unused).item();
}

std::vector<Tensor> AffectModel::parameters() {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (auto& [name, tensor] : params_) out.push_back(tensor);
    return out;
}

std::size_t AffectModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, tensor] : params_) n += tensor.size();
    return n;
}

TrainResult AffectModel::train(const std::vector<TrainSample>& samples) {
    return train(samples, config_);
}

TrainResult AffectModel::train(const std::vector<TrainSample>& samples,
                               const ModelConfig& run_config) {
    if (samples.empty()) throw ValidationError("train: empty training set");
    for (const auto& s : samples)
        if (s.sequence.size() != input_len_)
            throw ValidationError("train: sample length does not match model input length");

    auto params = parameters();
    AdamState adam;
    adam.init(params);
    PlateauScheduler scheduler;
    scheduler.current_lr = run_config.initial_lr;
    scheduler.floor_lr = run_config.lr_floor;
    scheduler.patience = run_config.patience;

    RngStream shuffle_rng = RngStream(run_config.seed).split(1);
    RngStream dropout_root = RngStream(run_config.seed).split(2);

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    double lr = scheduler.current_lr;
    for (std::size_t epoch = 0; epoch < run_config.epochs; ++epoch) {
        shuffle(order, shuffle_rng);
        RngStream epoch_rng = dropout_root.split(epoch);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < order.size(); start += run_config.batch_size) {
            const std::size_t end = std::min(order.size(), start + run_config.batch_size);
            for (auto& p : params) p.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                RngStream sample_rng = epoch_rng.split(order[b]);
                Tape tape;
                const Tensor pred = forward(tape, samples[order[b]].sequence, true, sample_rng);
                const Tensor loss = tape.squared_error(pred, samples[order[b]].target);
                if (!std::isfinite(loss.item()))
                    throw NumericError("train: non-finite loss at epoch " +
                                       std::to_string(epoch));
                epoch_loss += loss.item();
                tape.backward(loss);
            }
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (auto& p : params)
                if (p.has_grad())
                    for (auto& g : p.grad()) g *= inv_batch;
            if (!adam_step(params, adam, lr)) result.rejected_steps += 1;
        }

        epoch_loss /= static_cast<double>(samples.size());
        result.loss_history.push_back(epoch_loss);
        lr = scheduler.step(epoch_loss);
    }
    epochs_completed = result.loss_history.size();
    final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    return result;
}

// ---- checkpoint container ---------------------------------------------

namespace {

constexpr char kMagic[4] = {'P', 'A', 'F', 'F'};
constexpr std::uint16_t kFormatVersion = 1;

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

template <typename T>
void put(std::string& buf, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(reinterpret_cast<char*>(bytes), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw ValidationError("checkpoint: truncated file");
    T value;
    std::memcpy(&value, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

}  // namespace

void AffectModel::save_checkpoint(const std::string& path) const {
    std::string buf;
    buf.append(kMagic, 4);
    put<std::uint16_t>(buf, kFormatVersion);

    json meta;
    meta["config"] = config_.to_json();
    meta["input_len"] = input_len_;
    meta["seed"] = config_.seed;
    meta["epochs_completed"] = epochs_completed;
    meta["final_loss"] = final_loss;
    const std::string meta_str = meta.dump();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(meta_str.size()));
    buf.append(meta_str);

    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, tensor] : params_) {
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(name.size()));
        buf.append(name);
        put<std::uint8_t>(buf, static_cast<std::uint8_t>(tensor.shape().size()));
        for (std::size_t d : tensor.shape()) put<std::uint64_t>(buf, d);
        for (double v : tensor.values()) put<double>(buf, v);
    }
    put<std::uint32_t>(buf, crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()));

    // Atomic write: temp file then rename.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ValidationError("cannot write checkpoint: " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw ValidationError("short write to checkpoint: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ValidationError("cannot rename checkpoint into place: " + path);
}

AffectModel AffectModel::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 10 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw ValidationError("checkpoint: bad magic bytes");
    const std::uint32_t stored_crc =
        crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4);
    std::size_t tail = buf.size() - 4;
    if (take<std::uint32_t>(buf, tail) != stored_crc)
        throw ValidationError("checkpoint: checksum mismatch (corrupt or truncated file)");

    std::size_t pos = 4;
    const auto version = take<std::uint16_t>(buf, pos);
    if (version != kFormatVersion)
        throw ValidationError("checkpoint: unsupported format version " +
                              std::to_string(version));
    const auto meta_len = take<std::uint32_t>(buf, pos);
    if (pos + meta_len > buf.size()) throw ValidationError("checkpoint: truncated metadata");
    const json meta = json::parse(buf.substr(pos, meta_len));
    pos += meta_len;

    AffectModel model = build(ModelConfig::from_json(meta.at("config")),
                              meta.at("input_len").get<std::size_t>());
    model.epochs_completed = meta.at("epochs_completed").get<std::size_t>();
    model.final_loss = meta.at("final_loss").get<double>();

    const auto n_tensors = take<std::uint32_t>(buf, pos);
    if (n_tensors != model.params_.size())
        throw ValidationError("checkpoint: tensor count mismatch");
    for (auto& [expected_name, tensor] : model.params_) {
        const auto name_len = take<std::uint16_t>(buf, pos);
        if (pos + name_len > buf.size()) throw ValidationError("checkpoint: truncated name");
        const std::string name = buf.substr(pos, name_len);
        pos += name_len;
        if (name != expected_name)
            throw ValidationError("checkpoint: unexpected tensor '" + name + "'");
        const auto ndim = take<std::uint8_t>(buf, pos);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(take<std::uint64_t>(buf, pos));
        if (shape != tensor.shape()) throw ValidationError("checkpoint: tensor shape mismatch");
        for (auto& v : tensor.values()) v = take<double>(buf, pos);
    }
    return model;
}

}  // namespace paff
