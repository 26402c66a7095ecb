#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "paff/model.hpp"
#include "paff/rng.hpp"
#include "paff/tensor.hpp"

using namespace paff;

namespace {

std::vector<double> make_sequence(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.3 * i);
    return x;
}

}  // namespace

static void BM_Conv1d(benchmark::State& state) {
    const std::size_t L = static_cast<std::size_t>(state.range(0));
    RngStream rng(3);
    auto fill = [&](Tensor& t) {
        for (auto& v : t.values()) v = rng.next_normal();
    };
    Tensor x({L, 64});
    Tensor k({8, 64, 128});
    Tensor b({128});
    fill(x);
    fill(k);
    fill(b);
    for (auto _ : state) {
        Tape tape;
        tape.set_recording(false);
        Tensor y = tape.conv1d(x, k, b);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(BM_Conv1d)->Arg(64)->Arg(256);

static void BM_ForwardDeterministic(benchmark::State& state) {
    ModelConfig config;
    config.seed = 1;
    const std::size_t len = 64;
    const auto model = AffectModel::build(config, len);
    const auto seq = make_sequence(len);
    for (auto _ : state) {
        const double y = model.predict(seq);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_ForwardDeterministic);

static void BM_ForwardStochastic(benchmark::State& state) {
    ModelConfig config;
    config.seed = 1;
    const std::size_t len = 64;
    const auto model = AffectModel::build(config, len);
    const auto seq = make_sequence(len);
    RngStream rng(7);
    for (auto _ : state) {
        const double y = model.forward_stochastic(seq, rng);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_ForwardStochastic);

static void BM_TrainEpoch(benchmark::State& state) {
    ModelConfig config;
    config.seed = 1;
    config.epochs = 1;
    config.batch_size = 8;
    const std::size_t len = 64;
    std::vector<TrainSample> samples;
    RngStream rng(11);
    for (int i = 0; i < 8; ++i) {
        TrainSample s;
        s.sequence = make_sequence(len);
        for (auto& v : s.sequence) v += 0.1 * rng.next_normal();
        s.target = (i % 2) ? 0.9 : 0.1;
        samples.push_back(std::move(s));
    }
    for (auto _ : state) {
        auto model = AffectModel::build(config, len);
        const auto result = model.train(samples);
        benchmark::DoNotOptimize(result.loss_history.data());
    }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);
