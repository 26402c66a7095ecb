#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "paff/hrv.hpp"
#include "paff/rng.hpp"

using namespace paff;

namespace {

IbiSeries make_series(std::size_t n) {
    RngStream rng(9);
    IbiSeries s;
    s.subject_id = "bench";
    for (std::size_t i = 0; i < n; ++i)
        s.intervals.push_back(0.9 + 0.05 * std::sin(0.2 * i) + 0.01 * rng.next_normal());
    return s;
}

}  // namespace

static void BM_LombScargleHf(benchmark::State& state) {
    const IbiSeries series = make_series(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const double p = lomb_scargle_power(series, 0.15, 0.4);
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(BM_LombScargleHf)->Arg(64)->Arg(128)->Arg(512);

static void BM_SampleEntropy(benchmark::State& state) {
    const IbiSeries series = make_series(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const double e = sample_entropy(series.intervals, 2, 0.02);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(BM_SampleEntropy)->Arg(64)->Arg(256)->Arg(1024);

static void BM_FullFeatureVector(benchmark::State& state) {
    const IbiSeries series = make_series(128);
    for (auto _ : state) {
        const FeatureVector f = all_features(series);
        benchmark::DoNotOptimize(f.hf_power);
    }
}
BENCHMARK(BM_FullFeatureVector);
