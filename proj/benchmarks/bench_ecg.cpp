#include <benchmark/benchmark.h>

#include <vector>

#include "paff/ecg.hpp"
#include "paff/rng.hpp"

using namespace paff;

namespace {

EcgTrace make_trace(double duration_s, double fs, double noise) {
    RngStream rng(5);
    std::vector<double> beats;
    double t = 0.4;
    while (t < duration_s) {
        beats.push_back(t);
        t += rng.uniform(0.6, 1.1);
    }
    return synth_ecg(beats, fs, noise, 5);
}

}  // namespace

static void BM_DetectBeats(benchmark::State& state) {
    const double duration = static_cast<double>(state.range(0));
    const EcgTrace trace = make_trace(duration, 256.0, 0.03);
    for (auto _ : state) {
        auto beats = detect_beats(trace);
        benchmark::DoNotOptimize(beats.peak_times_s.data());
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(trace.samples_mv.size()));
}
BENCHMARK(BM_DetectBeats)->Arg(60)->Arg(300);

static void BM_DetectBeatsHighRate(benchmark::State& state) {
    const EcgTrace trace = make_trace(60.0, 1000.0, 0.03);
    for (auto _ : state) {
        auto beats = detect_beats(trace);
        benchmark::DoNotOptimize(beats.peak_times_s.data());
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(trace.samples_mv.size()));
}
BENCHMARK(BM_DetectBeatsHighRate);
