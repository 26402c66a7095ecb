#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <unistd.h>

#include "paff/ecg.hpp"
#include "paff/errors.hpp"
#include "paff/rng.hpp"

using namespace paff;

namespace {

std::vector<double> random_beat_times(double lo_ibi, double hi_ibi, double duration,
                                      std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> times;
    double t = 0.5;
    while (t < duration) {
        times.push_back(t);
        t += rng.uniform(lo_ibi, hi_ibi);
    }
    return times;
}

/// Fraction of true beats with a detection within the window; greedy
/// one-to-one matching on sorted times.
double sensitivity(const std::vector<double>& truth, const std::vector<double>& detected,
                   double window_s) {
    std::size_t hits = 0;
    std::size_t j = 0;
    for (double t : truth) {
        while (j < detected.size() && detected[j] < t - window_s) ++j;
        if (j < detected.size() && std::abs(detected[j] - t) <= window_s) {
            ++hits;
            ++j;
        }
    }
    return truth.empty() ? 0.0 : static_cast<double>(hits) / truth.size();
}

}  // namespace

TEST_CASE("clean synthetic ECG is detected with high sensitivity") {
    const auto truth = random_beat_times(0.5, 1.2, 60.0, 7);
    const EcgTrace trace = synth_ecg(truth, 256.0, 0.0, 7);
    const auto beats = detect_beats(trace);
    CHECK(sensitivity(truth, beats.peak_times_s, 0.020) >= 0.99);
}

TEST_CASE("noisy synthetic ECG stays above the sensitivity bar") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const auto truth = random_beat_times(0.5, 1.2, 60.0, seed);
        const EcgTrace trace = synth_ecg(truth, 256.0, 0.05, seed);
        const auto beats = detect_beats(trace);
        CHECK(sensitivity(truth, beats.peak_times_s, 0.020) >= 0.99);
    }
}

TEST_CASE("all-zero trace yields no beats") {
    EcgTrace trace;
    trace.sampling_rate_hz = 256.0;
    trace.samples_mv.assign(256 * 10, 0.0);
    CHECK(detect_beats(trace).peak_times_s.empty());
}

TEST_CASE("alternating 0.7/0.9 rhythm is recovered") {
    std::vector<double> truth;
    double t = 0.5;
    for (int i = 0; i < 60; ++i) {
        truth.push_back(t);
        t += (i % 2 == 0) ? 0.7 : 0.9;
    }
    const EcgTrace trace = synth_ecg(truth, 256.0, 0.0, 1);
    const auto beats = detect_beats(trace);
    CHECK(sensitivity(truth, beats.peak_times_s, 0.020) >= 0.99);
    const IbiSeries ibis = ibis_from_beats(beats);
    REQUIRE(ibis.intervals.size() >= 50);
    // Skip the first recovered interval in case the very first beat is
    // missed during threshold warm-up.
    for (std::size_t i = 1; i + 1 < ibis.intervals.size(); ++i) {
        const double near07 = std::abs(ibis.intervals[i] - 0.7);
        const double near09 = std::abs(ibis.intervals[i] - 0.9);
        CHECK(std::min(near07, near09) <= 0.040);
    }
}

TEST_CASE("ibis_from_beats takes successive differences") {
    BeatAnnotations b;
    b.peak_times_s = {0.0, 0.8, 1.6};
    const auto s = ibis_from_beats(b);
    REQUIRE(s.intervals.size() == 2);
    CHECK(s.intervals[0] == doctest::Approx(0.8));
    CHECK(s.intervals[1] == doctest::Approx(0.8));

    b.peak_times_s = {0.0, 1.0};
    CHECK(ibis_from_beats(b).intervals == std::vector<double>({1.0}));

    b.peak_times_s = random_beat_times(0.5, 1.2, 30.0, 5);
    CHECK(ibis_from_beats(b).intervals.size() == b.peak_times_s.size() - 1);
}

TEST_CASE("single template beat peaks at its nominal time") {
    const EcgTrace trace = synth_ecg({1.0}, 256.0, 0.0, 0);
    const auto it = std::max_element(trace.samples_mv.begin(), trace.samples_mv.end());
    const double peak_t =
        static_cast<double>(it - trace.samples_mv.begin()) / trace.sampling_rate_hz;
    CHECK(std::abs(peak_t - 1.0) <= 1.0 / trace.sampling_rate_hz);
}

TEST_CASE("synthesis is deterministic per seed") {
    const auto truth = random_beat_times(0.6, 1.0, 20.0, 4);
    const EcgTrace a = synth_ecg(truth, 256.0, 0.05, 42);
    const EcgTrace b = synth_ecg(truth, 256.0, 0.05, 42);
    CHECK(a.samples_mv == b.samples_mv);
    const EcgTrace c = synth_ecg(truth, 256.0, 0.05, 43);
    CHECK(a.samples_mv != c.samples_mv);
}

TEST_CASE("trace files round-trip") {
    const std::string path =
        "/tmp/paff_test_ecg_" + std::to_string(::getpid()) + ".jsonl";
    EcgTrace t = synth_ecg({0.5, 1.3, 2.1}, 200.0, 0.0, 9);
    t.subject_id = "S01";
    t.stimulus_id = "v03";
    t.raw_report = 7;
    save_ecg_traces({t}, path);
    const auto back = load_ecg_traces(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].subject_id == "S01");
    CHECK(back[0].sampling_rate_hz == doctest::Approx(200.0));
    CHECK(back[0].samples_mv.size() == t.samples_mv.size());
    CHECK(back[0].raw_report == 7);
    std::remove(path.c_str());
}
