#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paff/dataset.hpp"

namespace paff {

/// Raw single-lead ECG recording.
struct EcgTrace {
    std::string subject_id;
    std::string stimulus_id;
    double sampling_rate_hz = 256.0;  // >= 100
    std::vector<double> samples_mv;   // >= 2 s of signal
    // Optional label carried through to extracted IBI records.
    int raw_report = 0;
    int scale_min = 1;
    int scale_max = 9;
};

struct BeatAnnotations {
    std::vector<double> peak_times_s;  // strictly increasing
};

/// QRS detection with a combined adaptive threshold: a steep-slope
/// component tracking recent QRS amplitudes, an integrating component
/// following high-frequency content, and a beat-expectation component
/// that lowers the bar when a beat is overdue. 0.2 s refractory after
/// each accepted beat; peak times refined to the local maximum of the
/// filtered signal near the crossing.
BeatAnnotations detect_beats(const EcgTrace& trace);

/// intervals[i] = peak_times_s[i+1] - peak_times_s[i]
IbiSeries ibis_from_beats(const BeatAnnotations& beats);

/// Synthetic ECG for oracle testing: each beat is a fixed QRS template
/// (narrow positive Gaussian flanked by small negative lobes) plus white
/// noise. Deterministic per seed.
EcgTrace synth_ecg(const std::vector<double>& beat_times_s, double sampling_rate_hz,
                   double noise_std, std::uint64_t seed);

/// Line-record ECG container (keys sampling_rate_hz / ecg_mv).
std::vector<EcgTrace> load_ecg_traces(const std::string& path);
void save_ecg_traces(const std::vector<EcgTrace>& traces, const std::string& path);

}  // namespace paff
