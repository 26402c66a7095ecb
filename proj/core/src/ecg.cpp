#include "paff/ecg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "paff/errors.hpp"
#include "paff/rng.hpp"

namespace paff {

using json = nlohmann::ordered_json;

namespace {

constexpr double kRefractoryS = 0.2;
constexpr double kRefineWindowS = 0.06;

void validate_trace(const EcgTrace& trace) {
    if (trace.sampling_rate_hz < 100.0)
        throw ValidationError("EcgTrace: sampling_rate_hz must be >= 100");
    if (static_cast<double>(trace.samples_mv.size()) < 2.0 * trace.sampling_rate_hz)
        throw ValidationError("EcgTrace: need >= 2 s of signal");
    for (double v : trace.samples_mv)
        if (!std::isfinite(v)) throw ValidationError("EcgTrace: non-finite sample");
}

// One-pole 0.5-40 Hz band-pass.
std::vector<double> band_pass(const std::vector<double>& x, double fs) {
    const double dt = 1.0 / fs;
    const double rc_hp = 1.0 / (2.0 * M_PI * 0.5);
    const double rc_lp = 1.0 / (2.0 * M_PI * 40.0);
    const double a = rc_hp / (rc_hp + dt);
    const double b = dt / (rc_lp + dt);
    std::vector<double> y(x.size(), 0.0);
    double hp = 0.0, prev_x = x.empty() ? 0.0 : x[0], lp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        hp = a * (hp + x[i] - prev_x);
        prev_x = x[i];
        lp += b * (hp - lp);
        y[i] = lp;
    }
    return y;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
    if (w < 1) w = 1;
    std::vector<double> out(x.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += x[i];
        if (i >= w) acc -= x[i - w];
        out[i] = acc / static_cast<double>(std::min(i + 1, w));
    }
    return out;
}

double window_max(const std::vector<double>& y, std::ptrdiff_t lo, std::ptrdiff_t hi) {
    lo = std::max<std::ptrdiff_t>(lo, 0);
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(y.size()) - 1);
    double m = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) m = std::max(m, y[i]);
    return m;
}

}  // namespace

BeatAnnotations detect_beats(const EcgTrace& trace) {
    validate_trace(trace);
    const double fs = trace.sampling_rate_hz;
    const std::size_t n = trace.samples_mv.size();

    const auto filtered = band_pass(trace.samples_mv, fs);
    // Slope over a ~8 ms span; the QRS upstroke is sustained across it
    // while wideband noise largely cancels.
    const std::size_t dstep = std::max<std::size_t>(1, std::lround(0.008 * fs));
    std::vector<double> deriv(n, 0.0);
    for (std::size_t i = dstep; i < n; ++i)
        deriv[i] = std::fabs(filtered[i] - filtered[i - dstep]);
    const auto envelope = moving_average(deriv, std::max<std::size_t>(1, std::lround(0.04 * fs)));

    // Initial steep-slope level from the first 5 s.
    const std::size_t init_len = std::min(n, static_cast<std::size_t>(std::lround(5.0 * fs)));
    double init_max = 0.0, init_sum = 0.0;
    for (std::size_t i = 0; i < init_len; ++i) {
        init_max = std::max(init_max, envelope[i]);
        init_sum += envelope[i];
    }
    if (init_max <= 0.0) return {};  // flat trace, nothing to detect

    std::vector<double> m5{0.6 * init_max};  // recent steep-slope levels, up to 5
    double integrating = 0.2 * (init_sum / static_cast<double>(init_len));
    std::vector<double> rr_history;  // last accepted inter-beat intervals

    const auto mean_m = [&m5] {
        double s = 0.0;
        for (double v : m5) s += v;
        return s / static_cast<double>(m5.size());
    };

    BeatAnnotations beats;
    double last_beat_time = -1e9;
    const std::ptrdiff_t w50 = std::max<std::ptrdiff_t>(1, std::lround(0.05 * fs));
    const std::ptrdiff_t refine_w = std::lround(kRefineWindowS * fs);
    bool below = true;

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double m_base = mean_m();

        // Steep-slope component: flat for 200 ms after a beat, then a
        // linear drop to 60% over the next second.
        double m_t = m_base;
        const double since = t - last_beat_time;
        if (since > 0.2 && since < 1.2)
            m_t = m_base * (1.0 - 0.4 * (since - 0.2));
        else if (since >= 1.2)
            m_t = 0.6 * m_base;

        // Integrating component follows slow changes of high-frequency content.
        if (i > static_cast<std::size_t>(w50) * 14) {
            const auto ip = static_cast<std::ptrdiff_t>(i);
            const double recent = window_max(envelope, ip - w50 + 1, ip);
            const double older = window_max(envelope, ip - 14 * w50 + 1, ip - 13 * w50);
            integrating += (recent - older) / 150.0;
            integrating = std::clamp(integrating, 0.0, m_base);
        }

        // Beat-expectation component: lower the bar when a beat is overdue.
        double expectation = 0.0;
        if (!rr_history.empty()) {
            double rr_mean = 0.0;
            for (double rr : rr_history) rr_mean += rr;
            rr_mean /= static_cast<double>(rr_history.size());
            if (since > (2.0 / 3.0) * rr_mean) {
                const double overdue = (since - (2.0 / 3.0) * rr_mean) / rr_mean;
                expectation = -std::min(1.0, overdue) * 0.4 * m_base / 1.4;
            }
        }

        const double threshold = std::max(m_t + integrating + expectation, 0.1 * m_base);
        const bool above = envelope[i] > threshold;
        if (above && below && since >= kRefractoryS) {
            // Refine to the local maximum of the band-passed signal.
            const auto ip = static_cast<std::ptrdiff_t>(i);
            std::ptrdiff_t best = ip;
            for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, ip - refine_w);
                 j <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, ip + refine_w);
                 ++j)
                if (std::fabs(filtered[j]) > std::fabs(filtered[best])) best = j;
            const double beat_time = static_cast<double>(best) / fs;
            if (beat_time > last_beat_time + kRefractoryS) {
                if (!beats.peak_times_s.empty())
                    rr_history.push_back(beat_time - last_beat_time);
                if (rr_history.size() > 5) rr_history.erase(rr_history.begin());
                beats.peak_times_s.push_back(beat_time);

                double m_new = 0.6 * window_max(envelope, ip, ip + std::lround(0.04 * fs));
                if (m_new > 1.5 * m5.back()) m_new = 1.1 * m5.back();
                // A low outlier (noise-triggered crossing) must not drag
                // the whole buffer down and start a false-positive cascade.
                if (m_new < 0.6 * m5.back()) m_new = 0.6 * m5.back();
                m5.push_back(m_new);
                if (m5.size() > 5) m5.erase(m5.begin());
                last_beat_time = beat_time;
            }
        }
        below = !above;
    }
    return beats;
}

IbiSeries ibis_from_beats(const BeatAnnotations& beats) {
    if (beats.peak_times_s.size() < 2)
        throw ValidationError("ibis_from_beats: need at least 2 peaks");
    IbiSeries series;
    series.source = IbiSource::Ecg;
    series.intervals.reserve(beats.peak_times_s.size() - 1);
    for (std::size_t i = 1; i < beats.peak_times_s.size(); ++i) {
        const double ibi = beats.peak_times_s[i] - beats.peak_times_s[i - 1];
        if (ibi <= 0.0) throw ValidationError("ibis_from_beats: peak times not increasing");
        series.intervals.push_back(ibi);
    }
    return series;
}

EcgTrace synth_ecg(const std::vector<double>& beat_times_s, double sampling_rate_hz,
                   double noise_std, std::uint64_t seed) {
    if (sampling_rate_hz < 100.0) throw ValidationError("synth_ecg: sampling rate must be >= 100");
    if (noise_std < 0.0) throw ValidationError("synth_ecg: noise_std must be >= 0");
    for (std::size_t i = 1; i < beat_times_s.size(); ++i)
        if (beat_times_s[i] <= beat_times_s[i - 1])
            throw ValidationError("synth_ecg: beat times must be strictly increasing");

    const double duration =
        std::max(2.0, (beat_times_s.empty() ? 0.0 : beat_times_s.back()) + 0.5);
    const auto n = static_cast<std::size_t>(std::lround(duration * sampling_rate_hz));
    EcgTrace trace;
    trace.sampling_rate_hz = sampling_rate_hz;
    trace.samples_mv.assign(n, 0.0);

    // QRS template: narrow R wave with small Q and S lobes.
    const auto qrs = [](double dt) {
        return std::exp(-dt * dt / (2.0 * 0.012 * 0.012)) -
               0.15 * std::exp(-(dt + 0.028) * (dt + 0.028) / (2.0 * 0.008 * 0.008)) -
               0.20 * std::exp(-(dt - 0.030) * (dt - 0.030) / (2.0 * 0.009 * 0.009));
    };
    for (double beat : beat_times_s) {
        const auto lo = static_cast<std::ptrdiff_t>(std::floor((beat - 0.1) * sampling_rate_hz));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((beat + 0.1) * sampling_rate_hz));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
             i <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n) - 1); ++i)
            trace.samples_mv[i] += qrs(static_cast<double>(i) / sampling_rate_hz - beat);
    }
    if (noise_std > 0.0) {
        RngStream rng(seed);
        for (auto& v : trace.samples_mv) v += noise_std * rng.next_normal();
    }
    return trace;
}

std::vector<EcgTrace> load_ecg_traces(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open ECG file: " + path);
    std::vector<EcgTrace> traces;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": malformed record: " + e.what());
        }
        for (const char* key : {"subject_id", "stimulus_id", "sampling_rate_hz", "ecg_mv"})
            if (!rec.contains(key))
                throw ValidationError("line " + std::to_string(line_no) + ": missing key '" +
                                      key + "'");
        EcgTrace trace;
        trace.subject_id = rec.at("subject_id").get<std::string>();
        trace.stimulus_id = rec.at("stimulus_id").get<std::string>();
        trace.sampling_rate_hz = rec.at("sampling_rate_hz").get<double>();
        trace.samples_mv = rec.at("ecg_mv").get<std::vector<double>>();
        trace.raw_report = rec.value("raw_report", 0);
        trace.scale_min = rec.value("scale_min", 1);
        trace.scale_max = rec.value("scale_max", 9);
        try {
            validate_trace(trace);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        traces.push_back(std::move(trace));
    }
    if (traces.empty()) throw ValidationError("ECG file is empty: " + path);
    return traces;
}

void save_ecg_traces(const std::vector<EcgTrace>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write ECG file: " + path);
    for (const auto& t : traces) {
        json rec;
        rec["subject_id"] = t.subject_id;
        rec["stimulus_id"] = t.stimulus_id;
        rec["source"] = "ecg";
        rec["raw_report"] = t.raw_report;
        rec["scale_min"] = t.scale_min;
        rec["scale_max"] = t.scale_max;
        rec["sampling_rate_hz"] = t.sampling_rate_hz;
        rec["ecg_mv"] = t.samples_mv;
        out << rec.dump() << '\n';
    }
}

}  // namespace paff
