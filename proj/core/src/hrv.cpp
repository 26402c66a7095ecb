#include "paff/hrv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "paff/errors.hpp"

namespace paff {

namespace {
constexpr double kGridStepHz = 0.001;
constexpr double kNn20ThresholdS = 0.02;
}  // namespace

const std::array<const char*, FeatureVector::kCount>& FeatureVector::names() {
    static const std::array<const char*, kCount> kNames = {
        "hf_power", "lf_power",  "vlf_power", "lf_hf_ratio", "mean",   "median",
        "sdsd",     "nn20",      "pnn20",     "rmssd",       "multiscale_entropy"};
    return kNames;
}

std::array<double, FeatureVector::kCount> FeatureVector::as_array() const {
    return {hf_power, lf_power, vlf_power, lf_hf_ratio, mean, median,
            sdsd,     nn20,     pnn20,     rmssd,       multiscale_entropy};
}

FeatureVector time_features(const IbiSeries& series) {
    const auto& x = series.intervals;
    if (x.empty()) throw ValidationError("time_features: empty series");

    FeatureVector f;
    f.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    f.median = (sorted.size() % 2 == 1) ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    if (x.size() < 2)
        throw ValidationError("time_features: need >= 2 intervals for successive differences");
    double sum_d = 0.0, sum_d2 = 0.0;
    std::size_t nn20 = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double d = x[i] - x[i - 1];
        sum_d += d;
        sum_d2 += d * d;
        if (std::fabs(d) > kNn20ThresholdS) ++nn20;
    }
    const double m = static_cast<double>(x.size() - 1);
    f.rmssd = std::sqrt(sum_d2 / m);
    f.sdsd = std::sqrt(std::max(0.0, sum_d2 / m - (sum_d / m) * (sum_d / m)));
    f.nn20 = static_cast<double>(nn20);
    f.pnn20 = static_cast<double>(nn20) / m;
    return f;
}

namespace {

/// Scargle-normalized periodogram value at angular frequency omega.
double periodogram_at(const std::vector<double>& t, const std::vector<double>& c,
                      double variance, double omega) {
    double s2 = 0.0, c2 = 0.0;
    for (double ti : t) {
        s2 += std::sin(2.0 * omega * ti);
        c2 += std::cos(2.0 * omega * ti);
    }
    const double tau = 0.5 * std::atan2(s2, c2) / omega;
    double cs = 0.0, ss = 0.0, cc = 0.0, s_sq = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
        const double arg = omega * (t[j] - tau);
        const double co = std::cos(arg), si = std::sin(arg);
        cs += c[j] * co;
        ss += c[j] * si;
        cc += co * co;
        s_sq += si * si;
    }
    double p = 0.0;
    if (cc > 0.0) p += cs * cs / cc;
    if (s_sq > 0.0) p += ss * ss / s_sq;
    return p / (2.0 * variance);
}

}  // namespace

double lomb_scargle_power(const IbiSeries& series, double f_lo, double f_hi) {
    const auto& x = series.intervals;
    if (x.size() < 4) throw ValidationError("lomb_scargle_power: need >= 4 intervals");
    if (!(f_hi > f_lo) || !(f_lo > 0.0))
        throw ValidationError("lomb_scargle_power: need f_hi > f_lo > 0");
    const double min_interval = *std::min_element(x.begin(), x.end());
    const double nyquist = 0.5 / min_interval;
    if (f_hi > nyquist)
        throw ValidationError("lomb_scargle_power: band exceeds Nyquist-equivalent " +
                              std::to_string(nyquist) + " Hz");

    // Beat times from cumulative interval sums.
    std::vector<double> t(x.size());
    std::partial_sum(x.begin(), x.end(), t.begin());
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    std::vector<double> c(x.size());
    double variance = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        c[j] = x[j] - mean;
        variance += c[j] * c[j];
    }
    variance /= n;
    // Constant input up to rounding noise carries no oscillatory power.
    if (variance <= 1e-24 * mean * mean) return 0.0;

    // Grid anchored at absolute multiples of the step so that adjacent
    // bands share their boundary point and tile additively.
    std::vector<double> grid;
    grid.push_back(f_lo);
    const auto k_lo = static_cast<long>(std::floor(f_lo / kGridStepHz + 1e-9)) + 1;
    for (long k = k_lo; k * kGridStepHz < f_hi - 1e-12; ++k) {
        const double f = static_cast<double>(k) * kGridStepHz;
        if (f > f_lo + 1e-12) grid.push_back(f);
    }
    grid.push_back(f_hi);

    double power = 0.0;
    double prev_f = grid[0];
    double prev_p = periodogram_at(t, c, variance, 2.0 * M_PI * prev_f);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double f = grid[i];
        const double p = periodogram_at(t, c, variance, 2.0 * M_PI * f);
        power += 0.5 * (p + prev_p) * (f - prev_f);
        prev_f = f;
        prev_p = p;
    }
    return power;
}

double sample_entropy(const std::vector<double>& x, std::size_t m, double r) {
    if (x.size() < m + 2) throw ValidationError("sample_entropy: series too short");
    const std::size_t n_templates = x.size() - m;  // templates of length m and m+1
    std::size_t count_m = 0, count_m1 = 0;
    for (std::size_t i = 0; i + 1 < n_templates; ++i) {
        for (std::size_t j = i + 1; j < n_templates; ++j) {
            bool match_m = true;
            for (std::size_t k = 0; k < m; ++k) {
                if (std::fabs(x[i + k] - x[j + k]) > r) {
                    match_m = false;
                    break;
                }
            }
            if (!match_m) continue;
            ++count_m;
            if (std::fabs(x[i + m] - x[j + m]) <= r) ++count_m1;
        }
    }
    if (count_m == 0 || count_m1 == 0) return std::numeric_limits<double>::infinity();
    return -std::log(static_cast<double>(count_m1) / static_cast<double>(count_m));
}

MultiscaleEntropyResult multiscale_entropy_detail(const IbiSeries& series) {
    const auto& x = series.intervals;
    if (x.size() < 40) throw ValidationError("multiscale_entropy: need >= 40 intervals");

    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double r = 0.2 * std::sqrt(var / n);

    MultiscaleEntropyResult result;
    double sum = 0.0;
    std::size_t kept = 0;
    for (std::size_t tau = 1; tau <= 5; ++tau) {
        std::vector<double> coarse;
        coarse.reserve(x.size() / tau);
        for (std::size_t i = 0; i + tau <= x.size(); i += tau) {
            double block = 0.0;
            for (std::size_t k = 0; k < tau; ++k) block += x[i + k];
            coarse.push_back(block / static_cast<double>(tau));
        }
        const double e = sample_entropy(coarse, 2, r);
        result.per_scale.push_back(e);
        const bool degenerate = !std::isfinite(e);
        result.excluded.push_back(degenerate);
        if (!degenerate) {
            sum += e;
            ++kept;
        }
    }
    result.mean = kept > 0 ? sum / static_cast<double>(kept)
                           : std::numeric_limits<double>::infinity();
    return result;
}

double multiscale_entropy(const IbiSeries& series) {
    return multiscale_entropy_detail(series).mean;
}

FeatureVector all_features(const IbiSeries& series) {
    FeatureVector f = time_features(series);
    f.hf_power = lomb_scargle_power(series, 0.15, 0.4);
    f.lf_power = lomb_scargle_power(series, 0.04, 0.15);
    f.vlf_power = lomb_scargle_power(series, 0.003, 0.04);
    f.lf_hf_ratio = f.hf_power > 0.0 ? f.lf_power / f.hf_power : 0.0;
    f.multiscale_entropy = multiscale_entropy(series);
    return f;
}

FeatureMatrix feature_matrix(const Dataset& dataset) {
    FeatureMatrix matrix;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& sample = dataset.samples[i];
        try {
            FeatureRow row;
            row.subject_id = sample.series.subject_id;
            row.stimulus_id = sample.series.stimulus_id;
            row.source = sample.series.source;
            row.features = all_features(sample.series);
            if (!std::isfinite(row.features.multiscale_entropy))
                throw ValidationError("multiscale entropy degenerate (no template matches)");
            matrix.rows.push_back(std::move(row));
        } catch (const ValidationError& e) {
            matrix.skipped.push_back("sample " + std::to_string(i) + ": " + e.what());
        }
    }
    return matrix;
}

void write_feature_table(const FeatureMatrix& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write feature table: " + path);
    out << "subject_id\tsource";
    for (const char* name : FeatureVector::names()) out << '\t' << name;
    out << '\n';
    out.precision(12);
    for (const auto& row : matrix.rows) {
        out << row.subject_id << '\t' << to_string(row.source);
        for (double v : row.features.as_array()) out << '\t' << v;
        out << '\n';
    }
}

}  // namespace paff
