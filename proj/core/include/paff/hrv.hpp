#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "paff/dataset.hpp"

namespace paff {

/// The 11-feature HRV battery for one IBI series. Powers in s^2,
/// time-domain values in seconds, nn20 a count, pnn20 in [0, 1].
struct FeatureVector {
    double hf_power = 0.0;
    double lf_power = 0.0;
    double vlf_power = 0.0;
    double lf_hf_ratio = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double sdsd = 0.0;
    double nn20 = 0.0;
    double pnn20 = 0.0;
    double rmssd = 0.0;
    double multiscale_entropy = 0.0;

    static constexpr std::size_t kCount = 11;
    static const std::array<const char*, kCount>& names();
    std::array<double, kCount> as_array() const;
};

/// Time-domain fields only (mean, median, sdsd, nn20, pnn20, rmssd).
/// Difference-based fields require n >= 2 intervals.
FeatureVector time_features(const IbiSeries& series);

/// Integrated normalized Lomb-Scargle periodogram over [f_lo, f_hi] Hz.
/// Beat times are the cumulative sums of the intervals; the grid is
/// anchored at multiples of 1 mHz so adjacent bands tile exactly.
double lomb_scargle_power(const IbiSeries& series, double f_lo, double f_hi);

/// Sample entropy SampEn(m, r) of a scalar series, Chebyshev distance,
/// self-matches excluded. Returns +inf when no (m+1)-templates match;
/// a constant series gives 0 by the count_{m+1} = count_m convention.
double sample_entropy(const std::vector<double>& x, std::size_t m, double r);

struct MultiscaleEntropyResult {
    std::vector<double> per_scale;       // scales 1..5; +inf where degenerate
    std::vector<bool> excluded;          // true where a scale had no matches
    double mean = 0.0;                   // over non-excluded scales
};

/// SampEn(m=2, r=0.2*sigma of the scale-1 series) averaged over
/// coarse-grained scales 1..5. Requires n >= 40 intervals.
MultiscaleEntropyResult multiscale_entropy_detail(const IbiSeries& series);
double multiscale_entropy(const IbiSeries& series);

/// All 11 features. Spectral bands: HF [0.15,0.4], LF [0.04,0.15],
/// VLF [0.003,0.04] Hz.
FeatureVector all_features(const IbiSeries& series);

struct FeatureRow {
    std::string subject_id;
    std::string stimulus_id;
    IbiSource source = IbiSource::Ppg;
    FeatureVector features;
};

struct FeatureMatrix {
    std::vector<FeatureRow> rows;
    std::vector<std::string> skipped;  // "sample <i>: <reason>"
};

/// One row per sample that meets every per-feature precondition; the
/// rest are skipped with a reason.
FeatureMatrix feature_matrix(const Dataset& dataset);

/// Fixed 13-column delimited table: subject_id, source, then the 11
/// features in FeatureVector order.
void write_feature_table(const FeatureMatrix& matrix, const std::string& path);

}  // namespace paff
