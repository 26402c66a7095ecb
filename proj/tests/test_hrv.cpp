#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "paff/errors.hpp"
#include "paff/hrv.hpp"
#include "paff/rng.hpp"

using namespace paff;

namespace {

IbiSeries series_of(std::vector<double> intervals) {
    IbiSeries s;
    s.subject_id = "T";
    s.stimulus_id = "t";
    s.intervals = std::move(intervals);
    return s;
}

std::vector<double> modulated(double baseline, double depth, double freq_hz, std::size_t n,
                              double noise, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> x;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ibi =
            baseline + depth * std::sin(2.0 * M_PI * freq_hz * t) + noise * rng.next_normal();
        x.push_back(ibi);
        t += ibi;
    }
    return x;
}

// Direct-formula references, written independently of the library code.

double ref_band_power(const std::vector<double>& intervals, double f_lo, double f_hi) {
    const std::size_t n = intervals.size();
    std::vector<double> t(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += intervals[i];
        t[i] = acc;
    }
    double mean = 0.0;
    for (double v : intervals) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> c(n);
    double variance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = intervals[i] - mean;
        variance += c[i] * c[i];
    }
    variance /= static_cast<double>(n);

    auto p_at = [&](double f) {
        const double w = 2.0 * M_PI * f;
        double s2 = 0.0, c2 = 0.0;
        for (double ti : t) {
            s2 += std::sin(2.0 * w * ti);
            c2 += std::cos(2.0 * w * ti);
        }
        const double tau = std::atan2(s2, c2) / (2.0 * w);
        double xc = 0.0, xs = 0.0, cc = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = w * (t[i] - tau);
            xc += c[i] * std::cos(a);
            xs += c[i] * std::sin(a);
            cc += std::cos(a) * std::cos(a);
            ss += std::sin(a) * std::sin(a);
        }
        double p = 0.0;
        if (cc > 0.0) p += xc * xc / cc;
        if (ss > 0.0) p += xs * xs / ss;
        return p / (2.0 * variance);
    };

    std::vector<double> grid;
    grid.push_back(f_lo);
    for (long k = static_cast<long>(std::floor(f_lo / 0.001 + 1e-9)) + 1;
         static_cast<double>(k) * 0.001 < f_hi - 1e-12; ++k) {
        const double f = static_cast<double>(k) * 0.001;
        if (f > f_lo + 1e-12) grid.push_back(f);
    }
    grid.push_back(f_hi);

    double power = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        power += 0.5 * (p_at(grid[i]) + p_at(grid[i - 1])) * (grid[i] - grid[i - 1]);
    return power;
}

double ref_sampen(const std::vector<double>& x, std::size_t m, double r) {
    // Both template sets restricted to the n - m start positions so the
    // counts are comparable.
    std::size_t a = 0, b = 0;
    const std::size_t n_templates = x.size() - m;
    for (std::size_t i = 0; i < n_templates; ++i) {
        for (std::size_t j = 0; j < n_templates; ++j) {
            if (i == j) continue;
            bool ok = true;
            for (std::size_t k = 0; k < m && ok; ++k)
                ok = std::fabs(x[i + k] - x[j + k]) <= r;
            if (!ok) continue;
            ++a;
            if (std::fabs(x[i + m] - x[j + m]) <= r) ++b;
        }
    }
    if (a == 0 || b == 0) return std::numeric_limits<double>::infinity();
    return -std::log(static_cast<double>(b) / static_cast<double>(a));
}

}  // namespace

TEST_CASE("constant series time features") {
    const auto f = time_features(series_of(std::vector<double>(10, 1.0)));
    CHECK(f.mean == doctest::Approx(1.0));
    CHECK(f.median == doctest::Approx(1.0));
    CHECK(f.sdsd == 0.0);
    CHECK(f.rmssd == 0.0);
    CHECK(f.nn20 == 0.0);
    CHECK(f.pnn20 == 0.0);
}

TEST_CASE("alternating series time features") {
    std::vector<double> x;
    for (int i = 0; i < 5; ++i) {
        x.push_back(0.8);
        x.push_back(1.0);
    }
    const auto f = time_features(series_of(x));
    CHECK(f.rmssd == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(f.nn20 == 9.0);
    CHECK(f.pnn20 == doctest::Approx(1.0));
    CHECK(f.mean == doctest::Approx(0.9));
    CHECK(f.median == doctest::Approx(0.9));
}

TEST_CASE("single interval rejects difference features") {
    CHECK_THROWS_AS(time_features(series_of({0.9})), ValidationError);
    CHECK_THROWS_AS(time_features(series_of({})), ValidationError);
}

TEST_CASE("random 200-interval battery matches direct-formula reference") {
    const auto x = modulated(0.9, 0.05, 0.22, 200, 0.01, 17);
    const auto s = series_of(x);
    const auto f = all_features(s);

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= 200.0;
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[99] + sorted[100]);
    double sd = 0.0, sd2 = 0.0;
    std::size_t nn20 = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double d = x[i] - x[i - 1];
        sd += d;
        sd2 += d * d;
        if (std::fabs(d) > 0.02) ++nn20;
    }
    const double m = 199.0;

    CHECK(f.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(f.median == doctest::Approx(median).epsilon(1e-12));
    CHECK(f.rmssd == doctest::Approx(std::sqrt(sd2 / m)).epsilon(1e-12));
    CHECK(f.sdsd ==
          doctest::Approx(std::sqrt(sd2 / m - (sd / m) * (sd / m))).epsilon(1e-12));
    CHECK(f.nn20 == static_cast<double>(nn20));
    CHECK(f.pnn20 == doctest::Approx(static_cast<double>(nn20) / m).epsilon(1e-12));

    const double hf = ref_band_power(x, 0.15, 0.4);
    const double lf = ref_band_power(x, 0.04, 0.15);
    const double vlf = ref_band_power(x, 0.003, 0.04);
    CHECK(f.hf_power == doctest::Approx(hf).epsilon(1e-12));
    CHECK(f.lf_power == doctest::Approx(lf).epsilon(1e-12));
    CHECK(f.vlf_power == doctest::Approx(vlf).epsilon(1e-12));
    CHECK(f.lf_hf_ratio == doctest::Approx(lf / hf).epsilon(1e-12));

    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double r = 0.2 * std::sqrt(var / 200.0);
    double mse_sum = 0.0;
    std::size_t kept = 0;
    for (std::size_t tau = 1; tau <= 5; ++tau) {
        std::vector<double> coarse;
        for (std::size_t i = 0; i + tau <= x.size(); i += tau) {
            double block = 0.0;
            for (std::size_t k = 0; k < tau; ++k) block += x[i + k];
            coarse.push_back(block / static_cast<double>(tau));
        }
        const double e = ref_sampen(coarse, 2, r);
        if (std::isfinite(e)) {
            mse_sum += e;
            ++kept;
        }
    }
    REQUIRE(kept > 0);
    CHECK(f.multiscale_entropy == doctest::Approx(mse_sum / kept).epsilon(1e-12));
}

TEST_CASE("0.25 Hz modulation concentrates power in HF") {
    const auto s = series_of(modulated(0.9, 0.05, 0.25, 300, 0.0, 1));
    const double hf = lomb_scargle_power(s, 0.15, 0.4);
    const double lf = lomb_scargle_power(s, 0.04, 0.15);
    const double vlf = lomb_scargle_power(s, 0.003, 0.04);
    CHECK(hf > 5.0 * (lf + vlf));
    CHECK(hf == doctest::Approx(ref_band_power(s.intervals, 0.15, 0.4)).epsilon(1e-10));
}

TEST_CASE("0.1 Hz modulation concentrates power in LF") {
    const auto s = series_of(modulated(0.9, 0.05, 0.10, 300, 0.0, 1));
    const double hf = lomb_scargle_power(s, 0.15, 0.4);
    const double lf = lomb_scargle_power(s, 0.04, 0.15);
    const double vlf = lomb_scargle_power(s, 0.003, 0.04);
    CHECK(lf > 5.0 * (hf + vlf));
}

TEST_CASE("constant series has no spectral power") {
    const auto s = series_of(std::vector<double>(100, 0.9));
    CHECK(lomb_scargle_power(s, 0.15, 0.4) < 1e-12);
    CHECK(lomb_scargle_power(s, 0.04, 0.15) < 1e-12);
    CHECK(lomb_scargle_power(s, 0.003, 0.04) < 1e-12);
}

TEST_CASE("adjacent bands tile additively") {
    const auto s = series_of(modulated(0.9, 0.04, 0.18, 250, 0.01, 3));
    const double split = lomb_scargle_power(s, 0.04, 0.15) + lomb_scargle_power(s, 0.15, 0.4);
    const double whole = lomb_scargle_power(s, 0.04, 0.4);
    CHECK(split == doctest::Approx(whole).epsilon(1e-6));
}

TEST_CASE("band beyond the Nyquist-equivalent frequency is rejected") {
    const auto s = series_of(std::vector<double>{1.4, 1.5, 1.4, 1.5, 1.4, 1.5});
    CHECK_THROWS_AS(lomb_scargle_power(s, 0.15, 0.4), ValidationError);
}

TEST_CASE("sample entropy of a constant series is zero") {
    CHECK(sample_entropy(std::vector<double>(50, 1.0), 2, 0.0) == 0.0);
}

TEST_CASE("sample entropy equals the brute-force oracle") {
    RngStream rng(5);
    std::vector<double> x(120);
    for (auto& v : x) v = rng.next_double();
    const double r = 0.2;
    CHECK(sample_entropy(x, 2, r) == ref_sampen(x, 2, r));
    CHECK(sample_entropy(x, 1, r) == ref_sampen(x, 1, r));
}

TEST_CASE("periodic series is less entropic than iid noise") {
    std::vector<double> periodic, iid;
    RngStream rng(8);
    for (int i = 0; i < 100; ++i) {
        periodic.push_back(i % 2 == 0 ? 0.8 : 1.0);
        iid.push_back(0.8 + 0.2 * rng.next_double());
    }
    const double r = 0.05;
    CHECK(sample_entropy(periodic, 2, r) < sample_entropy(iid, 2, r));
}

TEST_CASE("multiscale entropy preconditions and shape") {
    CHECK_THROWS_AS(multiscale_entropy(series_of(std::vector<double>(39, 0.9))),
                    ValidationError);
    const auto s = series_of(modulated(0.9, 0.03, 0.2, 120, 0.01, 2));
    const auto detail = multiscale_entropy_detail(s);
    CHECK(detail.per_scale.size() == 5);
    CHECK(detail.excluded.size() == 5);
    double sum = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        if (!detail.excluded[i]) {
            sum += detail.per_scale[i];
            ++kept;
        }
    }
    REQUIRE(kept > 0);
    CHECK(detail.mean == doctest::Approx(sum / kept));
}

TEST_CASE("feature matrix keeps valid rows and logs the rest") {
    Dataset d;
    Sample good;
    good.series = series_of(modulated(0.9, 0.04, 0.2, 80, 0.01, 4));
    good.series.subject_id = "A";
    d.samples.push_back(good);
    Sample ecg = good;
    ecg.series.subject_id = "B";
    ecg.series.source = IbiSource::Ecg;
    ecg.series.intervals = modulated(0.85, 0.04, 0.25, 80, 0.01, 6);
    d.samples.push_back(ecg);
    Sample bad;
    bad.series = series_of({0.9});
    bad.series.subject_id = "C";
    d.samples.push_back(bad);
    d.recompute_max_length();

    const auto matrix = feature_matrix(d);
    REQUIRE(matrix.rows.size() == 2);
    CHECK(matrix.rows[0].features.as_array().size() == FeatureVector::kCount);
    CHECK(matrix.rows[0].source == IbiSource::Ppg);
    CHECK(matrix.rows[1].source == IbiSource::Ecg);
    REQUIRE(matrix.skipped.size() == 1);
    CHECK(matrix.skipped[0].find("sample 2") != std::string::npos);
}

TEST_CASE("feature table has the fixed 13-column layout") {
    Dataset d;
    Sample s;
    s.series = series_of(modulated(0.9, 0.04, 0.2, 80, 0.01, 4));
    s.series.subject_id = "A";
    d.samples.push_back(s);
    const std::string path =
        "/tmp/paff_test_hrv_" + std::to_string(::getpid()) + ".tsv";
    write_feature_table(feature_matrix(d), path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    auto cols = [](const std::string& line) {
        return 1 + static_cast<int>(std::count(line.begin(), line.end(), '\t'));
    };
    CHECK(cols(header) == 13);
    CHECK(cols(row) == 13);
    std::remove(path.c_str());
}
