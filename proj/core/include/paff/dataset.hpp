#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace paff {

enum class IbiSource { Ecg, Ppg };

const char* to_string(IbiSource source);
IbiSource ibi_source_from_string(const std::string& s);

/// Inter-beat-interval sequence for one (subject, stimulus) recording.
struct IbiSeries {
    std::string subject_id;
    std::string stimulus_id;
    IbiSource source = IbiSource::Ppg;
    std::vector<double> intervals;  // seconds, each in (0.2, 3.0)
};

/// Self-reported valence on the collection scale, normalized to [0, 1].
struct ValenceLabel {
    enum class Binary { Low, High, Neutral };

    int raw_report = 0;
    int scale_min = 1;
    int scale_max = 5;
    double normalized = 0.0;  // (raw - min) / (max - min)
    Binary binary = Binary::Neutral;

    static ValenceLabel from_raw(int raw, int scale_min, int scale_max);
};

const char* to_string(ValenceLabel::Binary b);

struct Sample {
    IbiSeries series;
    ValenceLabel label;
};

struct Dataset {
    std::vector<Sample> samples;
    /// Longest interval sequence among the samples (time steps).
    std::size_t max_train_length = 0;

    std::vector<std::string> subject_ids() const;  // distinct, sorted
    void recompute_max_length();
};

/// Parse a line-record dataset file. Invalid records abort the load with
/// the offending line number in the message.
Dataset load_dataset(const std::string& path);

void save_dataset(const Dataset& dataset, const std::string& path);

/// Zero-mean unit-variance (population std) rescaling. A constant input
/// maps to all zeros.
std::vector<double> z_normalize(const std::vector<double>& values);

/// Fix the length: shorter inputs get trailing zeros, longer ones keep
/// their first `target_len` elements.
std::vector<double> pad_or_cut(const std::vector<double>& values, std::size_t target_len);

struct LosoFold {
    std::string held_out_subject;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Leave-one-subject-out folds over `iterations` subjects drawn without
/// replacement. Neutral-labeled samples are excluded from both sides of
/// every fold (they have no binary class).
std::vector<LosoFold> loso_folds(const Dataset& dataset, std::size_t iterations,
                                 std::uint64_t seed);

}  // namespace paff
