#include "paff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "paff/errors.hpp"
#include "paff/rng.hpp"

namespace paff {

using json = nlohmann::ordered_json;

namespace {
constexpr double kIbiLowerBound = 0.2;  // seconds, exclusive
constexpr double kIbiUpperBound = 3.0;
}  // namespace

const char* to_string(IbiSource source) {
    return source == IbiSource::Ecg ? "ecg" : "ppg";
}

IbiSource ibi_source_from_string(const std::string& s) {
    if (s == "ecg") return IbiSource::Ecg;
    if (s == "ppg") return IbiSource::Ppg;
    throw ValidationError("unknown IBI source tag: '" + s + "'");
}

const char* to_string(ValenceLabel::Binary b) {
    switch (b) {
        case ValenceLabel::Binary::Low: return "low";
        case ValenceLabel::Binary::High: return "high";
        default: return "neutral";
    }
}

ValenceLabel ValenceLabel::from_raw(int raw, int scale_min, int scale_max) {
    if (scale_max <= scale_min)
        throw ValidationError("valence scale must satisfy scale_max > scale_min");
    if (raw < scale_min || raw > scale_max)
        throw ValidationError("raw_report " + std::to_string(raw) + " outside scale [" +
                              std::to_string(scale_min) + ", " + std::to_string(scale_max) + "]");
    ValenceLabel label;
    label.raw_report = raw;
    label.scale_min = scale_min;
    label.scale_max = scale_max;
    label.normalized =
        static_cast<double>(raw - scale_min) / static_cast<double>(scale_max - scale_min);
    if (label.normalized < 0.5)
        label.binary = Binary::Low;
    else if (label.normalized > 0.5)
        label.binary = Binary::High;
    else
        label.binary = Binary::Neutral;
    return label;
}

std::vector<std::string> Dataset::subject_ids() const {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.series.subject_id);
    return {ids.begin(), ids.end()};
}

void Dataset::recompute_max_length() {
    max_train_length = 0;
    for (const auto& s : samples)
        max_train_length = std::max(max_train_length, s.series.intervals.size());
}

namespace {

Sample parse_record(const json& rec, std::size_t line_no) {
    const auto fail = [line_no](const std::string& what) -> ValidationError {
        return ValidationError("line " + std::to_string(line_no) + ": " + what);
    };
    for (const char* key :
         {"subject_id", "stimulus_id", "source", "raw_report", "scale_min", "scale_max",
          "ibi_seconds"}) {
        if (!rec.contains(key)) throw fail(std::string("missing key '") + key + "'");
    }
    Sample sample;
    sample.series.subject_id = rec.at("subject_id").get<std::string>();
    sample.series.stimulus_id = rec.at("stimulus_id").get<std::string>();
    sample.series.source = ibi_source_from_string(rec.at("source").get<std::string>());
    try {
        sample.label = ValenceLabel::from_raw(rec.at("raw_report").get<int>(),
                                              rec.at("scale_min").get<int>(),
                                              rec.at("scale_max").get<int>());
    } catch (const ValidationError& e) {
        throw fail(e.what());
    }
    const auto& ibis = rec.at("ibi_seconds");
    if (!ibis.is_array() || ibis.empty()) throw fail("ibi_seconds must be a non-empty array");
    sample.series.intervals.reserve(ibis.size());
    for (const auto& v : ibis) {
        const double x = v.get<double>();
        if (!std::isfinite(x) || x <= kIbiLowerBound || x >= kIbiUpperBound)
            throw fail("interval " + std::to_string(x) + " outside physiological bounds (0.2, 3.0) s");
        sample.series.intervals.push_back(x);
    }
    return sample;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset file: " + path);
    Dataset dataset;
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
        dataset.samples.push_back(parse_record(rec, line_no));
    }
    if (dataset.samples.empty()) throw ValidationError("dataset file is empty: " + path);
    dataset.recompute_max_length();
    return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write dataset file: " + path);
    for (const auto& s : dataset.samples) {
        json rec;
        rec["subject_id"] = s.series.subject_id;
        rec["stimulus_id"] = s.series.stimulus_id;
        rec["source"] = to_string(s.series.source);
        rec["raw_report"] = s.label.raw_report;
        rec["scale_min"] = s.label.scale_min;
        rec["scale_max"] = s.label.scale_max;
        rec["ibi_seconds"] = s.series.intervals;
        out << rec.dump() << '\n';
    }
}

std::vector<double> z_normalize(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("z_normalize: empty input");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    std::vector<double> out(values.size(), 0.0);
    if (sd > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    }
    return out;
}

std::vector<double> pad_or_cut(const std::vector<double>& values, std::size_t target_len) {
    if (target_len == 0) throw ValidationError("pad_or_cut: target_len must be >= 1");
    std::vector<double> out(target_len, 0.0);
    const std::size_t keep = std::min(values.size(), target_len);
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(keep), out.begin());
    return out;
}

std::vector<LosoFold> loso_folds(const Dataset& dataset, std::size_t iterations,
                                 std::uint64_t seed) {
    auto subjects = dataset.subject_ids();
    if (subjects.size() < 2) throw ValidationError("loso_folds: need >= 2 distinct subjects");
    if (iterations > subjects.size())
        throw ValidationError("loso_folds: iterations (" + std::to_string(iterations) +
                              ") exceeds subject count (" + std::to_string(subjects.size()) + ")");
    RngStream rng(seed);
    shuffle(subjects, rng);
    subjects.resize(iterations);

    std::vector<LosoFold> folds;
    folds.reserve(iterations);
    for (const auto& held_out : subjects) {
        LosoFold fold;
        fold.held_out_subject = held_out;
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            const auto& s = dataset.samples[i];
            if (s.label.binary == ValenceLabel::Binary::Neutral) continue;
            if (s.series.subject_id == held_out)
                fold.test_indices.push_back(i);
            else
                fold.train_indices.push_back(i);
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

}  // namespace paff
