#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <unistd.h>

#include "paff/dataset.hpp"
#include "paff/errors.hpp"
#include "paff/rng.hpp"

using namespace paff;

namespace {

std::string temp_path(const char* stem) {
    return std::string("/tmp/paff_test_") + stem + "_" + std::to_string(::getpid()) + ".jsonl";
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

std::string sample_line(const std::string& subject, const std::string& source, int raw,
                        const std::string& intervals) {
    return "{\"subject_id\":\"" + subject + "\",\"stimulus_id\":\"v01\",\"source\":\"" + source +
           "\",\"raw_report\":" + std::to_string(raw) +
           ",\"scale_min\":1,\"scale_max\":5,\"ibi_seconds\":" + intervals + "}\n";
}

Dataset make_dataset(const std::vector<std::pair<std::string, int>>& subject_raws,
                     IbiSource source = IbiSource::Ppg) {
    Dataset d;
    for (const auto& [subject, raw] : subject_raws) {
        Sample s;
        s.series.subject_id = subject;
        s.series.stimulus_id = "v01";
        s.series.source = source;
        s.series.intervals = {0.8, 0.9, 1.0};
        s.label = ValenceLabel::from_raw(raw, 1, 5);
        d.samples.push_back(s);
    }
    d.recompute_max_length();
    return d;
}

}  // namespace

TEST_CASE("load parses a three line file") {
    const auto path = temp_path("load3");
    write_file(path, sample_line("P01", "ppg", 1, "[0.8,0.9]") +
                         sample_line("P02", "ecg", 5, "[1.0,1.1,0.9]") +
                         sample_line("P03", "ppg", 3, "[0.7]"));
    const Dataset d = load_dataset(path);
    CHECK(d.samples.size() == 3);
    CHECK(d.max_train_length == 3);
    CHECK(d.samples[0].label.binary == ValenceLabel::Binary::Low);
    CHECK(d.samples[1].label.binary == ValenceLabel::Binary::High);
    CHECK(d.samples[2].label.binary == ValenceLabel::Binary::Neutral);
    std::remove(path.c_str());
}

TEST_CASE("zero interval rejected with the line number") {
    const auto path = temp_path("zeroline");
    write_file(path, sample_line("P01", "ppg", 1, "[0.8,0.9]") +
                         sample_line("P02", "ppg", 2, "[0.0,0.9]"));
    try {
        load_dataset(path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("interval bounds are exclusive") {
    const auto path = temp_path("bounds");
    write_file(path, sample_line("P01", "ppg", 1, "[0.2,0.9]"));
    CHECK_THROWS_AS(load_dataset(path), ValidationError);
    write_file(path, sample_line("P01", "ppg", 1, "[3.0]"));
    CHECK_THROWS_AS(load_dataset(path), ValidationError);
    write_file(path, sample_line("P01", "ppg", 1, "[0.201,2.999]"));
    CHECK_NOTHROW(load_dataset(path));
    std::remove(path.c_str());
}

TEST_CASE("missing file and empty file are errors") {
    CHECK_THROWS_AS(load_dataset("/tmp/paff_definitely_absent.jsonl"), ValidationError);
    const auto path = temp_path("empty");
    write_file(path, "");
    CHECK_THROWS_AS(load_dataset(path), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("source tags survive a save and load round trip") {
    const auto path = temp_path("roundtrip");
    Dataset d = make_dataset({{"P01", 1}, {"P02", 5}});
    d.samples[1].series.source = IbiSource::Ecg;
    d.samples[0].series.intervals = {0.812345678901, 1.2};
    save_dataset(d, path);
    const Dataset back = load_dataset(path);
    REQUIRE(back.samples.size() == 2);
    CHECK(back.samples[0].series.source == IbiSource::Ppg);
    CHECK(back.samples[1].series.source == IbiSource::Ecg);
    CHECK(back.samples[0].series.intervals[0] == doctest::Approx(0.812345678901).epsilon(1e-12));
    CHECK(back.samples[0].label.raw_report == 1);
    CHECK(back.samples[1].label.binary == ValenceLabel::Binary::High);
    std::remove(path.c_str());
}

TEST_CASE("valence normalization and binarization") {
    const auto low = ValenceLabel::from_raw(1, 1, 5);
    CHECK(low.normalized == doctest::Approx(0.0));
    CHECK(low.binary == ValenceLabel::Binary::Low);
    const auto high = ValenceLabel::from_raw(9, 1, 9);
    CHECK(high.normalized == doctest::Approx(1.0));
    CHECK(high.binary == ValenceLabel::Binary::High);
    const auto mid = ValenceLabel::from_raw(5, 1, 9);
    CHECK(mid.normalized == doctest::Approx(0.5));
    CHECK(mid.binary == ValenceLabel::Binary::Neutral);
}

TEST_CASE("z-normalize basics") {
    const auto z = z_normalize({0.8, 1.0, 1.2});
    REQUIRE(z.size() == 3);
    double mean = (z[0] + z[1] + z[2]) / 3.0;
    double var = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) / 3.0 - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));

    const auto flat = z_normalize({1.0, 1.0, 1.0});
    for (double v : flat) CHECK(v == 0.0);
}

TEST_CASE("z-normalize is idempotent") {
    RngStream rng(11);
    std::vector<double> x(37);
    for (auto& v : x) v = rng.uniform(0.5, 1.5);
    const auto once = z_normalize(x);
    const auto twice = z_normalize(once);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-9));
}

TEST_CASE("pad_or_cut conventions") {
    CHECK(pad_or_cut({1, 2}, 4) == std::vector<double>({1, 2, 0, 0}));
    CHECK(pad_or_cut({1, 2, 3, 4, 5}, 3) == std::vector<double>({1, 2, 3}));
    CHECK(pad_or_cut({1, 2, 3}, 3) == std::vector<double>({1, 2, 3}));
}

TEST_CASE("loso draws the requested number of distinct subjects") {
    std::vector<std::pair<std::string, int>> rows;
    for (int s = 1; s <= 17; ++s) {
        char name[8];
        std::snprintf(name, sizeof(name), "S%02d", s);
        rows.push_back({name, (s % 2) ? 1 : 5});
        rows.push_back({name, (s % 2) ? 2 : 4});
    }
    const Dataset d = make_dataset(rows);
    const auto folds = loso_folds(d, 10, 3);
    REQUIRE(folds.size() == 10);
    std::set<std::string> held;
    for (const auto& f : folds) held.insert(f.held_out_subject);
    CHECK(held.size() == 10);
}

TEST_CASE("two subjects partition exactly") {
    const Dataset d = make_dataset({{"A", 1}, {"A", 2}, {"B", 4}, {"B", 5}});
    const auto folds = loso_folds(d, 2, 0);
    REQUIRE(folds.size() == 2);
    for (const auto& f : folds) {
        CHECK(f.train_indices.size() == 2);
        CHECK(f.test_indices.size() == 2);
        for (auto i : f.test_indices)
            CHECK(d.samples[i].series.subject_id == f.held_out_subject);
        for (auto i : f.train_indices)
            CHECK(d.samples[i].series.subject_id != f.held_out_subject);
    }
}

TEST_CASE("loso is deterministic per seed") {
    std::vector<std::pair<std::string, int>> rows;
    for (int s = 0; s < 8; ++s)
        rows.push_back({"S" + std::to_string(s), (s % 2) ? 1 : 5});
    const Dataset d = make_dataset(rows);
    const auto a = loso_folds(d, 5, 99);
    const auto b = loso_folds(d, 5, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].held_out_subject == b[i].held_out_subject);
        CHECK(a[i].train_indices == b[i].train_indices);
        CHECK(a[i].test_indices == b[i].test_indices);
    }
}

TEST_CASE("neutral samples are excluded from both fold sides") {
    const Dataset d = make_dataset({{"A", 1}, {"A", 3}, {"B", 5}, {"B", 3}, {"C", 2}});
    const auto folds = loso_folds(d, 3, 1);
    for (const auto& f : folds) {
        for (auto i : f.train_indices)
            CHECK(d.samples[i].label.binary != ValenceLabel::Binary::Neutral);
        for (auto i : f.test_indices)
            CHECK(d.samples[i].label.binary != ValenceLabel::Binary::Neutral);
    }
}

TEST_CASE("requesting more folds than subjects fails") {
    const Dataset d = make_dataset({{"A", 1}, {"B", 5}});
    CHECK_THROWS_AS(loso_folds(d, 3, 0), ValidationError);
}
