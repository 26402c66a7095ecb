#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paff/dataset.hpp"
#include "paff/model.hpp"
#include "paff/selective.hpp"

namespace paff {

enum class Regime { PpgOnly, PpgPlusEcg, EcgOnly };
const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Class-conditional IBI dynamics for one source. Classes differ by the
/// frequency of a sinusoidal modulation riding on the subject baseline;
/// with class_informative off, labels are drawn independently of the
/// dynamics (unlearnable control).
struct SourceDynamics {
    double baseline_ibi_s = 0.9;
    double subject_jitter_s = 0.04;
    double high_mod_freq_hz = 0.30;
    double low_mod_freq_hz = 0.10;
    double mod_depth_s = 0.08;
    /// Per-sample uniform jitter on the modulation frequency. The default
    /// lets the class frequency ranges overlap slightly, so a small
    /// fraction of samples is genuinely ambiguous.
    double freq_jitter_hz = 0.11;
    double noise_std_s = 0.008;
    double duration_s = 60.0;
    double prevalence_high = 1.0 / 3.0;  // 8 pleasant vs 16 unpleasant stimuli
    int scale_min = 1;
    int scale_max = 5;
    bool class_informative = true;
};

/// Shifted statistics for a laboratory-grade second source.
SourceDynamics shifted_ecg_dynamics();

struct SynthSpec {
    std::size_t n_subjects = 12;
    std::size_t samples_per_subject = 20;
    SourceDynamics ppg;
    std::size_t n_ecg_subjects = 0;  // extra subjects recorded as ECG source
    std::size_t ecg_samples_per_subject = 20;
    SourceDynamics ecg = shifted_ecg_dynamics();
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic synthetic dataset standing in for the private corpora.
Dataset synth_dataset(const SynthSpec& spec);

struct AlphaMetrics {
    double alpha = 0.5;
    std::optional<double> f1;  // absent when nothing was attempted
    double coverage = 0.0;
    std::size_t attempted = 0;
};

struct FoldRecord {
    std::string held_out_subject;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::vector<AlphaMetrics> metrics;  // aligned with the alpha grid
};

struct EvalReport {
    Regime regime = Regime::PpgOnly;
    std::vector<double> alpha_grid;
    std::vector<FoldRecord> folds;
    std::vector<double> mean_f1;        // per alpha, over folds with a value
    std::vector<double> std_f1;
    std::vector<double> mean_coverage;
    double chance_f1_value = 0.0;       // from pooled test-set prevalence
    ModelConfig config;
    std::uint64_t seed = 0;
    std::size_t n_passes = 1000;

    nlohmann::ordered_json to_json() const;
    static EvalReport from_json(const nlohmann::ordered_json& j);
};

/// {0.5, 0.55, ..., 0.95}
std::vector<double> default_alpha_grid();

struct EvalOptions {
    Regime regime = Regime::PpgOnly;
    ModelConfig model;
    std::vector<double> alpha_grid = default_alpha_grid();
    std::size_t n_passes = 1000;
    std::size_t iterations = 10;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

/// Leave-one-subject-out evaluation over the PPG subjects. ECG-source
/// samples participate in training only, per regime; test folds are
/// always PPG. Fresh model per fold; deterministic given the seed.
EvalReport run_loso(const Dataset& dataset, const EvalOptions& options);

/// Two-sided Mann-Whitney p between per-fold F1 scores at alpha = 0.5.
double compare_regimes(const EvalReport& a, const EvalReport& b);

/// Two delimited tables: alpha vs F1 (with per-fold sigma and the chance
/// reference) and alpha vs coverage. Filenames embed regime and seed.
void emit_curves(const EvalReport& report, const std::string& out_dir);

}  // namespace paff
