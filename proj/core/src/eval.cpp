#include "paff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>

#include "paff/errors.hpp"
#include "paff/stats.hpp"

namespace paff {

using json = nlohmann::ordered_json;

const char* to_string(Regime r) {
    switch (r) {
        case Regime::PpgOnly: return "ppg_only";
        case Regime::PpgPlusEcg: return "ppg_plus_ecg";
        default: return "ecg_only";
    }
}

Regime regime_from_string(const std::string& s) {
    if (s == "ppg_only") return Regime::PpgOnly;
    if (s == "ppg_plus_ecg") return Regime::PpgPlusEcg;
    if (s == "ecg_only") return Regime::EcgOnly;
    throw ValidationError("unknown regime: '" + s + "'");
}

SourceDynamics shifted_ecg_dynamics() {
    SourceDynamics d;
    d.baseline_ibi_s = 0.72;
    d.subject_jitter_s = 0.03;
    d.high_mod_freq_hz = 0.45;
    d.low_mod_freq_hz = 0.05;
    d.mod_depth_s = 0.05;
    d.freq_jitter_hz = 0.0;
    d.noise_std_s = 0.015;
    d.prevalence_high = 0.5;
    d.scale_min = 1;
    d.scale_max = 9;
    d.class_informative = false;
    return d;
}

void SynthSpec::validate() const {
    if (n_subjects == 0 || samples_per_subject == 0)
        throw ValidationError("SynthSpec: zero subjects or samples");
    for (const SourceDynamics* d : {&ppg, &ecg}) {
        if (d->prevalence_high <= 0.0 || d->prevalence_high >= 1.0)
            throw ValidationError("SynthSpec: prevalence must leave both classes represented");
        if (d->baseline_ibi_s <= 0.3 || d->baseline_ibi_s >= 2.0)
            throw ValidationError("SynthSpec: implausible baseline IBI");
    }
}

namespace {

Sample synth_sample(const SourceDynamics& dyn, IbiSource source, const std::string& subject,
                    const std::string& stimulus, double subject_offset, RngStream& rng) {
    const bool is_high = rng.next_double() < dyn.prevalence_high;
    const bool dynamics_high = dyn.class_informative ? is_high : rng.next_double() < 0.5;
    const double base_freq = dynamics_high ? dyn.high_mod_freq_hz : dyn.low_mod_freq_hz;
    const double freq =
        std::max(0.02, base_freq + rng.uniform(-dyn.freq_jitter_hz, dyn.freq_jitter_hz));

    Sample sample;
    sample.series.subject_id = subject;
    sample.series.stimulus_id = stimulus;
    sample.series.source = source;
    double t = 0.0;
    while (t < dyn.duration_s) {
        double ibi = dyn.baseline_ibi_s + subject_offset +
                     dyn.mod_depth_s * std::sin(2.0 * M_PI * freq * t) +
                     dyn.noise_std_s * rng.next_normal();
        ibi = std::clamp(ibi, 0.25, 2.5);
        sample.series.intervals.push_back(ibi);
        t += ibi;
    }

    // Self-report drawn from the class-appropriate side of the scale.
    const int smin = dyn.scale_min, smax = dyn.scale_max;
    const int span = smax - smin;
    int raw;
    if (is_high) {
        raw = smax - static_cast<int>(rng.next_index(2));
        if (2 * (raw - smin) <= span) raw = smax;
    } else {
        raw = smin + static_cast<int>(rng.next_index(2));
        if (2 * (raw - smin) >= span) raw = smin;
    }
    sample.label = ValenceLabel::from_raw(raw, smin, smax);
    return sample;
}

}  // namespace

Dataset synth_dataset(const SynthSpec& spec) {
    spec.validate();
    Dataset dataset;
    RngStream root(spec.seed);
    for (std::size_t s = 0; s < spec.n_subjects; ++s) {
        RngStream subject_rng = root.split(s);
        const double offset =
            subject_rng.uniform(-spec.ppg.subject_jitter_s, spec.ppg.subject_jitter_s);
        char subject[16];
        std::snprintf(subject, sizeof(subject), "P%02zu", s + 1);
        for (std::size_t k = 0; k < spec.samples_per_subject; ++k) {
            RngStream sample_rng = subject_rng.split(k + 1);
            char stimulus[16];
            std::snprintf(stimulus, sizeof(stimulus), "v%02zu", k + 1);
            dataset.samples.push_back(
                synth_sample(spec.ppg, IbiSource::Ppg, subject, stimulus, offset, sample_rng));
        }
    }
    for (std::size_t s = 0; s < spec.n_ecg_subjects; ++s) {
        RngStream subject_rng = root.split(10000 + s);
        const double offset =
            subject_rng.uniform(-spec.ecg.subject_jitter_s, spec.ecg.subject_jitter_s);
        char subject[16];
        std::snprintf(subject, sizeof(subject), "E%02zu", s + 1);
        for (std::size_t k = 0; k < spec.ecg_samples_per_subject; ++k) {
            RngStream sample_rng = subject_rng.split(k + 1);
            char stimulus[16];
            std::snprintf(stimulus, sizeof(stimulus), "v%02zu", k + 1);
            dataset.samples.push_back(
                synth_sample(spec.ecg, IbiSource::Ecg, subject, stimulus, offset, sample_rng));
        }
    }
    dataset.recompute_max_length();
    return dataset;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 9; ++i) grid.push_back(0.5 + 0.05 * i);
    return grid;
}

namespace {

FoldRecord evaluate_fold(const Dataset& dataset, const EvalOptions& options,
                         const LosoFold& fold, std::size_t fold_index,
                         const std::vector<std::size_t>& ecg_train_indices) {
    // Regime-dependent training set; test set is always the held-out
    // subject's PPG samples.
    std::vector<std::size_t> train;
    if (options.regime != Regime::EcgOnly)
        for (std::size_t i : fold.train_indices)
            if (dataset.samples[i].series.source == IbiSource::Ppg) train.push_back(i);
    if (options.regime != Regime::PpgOnly)
        for (std::size_t i : ecg_train_indices) train.push_back(i);
    if (train.empty())
        throw ValidationError("run_loso: no training samples available for regime " +
                              std::string(to_string(options.regime)));
    for (std::size_t i : fold.test_indices)
        if (dataset.samples[i].series.source != IbiSource::Ppg)
            throw ValidationError("run_loso: non-PPG sample reached a test fold");

    std::size_t max_len = 0;
    for (std::size_t i : train)
        max_len = std::max(max_len, dataset.samples[i].series.intervals.size());

    std::vector<TrainSample> train_samples;
    train_samples.reserve(train.size());
    for (std::size_t i : train) {
        TrainSample ts;
        ts.sequence = pad_or_cut(z_normalize(dataset.samples[i].series.intervals), max_len);
        ts.target = dataset.samples[i].label.normalized;
        train_samples.push_back(std::move(ts));
    }

    ModelConfig config = options.model;
    config.seed = RngStream(options.seed).split(fold_index).next_u64();
    AffectModel model = AffectModel::build(config, max_len);
    model.train(train_samples);

    FoldRecord record;
    record.held_out_subject = fold.held_out_subject;
    record.train_count = train.size();
    record.test_count = fold.test_indices.size();

    std::vector<std::vector<Decision>> per_alpha(options.alpha_grid.size());
    std::vector<ValenceLabel::Binary> truth;
    RngStream mc_root = RngStream(options.seed).split(1000 + fold_index);
    for (std::size_t t = 0; t < fold.test_indices.size(); ++t) {
        const auto& sample = dataset.samples[fold.test_indices[t]];
        const auto sequence = pad_or_cut(z_normalize(sample.series.intervals), max_len);
        const auto posterior =
            mc_predict(model, sequence, options.n_passes, mc_root.split(t).next_u64());
        truth.push_back(sample.label.binary);
        for (std::size_t a = 0; a < options.alpha_grid.size(); ++a)
            per_alpha[a].push_back(decide(posterior, options.alpha_grid[a]));
    }

    for (std::size_t a = 0; a < options.alpha_grid.size(); ++a) {
        AlphaMetrics m;
        m.alpha = options.alpha_grid[a];
        m.coverage = coverage(per_alpha[a]);
        m.f1 = f1_attempted(per_alpha[a], truth);
        for (const auto& d : per_alpha[a])
            if (d.outcome != Outcome::Abstain) ++m.attempted;
        record.metrics.push_back(m);
    }
    return record;
}

}  // namespace

EvalReport run_loso(const Dataset& dataset, const EvalOptions& options) {
    if (options.alpha_grid.empty()) throw ValidationError("run_loso: empty alpha grid");

    // LOSO folds are defined over PPG subjects only.
    Dataset ppg_view;
    std::vector<std::size_t> ppg_map;  // view index -> dataset index
    std::vector<std::size_t> ecg_train_indices;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        if (s.series.source == IbiSource::Ppg) {
            ppg_view.samples.push_back(s);
            ppg_map.push_back(i);
        } else if (s.label.binary != ValenceLabel::Binary::Neutral) {
            ecg_train_indices.push_back(i);
        }
    }
    if (ppg_view.samples.empty())
        throw ValidationError("run_loso: dataset has no PPG-source samples to test on");
    if (options.regime != Regime::PpgOnly && ecg_train_indices.empty())
        throw ValidationError("run_loso: regime " + std::string(to_string(options.regime)) +
                              " requires ECG-source samples");

    auto folds = loso_folds(ppg_view, options.iterations, options.seed);
    for (auto& fold : folds) {
        for (auto& i : fold.train_indices) i = ppg_map[i];
        for (auto& i : fold.test_indices) i = ppg_map[i];
    }

    EvalReport report;
    report.regime = options.regime;
    report.alpha_grid = options.alpha_grid;
    report.config = options.model;
    report.seed = options.seed;
    report.n_passes = options.n_passes;
    report.folds.resize(folds.size());

    const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
    std::size_t next = 0;
    while (next < folds.size()) {
        const std::size_t batch = std::min(jobs, folds.size() - next);
        std::vector<std::future<FoldRecord>> futures;
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t f = next + b;
            futures.push_back(std::async(std::launch::async, [&, f] {
                return evaluate_fold(dataset, options, folds[f], f, ecg_train_indices);
            }));
        }
        for (std::size_t b = 0; b < batch; ++b) report.folds[next + b] = futures[b].get();
        next += batch;
    }

    // Aggregates and the pooled chance reference.
    std::size_t low = 0, high = 0;
    for (const auto& fold : folds)
        for (std::size_t i : fold.test_indices)
            (dataset.samples[i].label.binary == ValenceLabel::Binary::Low ? low : high) += 1;
    report.chance_f1_value = chance_f1(low, high);

    for (std::size_t a = 0; a < options.alpha_grid.size(); ++a) {
        double f1_sum = 0.0, f1_sq = 0.0, cov_sum = 0.0;
        std::size_t f1_count = 0;
        for (const auto& fold : report.folds) {
            cov_sum += fold.metrics[a].coverage;
            if (fold.metrics[a].f1) {
                f1_sum += *fold.metrics[a].f1;
                f1_sq += *fold.metrics[a].f1 * *fold.metrics[a].f1;
                ++f1_count;
            }
        }
        const double n_folds = static_cast<double>(report.folds.size());
        report.mean_coverage.push_back(cov_sum / n_folds);
        if (f1_count > 0) {
            const double mean = f1_sum / static_cast<double>(f1_count);
            report.mean_f1.push_back(mean);
            report.std_f1.push_back(
                std::sqrt(std::max(0.0, f1_sq / static_cast<double>(f1_count) - mean * mean)));
        } else {
            report.mean_f1.push_back(0.0);
            report.std_f1.push_back(0.0);
        }
    }
    return report;
}

double compare_regimes(const EvalReport& a, const EvalReport& b) {
    if (a.folds.size() != b.folds.size())
        throw ValidationError("compare_regimes: mismatched fold counts");
    if (a.folds.size() < 2) throw ValidationError("compare_regimes: need >= 2 folds");
    const auto extract = [](const EvalReport& r) {
        std::size_t idx = r.alpha_grid.size();
        for (std::size_t a = 0; a < r.alpha_grid.size(); ++a)
            if (std::fabs(r.alpha_grid[a] - 0.5) < 1e-9) idx = a;
        if (idx == r.alpha_grid.size())
            throw ValidationError("compare_regimes: alpha grid lacks 0.5");
        std::vector<double> f1;
        for (const auto& fold : r.folds) {
            if (!fold.metrics[idx].f1)
                throw ValidationError("compare_regimes: missing F1 at alpha = 0.5");
            f1.push_back(*fold.metrics[idx].f1);
        }
        return f1;
    };
    return mann_whitney(extract(a), extract(b)).p_value;
}

json EvalReport::to_json() const {
    json j;
    j["regime"] = to_string(regime);
    j["seed"] = seed;
    j["n_passes"] = n_passes;
    j["config"] = config.to_json();
    j["alpha_grid"] = alpha_grid;
    j["chance_f1"] = chance_f1_value;
    j["mean_f1"] = mean_f1;
    j["std_f1"] = std_f1;
    j["mean_coverage"] = mean_coverage;
    j["folds"] = json::array();
    for (const auto& fold : folds) {
        json jf;
        jf["held_out_subject"] = fold.held_out_subject;
        jf["train_count"] = fold.train_count;
        jf["test_count"] = fold.test_count;
        jf["metrics"] = json::array();
        for (const auto& m : fold.metrics) {
            json jm;
            jm["alpha"] = m.alpha;
            if (m.f1)
                jm["f1"] = *m.f1;
            else
                jm["f1"] = nullptr;
            jm["coverage"] = m.coverage;
            jm["attempted"] = m.attempted;
            jf["metrics"].push_back(jm);
        }
        j["folds"].push_back(jf);
    }
    return j;
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    r.regime = regime_from_string(j.at("regime").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_passes = j.at("n_passes").get<std::size_t>();
    r.config = ModelConfig::from_json(j.at("config"));
    r.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    r.chance_f1_value = j.at("chance_f1").get<double>();
    r.mean_f1 = j.at("mean_f1").get<std::vector<double>>();
    r.std_f1 = j.at("std_f1").get<std::vector<double>>();
    r.mean_coverage = j.at("mean_coverage").get<std::vector<double>>();
    for (const auto& jf : j.at("folds")) {
        FoldRecord fold;
        fold.held_out_subject = jf.at("held_out_subject").get<std::string>();
        fold.train_count = jf.at("train_count").get<std::size_t>();
        fold.test_count = jf.at("test_count").get<std::size_t>();
        for (const auto& jm : jf.at("metrics")) {
            AlphaMetrics m;
            m.alpha = jm.at("alpha").get<double>();
            if (!jm.at("f1").is_null()) m.f1 = jm.at("f1").get<double>();
            m.coverage = jm.at("coverage").get<double>();
            m.attempted = jm.at("attempted").get<std::size_t>();
            fold.metrics.push_back(m);
        }
        r.folds.push_back(std::move(fold));
    }
    return r;
}

void emit_curves(const EvalReport& report, const std::string& out_dir) {
    if (report.folds.empty()) throw ValidationError("emit_curves: empty report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::string stem = std::string(to_string(report.regime)) + "_seed" +
                             std::to_string(report.seed);

    const std::string f1_path = out_dir + "/" + stem + "_f1.tsv";
    std::ofstream f1_out(f1_path);
    if (!f1_out) throw ValidationError("emit_curves: cannot write " + f1_path);
    f1_out << "alpha\tmean_f1\tstd_f1\tchance_f1\n";
    f1_out.precision(12);
    for (std::size_t a = 0; a < report.alpha_grid.size(); ++a)
        f1_out << report.alpha_grid[a] << '\t' << report.mean_f1[a] << '\t' << report.std_f1[a]
               << '\t' << report.chance_f1_value << '\n';

    const std::string cov_path = out_dir + "/" + stem + "_coverage.tsv";
    std::ofstream cov_out(cov_path);
    if (!cov_out) throw ValidationError("emit_curves: cannot write " + cov_path);
    cov_out << "alpha\tmean_coverage\n";
    cov_out.precision(12);
    for (std::size_t a = 0; a < report.alpha_grid.size(); ++a)
        cov_out << report.alpha_grid[a] << '\t' << report.mean_coverage[a] << '\n';
}

}  // namespace paff
