// pulse_affect: heartbeat-to-emotion pipeline driver.
//
// Subcommands: synth, extract-ibi, features, stats, train, predict,
// evaluate, curves. Exit codes: 0 success, 1 usage error, 2 data or
// validation error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "paff/dataset.hpp"
#include "paff/ecg.hpp"
#include "paff/errors.hpp"
#include "paff/eval.hpp"
#include "paff/hrv.hpp"
#include "paff/model.hpp"
#include "paff/selective.hpp"
#include "paff/stats.hpp"

namespace {

constexpr const char* kVersion = "pulse-affect 0.1.0";

using json = nlohmann::ordered_json;

struct RunConfig {
    std::string dataset_path;
    std::string ecg_path;
    std::string out_path;
    std::string model_path;
    std::string report_path;
    std::string config_path;
    std::string regime = "ppg_only";
    std::uint64_t seed = 0;
    std::size_t epochs = 1000;
    std::size_t n_passes = 1000;
    std::size_t batch_size = 16;
    std::size_t iterations = 10;
    std::size_t jobs = 1;
    std::size_t subjects = 12;
    std::size_t samples_per_subject = 20;
    std::size_t ecg_subjects = 0;
    std::string alpha_grid_spec;  // comma-separated; empty -> default grid
    std::string ecg_traces_out;
    bool verbose = false;

    std::vector<double> alpha_grid() const {
        if (alpha_grid_spec.empty()) return paff::default_alpha_grid();
        std::vector<double> grid;
        std::stringstream ss(alpha_grid_spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            grid.push_back(std::stod(item));
        }
        if (grid.empty()) throw paff::ValidationError("empty --alpha-grid");
        return grid;
    }

    json to_json() const {
        json j;
        j["version"] = kVersion;
        j["dataset"] = dataset_path;
        j["ecg"] = ecg_path;
        j["out"] = out_path;
        j["model"] = model_path;
        j["regime"] = regime;
        j["seed"] = seed;
        j["epochs"] = epochs;
        j["n_passes"] = n_passes;
        j["batch_size"] = batch_size;
        j["iterations"] = iterations;
        j["jobs"] = jobs;
        j["alpha_grid"] = alpha_grid();
        return j;
    }
};

// Precedence: flags > config file > PULSE_AFFECT_SEED env > defaults.
void apply_config_file(CLI::App& cmd, RunConfig& cfg) {
    if (const char* env_seed = std::getenv("PULSE_AFFECT_SEED");
        env_seed && cmd.count("--seed") == 0)
        cfg.seed = std::strtoull(env_seed, nullptr, 10);
    if (cfg.config_path.empty()) return;
    std::ifstream in(cfg.config_path);
    if (!in) throw paff::ValidationError("cannot open config file: " + cfg.config_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw paff::ValidationError("malformed config file: " + std::string(e.what()));
    }
    const auto set_if = [&](const char* key, const char* flag, auto& field) {
        using T = std::decay_t<decltype(field)>;
        if (j.contains(key) && cmd.count(flag) == 0) field = j.at(key).get<T>();
    };
    set_if("seed", "--seed", cfg.seed);
    set_if("epochs", "--epochs", cfg.epochs);
    set_if("n_passes", "--n-passes", cfg.n_passes);
    set_if("batch_size", "--batch-size", cfg.batch_size);
    set_if("iterations", "--iterations", cfg.iterations);
    set_if("jobs", "--jobs", cfg.jobs);
    set_if("regime", "--regime", cfg.regime);
    set_if("alpha_grid", "--alpha-grid", cfg.alpha_grid_spec);
}

void maybe_echo(const RunConfig& cfg) {
    if (cfg.verbose) std::cerr << "resolved config: " << cfg.to_json().dump() << "\n";
}

paff::ModelConfig model_config_from(const RunConfig& cfg) {
    paff::ModelConfig mc;
    mc.epochs = cfg.epochs;
    mc.batch_size = cfg.batch_size;
    mc.seed = cfg.seed;
    return mc;
}

std::string sample_id(const paff::Sample& s) {
    return s.series.subject_id + ":" + s.series.stimulus_id;
}

void write_run_config(const RunConfig& cfg, const std::string& dir) {
    std::ofstream out(dir + "/run_config.json");
    out << cfg.to_json().dump(2) << "\n";
}

int run_synth(const RunConfig& cfg) {
    paff::SynthSpec spec;
    spec.seed = cfg.seed;
    spec.n_subjects = cfg.subjects;
    spec.samples_per_subject = cfg.samples_per_subject;
    spec.n_ecg_subjects = cfg.ecg_subjects;
    const paff::Dataset dataset = paff::synth_dataset(spec);
    paff::save_dataset(dataset, cfg.out_path);
    std::cerr << "wrote " << dataset.samples.size() << " samples to " << cfg.out_path << "\n";

    if (!cfg.ecg_traces_out.empty()) {
        // Render a few ECG traces whose beats follow the synthetic IBI
        // dynamics so extract-ibi has something realistic to chew on.
        std::vector<paff::EcgTrace> traces;
        std::size_t rendered = 0;
        for (const auto& s : dataset.samples) {
            if (s.series.source != paff::IbiSource::Ecg && spec.n_ecg_subjects > 0) continue;
            if (rendered >= 8) break;
            std::vector<double> beats(s.series.intervals.size() + 1);
            beats[0] = 0.5;
            std::partial_sum(s.series.intervals.begin(), s.series.intervals.end(),
                             beats.begin() + 1);
            for (std::size_t i = 1; i < beats.size(); ++i) beats[i] += 0.5;
            paff::EcgTrace trace = paff::synth_ecg(beats, 256.0, 0.03, cfg.seed + rendered);
            trace.subject_id = s.series.subject_id;
            trace.stimulus_id = s.series.stimulus_id;
            trace.raw_report = s.label.raw_report;
            trace.scale_min = s.label.scale_min;
            trace.scale_max = s.label.scale_max;
            traces.push_back(std::move(trace));
            ++rendered;
        }
        paff::save_ecg_traces(traces, cfg.ecg_traces_out);
        std::cerr << "wrote " << traces.size() << " ECG traces to " << cfg.ecg_traces_out
                  << "\n";
    }
    return 0;
}

int run_extract_ibi(const RunConfig& cfg) {
    const auto traces = paff::load_ecg_traces(cfg.ecg_path);
    paff::Dataset dataset;
    std::size_t skipped = 0;
    for (const auto& trace : traces) {
        const auto beats = paff::detect_beats(trace);
        if (beats.peak_times_s.size() < 2) {
            std::cerr << "skipping " << trace.subject_id << ":" << trace.stimulus_id
                      << ": fewer than 2 beats detected\n";
            ++skipped;
            continue;
        }
        paff::Sample sample;
        sample.series = paff::ibis_from_beats(beats);
        sample.series.subject_id = trace.subject_id;
        sample.series.stimulus_id = trace.stimulus_id;
        const bool in_bounds =
            std::all_of(sample.series.intervals.begin(), sample.series.intervals.end(),
                        [](double v) { return v > 0.2 && v < 3.0; });
        if (!in_bounds) {
            std::cerr << "skipping " << trace.subject_id << ":" << trace.stimulus_id
                      << ": extracted IBI outside physiological bounds\n";
            ++skipped;
            continue;
        }
        sample.label =
            paff::ValenceLabel::from_raw(trace.raw_report, trace.scale_min, trace.scale_max);
        dataset.samples.push_back(std::move(sample));
    }
    if (dataset.samples.empty())
        throw paff::ValidationError("extract-ibi: no usable traces in " + cfg.ecg_path);
    dataset.recompute_max_length();
    paff::save_dataset(dataset, cfg.out_path);
    std::cerr << "extracted " << dataset.samples.size() << " IBI series (" << skipped
              << " skipped) to " << cfg.out_path << "\n";
    return 0;
}

int run_features(const RunConfig& cfg) {
    const auto dataset = paff::load_dataset(cfg.dataset_path);
    const auto matrix = paff::feature_matrix(dataset);
    for (const auto& reason : matrix.skipped) std::cerr << "skipped " << reason << "\n";
    paff::write_feature_table(matrix, cfg.out_path);
    std::cerr << "wrote " << matrix.rows.size() << " feature rows to " << cfg.out_path << "\n";
    return 0;
}

int run_stats(const RunConfig& cfg) {
    const auto dataset = paff::load_dataset(cfg.dataset_path);
    const auto matrix = paff::feature_matrix(dataset);

    std::vector<std::vector<double>> ecg_cols(paff::FeatureVector::kCount);
    std::vector<std::vector<double>> ppg_cols(paff::FeatureVector::kCount);
    std::vector<paff::LabeledRow> svm_rows;
    for (const auto& row : matrix.rows) {
        const auto values = row.features.as_array();
        auto& cols = row.source == paff::IbiSource::Ecg ? ecg_cols : ppg_cols;
        for (std::size_t i = 0; i < values.size(); ++i) cols[i].push_back(values[i]);
        paff::LabeledRow lr;
        lr.features.assign(values.begin(), values.end());
        lr.label = row.source == paff::IbiSource::Ecg ? 1 : -1;
        svm_rows.push_back(std::move(lr));
    }
    if (ecg_cols[0].empty() || ppg_cols[0].empty())
        throw paff::ValidationError("stats: need both ECG- and PPG-source samples");

    json report;
    report["version"] = kVersion;
    report["config"] = cfg.to_json();
    report["features"] = json::array();
    std::cout << "feature\tU\tp_value\tsignificant(p<0.001)\n";
    for (std::size_t i = 0; i < paff::FeatureVector::kCount; ++i) {
        const auto r = paff::mann_whitney(ecg_cols[i], ppg_cols[i]);
        const char* name = paff::FeatureVector::names()[i];
        std::cout << name << '\t' << r.u_statistic << '\t' << r.p_value << '\t'
                  << (r.p_value < 0.001 ? "yes" : "no") << '\n';
        json jf;
        jf["feature"] = name;
        jf["u_statistic"] = r.u_statistic;
        jf["p_value"] = r.p_value;
        jf["significant"] = r.p_value < 0.001;
        report["features"].push_back(jf);
    }

    const double accuracy = paff::kfold_accuracy(svm_rows, 10, cfg.seed);
    std::cout << "svm_10fold_accuracy\t" << accuracy << "\n";
    report["svm"] = {{"kernel", "rbf"},
                     {"penalty_c", 1.0},
                     {"gamma", 1.0 / static_cast<double>(paff::FeatureVector::kCount)},
                     {"folds", 10},
                     {"accuracy", accuracy}};
    if (!cfg.out_path.empty()) {
        std::ofstream out(cfg.out_path);
        if (!out) throw paff::ValidationError("cannot write report: " + cfg.out_path);
        out << report.dump(2) << "\n";
    }
    return 0;
}

std::vector<paff::TrainSample> training_samples(const paff::Dataset& dataset,
                                                std::size_t max_len) {
    std::vector<paff::TrainSample> out;
    for (const auto& s : dataset.samples) {
        if (s.label.binary == paff::ValenceLabel::Binary::Neutral) continue;
        paff::TrainSample ts;
        ts.sequence = paff::pad_or_cut(paff::z_normalize(s.series.intervals), max_len);
        ts.target = s.label.normalized;
        out.push_back(std::move(ts));
    }
    return out;
}

int run_train(const RunConfig& cfg) {
    const auto dataset = paff::load_dataset(cfg.dataset_path);
    const auto samples = training_samples(dataset, dataset.max_train_length);
    if (samples.empty()) throw paff::ValidationError("train: no non-neutral samples");
    auto model = paff::AffectModel::build(model_config_from(cfg), dataset.max_train_length);
    const auto result = model.train(samples);
    model.save_checkpoint(cfg.out_path);
    std::cerr << "trained " << result.loss_history.size() << " epochs, final loss "
              << model.final_loss << ", checkpoint " << cfg.out_path << "\n";
    return 0;
}

int run_predict(const RunConfig& cfg) {
    const auto model = paff::AffectModel::load_checkpoint(cfg.model_path);
    const auto dataset = paff::load_dataset(cfg.dataset_path);
    const auto grid = cfg.alpha_grid();

    std::ofstream out(cfg.out_path);
    if (!out) throw paff::ValidationError("cannot write decisions: " + cfg.out_path);
    out << "sample_id\talpha\tmass_above\toutcome\ttrue_label\n";
    out.precision(12);
    std::size_t idx = 0;
    for (const auto& s : dataset.samples) {
        const auto sequence =
            paff::pad_or_cut(paff::z_normalize(s.series.intervals), model.input_len());
        const auto posterior = paff::mc_predict(model, sequence, cfg.n_passes,
                                                paff::RngStream(cfg.seed).split(idx).next_u64());
        for (double alpha : grid) {
            const auto d = paff::decide(posterior, alpha);
            out << sample_id(s) << '\t' << alpha << '\t' << d.mass_above << '\t'
                << paff::to_string(d.outcome) << '\t' << paff::to_string(s.label.binary)
                << '\n';
        }
        ++idx;
    }
    std::cerr << "wrote decisions for " << idx << " samples to " << cfg.out_path << "\n";
    return 0;
}

int run_evaluate(const RunConfig& cfg) {
    const auto dataset = paff::load_dataset(cfg.dataset_path);
    paff::EvalOptions options;
    options.regime = paff::regime_from_string(cfg.regime);
    options.model = model_config_from(cfg);
    options.alpha_grid = cfg.alpha_grid();
    options.n_passes = cfg.n_passes;
    options.iterations = cfg.iterations;
    options.seed = cfg.seed;
    options.jobs = cfg.jobs;

    const auto report = paff::run_loso(dataset, options);
    std::filesystem::create_directories(cfg.out_path);
    const std::string report_path = cfg.out_path + "/report_" + cfg.regime + "_seed" +
                                    std::to_string(cfg.seed) + ".json";
    {
        std::ofstream out(report_path);
        if (!out) throw paff::ValidationError("cannot write report: " + report_path);
        out << report.to_json().dump(2) << "\n";
    }
    paff::emit_curves(report, cfg.out_path);
    write_run_config(cfg, cfg.out_path);
    std::cerr << "wrote " << report_path << " and curve tables\n";
    return 0;
}

int run_curves(const RunConfig& cfg) {
    std::ifstream in(cfg.report_path);
    if (!in) throw paff::ValidationError("cannot open report: " + cfg.report_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw paff::ValidationError("malformed report: " + std::string(e.what()));
    }
    const auto report = paff::EvalReport::from_json(j);
    paff::emit_curves(report, cfg.out_path);
    std::cerr << "wrote curve tables to " << cfg.out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) + " - valence recognition from inter-beat intervals"};
    app.require_subcommand(1);
    RunConfig cfg;

    const auto add_common = [&cfg](CLI::App* cmd) {
        cmd->add_option("--seed", cfg.seed, "RNG seed");
        cmd->add_option("--config", cfg.config_path, "JSON config file (flags take precedence)");
        cmd->add_flag("--verbose", cfg.verbose, "Echo the resolved configuration");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic IBI dataset");
    synth->add_option("--out", cfg.out_path, "Output dataset (jsonl)")->required();
    synth->add_option("--subjects", cfg.subjects, "PPG subjects");
    synth->add_option("--samples-per-subject", cfg.samples_per_subject, "Samples per subject");
    synth->add_option("--ecg-subjects", cfg.ecg_subjects, "Extra ECG-source subjects");
    synth->add_option("--emit-ecg-traces", cfg.ecg_traces_out, "Also write raw ECG traces");
    add_common(synth);

    auto* extract = app.add_subcommand("extract-ibi", "Detect beats in ECG traces");
    extract->add_option("--ecg", cfg.ecg_path, "ECG traces (jsonl)")->required();
    extract->add_option("--out", cfg.out_path, "Output dataset (jsonl)")->required();
    add_common(extract);

    auto* features = app.add_subcommand("features", "Compute the HRV feature table");
    features->add_option("--dataset", cfg.dataset_path, "IBI dataset")->required();
    features->add_option("--out", cfg.out_path, "Feature table (tsv)")->required();
    add_common(features);

    auto* stats = app.add_subcommand("stats", "ECG-vs-PPG feature tests and SVM accuracy");
    stats->add_option("--dataset", cfg.dataset_path, "IBI dataset")->required();
    stats->add_option("--out", cfg.out_path, "Machine-readable report (json)");
    add_common(stats);

    auto* train = app.add_subcommand("train", "Train the valence model");
    train->add_option("--dataset", cfg.dataset_path, "IBI dataset")->required();
    train->add_option("--out", cfg.out_path, "Checkpoint path")->required();
    train->add_option("--epochs", cfg.epochs, "Training epochs");
    train->add_option("--batch-size", cfg.batch_size, "Minibatch size");
    add_common(train);

    auto* predict = app.add_subcommand("predict", "MC-dropout decisions for a dataset");
    predict->add_option("--model", cfg.model_path, "Checkpoint path")->required();
    predict->add_option("--dataset", cfg.dataset_path, "IBI dataset")->required();
    predict->add_option("--out", cfg.out_path, "Decision dump (tsv)")->required();
    predict->add_option("--n-passes", cfg.n_passes, "Stochastic forward passes");
    predict->add_option("--alpha-grid", cfg.alpha_grid_spec, "Comma-separated alphas");
    add_common(predict);

    auto* evaluate = app.add_subcommand("evaluate", "LOSO evaluation with curve emission");
    evaluate->add_option("--dataset", cfg.dataset_path, "IBI dataset")->required();
    evaluate->add_option("--out", cfg.out_path, "Output directory")->required();
    evaluate->add_option("--regime", cfg.regime, "ppg_only|ppg_plus_ecg|ecg_only")
        ->check(CLI::IsMember({"ppg_only", "ppg_plus_ecg", "ecg_only"}));
    evaluate->add_option("--epochs", cfg.epochs, "Training epochs per fold");
    evaluate->add_option("--batch-size", cfg.batch_size, "Minibatch size");
    evaluate->add_option("--n-passes", cfg.n_passes, "Stochastic forward passes");
    evaluate->add_option("--iterations", cfg.iterations, "LOSO iterations");
    evaluate->add_option("--jobs", cfg.jobs, "Parallel fold workers");
    evaluate->add_option("--alpha-grid", cfg.alpha_grid_spec, "Comma-separated alphas");
    add_common(evaluate);

    auto* curves = app.add_subcommand("curves", "Re-emit curve tables from a report");
    curves->add_option("--report", cfg.report_path, "report json")->required();
    curves->add_option("--out", cfg.out_path, "Output directory")->required();
    add_common(curves);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        apply_config_file(*cmd, cfg);
        maybe_echo(cfg);
        if (cmd == synth) return run_synth(cfg);
        if (cmd == extract) return run_extract_ibi(cfg);
        if (cmd == features) return run_features(cfg);
        if (cmd == stats) return run_stats(cfg);
        if (cmd == train) return run_train(cfg);
        if (cmd == predict) return run_predict(cfg);
        if (cmd == evaluate) return run_evaluate(cfg);
        if (cmd == curves) return run_curves(cfg);
        return 1;
    } catch (const paff::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const paff::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
