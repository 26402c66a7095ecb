#pragma once

#include <cstdint>
#include <vector>

namespace paff {

struct MannWhitneyResult {
    double u_statistic = 0.0;  // U of the first sample
    double p_value = 1.0;      // two-sided
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

/// Rank-sum test with midranks, tie-corrected normal approximation and
/// 0.5 continuity correction.
MannWhitneyResult mann_whitney(const std::vector<double>& x, const std::vector<double>& y);

/// Soft-margin RBF SVM trained by sequential minimal optimization.
/// Features are standardized internally with training statistics.
struct SvmModel {
    std::vector<std::vector<double>> support_vectors;  // standardized rows
    std::vector<double> dual_coefficients;             // y_i * alpha_i
    double bias = 0.0;
    double gamma = 0.0;
    double penalty_c = 1.0;
    std::vector<double> feature_means;
    std::vector<double> feature_stds;
};

struct LabeledRow {
    std::vector<double> features;
    int label = 1;  // +1 / -1
};

/// gamma <= 0 selects the 1/n_features default on standardized inputs.
SvmModel svm_train(const std::vector<LabeledRow>& rows, double penalty_c, double gamma,
                   double kkt_tolerance = 1e-3);

struct SvmPrediction {
    int label = 1;            // decision value 0 maps to +1
    double decision_value = 0.0;
};

SvmPrediction svm_predict(const SvmModel& model, const std::vector<double>& features);

/// Stratified shuffled k-fold mean accuracy.
double kfold_accuracy(const std::vector<LabeledRow>& rows, std::size_t k, std::uint64_t seed,
                      double penalty_c = 1.0, double gamma = 0.0);

}  // namespace paff
