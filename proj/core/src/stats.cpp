#include "paff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "paff/errors.hpp"
#include "paff/rng.hpp"

namespace paff {

MannWhitneyResult mann_whitney(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw ValidationError("mann_whitney: empty sample");
    const std::size_t n1 = x.size(), n2 = y.size(), n = n1 + n2;

    struct Entry {
        double value;
        bool from_x;
    };
    std::vector<Entry> pooled;
    pooled.reserve(n);
    for (double v : x) pooled.push_back({v, true});
    for (double v : y) pooled.push_back({v, false});
    std::sort(pooled.begin(), pooled.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });

    // Midranks and tie groups.
    double rank_sum_x = 0.0;
    double tie_term = 0.0;  // sum of t^3 - t
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && pooled[j].value == pooled[i].value) ++j;
        const double t = static_cast<double>(j - i);
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (pooled[k].from_x) rank_sum_x += midrank;
        tie_term += t * t * t - t;
        i = j;
    }

    MannWhitneyResult result;
    result.n1 = n1;
    result.n2 = n2;
    result.u_statistic =
        rank_sum_x - static_cast<double>(n1) * static_cast<double>(n1 + 1) / 2.0;

    const double n1d = static_cast<double>(n1), n2d = static_cast<double>(n2),
                 nd = static_cast<double>(n);
    const double mu = n1d * n2d / 2.0;
    const double var =
        n1d * n2d / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
    if (var <= 0.0) {
        result.p_value = 1.0;  // all observations tied
        return result;
    }
    const double z = std::max(0.0, std::fabs(result.u_statistic - mu) - 0.5) / std::sqrt(var);
    result.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
    return result;
}

namespace {

std::vector<std::vector<double>> standardize(const std::vector<LabeledRow>& rows,
                                             std::vector<double>& means,
                                             std::vector<double>& stds) {
    const std::size_t d = rows.front().features.size();
    means.assign(d, 0.0);
    stds.assign(d, 0.0);
    for (const auto& r : rows) {
        if (r.features.size() != d)
            throw ValidationError("svm_train: inconsistent feature dimension");
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::isfinite(r.features[j]))
                throw ValidationError("svm_train: non-finite feature value");
            means[j] += r.features[j];
        }
    }
    for (auto& m : means) m /= static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j)
            stds[j] += (r.features[j] - means[j]) * (r.features[j] - means[j]);
    for (auto& s : stds) s = std::sqrt(s / static_cast<double>(rows.size()));

    std::vector<std::vector<double>> out(rows.size(), std::vector<double>(d));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            out[i][j] = stds[j] > 0.0 ? (rows[i].features[j] - means[j]) / stds[j] : 0.0;
    return out;
}

double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
    return std::exp(-gamma * d2);
}

}  // namespace

SvmModel svm_train(const std::vector<LabeledRow>& rows, double penalty_c, double gamma,
                   double kkt_tolerance) {
    if (rows.empty()) throw ValidationError("svm_train: empty training set");
    bool has_pos = false, has_neg = false;
    for (const auto& r : rows) (r.label > 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw ValidationError("svm_train: both classes required");

    SvmModel model;
    model.penalty_c = penalty_c;
    const auto x = standardize(rows, model.feature_means, model.feature_stds);
    const std::size_t n = rows.size();
    model.gamma = gamma > 0.0 ? gamma : 1.0 / static_cast<double>(x.front().size());

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rows[i].label > 0 ? 1.0 : -1.0;

    // Dense kernel cache; the feature tables here are small.
    std::vector<std::vector<double>> kernel(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            kernel[i][j] = kernel[j][i] = rbf_kernel(x[i], x[j], model.gamma);

    // SMO with maximal-violating-pair working set selection.
    // grad[i] = d(dual)/d(alpha_i) in the -y_i f(x_i) + 1 convention.
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - e'a
    const std::size_t max_iter = 100000;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // i: argmax of -y*grad over the upper-feasible set,
        // j: argmin over the lower-feasible set.
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::ptrdiff_t i_up = -1, j_low = -1;
        for (std::size_t t = 0; t < n; ++t) {
            const double yg = -y[t] * grad[t];
            const bool upper_ok =
                (y[t] > 0 && alpha[t] < penalty_c) || (y[t] < 0 && alpha[t] > 0);
            const bool lower_ok =
                (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < penalty_c);
            if (upper_ok && yg > g_max) {
                g_max = yg;
                i_up = static_cast<std::ptrdiff_t>(t);
            }
            if (lower_ok && yg < g_min) {
                g_min = yg;
                j_low = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (i_up < 0 || j_low < 0 || g_max - g_min < kkt_tolerance) break;
        const auto i = static_cast<std::size_t>(i_up);
        const auto j = static_cast<std::size_t>(j_low);

        const double quad =
            std::max(kernel[i][i] + kernel[j][j] - 2.0 * y[i] * y[j] * kernel[i][j], 1e-12);
        double delta = (g_max - g_min) / quad;

        // Clip to the box along the feasible direction.
        const double old_ai = alpha[i], old_aj = alpha[j];
        if (y[i] > 0)
            delta = std::min(delta, penalty_c - old_ai);
        else
            delta = std::min(delta, old_ai);
        if (y[j] > 0)
            delta = std::min(delta, old_aj);
        else
            delta = std::min(delta, penalty_c - old_aj);
        if (delta <= 0.0) break;

        alpha[i] = old_ai + y[i] * delta;
        alpha[j] = old_aj - y[j] * delta;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += y[t] * delta * (kernel[i][t] - kernel[j][t]);
    }

    // Bias from the midpoint of the remaining feasibility interval.
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = -y[t] * grad[t];
        const bool upper_ok = (y[t] > 0 && alpha[t] < penalty_c) || (y[t] < 0 && alpha[t] > 0);
        const bool lower_ok = (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < penalty_c);
        if (upper_ok) g_max = std::max(g_max, yg);
        if (lower_ok) g_min = std::min(g_min, yg);
        if (alpha[t] > 1e-12 && alpha[t] < penalty_c - 1e-12) {
            free_sum += yg;
            ++free_count;
        }
    }
    model.bias = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                : 0.5 * (g_max + g_min);

    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 1e-12) {
            model.support_vectors.push_back(x[t]);
            model.dual_coefficients.push_back(y[t] * alpha[t]);
        }
    }
    return model;
}

SvmPrediction svm_predict(const SvmModel& model, const std::vector<double>& features) {
    if (features.size() != model.feature_means.size())
        throw ValidationError("svm_predict: feature dimension mismatch");
    std::vector<double> z(features.size());
    for (std::size_t j = 0; j < features.size(); ++j)
        z[j] = model.feature_stds[j] > 0.0
                   ? (features[j] - model.feature_means[j]) / model.feature_stds[j]
                   : 0.0;
    double value = model.bias;
    for (std::size_t s = 0; s < model.support_vectors.size(); ++s)
        value += model.dual_coefficients[s] * rbf_kernel(model.support_vectors[s], z, model.gamma);
    SvmPrediction pred;
    pred.decision_value = value;
    pred.label = value >= 0.0 ? 1 : -1;
    return pred;
}

double kfold_accuracy(const std::vector<LabeledRow>& rows, std::size_t k, std::uint64_t seed,
                      double penalty_c, double gamma) {
    if (k < 2) throw ValidationError("kfold_accuracy: k must be >= 2");
    if (rows.size() < k) throw ValidationError("kfold_accuracy: fewer rows than folds");

    // Stratified assignment: shuffle within each class, deal round-robin.
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < rows.size(); ++i)
        (rows[i].label > 0 ? pos : neg).push_back(i);
    RngStream rng(seed);
    shuffle(pos, rng);
    shuffle(neg, rng);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t next = 0;
    for (std::size_t i : pos) folds[next++ % k].push_back(i);
    for (std::size_t i : neg) folds[next++ % k].push_back(i);

    double accuracy_sum = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t f = 0; f < k; ++f) {
        if (folds[f].empty()) continue;
        std::vector<LabeledRow> train;
        for (std::size_t g = 0; g < k; ++g)
            if (g != f)
                for (std::size_t i : folds[g]) train.push_back(rows[i]);
        bool has_pos = false, has_neg = false;
        for (const auto& r : train) (r.label > 0 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg)
            throw ValidationError("kfold_accuracy: single-class training split");
        const SvmModel model = svm_train(train, penalty_c, gamma);
        std::size_t correct = 0;
        for (std::size_t i : folds[f])
            if (svm_predict(model, rows[i].features).label == rows[i].label) ++correct;
        accuracy_sum += static_cast<double>(correct) / static_cast<double>(folds[f].size());
        ++evaluated;
    }
    return accuracy_sum / static_cast<double>(evaluated);
}

}  // namespace paff
