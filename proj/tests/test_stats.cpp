#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "paff/errors.hpp"
#include "paff/rng.hpp"
#include "paff/stats.hpp"

using namespace paff;

namespace {

/// U statistic of sample x by direct pair counting with half credit for ties.
double direct_u(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double xi : x) {
        for (double yj : y) {
            if (xi > yj)
                u += 1.0;
            else if (xi == yj)
                u += 0.5;
        }
    }
    return u;
}

/// Exact two-sided p over all C(n1+n2, n1) assignments, measured as the
/// tail mass at least as far from the null mean as the observed U.
double exact_permutation_p(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    const std::size_t n = pooled.size(), n1 = x.size();
    const double mid = static_cast<double>(n1 * (n - n1)) / 2.0;
    const double observed = std::fabs(direct_u(x, y) - mid);

    std::size_t total = 0, extreme = 0;
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < n; ++i)
            (mask >> i & 1u ? a : b).push_back(pooled[i]);
        ++total;
        if (std::fabs(direct_u(a, b) - mid) >= observed - 1e-12) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

std::vector<LabeledRow> two_blobs(std::size_t per_class, double separation,
                                  std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<LabeledRow> rows;
    for (std::size_t i = 0; i < per_class; ++i) {
        rows.push_back({{separation + rng.next_normal() * 0.3,
                         separation + rng.next_normal() * 0.3},
                        +1});
        rows.push_back({{-separation + rng.next_normal() * 0.3,
                         -separation + rng.next_normal() * 0.3},
                        -1});
    }
    return rows;
}

double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-gamma * d2);
}

std::vector<double> standardized(const SvmModel& model, const std::vector<double>& x) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        z[i] = (x[i] - model.feature_means[i]) / model.feature_stds[i];
    return z;
}

double dual_objective(const std::vector<std::vector<double>>& z, const std::vector<int>& y,
                      const std::vector<double>& alpha, double gamma) {
    double obj = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        obj += alpha[i];
        for (std::size_t j = 0; j < z.size(); ++j)
            obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * rbf(z[i], z[j], gamma);
    }
    return obj;
}

}  // namespace

TEST_CASE("complete separation gives minimal U") {
    const auto r = mann_whitney({1.0, 2.0}, {3.0, 4.0});
    CHECK(r.u_statistic == 0.0);
    CHECK(r.n1 == 2);
    CHECK(r.n2 == 2);
}

TEST_CASE("identical samples are indistinguishable") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
    const auto r = mann_whitney(x, x);
    CHECK(r.p_value > 0.9);
}

TEST_CASE("U statistics of the two samples are complementary") {
    RngStream rng(3);
    std::vector<double> x(8), y(11);
    for (auto& v : x) v = rng.next_normal();
    for (auto& v : y) v = rng.next_normal() + 0.4;
    const auto rx = mann_whitney(x, y);
    const auto ry = mann_whitney(y, x);
    CHECK(rx.u_statistic + ry.u_statistic ==
          doctest::Approx(static_cast<double>(x.size() * y.size())));
    CHECK(rx.p_value == doctest::Approx(ry.p_value).epsilon(1e-12));
}

TEST_CASE("p is invariant under strictly monotone transforms") {
    RngStream rng(9);
    std::vector<double> x(10), y(10);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    for (auto& v : y) v = rng.uniform(0.2, 1.2);
    auto warp = [](std::vector<double> v) {
        for (auto& e : v) e = std::exp(3.0 * e);
        return v;
    };
    const auto plain = mann_whitney(x, y);
    const auto warped = mann_whitney(warp(x), warp(y));
    CHECK(plain.u_statistic == warped.u_statistic);
    CHECK(plain.p_value == doctest::Approx(warped.p_value).epsilon(1e-12));
}

TEST_CASE("normal approximation tracks the exact permutation distribution") {
    RngStream rng(21);
    for (int rep = 0; rep < 4; ++rep) {
        std::vector<double> x(6), y(6);
        for (auto& v : x) v = rng.next_normal();
        for (auto& v : y) v = rng.next_normal() + 0.3 * rep;
        const auto approx = mann_whitney(x, y);
        const double exact = exact_permutation_p(x, y);
        CHECK(std::fabs(approx.p_value - exact) <= 0.02);
    }
}

TEST_CASE("midranks handle ties and a fully tied pool") {
    const std::vector<double> x = {1.0, 2.0, 2.0, 3.0};
    const std::vector<double> y = {2.0, 3.0, 4.0, 5.0};
    const auto r = mann_whitney(x, y);
    CHECK(r.u_statistic == doctest::Approx(direct_u(x, y)));

    const std::vector<double> tied(6, 1.0);
    CHECK(mann_whitney(tied, tied).p_value == doctest::Approx(1.0));
}

TEST_CASE("empty sample is rejected") {
    CHECK_THROWS_AS(mann_whitney({}, {1.0}), ValidationError);
}

TEST_CASE("separable blobs are classified perfectly") {
    const auto rows = two_blobs(10, 2.0, 7);
    const auto model = svm_train(rows, 1.0, 0.0);
    for (const auto& row : rows)
        CHECK(svm_predict(model, row.features).label == row.label);
}

TEST_CASE("converged dual beats a coarse grid of feasible candidates") {
    // Four points, one per quadrant axis; candidates (a, b, a, b) satisfy
    // the equality constraint for every grid value.
    const std::vector<LabeledRow> rows = {
        {{1.5, 0.0}, +1}, {{0.0, 1.5}, -1}, {{-1.5, 0.0}, +1}, {{0.0, -1.5}, -1}};
    const double c_penalty = 1.0;
    const auto model = svm_train(rows, c_penalty, 0.0);

    std::vector<std::vector<double>> z;
    std::vector<int> y;
    for (const auto& row : rows) {
        z.push_back(standardized(model, row.features));
        y.push_back(row.label);
    }
    // Recover per-point alphas by matching standardized support vectors.
    std::vector<double> alpha(rows.size(), 0.0);
    for (std::size_t s = 0; s < model.support_vectors.size(); ++s) {
        for (std::size_t i = 0; i < z.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < z[i].size(); ++k)
                d2 += (z[i][k] - model.support_vectors[s][k]) *
                      (z[i][k] - model.support_vectors[s][k]);
            if (d2 < 1e-18 && alpha[i] == 0.0) {
                alpha[i] = model.dual_coefficients[s] * y[i];
                break;
            }
        }
    }
    const double trained = dual_objective(z, y, alpha, model.gamma);

    double best_grid = -1e300;
    for (int ia = 0; ia <= 20; ++ia) {
        for (int ib = 0; ib <= 20; ++ib) {
            const double a = c_penalty * ia / 20.0, b = c_penalty * ib / 20.0;
            best_grid = std::max(best_grid, dual_objective(z, y, {a, b, a, b}, model.gamma));
        }
    }
    CHECK(trained >= best_grid - 1e-3);
}

TEST_CASE("flipping every label negates the decision values") {
    auto rows = two_blobs(8, 1.0, 11);
    auto flipped = rows;
    for (auto& r : flipped) r.label = -r.label;
    const auto m1 = svm_train(rows, 1.0, 0.5);
    const auto m2 = svm_train(flipped, 1.0, 0.5);
    for (const auto& r : rows) {
        const double d1 = svm_predict(m1, r.features).decision_value;
        const double d2 = svm_predict(m2, r.features).decision_value;
        CHECK(d1 == doctest::Approx(-d2).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("zero decision value maps to the positive class") {
    SvmModel model;
    model.bias = 0.0;
    model.gamma = 1.0;
    model.feature_means = {0.0};
    model.feature_stds = {1.0};
    const auto p = svm_predict(model, {0.3});
    CHECK(p.decision_value == 0.0);
    CHECK(p.label == +1);
}

TEST_CASE("an isolated positive support vector dominates nearby space") {
    const std::vector<LabeledRow> rows = {
        {{5.0, 5.0}, +1}, {{-1.0, -1.0}, -1}, {{-1.2, -0.8}, -1}, {{-0.8, -1.2}, -1}};
    const auto model = svm_train(rows, 10.0, 0.0);
    CHECK(svm_predict(model, {5.0, 5.0}).label == +1);
}

TEST_CASE("k-fold accuracy is perfect on separable data") {
    const auto rows = two_blobs(15, 2.0, 13);
    CHECK(kfold_accuracy(rows, 5, 1) == doctest::Approx(1.0));
}

TEST_CASE("k-fold accuracy is at chance for uninformative labels") {
    RngStream rng(17);
    std::vector<LabeledRow> rows;
    for (int i = 0; i < 200; ++i) {
        rows.push_back({{rng.next_normal(), rng.next_normal()},
                        rng.next_double() < 0.5 ? +1 : -1});
    }
    const double acc = kfold_accuracy(rows, 10, 2);
    CHECK(acc >= 0.4);
    CHECK(acc <= 0.6);
}

TEST_CASE("k equal to the row count degenerates to leave-one-out") {
    const auto rows = two_blobs(6, 2.0, 19);
    const double acc = kfold_accuracy(rows, rows.size(), 3);
    CHECK(acc == doctest::Approx(1.0));
}
