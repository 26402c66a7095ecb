#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "paff/dataset.hpp"
#include "paff/model.hpp"

namespace paff {

/// Empirical predictive distribution from N stochastic forward passes.
struct PredictivePosterior {
    std::vector<double> samples;
    std::size_t n_passes() const { return samples.size(); }
};

enum class Outcome { High, Low, Abstain };
const char* to_string(Outcome o);

struct Decision {
    Outcome outcome = Outcome::Abstain;
    double alpha = 0.5;
    double mass_above = 0.0;  // fraction above midpoint, midpoint samples half each side
};

/// N MC-dropout passes with independent mask draws; deterministic per seed.
PredictivePosterior mc_predict(const AffectModel& model, const std::vector<double>& sequence,
                               std::size_t n_passes, std::uint64_t seed);

/// alpha-confidence rule around the valence midpoint: High when at least
/// alpha of the posterior mass lies above, Low when at least alpha lies
/// below, otherwise abstain. At alpha = 0.5 one side always qualifies,
/// so coverage is total (the median rule).
Decision decide(const PredictivePosterior& posterior, double alpha, double midpoint = 0.5);

/// Fraction of non-abstained decisions.
double coverage(const std::vector<Decision>& decisions);

/// F1 over attempted (non-abstained) cases only. Positive class is Low
/// valence. Empty attempted set -> no value.
std::optional<double> f1_attempted(const std::vector<Decision>& decisions,
                                   const std::vector<ValenceLabel::Binary>& truth);

/// Expected F1 of the uniform coin-flip classifier: precision equals the
/// positive-class prevalence, recall is 1/2.
double chance_f1(std::size_t positive_count, std::size_t negative_count);
double chance_f1_from_prevalence(double prevalence);

}  // namespace paff
