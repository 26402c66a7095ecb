#include "paff/selective.hpp"

#include "paff/errors.hpp"

namespace paff {

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::High: return "high";
        case Outcome::Low: return "low";
        default: return "abstain";
    }
}

PredictivePosterior mc_predict(const AffectModel& model, const std::vector<double>& sequence,
                               std::size_t n_passes, std::uint64_t seed) {
    if (n_passes < 1) throw ValidationError("mc_predict: need at least one pass");
    PredictivePosterior posterior;
    posterior.samples.reserve(n_passes);
    RngStream root(seed);
    for (std::size_t p = 0; p < n_passes; ++p) {
        RngStream pass_rng = root.split(p);
        posterior.samples.push_back(model.forward_stochastic(sequence, pass_rng));
    }
    return posterior;
}

Decision decide(const PredictivePosterior& posterior, double alpha, double midpoint) {
    if (posterior.samples.empty()) throw ValidationError("decide: empty posterior");
    if (alpha < 0.5 || alpha > 1.0) throw ValidationError("decide: alpha must be in [0.5, 1]");

    double above = 0.0;
    for (double s : posterior.samples) {
        if (s > midpoint)
            above += 1.0;
        else if (s == midpoint)
            above += 0.5;
    }
    Decision d;
    d.alpha = alpha;
    d.mass_above = above / static_cast<double>(posterior.samples.size());
    if (d.mass_above >= alpha)
        d.outcome = Outcome::High;
    else if (1.0 - d.mass_above >= alpha)
        d.outcome = Outcome::Low;
    else
        d.outcome = Outcome::Abstain;
    return d;
}

double coverage(const std::vector<Decision>& decisions) {
    if (decisions.empty()) throw ValidationError("coverage: empty decision list");
    std::size_t attempted = 0;
    for (const auto& d : decisions)
        if (d.outcome != Outcome::Abstain) ++attempted;
    return static_cast<double>(attempted) / static_cast<double>(decisions.size());
}

std::optional<double> f1_attempted(const std::vector<Decision>& decisions,
                                   const std::vector<ValenceLabel::Binary>& truth) {
    if (decisions.size() != truth.size())
        throw ValidationError("f1_attempted: decision/label count mismatch");
    std::size_t tp = 0, fp = 0, fn = 0, attempted = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (decisions[i].outcome == Outcome::Abstain) continue;
        if (truth[i] == ValenceLabel::Binary::Neutral)
            throw ValidationError("f1_attempted: neutral label has no binary class");
        ++attempted;
        const bool predicted_low = decisions[i].outcome == Outcome::Low;
        const bool is_low = truth[i] == ValenceLabel::Binary::Low;
        if (predicted_low && is_low)
            ++tp;
        else if (predicted_low && !is_low)
            ++fp;
        else if (!predicted_low && is_low)
            ++fn;
    }
    if (attempted == 0) return std::nullopt;
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

double chance_f1_from_prevalence(double prevalence) {
    if (prevalence < 0.0 || prevalence > 1.0)
        throw ValidationError("chance_f1: prevalence outside [0, 1]");
    // P = prevalence, R = 1/2: F1 = 2PR/(P+R) = prevalence / (prevalence + 0.5)
    return prevalence / (prevalence + 0.5);
}

double chance_f1(std::size_t positive_count, std::size_t negative_count) {
    const std::size_t total = positive_count + negative_count;
    if (total == 0) throw ValidationError("chance_f1: empty class counts");
    return chance_f1_from_prevalence(static_cast<double>(positive_count) /
                                     static_cast<double>(total));
}

}  // namespace paff
