#include "occ/riskbound.hpp"

#include <algorithm>
#include <cmath>

#include "occ/contrastive.hpp"
#include "occ/errors.hpp"
#include "occ/query.hpp"

namespace occ {

double raw_pair_loss(std::span<const double> zi, std::span<const double> zj) {
    return 1.0 - cosine_similarity(zi, zj);
}

double pair_loss(std::span<const double> zi, std::span<const double> zj) {
    return std::clamp(raw_pair_loss(zi, zj), 0.0, 1.0);
}

void RiskPopulation::validate() const {
    if (losses.size() != p.size()) throw InvalidInput("risk population: losses and p differ");
    if (losses.empty()) throw InvalidInput("risk population is empty");
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (!(losses[i] >= 0.0 && losses[i] <= 1.0)) throw InvalidInput("loss outside [0,1]");
        if (!(p[i] > 0.0 && p[i] <= 1.0)) throw InvalidInput("query probability outside (0,1]");
    }
}

double RiskPopulation::mean_loss() const {
    double s = 0.0;
    for (double l : losses) s += l;
    return s / static_cast<double>(losses.size());
}

RiskTerms risk_decomposition(const RiskPopulation& population, double expected_risk,
                             std::span<const char> queried) {
    population.validate();
    if (queried.size() != population.losses.size())
        throw InvalidInput("query draw length does not match the population");
    RiskTerms t;
    t.target_mean = population.mean_loss();
    double weighted = 0.0;
    for (std::size_t z = 0; z < queried.size(); ++z)
        if (queried[z]) weighted += population.losses[z] / population.p[z];
    t.extended = weighted / static_cast<double>(queried.size());
    t.excess = std::abs(expected_risk - t.target_mean);
    t.active = std::abs(t.target_mean - t.extended);
    return t;
}

double bernstein_bound(std::span<const double> losses, std::span<const double> p, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (losses.empty()) throw InvalidInput("bernstein_bound: empty population");
    const double dp = d_p(losses, p);
    const double log_inv = std::log(1.0 / delta);
    return dp / (3.0 * static_cast<double>(losses.size())) * log_inv *
           (1.0 + std::sqrt(1.0 + 18.0 / log_inv));
}

CoverageReport monte_carlo_coverage(std::span<const double> losses, std::span<const double> p,
                                    double delta, std::size_t trials, std::mt19937_64& rng,
                                    double bound_scale) {
    if (trials < 1000) throw ConfigError("monte_carlo_coverage needs >= 1000 trials");
    RiskPopulation pop{{losses.begin(), losses.end()}, {p.begin(), p.end()}};
    pop.validate();
    CoverageReport report;
    report.bound = bernstein_bound(losses, p, delta);
    const double limit = bound_scale * report.bound;
    const double mean = pop.mean_loss();
    const double size = static_cast<double>(losses.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    report.deviations.reserve(trials);
    std::size_t covered = 0;
    double sum_b = 0.0;
    double sum_b2 = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        double weighted = 0.0;
        for (std::size_t z = 0; z < losses.size(); ++z)
            if (unit(rng) < p[z]) weighted += losses[z] / p[z];
        const double b = weighted / size;
        const double dev = std::abs(mean - b);
        report.deviations.push_back(dev);
        if (dev <= limit) ++covered;
        sum_b += b;
        sum_b2 += b * b;
    }
    const double nt = static_cast<double>(trials);
    report.coverage = static_cast<double>(covered) / nt;
    report.mean_extended = sum_b / nt;
    const double var = std::max(0.0, sum_b2 / nt - report.mean_extended * report.mean_extended);
    report.extended_stderr = std::sqrt(var / nt);
    return report;
}

std::vector<double> target_pair_losses(const Tensor2& embeddings, std::span<const int> labels) {
    if (labels.size() != embeddings.rows()) throw InvalidInput("labels do not match embeddings");
    std::vector<double> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j]) out.push_back(pair_loss(embeddings.row(i), embeddings.row(j)));
    return out;
}

}  // namespace occ
