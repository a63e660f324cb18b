#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "occ/tensor.hpp"

namespace occ {

/// 1 - cos(z_i, z_j), clamped to [0, 1].
double pair_loss(std::span<const double> zi, std::span<const double> zj);
double raw_pair_loss(std::span<const double> zi, std::span<const double> zj);

/// Target same-cluster pairs with their losses and query probabilities.
struct RiskPopulation {
    std::vector<double> losses;
    std::vector<double> p;

    void validate() const;
    double mean_loss() const;
};

struct RiskTerms {
    double excess = 0.0;    // |expected risk - mean target risk|
    double extended = 0.0;  // (1/|T|) sum Q_z / p_z * l_z
    double active = 0.0;    // |mean target risk - extended|
    double target_mean = 0.0;
};

RiskTerms risk_decomposition(const RiskPopulation& population, double expected_risk,
                             std::span<const char> queried);

/// (D_p / (3|T|)) log(1/delta) (1 + sqrt(1 + 18 / log(1/delta)))
double bernstein_bound(std::span<const double> losses, std::span<const double> p, double delta);

struct CoverageReport {
    double coverage = 0.0;
    double bound = 0.0;
    double mean_extended = 0.0;  // average of term B over the trials
    double extended_stderr = 0.0;
    std::vector<double> deviations;  // |mean risk - importance-weighted risk| per trial
};

/// Draws Q ~ Bernoulli(p) independently per trial and reports how often the
/// active clustering risk stays within bound_scale * bernstein_bound.
CoverageReport monte_carlo_coverage(std::span<const double> losses, std::span<const double> p,
                                    double delta, std::size_t trials, std::mt19937_64& rng,
                                    double bound_scale = 1.0);

/// Losses of every same-label pair (i < j) under `labels`, using the clamped
/// pair loss on the rows of `embeddings`.
std::vector<double> target_pair_losses(const Tensor2& embeddings, std::span<const int> labels);

}  // namespace occ
