#pragma once

#include <span>
#include <vector>

namespace occ {

/// counts[p][t] over predicted clusters p and true labels t (both remapped to
/// 0..K-1 in order of first appearance of their sorted values).
struct ContingencyTable {
    std::vector<std::vector<long>> counts;
    long total = 0;

    std::size_t predicted_clusters() const noexcept { return counts.size(); }
    std::size_t true_labels() const noexcept { return counts.empty() ? 0 : counts.front().size(); }
};

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth);

/// Mutual information over the arithmetic mean of the two entropies; 0 when
/// either partition is constant (1 when both are).
double nmi(std::span<const int> pred, std::span<const int> truth);
double ari(std::span<const int> pred, std::span<const int> truth);
/// Best one-to-one cluster-to-label matching (Hungarian), as a fraction.
double acc(std::span<const int> pred, std::span<const int> truth);

/// Maximum-weight assignment on a rectangular matrix; returns the column
/// matched to each row (-1 when unmatched).
std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight);

struct MetricTriple {
    double nmi = 0.0;
    double ari = 0.0;
    double acc = 0.0;
};

MetricTriple evaluate(std::span<const int> pred, std::span<const int> truth);

}  // namespace occ
