#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "occ/oracle.hpp"
#include "occ/tensor.hpp"

namespace occ {

/// Last observed similarity per unordered pair over a dataset of n samples.
/// Storage is dense (n(n-1)/2 slots), sized for desk-scale datasets.
class PairSimilarityHistory {
public:
    struct Entry {
        double similarity = 0.0;
        std::int64_t iteration = -1;
    };

    PairSimilarityHistory() = default;
    explicit PairSimilarityHistory(std::size_t samples);

    std::size_t samples() const noexcept { return samples_; }
    std::optional<Entry> get(SamplePair pair) const;
    void set(SamplePair pair, double similarity, std::int64_t iteration);
    std::size_t size() const noexcept { return populated_; }

private:
    std::size_t index(SamplePair pair) const;

    std::size_t samples_ = 0;
    std::vector<double> similarity_;
    std::vector<std::int64_t> iteration_;
    std::size_t populated_ = 0;
};

struct QueryBudget {
    std::size_t total = 0;
    std::size_t spent = 0;
    std::size_t per_batch_quota = 2;  // 0 = no per-batch cap

    std::size_t remaining() const noexcept { return total > spent ? total - spent : 0; }
    bool exhausted() const noexcept { return remaining() == 0; }
    /// Queries this batch may issue.
    std::size_t batch_allowance() const noexcept;
};

enum class Strategy { Csd, Random, Entropy };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

/// s_now * |s_now - s_prev|
double csd_score(double s_now, double s_prev);

struct ScoredPair {
    SamplePair pair;
    double score = 0.0;
};

/// One mini-batch as seen by the selector: original sample ids plus
/// per-sample backbone features (N rows) and, for the entropy strategy,
/// per-sample assignment probabilities (N rows).
struct QueryBatch {
    std::span<const SampleId> ids;
    const Tensor2* features = nullptr;
    const Tensor2* assignments = nullptr;
    // Same samples under the previous cycle's parameters; when present it
    // supplies s_{c-1} instead of the pair history.
    const Tensor2* previous_features = nullptr;
    std::int64_t iteration = 0;
};

/// Picks up to batch_allowance() unanswered in-batch pairs. For Csd every
/// candidate pair is scored (history updated) and the top scores win, ties to
/// the lexicographically lowest pair. Does not charge the budget.
std::vector<ScoredPair> select_pairs(const QueryBatch& batch, PairSimilarityHistory& history,
                                     const AnnotationStore& store, const QueryBudget& budget,
                                     Strategy strategy, std::mt19937_64& rng);

/// Anchor = highest-entropy sample (preferring samples with no stored answer),
/// partner = sample whose similarity to the anchor is nearest the batch median.
std::vector<ScoredPair> entropy_baseline_select(const QueryBatch& batch,
                                                const AnnotationStore& store, std::size_t quota);

/// p*_z = sqrt(l_z) / sum sqrt(l)
std::vector<double> optimal_sampling_distribution(std::span<const double> losses);

/// D_p = sum_z l_z / p_z
double d_p(std::span<const double> losses, std::span<const double> p);

}  // namespace occ
