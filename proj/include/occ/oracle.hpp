#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "occ/contrastive.hpp"
#include "occ/data.hpp"

namespace occ {

using SampleId = std::uint32_t;

/// Unordered pair of distinct sample ids, stored as (min, max).
struct SamplePair {
    SampleId first = 0;
    SampleId second = 0;

    SamplePair() = default;
    SamplePair(SampleId a, SampleId b);

    std::uint64_t key() const noexcept {
        return (static_cast<std::uint64_t>(first) << 32) | second;
    }
    auto operator<=>(const SamplePair&) const = default;
};

enum class Answer : std::uint8_t { Same, Different };
enum class Provenance : std::uint8_t { Oracle, Pseudo };

std::string to_string(Answer a);
std::string to_string(Provenance p);

struct Annotation {
    Answer answer = Answer::Different;
    Provenance provenance = Provenance::Oracle;
    int epoch = 0;
};

enum class RecordOutcome { Inserted, Upgraded, Duplicate, Ignored };

/// Accumulated same/different answers keyed by unordered pair. Pseudo
/// answers never overwrite anything; oracle answers replace pseudo ones.
class AnnotationStore {
public:
    RecordOutcome record(SamplePair pair, Answer answer, Provenance provenance, int epoch = 0);

    std::optional<Annotation> lookup(SamplePair pair) const;
    bool contains(SamplePair pair) const { return entries_.contains(pair.key()); }

    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t oracle_count() const noexcept { return oracle_count_; }
    std::size_t pseudo_count() const noexcept { return entries_.size() - oracle_count_; }
    std::size_t duplicate_count() const noexcept { return duplicates_; }

    /// Partners of `id` that share a stored answer with it.
    std::span<const SampleId> partners(SampleId id) const;
    bool has_any_answer(SampleId id) const { return !partners(id).empty(); }
    bool has_oracle_answer(SampleId id) const;

    /// All entries sorted by pair, for deterministic iteration.
    std::vector<std::pair<SamplePair, Annotation>> sorted_entries() const;

    void save_jsonl(const std::filesystem::path& path) const;
    static AnnotationStore load_jsonl(const std::filesystem::path& path);

    bool operator==(const AnnotationStore& other) const;

private:
    std::unordered_map<std::uint64_t, Annotation> entries_;
    std::unordered_map<SampleId, std::vector<SampleId>> partners_;
    std::unordered_map<SampleId, std::size_t> oracle_degree_;
    std::size_t oracle_count_ = 0;
    std::size_t duplicates_ = 0;
};

Answer simulated_answer(SamplePair pair, const Dataset& dataset, const OrientationMap& orientation);

/// Source of same-cluster answers. An empty result means the query was
/// skipped (timeout, backpressure); it is not charged to the budget.
class OracleAdapter {
public:
    virtual ~OracleAdapter() = default;
    virtual std::optional<Answer> ask(SamplePair pair, int epoch) = 0;
};

class SimulatedOracle final : public OracleAdapter {
public:
    SimulatedOracle(const Dataset& dataset, OrientationMap orientation);
    std::optional<Answer> ask(SamplePair pair, int epoch) override;

private:
    const Dataset& dataset_;
    OrientationMap orientation_;
};

/// Linear decay lambda(e) = lambda_max * (E - e) / E.
struct LambdaSchedule {
    double lambda_max = 50.0;
    int total_epochs = 1000;
};

double lambda_at(const LambdaSchedule& schedule, int epoch);

/// C over the batch ids: lambda where the pair is stored as same (oracle or
/// pseudo). With `transitive`, oracle same-answers are closed under
/// transitivity first.
QueryMatrix build_query_matrix(const AnnotationStore& store, std::span<const SampleId> batch_ids,
                               double lambda, bool transitive = false);

struct ExtensionStats {
    std::size_t sources = 0;    // oracle-annotated samples considered
    std::size_t extended = 0;   // samples that inherited relations
    std::size_t added = 0;      // pseudo pairs recorded
};

/// Pseudo-labeling: every sample with no stored answer whose representation
/// has cosine similarity > threshold with an oracle-annotated sample inherits
/// that sample's oracle relations. Annotated/unannotated sets are taken from
/// the store as it was on entry; sources are visited in ascending id order.
ExtensionStats extend_labels(AnnotationStore& store, const Tensor2& zhat, double threshold,
                             int epoch, int gate_epoch = 0);

}  // namespace occ
