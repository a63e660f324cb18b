#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "occ/augment.hpp"
#include "occ/contrastive.hpp"
#include "occ/data.hpp"
#include "occ/metrics.hpp"
#include "occ/numerics.hpp"
#include "occ/oracle.hpp"
#include "occ/query.hpp"

namespace occ {

struct TrainConfig {
    ModelShape model;  // input_dim/clusters are overwritten from data and `clusters`
    AugmentConfig augment;
    std::size_t clusters = 2;
    int epochs = 100;
    std::size_t batch_size = 128;
    double tau_instance = 0.5;
    double tau_cluster = 1.0;
    double learning_rate = 3e-4;
    Strategy strategy = Strategy::Csd;
    // Where CSD takes s_{c-1} from: the epoch-start parameter snapshot
    // evaluated on the current batch ("snapshot"), or the last in-batch
    // observation of the pair ("history", 0 when never seen).
    std::string csd_reference = "snapshot";
    double budget_fraction = 0.25;
    std::size_t queries_per_batch = 2;  // 0 = budget-paced only
    double lambda_max = 50.0;
    bool label_extension = true;
    double pseudo_threshold = 0.95;
    double pseudo_gate = 0.5;  // fraction of epochs before extension starts
    bool transitive_closure = false;
    ObjectiveTerms terms;
    int eval_every = 0;  // 0 = final epoch only
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    LossBreakdown loss;  // mean over the epoch's batches
    double lambda = 0.0;
    std::size_t queries_spent = 0;
    std::size_t budget_total = 0;
    std::size_t pseudo_pairs = 0;
    std::size_t c_nonzero = 0;  // query-matrix positives summed over batches
    std::optional<MetricTriple> metrics_a;
    std::optional<MetricTriple> metrics_b;
};

struct QueryLogEntry {
    int epoch = 0;
    std::size_t batch = 0;
    SamplePair pair;
    double score = 0.0;
    Strategy strategy = Strategy::Csd;
    std::optional<Answer> answer;  // empty when the oracle skipped
};

struct RunRecord {
    std::vector<EpochRecord> epochs;
    std::vector<QueryLogEntry> queries;
    std::vector<int> assignment;
    std::size_t candidate_pairs = 0;
    std::size_t budget_total = 0;
    std::size_t queries_spent = 0;
    std::size_t queries_skipped = 0;
    std::size_t batches = 0;
    std::size_t oracle_pairs = 0;
    std::size_t pseudo_pairs = 0;
    std::optional<MetricTriple> final_a;
    std::optional<MetricTriple> final_b;
    std::uint64_t seed = 0;
    nlohmann::json config;
};

struct TrainProgress {
    int epoch = 0;
    std::size_t batch = 0;
    double loss_total = 0.0;
    std::size_t queries_spent = 0;
    std::size_t budget_total = 0;
};

struct TrainHooks {
    std::function<void(const TrainProgress&)> on_batch;
    std::function<void(const EpochRecord&, const ModelParams&)> on_epoch;
};

struct TrainResult {
    ModelParams params;
    RunRecord record;
    AnnotationStore store;
};

/// Runs the oracle-guided training loop. `oracle` may be null (no queries).
TrainResult train(const Dataset& dataset, OracleAdapter* oracle, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Same, continuing from an existing annotation store.
TrainResult train(const Dataset& dataset, OracleAdapter* oracle, const TrainConfig& config,
                  AnnotationStore store, const TrainHooks& hooks);

/// Row-wise argmax with ties to the lowest index.
std::vector<int> argmax_rows(const Tensor2& probabilities);

/// Cluster of every sample, computed on un-augmented inputs.
std::vector<int> assign_clusters(const ModelParams& params, const Dataset& dataset);

/// Full-dataset forward pass on un-augmented inputs.
ForwardPass embed(const ModelParams& params, const Dataset& dataset);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const RunRecord& record);
nlohmann::json to_json(const QueryLogEntry& entry);

/// Little-endian: "OCC1", u32 encoder layer count, then per layer (encoder,
/// representation, assignment) u32 in, u32 out, u32 activation; then every
/// weight matrix (row-major) and bias vector as raw f64 in the same order.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a(const std::string& text);

}  // namespace occ
