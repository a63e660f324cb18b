#include "occ/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "occ/errors.hpp"

namespace occ {

void TrainConfig::validate() const {
    if (clusters < 2) throw ConfigError("train.clusters (K) must be >= 2");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("train.batch_size (N) must be >= 2");
    if (!(tau_instance > 0.0) || !(tau_cluster > 0.0))
        throw ConfigError("temperatures must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (!(budget_fraction >= 0.0 && budget_fraction <= 1.0))
        throw ConfigError("query.budget_fraction must lie in [0,1]");
    if (!(lambda_max >= 0.0)) throw ConfigError("train.lambda_max must be >= 0");
    if (!(pseudo_threshold > 0.0 && pseudo_threshold < 1.0))
        throw ConfigError("train.pseudo_threshold must lie in (0,1)");
    if (!(pseudo_gate >= 0.0 && pseudo_gate <= 1.0))
        throw ConfigError("train.pseudo_gate must lie in [0,1]");
    if (model.hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
    if (model.rep_dim == 0) throw ConfigError("model.rep_dim must be >= 1");
    if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
    if (csd_reference != "snapshot" && csd_reference != "history")
        throw ConfigError("query.csd_reference must be snapshot or history");
    augment.validate();
}

namespace {

// Independent deterministic streams so that, e.g., query randomness never
// perturbs augmentation draws.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

class PairTracker {
public:
    explicit PairTracker(std::size_t n) : n_(n), bits_((n * (n - 1) / 2 + 63) / 64, 0) {}

    void visit(std::span<const SampleId> ids) {
        for (std::size_t a = 0; a < ids.size(); ++a)
            for (std::size_t b = a + 1; b < ids.size(); ++b) {
                std::size_t i = std::min(ids[a], ids[b]);
                std::size_t j = std::max(ids[a], ids[b]);
                if (i == j) continue;
                const std::size_t k = i * n_ - i * (i + 1) / 2 + (j - i - 1);
                const std::uint64_t mask = std::uint64_t{1} << (k % 64);
                if (!(bits_[k / 64] & mask)) {
                    bits_[k / 64] |= mask;
                    ++count_;
                }
            }
    }
    std::size_t count() const noexcept { return count_; }

private:
    std::size_t n_;
    std::vector<std::uint64_t> bits_;
    std::size_t count_ = 0;
};

Tensor2 view_mean(const Tensor2& stacked) {
    const std::size_t n = stacked.rows() / 2;
    Tensor2 out(n, stacked.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < stacked.cols(); ++c)
            out(i, c) = 0.5 * (stacked(i, c) + stacked(n + i, c));
    return out;
}

void accumulate(LossBreakdown& sum, const LossBreakdown& b) {
    sum.rep_loss += b.rep_loss;
    sum.assign_loss += b.assign_loss;
    sum.cluster_loss += b.cluster_loss;
    sum.balance += b.balance;
    sum.total += b.total;
    sum.rep_included = b.rep_included;
    sum.assign_included = b.assign_included;
}

void scale(LossBreakdown& b, double f) {
    b.rep_loss *= f;
    b.assign_loss *= f;
    b.cluster_loss *= f;
    b.balance *= f;
    b.total *= f;
}

nlohmann::json metrics_json(const std::optional<MetricTriple>& m) {
    if (!m) return nullptr;
    return {{"nmi", m->nmi}, {"ari", m->ari}, {"acc", m->acc}};
}

}  // namespace

std::vector<int> argmax_rows(const Tensor2& probabilities) {
    std::vector<int> out(probabilities.rows(), 0);
    for (std::size_t r = 0; r < probabilities.rows(); ++r) {
        const auto row = probabilities.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

ForwardPass embed(const ModelParams& params, const Dataset& dataset) {
    return forward(params, dataset.features);
}

std::vector<int> assign_clusters(const ModelParams& params, const Dataset& dataset) {
    return argmax_rows(embed(params, dataset).yhat);
}

TrainResult train(const Dataset& dataset, OracleAdapter* oracle, const TrainConfig& config,
                  const TrainHooks& hooks) {
    return train(dataset, oracle, config, AnnotationStore{}, hooks);
}

TrainResult train(const Dataset& dataset, OracleAdapter* oracle, const TrainConfig& config,
                  AnnotationStore store, const TrainHooks& hooks) {
    config.validate();
    const std::size_t n = dataset.size();
    if (n < 2) throw InvalidInput("training needs at least 2 samples");
    const std::size_t batch = std::min(config.batch_size, n);

    auto rng_init = stream(config.seed, 1);
    auto rng_shuffle = stream(config.seed, 2);
    auto rng_augment = stream(config.seed ^ config.augment.seed, 3);
    auto rng_query = stream(config.seed, 4);

    ModelShape shape = config.model;
    shape.input_dim = dataset.dim();
    shape.clusters = config.clusters;
    TrainResult result;
    result.params = init_params(shape, rng_init);
    ModelParams& params = result.params;
    AdamState adam;

    RunRecord& record = result.record;
    record.seed = config.seed;
    record.config = to_json(config);

    const bool querying = oracle != nullptr && config.budget_fraction > 0.0;
    PairSimilarityHistory history(querying && config.strategy == Strategy::Csd ? n : 0);
    std::optional<PairTracker> tracker;
    if (querying) tracker.emplace(n);
    QueryBudget budget{0, 0, config.queries_per_batch};

    const LambdaSchedule schedule{config.lambda_max, config.epochs};
    const int gate_epoch = static_cast<int>(std::floor(config.pseudo_gate * config.epochs));
    const std::size_t batches = n / batch;  // last partial batch dropped

    std::vector<SampleId> order(n);
    std::iota(order.begin(), order.end(), SampleId{0});
    const std::size_t dim = dataset.dim();
    std::int64_t iteration = 0;

    const bool use_snapshot = querying && config.strategy == Strategy::Csd &&
                              config.csd_reference == "snapshot";
    ModelParams snapshot;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (use_snapshot) snapshot = params;
        std::shuffle(order.begin(), order.end(), rng_shuffle);
        const double lambda = lambda_at(schedule, epoch);
        EpochRecord er;
        er.epoch = epoch;
        er.lambda = lambda;

        for (std::size_t b = 0; b < batches; ++b, ++iteration) {
            const std::span<const SampleId> ids(order.data() + b * batch, batch);
            Tensor2 x(2 * batch, dim);
            for (std::size_t i = 0; i < batch; ++i) {
                auto [va, vb] = augment_pair(dataset.features.row(ids[i]), config.augment, rng_augment);
                std::copy(va.begin(), va.end(), x.row(i).begin());
                std::copy(vb.begin(), vb.end(), x.row(batch + i).begin());
            }
            const ForwardPass pass = forward(params, x);

            if (querying) {
                tracker->visit(ids);
                budget.total = static_cast<std::size_t>(
                    std::floor(config.budget_fraction * static_cast<double>(tracker->count())));
                if (budget.batch_allowance() > 0) {
                    const Tensor2 features = view_mean(pass.z);
                    Tensor2 assignments;
                    if (config.strategy == Strategy::Entropy) assignments = view_mean(pass.yhat);
                    Tensor2 previous;
                    if (use_snapshot) previous = view_mean(forward(snapshot, x).z);
                    const QueryBatch qb{ids, &features,
                                        config.strategy == Strategy::Entropy ? &assignments : nullptr,
                                        use_snapshot ? &previous : nullptr, iteration};
                    const auto picks =
                        select_pairs(qb, history, store, budget, config.strategy, rng_query);
                    for (const auto& pick : picks) {
                        const auto answer = oracle->ask(pick.pair, epoch);
                        QueryLogEntry entry;
                        entry.epoch = epoch;
                        entry.batch = b;
                        entry.pair = pick.pair;
                        entry.score = pick.score;
                        entry.strategy = config.strategy;
                        entry.answer = answer;
                        record.queries.push_back(entry);
                        if (!answer) {
                            ++record.queries_skipped;
                            continue;
                        }
                        const auto outcome = store.record(pick.pair, *answer, Provenance::Oracle, epoch);
                        if (outcome == RecordOutcome::Inserted || outcome == RecordOutcome::Upgraded)
                            ++budget.spent;
                    }
                }
            }

            const QueryMatrix c = build_query_matrix(store, ids, lambda, config.transitive_closure);
            er.c_nonzero += c.nonzero_pairs();
            const ObjectiveGrad obj = total_loss_grad(pass.zhat, pass.yhat, c, config.tau_instance,
                                                      config.tau_cluster, config.terms);
            if (!std::isfinite(obj.breakdown.total))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b));
            ModelParams grads;
            try {
                grads = backward(params, pass, obj.grad_zhat, obj.grad_yhat);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b));
            }
            adam_step(params, grads, adam, config.learning_rate);
            accumulate(er.loss, obj.breakdown);
            if (hooks.on_batch)
                hooks.on_batch({epoch, b, obj.breakdown.total, budget.spent, budget.total});
        }
        if (batches > 0) scale(er.loss, 1.0 / static_cast<double>(batches));
        record.batches += batches;

        if (config.label_extension && oracle != nullptr && epoch >= gate_epoch &&
            store.oracle_count() > 0) {
            const ForwardPass full = embed(params, dataset);
            extend_labels(store, full.zhat, config.pseudo_threshold, epoch, gate_epoch);
        }

        er.queries_spent = budget.spent;
        er.budget_total = budget.total;
        er.pseudo_pairs = store.pseudo_count();
        const bool last = epoch + 1 == config.epochs;
        if (dataset.has_orientations() &&
            (last || (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0))) {
            const auto assignment = assign_clusters(params, dataset);
            er.metrics_a = evaluate(assignment, dataset.orient_a);
            er.metrics_b = evaluate(assignment, dataset.orient_b);
        }
        record.epochs.push_back(er);
        if (hooks.on_epoch) hooks.on_epoch(er, params);
    }

    record.assignment = assign_clusters(params, dataset);
    record.candidate_pairs = tracker ? tracker->count() : 0;
    record.budget_total = budget.total;
    record.queries_spent = budget.spent;
    record.oracle_pairs = store.oracle_count();
    record.pseudo_pairs = store.pseudo_count();
    if (dataset.has_orientations()) {
        record.final_a = evaluate(record.assignment, dataset.orient_a);
        record.final_b = evaluate(record.assignment, dataset.orient_b);
    }
    result.store = std::move(store);
    return result;
}

nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["model"] = {{"hidden", c.model.hidden}, {"rep_dim", c.model.rep_dim}};
    j["augment"] = {{"noise_sigma", c.augment.noise_sigma},
                    {"dropout", c.augment.dropout},
                    {"scale_jitter", c.augment.scale_jitter},
                    {"seed", c.augment.seed}};
    j["train"] = {{"clusters", c.clusters},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"tau_instance", c.tau_instance},
                  {"tau_cluster", c.tau_cluster},
                  {"learning_rate", c.learning_rate},
                  {"lambda_max", c.lambda_max},
                  {"label_extension", c.label_extension},
                  {"pseudo_threshold", c.pseudo_threshold},
                  {"pseudo_gate", c.pseudo_gate},
                  {"transitive_closure", c.transitive_closure},
                  {"representation_loss", c.terms.representation},
                  {"assignment_loss", c.terms.assignment},
                  {"eval_every", c.eval_every},
                  {"seed", c.seed}};
    j["query"] = {{"strategy", to_string(c.strategy)},
                  {"budget_fraction", c.budget_fraction},
                  {"queries_per_batch", c.queries_per_batch},
                  {"csd_reference", c.csd_reference}};
    return j;
}

namespace {

template <typename T>
void read(const nlohmann::json& section, const char* key, T& out, const std::string& where) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

void reject_unknown(const nlohmann::json& section, std::initializer_list<const char*> known,
                    const std::string& where) {
    if (!section.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : section.items())
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError("unknown key " + where + "." + key);
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, {"hidden", "rep_dim"}, "model");
        read(m, "hidden", c.model.hidden, "model");
        read(m, "rep_dim", c.model.rep_dim, "model");
    }
    if (j.contains("augment")) {
        const auto& a = j.at("augment");
        reject_unknown(a, {"noise_sigma", "dropout", "scale_jitter", "seed"}, "augment");
        read(a, "noise_sigma", c.augment.noise_sigma, "augment");
        read(a, "dropout", c.augment.dropout, "augment");
        read(a, "scale_jitter", c.augment.scale_jitter, "augment");
        read(a, "seed", c.augment.seed, "augment");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        reject_unknown(t,
                       {"clusters", "epochs", "batch_size", "tau_instance", "tau_cluster",
                        "learning_rate", "lambda_max", "label_extension", "pseudo_threshold",
                        "pseudo_gate", "transitive_closure", "representation_loss",
                        "assignment_loss", "eval_every", "seed"},
                       "train");
        read(t, "clusters", c.clusters, "train");
        read(t, "epochs", c.epochs, "train");
        read(t, "batch_size", c.batch_size, "train");
        read(t, "tau_instance", c.tau_instance, "train");
        read(t, "tau_cluster", c.tau_cluster, "train");
        read(t, "learning_rate", c.learning_rate, "train");
        read(t, "lambda_max", c.lambda_max, "train");
        read(t, "label_extension", c.label_extension, "train");
        read(t, "pseudo_threshold", c.pseudo_threshold, "train");
        read(t, "pseudo_gate", c.pseudo_gate, "train");
        read(t, "transitive_closure", c.transitive_closure, "train");
        read(t, "representation_loss", c.terms.representation, "train");
        read(t, "assignment_loss", c.terms.assignment, "train");
        read(t, "eval_every", c.eval_every, "train");
        read(t, "seed", c.seed, "train");
    }
    if (j.contains("query")) {
        const auto& q = j.at("query");
        reject_unknown(q, {"strategy", "budget_fraction", "queries_per_batch", "csd_reference"},
                       "query");
        read(q, "csd_reference", c.csd_reference, "query");
        std::string strategy = to_string(c.strategy);
        read(q, "strategy", strategy, "query");
        c.strategy = parse_strategy(strategy);
        read(q, "budget_fraction", c.budget_fraction, "query");
        read(q, "queries_per_batch", c.queries_per_batch, "query");
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const QueryLogEntry& q) {
    return {{"epoch", q.epoch},
            {"batch", q.batch},
            {"pair", {q.pair.first, q.pair.second}},
            {"score", q.score},
            {"strategy", to_string(q.strategy)},
            {"answer", q.answer ? nlohmann::json(to_string(*q.answer)) : nlohmann::json("skipped")}};
}

nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json j;
    j["seed"] = r.seed;
    j["config"] = r.config;
    j["config_hash"] = fnv1a(r.config.dump());
    j["budget"] = {{"candidate_pairs", r.candidate_pairs},
                   {"budget_total", r.budget_total},
                   {"queries_spent", r.queries_spent},
                   {"queries_skipped", r.queries_skipped},
                   {"batches", r.batches},
                   {"candidate_pair_definition", "distinct in-batch pairs encountered"}};
    j["annotations"] = {{"oracle", r.oracle_pairs}, {"pseudo", r.pseudo_pairs}};
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"rep_loss", e.loss.rep_included ? nlohmann::json(e.loss.rep_loss)
                                                           : nlohmann::json("excluded")},
                          {"assign_loss", e.loss.assign_included
                                              ? nlohmann::json(e.loss.assign_loss)
                                              : nlohmann::json("excluded")},
                          {"cluster_loss", e.loss.cluster_loss},
                          {"balance_entropy", e.loss.balance},
                          {"total", e.loss.total},
                          {"lambda", e.lambda},
                          {"queries_spent", e.queries_spent},
                          {"budget_total", e.budget_total},
                          {"pseudo_pairs", e.pseudo_pairs},
                          {"c_nonzero", e.c_nonzero},
                          {"metrics_A", metrics_json(e.metrics_a)},
                          {"metrics_B", metrics_json(e.metrics_b)}});
    }
    j["epochs"] = std::move(epochs);
    j["final_metrics"] = {{"A", metrics_json(r.final_a)}, {"B", metrics_json(r.final_b)}};
    j["assignment"] = r.assignment;
    j["queries_logged"] = r.queries.size();
    return j;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw ParseError("truncated checkpoint header", 0);
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write checkpoint " + path.string());
    out.write("OCC1", 4);
    put_u32(out, static_cast<std::uint32_t>(params.encoder.size()));
    auto header = [&](const DenseLayer& l) {
        put_u32(out, static_cast<std::uint32_t>(l.in_dim()));
        put_u32(out, static_cast<std::uint32_t>(l.out_dim()));
        put_u32(out, static_cast<std::uint32_t>(l.activation));
    };
    for (const auto& l : params.encoder) header(l);
    header(params.representation);
    header(params.assignment);
    params.for_each_array([&](std::span<const double> a) {
        out.write(reinterpret_cast<const char*>(a.data()),
                  static_cast<std::streamsize>(a.size() * sizeof(double)));
    });
    if (!out) throw InvalidInput("checkpoint write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open checkpoint " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "OCC1", 4) != 0) throw ParseError("bad checkpoint magic", 0);
    const std::uint32_t encoder_layers = get_u32(in);
    if (encoder_layers == 0 || encoder_layers > 64) throw ParseError("bad encoder layer count", 0);
    auto layer = [&]() {
        const std::uint32_t rows = get_u32(in);
        const std::uint32_t cols = get_u32(in);
        const std::uint32_t act = get_u32(in);
        if (act > 3 || rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
            throw ParseError("bad layer header", 0);
        return DenseLayer{Tensor2(rows, cols), std::vector<double>(cols, 0.0),
                          static_cast<Activation>(act)};
    };
    ModelParams p;
    for (std::uint32_t i = 0; i < encoder_layers; ++i) p.encoder.push_back(layer());
    p.representation = layer();
    p.assignment = layer();
    p.for_each_array([&](std::span<double> a) {
        in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
        if (!in) throw ParseError("truncated checkpoint payload", 0);
    });
    return p;
}

}  // namespace occ
