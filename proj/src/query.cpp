#include "occ/query.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "occ/contrastive.hpp"
#include "occ/errors.hpp"

namespace occ {

PairSimilarityHistory::PairSimilarityHistory(std::size_t samples)
    : samples_(samples),
      similarity_(samples * (samples > 0 ? samples - 1 : 0) / 2, 0.0),
      iteration_(similarity_.size(), -1) {}

std::size_t PairSimilarityHistory::index(SamplePair pair) const {
    if (pair.second >= samples_) throw InvalidInput("pair id outside similarity history");
    const std::size_t i = pair.first;
    const std::size_t j = pair.second;
    // Row-major upper triangle without the diagonal.
    return i * samples_ - i * (i + 1) / 2 + (j - i - 1);
}

std::optional<PairSimilarityHistory::Entry> PairSimilarityHistory::get(SamplePair pair) const {
    const std::size_t k = index(pair);
    if (iteration_[k] < 0) return std::nullopt;
    return Entry{similarity_[k], iteration_[k]};
}

void PairSimilarityHistory::set(SamplePair pair, double similarity, std::int64_t iteration) {
    if (!(similarity >= -1.0 && similarity <= 1.0))
        throw InvalidInput("similarity outside [-1,1]");
    const std::size_t k = index(pair);
    if (iteration_[k] < 0) ++populated_;
    similarity_[k] = similarity;
    iteration_[k] = std::max<std::int64_t>(iteration, 0);
}

std::size_t QueryBudget::batch_allowance() const noexcept {
    const std::size_t rem = remaining();
    return per_batch_quota == 0 ? rem : std::min(rem, per_batch_quota);
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Csd: return "csd";
        case Strategy::Random: return "random";
        case Strategy::Entropy: return "entropy";
    }
    return "csd";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "csd") return Strategy::Csd;
    if (name == "random") return Strategy::Random;
    if (name == "entropy") return Strategy::Entropy;
    throw ConfigError("unknown query strategy '" + name + "' (csd|random|entropy)");
}

double csd_score(double s_now, double s_prev) { return s_now * std::abs(s_now - s_prev); }

namespace {

void check_batch(const QueryBatch& batch) {
    if (batch.ids.size() < 2) throw InvalidInput("query selection needs a batch of >= 2 samples");
    if (batch.features == nullptr || batch.features->rows() != batch.ids.size())
        throw InvalidInput("query selection: feature rows do not match batch ids");
}

bool ranks_before(const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pair < b.pair;
}

std::vector<double> row_norms(const Tensor2& x) {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out[r] = l2_norm(x.row(r));
        if (!(out[r] > 0.0)) throw DegenerateInput("zero feature row in query batch");
    }
    return out;
}

double clamped_cos(const Tensor2& x, const std::vector<double>& norms, std::size_t a,
                   std::size_t b) {
    return std::clamp(dot(x.row(a), x.row(b)) / (norms[a] * norms[b]), -1.0, 1.0);
}

double row_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace

std::vector<ScoredPair> select_pairs(const QueryBatch& batch, PairSimilarityHistory& history,
                                     const AnnotationStore& store, const QueryBudget& budget,
                                     Strategy strategy, std::mt19937_64& rng) {
    check_batch(batch);
    const std::size_t quota = budget.batch_allowance();
    if (quota == 0) return {};
    if (strategy == Strategy::Entropy) return entropy_baseline_select(batch, store, quota);

    const Tensor2& z = *batch.features;
    const std::size_t n = batch.ids.size();
    std::vector<ScoredPair> candidates;
    candidates.reserve(n * (n - 1) / 2);
    std::vector<double> norms;
    std::vector<double> prev_norms;
    const Tensor2* prev_z = batch.previous_features;
    if (prev_z && prev_z->rows() != n)
        throw InvalidInput("query selection: previous features do not match batch ids");
    if (strategy == Strategy::Csd) {
        norms = row_norms(z);
        if (prev_z) prev_norms = row_norms(*prev_z);
    }

    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            if (batch.ids[a] == batch.ids[b]) continue;
            const SamplePair pair(batch.ids[a], batch.ids[b]);
            if (store.contains(pair)) continue;
            double score = 0.0;
            if (strategy == Strategy::Csd) {
                const double now = clamped_cos(z, norms, a, b);
                double before = 0.0;
                if (prev_z) {
                    before = clamped_cos(*prev_z, prev_norms, a, b);
                } else if (const auto prev = history.get(pair)) {
                    before = prev->similarity;
                }
                score = csd_score(now, before);
                history.set(pair, now, batch.iteration);
            }
            candidates.push_back({pair, score});
        }
    if (candidates.empty()) return {};
    const std::size_t take = std::min(quota, candidates.size());

    if (strategy == Strategy::Random) {
        // Partial Fisher-Yates over the deterministic candidate order.
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
            std::swap(candidates[i], candidates[pick(rng)]);
        }
        candidates.resize(take);
        return candidates;
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), ranks_before);
    candidates.resize(take);
    return candidates;
}

std::vector<ScoredPair> entropy_baseline_select(const QueryBatch& batch,
                                                const AnnotationStore& store, std::size_t quota) {
    check_batch(batch);
    if (quota == 0) return {};
    if (batch.assignments == nullptr || batch.assignments->rows() != batch.ids.size())
        throw InvalidInput("entropy strategy needs per-sample assignment rows");
    const Tensor2& z = *batch.features;
    const Tensor2& y = *batch.assignments;
    const std::size_t n = batch.ids.size();
    const auto norms = row_norms(z);

    Tensor2 sim(n, n);
    std::vector<double> all;
    all.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double s = clamped_cos(z, norms, a, b);
            sim(a, b) = s;
            sim(b, a) = s;
            all.push_back(s);
        }
    std::sort(all.begin(), all.end());
    const std::size_t m = all.size();
    const double median = m % 2 == 1 ? all[m / 2] : 0.5 * (all[m / 2 - 1] + all[m / 2]);

    std::vector<double> entropy(n);
    for (std::size_t a = 0; a < n; ++a) entropy[a] = row_entropy(y.row(a));

    // Available partner counts make each pick O(n).
    std::unordered_set<std::uint64_t> taken;
    auto available = [&](std::size_t a, std::size_t b) {
        if (a == b || batch.ids[a] == batch.ids[b]) return false;
        const SamplePair pair(batch.ids[a], batch.ids[b]);
        return !store.contains(pair) && !taken.contains(pair.key());
    };
    std::vector<std::size_t> open(n, 0);
    std::vector<char> fresh(n, 0);
    for (std::size_t a = 0; a < n; ++a) {
        fresh[a] = store.has_any_answer(batch.ids[a]) ? 0 : 1;
        for (std::size_t b = a + 1; b < n; ++b)
            if (available(a, b)) {
                ++open[a];
                ++open[b];
            }
    }

    std::vector<ScoredPair> chosen;
    std::vector<char> used_anchor(n, 0);
    while (chosen.size() < quota) {
        // Samples without any stored answer are preferred anchors.
        std::optional<std::size_t> anchor;
        auto better = [&](std::size_t a, std::size_t cur) {
            if (fresh[a] != fresh[cur]) return fresh[a] > fresh[cur];
            if (entropy[a] != entropy[cur]) return entropy[a] > entropy[cur];
            return batch.ids[a] < batch.ids[cur];
        };
        for (std::size_t a = 0; a < n; ++a) {
            if (used_anchor[a] || open[a] == 0) continue;
            if (!anchor || better(a, *anchor)) anchor = a;
        }
        if (!anchor) {
            if (std::none_of(open.begin(), open.end(), [](std::size_t c) { return c > 0; })) break;
            std::fill(used_anchor.begin(), used_anchor.end(), 0);
            continue;
        }
        used_anchor[*anchor] = 1;
        std::optional<std::size_t> partner;
        double best_gap = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            if (!available(*anchor, b)) continue;
            const double gap = std::abs(sim(*anchor, b) - median);
            if (!partner || gap < best_gap || (gap == best_gap && batch.ids[b] < batch.ids[*partner])) {
                partner = b;
                best_gap = gap;
            }
        }
        const SamplePair pair(batch.ids[*anchor], batch.ids[*partner]);
        taken.insert(pair.key());
        --open[*anchor];
        --open[*partner];
        chosen.push_back({pair, entropy[*anchor]});
    }
    return chosen;
}

std::vector<double> optimal_sampling_distribution(std::span<const double> losses) {
    double total = 0.0;
    for (double l : losses) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidInput("losses must be finite and >= 0");
        total += std::sqrt(l);
    }
    if (!(total > 0.0)) throw DegenerateInput("optimal sampling needs a positive loss");
    std::vector<double> p(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) p[i] = std::sqrt(losses[i]) / total;
    return p;
}

double d_p(std::span<const double> losses, std::span<const double> p) {
    if (losses.size() != p.size()) throw InvalidInput("d_p: losses and p differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (losses[i] == 0.0) continue;
        if (!(p[i] > 0.0))
            throw DegenerateInput("d_p: zero probability on a positive-loss element");
        sum += losses[i] / p[i];
    }
    return sum;
}

}  // namespace occ
