#include "occ/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "occ/errors.hpp"

namespace occ {

SamplePair::SamplePair(SampleId a, SampleId b) : first(std::min(a, b)), second(std::max(a, b)) {
    if (a == b) throw InvalidInput("self-pair (" + std::to_string(a) + "," + std::to_string(a) + ")");
}

std::string to_string(Answer a) { return a == Answer::Same ? "same" : "different"; }
std::string to_string(Provenance p) { return p == Provenance::Oracle ? "oracle" : "pseudo"; }

RecordOutcome AnnotationStore::record(SamplePair pair, Answer answer, Provenance provenance,
                                      int epoch) {
    const auto it = entries_.find(pair.key());
    if (it == entries_.end()) {
        entries_.emplace(pair.key(), Annotation{answer, provenance, epoch});
        partners_[pair.first].push_back(pair.second);
        partners_[pair.second].push_back(pair.first);
        if (provenance == Provenance::Oracle) {
            ++oracle_count_;
            ++oracle_degree_[pair.first];
            ++oracle_degree_[pair.second];
        }
        return RecordOutcome::Inserted;
    }
    Annotation& existing = it->second;
    if (provenance == Provenance::Pseudo) return RecordOutcome::Ignored;
    if (existing.provenance == Provenance::Oracle) {
        ++duplicates_;
        return RecordOutcome::Duplicate;
    }
    existing = Annotation{answer, Provenance::Oracle, epoch};
    ++oracle_count_;
    ++oracle_degree_[pair.first];
    ++oracle_degree_[pair.second];
    return RecordOutcome::Upgraded;
}

std::optional<Annotation> AnnotationStore::lookup(SamplePair pair) const {
    const auto it = entries_.find(pair.key());
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::span<const SampleId> AnnotationStore::partners(SampleId id) const {
    const auto it = partners_.find(id);
    if (it == partners_.end()) return {};
    return it->second;
}

bool AnnotationStore::has_oracle_answer(SampleId id) const {
    const auto it = oracle_degree_.find(id);
    return it != oracle_degree_.end() && it->second > 0;
}

std::vector<std::pair<SamplePair, Annotation>> AnnotationStore::sorted_entries() const {
    std::vector<std::pair<SamplePair, Annotation>> out;
    out.reserve(entries_.size());
    for (const auto& [key, ann] : entries_)
        out.emplace_back(SamplePair(static_cast<SampleId>(key >> 32),
                                    static_cast<SampleId>(key & 0xffffffffu)),
                         ann);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

void AnnotationStore::save_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write annotation store " + path.string());
    for (const auto& [pair, ann] : sorted_entries()) {
        nlohmann::ordered_json row;
        row["pair"] = {pair.first, pair.second};
        row["answer"] = to_string(ann.answer);
        row["provenance"] = to_string(ann.provenance);
        row["epoch"] = ann.epoch;
        out << row.dump() << '\n';
    }
}

AnnotationStore AnnotationStore::load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open annotation store " + path.string());
    AnnotationStore store;
    std::string line;
    std::size_t line_no = 0;
    // Oracle rows first so pseudo rows never shadow them regardless of file order.
    std::vector<std::tuple<SamplePair, Answer, Provenance, int>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto row = nlohmann::json::parse(line);
            const auto ids = row.at("pair");
            const std::string answer = row.at("answer").get<std::string>();
            const std::string prov = row.at("provenance").get<std::string>();
            if (answer != "same" && answer != "different") throw ParseError("bad answer", line_no);
            if (prov != "oracle" && prov != "pseudo") throw ParseError("bad provenance", line_no);
            rows.emplace_back(SamplePair(ids.at(0).get<SampleId>(), ids.at(1).get<SampleId>()),
                              answer == "same" ? Answer::Same : Answer::Different,
                              prov == "oracle" ? Provenance::Oracle : Provenance::Pseudo,
                              row.value("epoch", 0));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed annotation row: ") + e.what(), line_no);
        } catch (const InvalidInput& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    std::stable_partition(rows.begin(), rows.end(),
                          [](const auto& r) { return std::get<2>(r) == Provenance::Oracle; });
    for (const auto& [pair, answer, prov, epoch] : rows) store.record(pair, answer, prov, epoch);
    return store;
}

bool AnnotationStore::operator==(const AnnotationStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (const auto& [key, ann] : entries_) {
        const auto it = other.entries_.find(key);
        if (it == other.entries_.end() || it->second.answer != ann.answer ||
            it->second.provenance != ann.provenance || it->second.epoch != ann.epoch)
            return false;
    }
    return true;
}

Answer simulated_answer(SamplePair pair, const Dataset& dataset, const OrientationMap& orientation) {
    if (pair.second >= dataset.size())
        throw InvalidInput("unknown sample id " + std::to_string(pair.second));
    const int a = orientation(dataset.classes[pair.first]);
    const int b = orientation(dataset.classes[pair.second]);
    return a == b ? Answer::Same : Answer::Different;
}

SimulatedOracle::SimulatedOracle(const Dataset& dataset, OrientationMap orientation)
    : dataset_(dataset), orientation_(std::move(orientation)) {
    int max_class = 0;
    for (int c : dataset_.classes) max_class = std::max(max_class, c);
    if (static_cast<int>(orientation_.class_to_cluster.size()) <= max_class)
        throw ConfigError("orientation " + orientation_.name + " does not cover all classes");
}

std::optional<Answer> SimulatedOracle::ask(SamplePair pair, int) {
    return simulated_answer(pair, dataset_, orientation_);
}

double lambda_at(const LambdaSchedule& schedule, int epoch) {
    if (schedule.total_epochs <= 0) throw ConfigError("lambda schedule needs total_epochs > 0");
    if (!(schedule.lambda_max >= 0.0)) throw ConfigError("lambda_max must be >= 0");
    if (epoch < 0 || epoch > schedule.total_epochs)
        throw InvalidInput("epoch " + std::to_string(epoch) + " outside [0, " +
                           std::to_string(schedule.total_epochs) + "]");
    return schedule.lambda_max * static_cast<double>(schedule.total_epochs - epoch) /
           static_cast<double>(schedule.total_epochs);
}

namespace {

struct DisjointSets {
    std::unordered_map<SampleId, SampleId> parent;

    SampleId find(SampleId x) {
        auto it = parent.find(x);
        if (it == parent.end()) return x;
        SampleId root = find(it->second);
        parent[x] = root;
        return root;
    }
    void unite(SampleId a, SampleId b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

QueryMatrix build_query_matrix(const AnnotationStore& store, std::span<const SampleId> batch_ids,
                               double lambda, bool transitive) {
    const std::size_t n = batch_ids.size();
    QueryMatrix c(n, lambda);
    DisjointSets sets;
    if (transitive) {
        for (const auto& [pair, ann] : store.sorted_entries())
            if (ann.provenance == Provenance::Oracle && ann.answer == Answer::Same)
                sets.unite(pair.first, pair.second);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (batch_ids[i] == batch_ids[j]) continue;
            const SamplePair pair(batch_ids[i], batch_ids[j]);
            const auto ann = store.lookup(pair);
            bool same = ann && ann->answer == Answer::Same;
            if (!same && transitive) same = sets.find(pair.first) == sets.find(pair.second);
            if (same) c.mark_same(i, j);
        }
    return c;
}

ExtensionStats extend_labels(AnnotationStore& store, const Tensor2& zhat, double threshold,
                             int epoch, int gate_epoch) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("label extension threshold must lie in (0,1)");
    ExtensionStats stats;
    if (epoch < gate_epoch) return stats;
    const auto n = static_cast<SampleId>(zhat.rows());

    std::vector<SampleId> sources;
    std::vector<SampleId> unannotated;
    for (SampleId id = 0; id < n; ++id) {
        if (store.has_oracle_answer(id)) sources.push_back(id);
        else if (!store.has_any_answer(id)) unannotated.push_back(id);
    }
    stats.sources = sources.size();
    if (sources.empty() || unannotated.empty()) return stats;

    std::vector<double> inv_norm(n);
    for (SampleId id = 0; id < n; ++id) {
        const double nrm = l2_norm(zhat.row(id));
        inv_norm[id] = nrm > 0.0 ? 1.0 / nrm : 0.0;
    }

    std::vector<char> extended(n, 0);
    for (SampleId i : sources) {
        // Snapshot: only relations answered by the oracle.
        std::vector<std::pair<SampleId, Answer>> relations;
        for (SampleId j : store.partners(i)) {
            const auto ann = store.lookup(SamplePair(i, j));
            if (ann && ann->provenance == Provenance::Oracle) relations.emplace_back(j, ann->answer);
        }
        std::sort(relations.begin(), relations.end());
        for (SampleId k : unannotated) {
            const double sim = dot(zhat.row(i), zhat.row(k)) * inv_norm[i] * inv_norm[k];
            if (!(sim > threshold)) continue;
            std::size_t added_here = 0;
            for (const auto& [j, answer] : relations) {
                if (j == k) continue;
                if (store.record(SamplePair(k, j), answer, Provenance::Pseudo, epoch) ==
                    RecordOutcome::Inserted)
                    ++added_here;
            }
            if (added_here > 0 && !extended[k]) {
                extended[k] = 1;
                ++stats.extended;
            }
            stats.added += added_here;
        }
    }
    return stats;
}

}  // namespace occ
