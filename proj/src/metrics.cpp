#include "occ/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "occ/errors.hpp"

namespace occ {

namespace {

std::vector<int> compact(std::span<const int> labels, std::size_t& distinct) {
    std::map<int, int> ids;
    for (int v : labels) ids.emplace(v, 0);
    int next = 0;
    for (auto& [_, id] : ids) id = next++;
    distinct = ids.size();
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
    return out;
}

double entropy_of(const std::vector<long>& counts, long total) {
    double h = 0.0;
    for (long c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log(p);
        }
    return h;
}

double choose2(long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size())
        throw InvalidInput("metric inputs differ in length (" + std::to_string(pred.size()) +
                           " vs " + std::to_string(truth.size()) + ")");
    if (pred.empty()) throw InvalidInput("metric inputs are empty");
    std::size_t kp = 0;
    std::size_t kt = 0;
    const auto p = compact(pred, kp);
    const auto t = compact(truth, kt);
    ContingencyTable table;
    table.counts.assign(kp, std::vector<long>(kt, 0));
    for (std::size_t i = 0; i < p.size(); ++i)
        ++table.counts[static_cast<std::size_t>(p[i])][static_cast<std::size_t>(t[i])];
    table.total = static_cast<long>(pred.size());
    return table;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
    const auto table = contingency(pred, truth);
    const std::size_t kp = table.predicted_clusters();
    const std::size_t kt = table.true_labels();
    std::vector<long> rows(kp, 0);
    std::vector<long> cols(kt, 0);
    for (std::size_t a = 0; a < kp; ++a)
        for (std::size_t b = 0; b < kt; ++b) {
            rows[a] += table.counts[a][b];
            cols[b] += table.counts[a][b];
        }
    const double hp = entropy_of(rows, table.total);
    const double ht = entropy_of(cols, table.total);
    if (hp == 0.0 && ht == 0.0) return 1.0;
    if (hp == 0.0 || ht == 0.0) return 0.0;
    const double n = static_cast<double>(table.total);
    double mi = 0.0;
    for (std::size_t a = 0; a < kp; ++a)
        for (std::size_t b = 0; b < kt; ++b) {
            const double c = static_cast<double>(table.counts[a][b]);
            if (c > 0.0)
                mi += c / n * std::log(c * n / (static_cast<double>(rows[a]) * static_cast<double>(cols[b])));
        }
    return std::clamp(mi / (0.5 * (hp + ht)), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
    const auto table = contingency(pred, truth);
    if (table.total < 2) return 1.0;
    double index = 0.0;
    std::vector<long> rows(table.predicted_clusters(), 0);
    std::vector<long> cols(table.true_labels(), 0);
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) {
            index += choose2(table.counts[a][b]);
            rows[a] += table.counts[a][b];
            cols[b] += table.counts[a][b];
        }
    double sum_rows = 0.0;
    double sum_cols = 0.0;
    for (long r : rows) sum_rows += choose2(r);
    for (long c : cols) sum_cols += choose2(c);
    const double expected = sum_rows * sum_cols / choose2(table.total);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both partitions trivial in the same way
    return (index - expected) / (max_index - expected);
}

std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight) {
    const std::size_t rows = weight.size();
    const std::size_t cols = rows == 0 ? 0 : weight.front().size();
    const std::size_t n = std::max(rows, cols);
    if (n == 0) return {};
    double max_w = 0.0;
    for (const auto& r : weight)
        for (double w : r) max_w = std::max(max_w, w);
    // Square cost matrix for min-cost assignment; padding costs max_w.
    std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost[i + 1][j + 1] = (i < rows && j < cols) ? max_w - weight[i][j] : max_w;

    // Jonker-Volgenant style potentials, 1-indexed.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = match[j];
        if (i >= 1 && i <= rows && j <= cols) row_to_col[i - 1] = static_cast<int>(j - 1);
    }
    return row_to_col;
}

double acc(std::span<const int> pred, std::span<const int> truth) {
    const auto table = contingency(pred, truth);
    std::vector<std::vector<double>> w(table.predicted_clusters(),
                                       std::vector<double>(table.true_labels(), 0.0));
    for (std::size_t a = 0; a < w.size(); ++a)
        for (std::size_t b = 0; b < w[a].size(); ++b) w[a][b] = static_cast<double>(table.counts[a][b]);
    const auto match = max_weight_matching(w);
    long hits = 0;
    for (std::size_t a = 0; a < match.size(); ++a)
        if (match[a] >= 0) hits += table.counts[a][static_cast<std::size_t>(match[a])];
    return static_cast<double>(hits) / static_cast<double>(table.total);
}

MetricTriple evaluate(std::span<const int> pred, std::span<const int> truth) {
    return {nmi(pred, truth), ari(pred, truth), acc(pred, truth)};
}

}  // namespace occ
