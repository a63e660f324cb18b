// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the loss or metric code it is
// used to check, except the finite-difference helper, which needs the
// library's forward pass and loss to test backward().
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "occ/contrastive.hpp"
#include "occ/numerics.hpp"

namespace ref {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const occ::Tensor2& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
    return m;
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        uv += u[k] * v[k];
        uu += u[k] * u[k];
        vv += v[k] * v[k];
    }
    return uv / std::sqrt(uu * vv);
}

inline double kernel(const std::vector<double>& u, const std::vector<double>& v, double tau) {
    return std::exp(cosine(u, v) / tau);
}

// Per-anchor loss written out term by term: rows [a_1..a_N, b_1..b_N].
inline double instance_loss(const Mat& e, const Mat& c, double tau) {
    const std::size_t two_n = e.size();
    const std::size_t n = two_n / 2;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (int view = 0; view < 2; ++view) {
            const auto& anchor = e[view == 0 ? i : i + n];
            const auto& partner = e[view == 0 ? i + n : i];
            double num = kernel(anchor, partner, tau);
            double weight = 0.0;
            double all = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                num += c[i][j] * (kernel(anchor, e[j], tau) + kernel(anchor, e[j + n], tau));
                weight += c[i][j] + 1.0;
                all += kernel(anchor, e[j], tau) + kernel(anchor, e[j + n], tau);
            }
            sum += -std::log(num / (weight * all));
        }
    }
    return sum / static_cast<double>(two_n);
}

inline double cluster_loss(const Mat& y, double tau) {
    const std::size_t two_n = y.size();
    const std::size_t n = two_n / 2;
    const std::size_t k = y[0].size();
    // Columns of each view become the 2K "samples".
    Mat cols(2 * k, std::vector<double>(n));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t r = 0; r < n; ++r) {
            cols[c][r] = y[r][c];
            cols[c + k][r] = y[r + n][c];
        }
    return instance_loss(cols, Mat(k, std::vector<double>(k, 0.0)), tau);
}

inline double entropy(const Mat& y) {
    const std::size_t k = y[0].size();
    std::vector<double> mass(k, 0.0);
    double total = 0.0;
    for (const auto& row : y)
        for (std::size_t c = 0; c < k; ++c) {
            mass[c] += row[c];
            total += row[c];
        }
    double h = 0.0;
    for (double m : mass) {
        const double p = m / total;
        if (p > 0) h -= p * std::log(p);
    }
    return h;
}

inline double total(const Mat& zhat, const Mat& yhat, const Mat& c, double tau_i, double tau_c) {
    return instance_loss(zhat, c, tau_i) + instance_loss(yhat, c, tau_i) + cluster_loss(yhat, tau_c) -
           entropy(yhat);
}

// Best agreement over every injective relabeling of predicted clusters.
inline double brute_acc(const std::vector<int>& pred, const std::vector<int>& truth) {
    const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
    const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
    const int k = std::max(kp, kt);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hits += perm[pred[i]] == truth[i];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

inline double choose2(double x) { return x * (x - 1) / 2; }

// Pair-counting ARI straight from its definition.
inline double pair_ari(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    double both = 0, in_a = 0, in_b = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            both += sa && sb;
            in_a += sa;
            in_b += sb;
        }
    const double pairs = choose2(static_cast<double>(n));
    const double expected = in_a * in_b / pairs;
    const double max_index = 0.5 * (in_a + in_b);
    if (max_index == expected) return 1.0;
    return (both - expected) / (max_index - expected);
}

inline double label_entropy(const std::vector<int>& x) {
    std::vector<double> count(*std::max_element(x.begin(), x.end()) + 1, 0.0);
    for (int v : x) count[v] += 1;
    double h = 0;
    for (double c : count)
        if (c > 0) h -= c / x.size() * std::log(c / x.size());
    return h;
}

inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    const double ha = label_entropy(a), hb = label_entropy(b);
    if (ha == 0 && hb == 0) return 1.0;
    if (ha == 0 || hb == 0) return 0.0;
    const int ka = *std::max_element(a.begin(), a.end()) + 1;
    const int kb = *std::max_element(b.begin(), b.end()) + 1;
    Mat joint(ka, std::vector<double>(kb, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) joint[a[i]][b[i]] += 1.0 / a.size();
    std::vector<double> pa(ka, 0.0), pb(kb, 0.0);
    for (int i = 0; i < ka; ++i)
        for (int j = 0; j < kb; ++j) {
            pa[i] += joint[i][j];
            pb[j] += joint[i][j];
        }
    double mi = 0;
    for (int i = 0; i < ka; ++i)
        for (int j = 0; j < kb; ++j)
            if (joint[i][j] > 0) mi += joint[i][j] * std::log(joint[i][j] / (pa[i] * pb[j]));
    return mi / (0.5 * (ha + hb));
}

inline occ::Tensor2 random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                  double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    occ::Tensor2 t(rows, cols);
    for (double& v : t.data()) v = g(rng);
    return t;
}

// Row-stochastic matrix with strictly positive entries.
inline occ::Tensor2 random_probabilities(std::size_t rows, std::size_t k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    occ::Tensor2 t(rows, k);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < k; ++c) s += t(r, c) = u(rng);
        for (std::size_t c = 0; c < k; ++c) t(r, c) /= s;
    }
    return t;
}

// Symmetric, zero-diagonal, each off-diagonal pair set with probability 1/2.
inline occ::QueryMatrix random_query_matrix(std::size_t n, double lambda, std::mt19937_64& rng) {
    occ::QueryMatrix c(n, lambda);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) c.mark_same(i, j);
    return c;
}

inline Mat query_mat(const occ::QueryMatrix& c) { return to_mat(c.entries()); }

struct FdResult {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

// Central differences of the full objective (forward + total loss) with
// respect to every parameter, against backward().
inline FdResult finite_difference_check(const occ::ModelParams& params, const occ::Tensor2& x,
                                        const occ::QueryMatrix& c, double tau_i, double tau_c,
                                        double step = 1e-5) {
    const auto objective = [&](const occ::ModelParams& p) {
        const auto pass = occ::forward(p, x);
        return occ::total_loss(pass.zhat, pass.yhat, c, tau_i, tau_c).total;
    };
    const auto pass = occ::forward(params, x);
    const auto obj = occ::total_loss_grad(pass.zhat, pass.yhat, c, tau_i, tau_c);
    const auto analytic = occ::backward(params, pass, obj.grad_zhat, obj.grad_yhat).flatten();
    auto flat = params.flatten();
    occ::ModelParams probe = params;
    FdResult out;
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const double saved = flat[k];
        flat[k] = saved + step;
        probe.assign_flat(flat);
        const double up = objective(probe);
        flat[k] = saved - step;
        probe.assign_flat(flat);
        const double down = objective(probe);
        flat[k] = saved;
        const double numeric = (up - down) / (2 * step);
        // Relative error with an absolute floor for near-zero entries.
        const double rel = std::abs(numeric - analytic[k]) /
                           std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
        out.max_rel = std::max(out.max_rel, rel);
        ++out.checked;
    }
    return out;
}

}  // namespace ref
