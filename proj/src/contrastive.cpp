#include "occ/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "occ/errors.hpp"

namespace occ {

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("temperature tau must be > 0");
}

Tensor2 normalized_rows(const Tensor2& e, std::vector<double>& norms) {
    Tensor2 u(e.rows(), e.cols());
    norms.resize(e.rows());
    for (std::size_t r = 0; r < e.rows(); ++r) {
        const double n = l2_norm(e.row(r));
        if (!(n > 0.0)) throw DegenerateInput("zero embedding row " + std::to_string(r));
        norms[r] = n;
        for (std::size_t c = 0; c < e.cols(); ++c) u(r, c) = e(r, c) / n;
    }
    return u;
}

void validate_query_matrix(const QueryMatrix& c, std::size_t n) {
    if (c.n() != n)
        throw InvalidInput("query matrix is " + std::to_string(c.n()) + "x" +
                           std::to_string(c.n()) + ", batch has N=" + std::to_string(n));
    if (!c.is_symmetric()) throw InvalidInput("query matrix is not symmetric");
    if (!c.has_zero_diagonal()) throw InvalidInput("query matrix has a nonzero diagonal");
}

// Shared core of the instance loss; fills grad when requested.
double instance_loss_impl(const Tensor2& e, const QueryMatrix& c, double tau, Tensor2* grad) {
    check_tau(tau);
    if (e.rows() < 2 || e.rows() % 2 != 0)
        throw InvalidInput("instance loss needs an even number (>= 2) of rows");
    const std::size_t rows = e.rows();
    const std::size_t n = rows / 2;
    validate_query_matrix(c, n);

    std::vector<double> norms;
    const Tensor2 u = normalized_rows(e, norms);

    Tensor2 kernel(rows, rows);
    for (std::size_t r = 0; r < rows; ++r) {
        kernel(r, r) = std::exp(dot(u.row(r), u.row(r)) / tau);
        for (std::size_t q = r + 1; q < rows; ++q) {
            const double k = std::exp(dot(u.row(r), u.row(q)) / tau);
            kernel(r, q) = k;
            kernel(q, r) = k;
        }
    }

    std::vector<double> row_c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) row_c[i] += c(i, j);

    const double inv_rows = 1.0 / static_cast<double>(rows);
    double loss = 0.0;
    Tensor2 g_cos;
    if (grad) g_cos = Tensor2(rows, rows);

    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = r % n;
        const std::size_t partner = r < n ? r + n : r - n;
        double num = kernel(r, partner);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = c(i, j);
            if (w != 0.0) num += w * (kernel(r, j) + kernel(r, j + n));
        }
        double den = 0.0;
        for (std::size_t q = 0; q < rows; ++q) den += kernel(r, q);
        loss += -std::log(num) + std::log(static_cast<double>(n) + row_c[i]) + std::log(den);

        if (grad) {
            // dL/dcos_rq = inv_rows * (-W_rq/num + 1/den) * S_rq / tau
            for (std::size_t q = 0; q < rows; ++q) {
                double w = 0.0;
                if (q == partner) w = 1.0;
                const std::size_t jq = q % n;
                w += c(i, jq);
                g_cos(r, q) = inv_rows * (-w / num + 1.0 / den) * kernel(r, q) / tau;
            }
        }
    }
    loss *= inv_rows;

    if (grad) {
        const std::size_t dim = e.cols();
        *grad = Tensor2(rows, dim);
        std::vector<double> du(dim);
        for (std::size_t r = 0; r < rows; ++r) {
            std::fill(du.begin(), du.end(), 0.0);
            for (std::size_t q = 0; q < rows; ++q) {
                const double s = g_cos(r, q) + g_cos(q, r);
                if (s == 0.0) continue;
                const auto uq = u.row(q);
                for (std::size_t k = 0; k < dim; ++k) du[k] += s * uq[k];
            }
            const auto ur = u.row(r);
            const double proj = dot(du, ur);
            for (std::size_t k = 0; k < dim; ++k) (*grad)(r, k) = (du[k] - proj * ur[k]) / norms[r];
        }
    }
    return loss;
}

Tensor2 cluster_view(const Tensor2& yhat) {
    if (yhat.cols() < 2) throw ConfigError("cluster-level loss needs K >= 2");
    if (yhat.rows() < 2 || yhat.rows() % 2 != 0)
        throw InvalidInput("assignment matrix needs an even number (>= 2) of rows");
    const std::size_t n = yhat.rows() / 2;
    const std::size_t k = yhat.cols();
    Tensor2 t(2 * k, n);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) {
            t(c, i) = yhat(i, c);
            t(k + c, i) = yhat(n + i, c);
        }
    return t;
}

Tensor2 from_cluster_view(const Tensor2& t, std::size_t rows) {
    const std::size_t n = rows / 2;
    const std::size_t k = t.rows() / 2;
    Tensor2 y(rows, k);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) {
            y(i, c) = t(c, i);
            y(n + i, c) = t(k + c, i);
        }
    return y;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw InvalidInput("cosine_similarity: dimension mismatch");
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (!(nu > 0.0) || !(nv > 0.0))
        throw DegenerateInput("cosine similarity undefined for a zero vector");
    const double s = dot(u, v) / (nu * nv);
    return std::clamp(s, -1.0, 1.0);
}

double pair_kernel(std::span<const double> u, std::span<const double> v, double tau) {
    check_tau(tau);
    return std::exp(cosine_similarity(u, v) / tau);
}

QueryMatrix::QueryMatrix(std::size_t n, double lambda) : entries_(n, n), lambda_(lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
}

QueryMatrix::QueryMatrix(Tensor2 entries, double lambda)
    : entries_(std::move(entries)), lambda_(lambda) {
    if (entries_.rows() != entries_.cols()) throw InvalidInput("query matrix must be square");
}

void QueryMatrix::mark_same(std::size_t i, std::size_t j) {
    if (i >= n() || j >= n()) throw InvalidInput("query matrix index out of range");
    if (i == j) return;
    entries_(i, j) = lambda_;
    entries_(j, i) = lambda_;
}

std::size_t QueryMatrix::nonzero_pairs() const noexcept {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n(); ++i)
        for (std::size_t j = i + 1; j < n(); ++j)
            if (entries_(i, j) != 0.0) ++count;
    return count;
}

bool QueryMatrix::is_symmetric() const noexcept {
    for (std::size_t i = 0; i < n(); ++i)
        for (std::size_t j = i + 1; j < n(); ++j)
            if (entries_(i, j) != entries_(j, i)) return false;
    return true;
}

bool QueryMatrix::has_zero_diagonal() const noexcept {
    for (std::size_t i = 0; i < n(); ++i)
        if (entries_(i, i) != 0.0) return false;
    return true;
}

double active_instance_loss(const Tensor2& embeddings, const QueryMatrix& c, double tau) {
    return instance_loss_impl(embeddings, c, tau, nullptr);
}

LossAndGrad active_instance_loss_grad(const Tensor2& embeddings, const QueryMatrix& c,
                                      double tau) {
    LossAndGrad out;
    out.value = instance_loss_impl(embeddings, c, tau, &out.grad);
    return out;
}

double cluster_level_loss(const Tensor2& yhat, double tau) {
    const Tensor2 t = cluster_view(yhat);
    return instance_loss_impl(t, QueryMatrix::zeros(yhat.cols()), tau, nullptr);
}

LossAndGrad cluster_level_loss_grad(const Tensor2& yhat, double tau) {
    const Tensor2 t = cluster_view(yhat);
    Tensor2 gt;
    LossAndGrad out;
    out.value = instance_loss_impl(t, QueryMatrix::zeros(yhat.cols()), tau, &gt);
    out.grad = from_cluster_view(gt, yhat.rows());
    return out;
}

double balance_regularizer(const Tensor2& yhat) { return balance_regularizer_grad(yhat).value; }

LossAndGrad balance_regularizer_grad(const Tensor2& yhat) {
    const std::size_t k = yhat.cols();
    std::vector<double> mass(k, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < yhat.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) {
            mass[c] += yhat(r, c);
            total += yhat(r, c);
        }
    LossAndGrad out;
    out.grad = Tensor2(yhat.rows(), k);
    if (!(total > 0.0)) return out;
    double entropy = 0.0;
    std::vector<double> logp(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        const double p = mass[c] / total;
        if (p > 0.0) {
            logp[c] = std::log(p);
            entropy -= p * logp[c];
        }
    }
    out.value = entropy;
    // dH/dY_jc = (-log P_c - H) / ||Y||_1
    for (std::size_t c = 0; c < k; ++c) {
        if (!(mass[c] > 0.0)) continue;
        const double g = (-logp[c] - entropy) / total;
        for (std::size_t r = 0; r < yhat.rows(); ++r) out.grad(r, c) = g;
    }
    return out;
}

LossBreakdown total_loss(const Tensor2& zhat, const Tensor2& yhat, const QueryMatrix& c,
                         double tau_instance, double tau_cluster, ObjectiveTerms terms) {
    LossBreakdown b;
    b.rep_loss = active_instance_loss(zhat, c, tau_instance);
    b.assign_loss = active_instance_loss(yhat, c, tau_instance);
    b.cluster_loss = cluster_level_loss(yhat, tau_cluster);
    b.balance = balance_regularizer(yhat);
    b.rep_included = terms.representation;
    b.assign_included = terms.assignment;
    b.total = (terms.representation ? b.rep_loss : 0.0) +
              (terms.assignment ? b.assign_loss : 0.0) + b.cluster_loss - b.balance;
    return b;
}

ObjectiveGrad total_loss_grad(const Tensor2& zhat, const Tensor2& yhat, const QueryMatrix& c,
                              double tau_instance, double tau_cluster, ObjectiveTerms terms) {
    if (zhat.rows() != yhat.rows())
        throw InvalidInput("representation and assignment batches differ in row count");
    ObjectiveGrad out;
    LossBreakdown& b = out.breakdown;
    b.rep_included = terms.representation;
    b.assign_included = terms.assignment;

    LossAndGrad rep = active_instance_loss_grad(zhat, c, tau_instance);
    LossAndGrad assign = active_instance_loss_grad(yhat, c, tau_instance);
    LossAndGrad cluster = cluster_level_loss_grad(yhat, tau_cluster);
    LossAndGrad balance = balance_regularizer_grad(yhat);
    b.rep_loss = rep.value;
    b.assign_loss = assign.value;
    b.cluster_loss = cluster.value;
    b.balance = balance.value;
    b.total = (terms.representation ? b.rep_loss : 0.0) +
              (terms.assignment ? b.assign_loss : 0.0) + b.cluster_loss - b.balance;

    out.grad_zhat = terms.representation ? std::move(rep.grad) : Tensor2(zhat.rows(), zhat.cols());
    out.grad_yhat = std::move(cluster.grad);
    for (std::size_t i = 0; i < out.grad_yhat.size(); ++i) {
        double g = out.grad_yhat.data()[i] - balance.grad.data()[i];
        if (terms.assignment) g += assign.grad.data()[i];
        out.grad_yhat.data()[i] = g;
    }
    return out;
}

}  // namespace occ
