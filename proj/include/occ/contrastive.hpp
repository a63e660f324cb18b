#pragma once

#include <cstddef>
#include <span>

#include "occ/tensor.hpp"

namespace occ {

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// exp(cos(u, v) / tau)
double pair_kernel(std::span<const double> u, std::span<const double> v, double tau);

/// Per-batch matrix of oracle-confirmed positives: entry (i, j) is lambda when
/// samples i and j were answered same-cluster, 0 otherwise.
class QueryMatrix {
public:
    QueryMatrix() = default;
    QueryMatrix(std::size_t n, double lambda);
    // Raw entries are accepted as-is; losses reject them if asymmetric.
    QueryMatrix(Tensor2 entries, double lambda);

    static QueryMatrix zeros(std::size_t n) { return QueryMatrix(n, 0.0); }

    std::size_t n() const noexcept { return entries_.rows(); }
    double lambda() const noexcept { return lambda_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
    const Tensor2& entries() const noexcept { return entries_; }

    void mark_same(std::size_t i, std::size_t j);
    std::size_t nonzero_pairs() const noexcept;

    bool is_symmetric() const noexcept;
    bool has_zero_diagonal() const noexcept;

private:
    Tensor2 entries_;
    double lambda_ = 0.0;
};

struct LossAndGrad {
    double value = 0.0;
    Tensor2 grad;  // same shape as the loss input
};

/// Active instance loss over 2N rows laid out [x_1^a..x_N^a, x_1^b..x_N^b].
/// Per anchor the numerator adds the augmentation partner plus the
/// C-weighted kernels of both views of every queried partner; the denominator
/// is (sum_j (C_ij + 1)) times the kernel sum over all 2N rows, self included.
double active_instance_loss(const Tensor2& embeddings, const QueryMatrix& c, double tau);
LossAndGrad active_instance_loss_grad(const Tensor2& embeddings, const QueryMatrix& c, double tau);

/// Instance loss on the transposed assignment matrix: the 2K cluster columns
/// are the samples, positives are the same cluster across the two views.
double cluster_level_loss(const Tensor2& yhat, double tau);
LossAndGrad cluster_level_loss_grad(const Tensor2& yhat, double tau);

/// Shannon entropy (nats) of the empirical cluster marginal of yhat.
double balance_regularizer(const Tensor2& yhat);
LossAndGrad balance_regularizer_grad(const Tensor2& yhat);

/// Which instance-level terms enter the objective. The cluster-level term and
/// the balance regularizer are always on.
struct ObjectiveTerms {
    bool representation = true;
    bool assignment = true;
};

struct LossBreakdown {
    double rep_loss = 0.0;
    double assign_loss = 0.0;
    double cluster_loss = 0.0;
    double balance = 0.0;  // entropy; enters the total with a minus sign
    double total = 0.0;
    bool rep_included = true;
    bool assign_included = true;
};

struct ObjectiveGrad {
    LossBreakdown breakdown;
    Tensor2 grad_zhat;
    Tensor2 grad_yhat;
};

/// total = rep + assign + cluster - entropy, with excluded terms dropped.
LossBreakdown total_loss(const Tensor2& zhat, const Tensor2& yhat, const QueryMatrix& c,
                         double tau_instance, double tau_cluster, ObjectiveTerms terms = {});
ObjectiveGrad total_loss_grad(const Tensor2& zhat, const Tensor2& yhat, const QueryMatrix& c,
                              double tau_instance, double tau_cluster, ObjectiveTerms terms = {});

}  // namespace occ
