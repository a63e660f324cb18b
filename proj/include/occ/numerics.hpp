#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "occ/tensor.hpp"

namespace occ {

enum class Activation : std::uint32_t { Identity = 0, Tanh = 1, Softplus = 2, Softmax = 3 };

struct DenseLayer {
    Tensor2 weight;  // in x out
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }

    bool operator==(const DenseLayer&) const = default;
};

struct ModelShape {
    std::size_t input_dim = 4;
    std::vector<std::size_t> hidden = {32, 16};  // last entry is the backbone width
    std::size_t rep_dim = 32;
    std::size_t clusters = 2;
};

/// Encoder stack followed by the representation head (raw, M columns) and
/// the assignment head (row softmax, K columns). Hidden encoder layers use
/// tanh; the last encoder layer uses softplus so backbone features are
/// non-negative, like pooled ReLU features of a convolutional backbone.
struct ModelParams {
    std::vector<DenseLayer> encoder;
    DenseLayer representation;
    DenseLayer assignment;

    std::size_t input_dim() const noexcept { return encoder.front().in_dim(); }
    std::size_t backbone_dim() const noexcept { return encoder.back().out_dim(); }
    std::size_t rep_dim() const noexcept { return representation.out_dim(); }
    std::size_t clusters() const noexcept { return assignment.out_dim(); }
    std::size_t parameter_count() const noexcept;

    /// Visits every weight and bias array in a fixed order.
    void for_each_array(const std::function<void(std::span<double>)>& fn);
    void for_each_array(const std::function<void(std::span<const double>)>& fn) const;

    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> flat);

    bool operator==(const ModelParams&) const = default;
};

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const ModelShape& shape, std::mt19937_64& rng);

/// Same layout as `like`, every entry zero.
ModelParams zeros_like(const ModelParams& like);

std::string layer_name(const ModelParams& params, std::size_t flat_layer_index);

struct ForwardPass {
    std::vector<Tensor2> encoder_outputs;  // post-activation, one per encoder layer
    Tensor2 input;
    Tensor2 z;     // backbone features
    Tensor2 zhat;  // representation space
    Tensor2 yhat;  // assignment probabilities
};

ForwardPass forward(const ModelParams& params, const Tensor2& batch);

/// Reverse-mode gradients given dL/dZhat and dL/dYhat. Either upstream may be
/// empty (0x0), meaning that head does not contribute to the loss.
ModelParams backward(const ModelParams& params, const ForwardPass& pass,
                     const Tensor2& grad_zhat, const Tensor2& grad_yhat);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double learning_rate);

// Scalar Adam on a flat parameter vector; used for toy objectives.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate);

}  // namespace occ
