#include "occ/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "occ/errors.hpp"

namespace occ {

namespace {

void check_finite(std::span<const double> values, const std::string& what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
    }
}

double softplus(double x) {
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Tensor2 affine(const Tensor2& x, const DenseLayer& layer) {
    const std::size_t n = x.rows();
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    Tensor2 y(n, out);
    for (std::size_t r = 0; r < n; ++r) {
        auto yr = y.row(r);
        std::copy(layer.bias.begin(), layer.bias.end(), yr.begin());
        for (std::size_t k = 0; k < in; ++k) {
            const double xv = x(r, k);
            if (xv == 0.0) continue;
            const auto wk = layer.weight.row(k);
            for (std::size_t c = 0; c < out; ++c) yr[c] += xv * wk[c];
        }
    }
    return y;
}

void activate(Tensor2& y, Activation act) {
    switch (act) {
        case Activation::Identity:
            return;
        case Activation::Tanh:
            for (double& v : y.data()) v = std::tanh(v);
            return;
        case Activation::Softplus:
            for (double& v : y.data()) v = softplus(v);
            return;
        case Activation::Softmax:
            for (std::size_t r = 0; r < y.rows(); ++r) {
                auto row = y.row(r);
                const double mx = *std::max_element(row.begin(), row.end());
                double sum = 0.0;
                for (double& v : row) {
                    v = std::exp(v - mx);
                    sum += v;
                }
                for (double& v : row) v /= sum;
            }
            return;
    }
}

Tensor2 dense_forward(const Tensor2& x, const DenseLayer& layer) {
    Tensor2 y = affine(x, layer);
    activate(y, layer.activation);
    return y;
}

// Converts dL/d(output) into dL/d(pre-activation) in place. `output` is the
// post-activation value of the layer.
void activation_backward(Tensor2& grad, const Tensor2& output, Activation act) {
    switch (act) {
        case Activation::Identity:
            return;
        case Activation::Tanh:
            for (std::size_t i = 0; i < grad.size(); ++i) {
                const double t = output.data()[i];
                grad.data()[i] *= 1.0 - t * t;
            }
            return;
        case Activation::Softplus:
            // softplus'(a) = sigmoid(a) = 1 - exp(-softplus(a))
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad.data()[i] *= -std::expm1(-output.data()[i]);
            return;
        case Activation::Softmax:
            for (std::size_t r = 0; r < grad.rows(); ++r) {
                auto g = grad.row(r);
                const auto y = output.row(r);
                const double gy = dot(g, y);
                for (std::size_t c = 0; c < g.size(); ++c) g[c] = y[c] * (g[c] - gy);
            }
            return;
    }
}

// Accumulates parameter gradients of one layer and returns dL/d(input).
Tensor2 dense_backward(const Tensor2& input, const Tensor2& grad_pre, const DenseLayer& layer,
                       DenseLayer& grad) {
    const std::size_t n = input.rows();
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    for (std::size_t r = 0; r < n; ++r) {
        const auto gr = grad_pre.row(r);
        for (std::size_t c = 0; c < out; ++c) grad.bias[c] += gr[c];
        for (std::size_t k = 0; k < in; ++k) {
            const double xv = input(r, k);
            if (xv == 0.0) continue;
            auto gw = grad.weight.row(k);
            for (std::size_t c = 0; c < out; ++c) gw[c] += xv * gr[c];
        }
    }
    Tensor2 grad_in(n, in);
    for (std::size_t r = 0; r < n; ++r) {
        const auto gr = grad_pre.row(r);
        for (std::size_t k = 0; k < in; ++k) grad_in(r, k) = dot(gr, layer.weight.row(k));
    }
    return grad_in;
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng) {
    DenseLayer layer{Tensor2(in, out), std::vector<double>(out, 0.0), act};
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weight.data()) w = dist(rng);
    return layer;
}

DenseLayer zero_layer(const DenseLayer& like) {
    return {Tensor2(like.in_dim(), like.out_dim()), std::vector<double>(like.out_dim(), 0.0),
            like.activation};
}

}  // namespace

std::size_t ModelParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : encoder) n += l.weight.size() + l.bias.size();
    n += representation.weight.size() + representation.bias.size();
    n += assignment.weight.size() + assignment.bias.size();
    return n;
}

void ModelParams::for_each_array(const std::function<void(std::span<double>)>& fn) {
    for (auto& l : encoder) {
        fn(l.weight.data());
        fn(l.bias);
    }
    fn(representation.weight.data());
    fn(representation.bias);
    fn(assignment.weight.data());
    fn(assignment.bias);
}

void ModelParams::for_each_array(const std::function<void(std::span<const double>)>& fn) const {
    for (const auto& l : encoder) {
        fn(l.weight.data());
        fn(l.bias);
    }
    fn(representation.weight.data());
    fn(representation.bias);
    fn(assignment.weight.data());
    fn(assignment.bias);
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for_each_array([&](std::span<const double> a) { flat.insert(flat.end(), a.begin(), a.end()); });
    return flat;
}

void ModelParams::assign_flat(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw InvalidInput("assign_flat: length mismatch");
    std::size_t off = 0;
    for_each_array([&](std::span<double> a) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), a.size(), a.begin());
        off += a.size();
    });
}

ModelParams init_params(const ModelShape& shape, std::mt19937_64& rng) {
    if (shape.hidden.empty()) throw ConfigError("model needs at least one encoder layer");
    if (shape.input_dim == 0 || shape.rep_dim == 0) throw ConfigError("zero model dimension");
    if (shape.clusters < 2) throw ConfigError("cluster count K must be >= 2");
    ModelParams p;
    std::size_t in = shape.input_dim;
    for (std::size_t i = 0; i < shape.hidden.size(); ++i) {
        const bool last = i + 1 == shape.hidden.size();
        p.encoder.push_back(
            make_layer(in, shape.hidden[i], last ? Activation::Softplus : Activation::Tanh, rng));
        in = shape.hidden[i];
    }
    p.representation = make_layer(in, shape.rep_dim, Activation::Identity, rng);
    p.assignment = make_layer(in, shape.clusters, Activation::Softmax, rng);
    return p;
}

ModelParams zeros_like(const ModelParams& like) {
    ModelParams g;
    for (const auto& l : like.encoder) g.encoder.push_back(zero_layer(l));
    g.representation = zero_layer(like.representation);
    g.assignment = zero_layer(like.assignment);
    return g;
}

std::string layer_name(const ModelParams& params, std::size_t flat_layer_index) {
    if (flat_layer_index < params.encoder.size())
        return "encoder[" + std::to_string(flat_layer_index) + "]";
    if (flat_layer_index == params.encoder.size()) return "representation head";
    return "assignment head";
}

ForwardPass forward(const ModelParams& params, const Tensor2& batch) {
    if (params.encoder.empty()) throw InvalidInput("forward: model has no encoder layers");
    if (batch.cols() != params.input_dim())
        throw InvalidInput("forward: batch has " + std::to_string(batch.cols()) +
                           " columns, encoder expects " + std::to_string(params.input_dim()));
    if (!batch.all_finite()) throw InvalidInput("forward: non-finite batch entry");
    const std::size_t layers = params.encoder.size() + 2;
    for (std::size_t i = 0; i < layers; ++i) {
        const DenseLayer& l = i < params.encoder.size()     ? params.encoder[i]
                              : i == params.encoder.size() ? params.representation
                                                           : params.assignment;
        check_finite(l.weight.data(), layer_name(params, i) + " weights");
        check_finite(l.bias, layer_name(params, i) + " bias");
    }

    ForwardPass pass;
    pass.input = batch;
    const Tensor2* x = &pass.input;
    for (const auto& layer : params.encoder) {
        pass.encoder_outputs.push_back(dense_forward(*x, layer));
        x = &pass.encoder_outputs.back();
    }
    pass.z = pass.encoder_outputs.back();
    pass.zhat = dense_forward(pass.z, params.representation);
    pass.yhat = dense_forward(pass.z, params.assignment);
    return pass;
}

ModelParams backward(const ModelParams& params, const ForwardPass& pass,
                     const Tensor2& grad_zhat, const Tensor2& grad_yhat) {
    ModelParams grads = zeros_like(params);
    const std::size_t n = pass.z.rows();
    Tensor2 grad_z(n, params.backbone_dim());

    auto head = [&](const Tensor2& upstream, const Tensor2& output, const DenseLayer& layer,
                    DenseLayer& g) {
        if (upstream.size() == 0) return;
        if (upstream.rows() != output.rows() || upstream.cols() != output.cols())
            throw InvalidInput("backward: upstream gradient shape mismatch");
        Tensor2 pre = upstream;
        activation_backward(pre, output, layer.activation);
        Tensor2 gz = dense_backward(pass.z, pre, layer, g);
        for (std::size_t i = 0; i < gz.size(); ++i) grad_z.data()[i] += gz.data()[i];
    };
    head(grad_zhat, pass.zhat, params.representation, grads.representation);
    head(grad_yhat, pass.yhat, params.assignment, grads.assignment);

    Tensor2 upstream = std::move(grad_z);
    for (std::size_t i = params.encoder.size(); i-- > 0;) {
        activation_backward(upstream, pass.encoder_outputs[i], params.encoder[i].activation);
        const Tensor2& input = i == 0 ? pass.input : pass.encoder_outputs[i - 1];
        upstream = dense_backward(input, upstream, params.encoder[i], grads.encoder[i]);
    }

    // Walk from the output back so the report names where the blow-up starts.
    auto check = [&](const DenseLayer& g, std::size_t i) {
        check_finite(g.weight.data(), "gradient of " + layer_name(params, i));
        check_finite(g.bias, "gradient of " + layer_name(params, i));
    };
    check(grads.representation, params.encoder.size());
    check(grads.assignment, params.encoder.size() + 1);
    for (std::size_t i = params.encoder.size(); i-- > 0;) check(grads.encoder[i], i);
    return grads;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate) {
    if (params.size() != grads.size()) throw InvalidInput("adam_step: gradient shape mismatch");
    if (!(learning_rate > 0.0)) throw ConfigError("adam_step: learning rate must be > 0");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    } else if (state.m.size() != params.size()) {
        throw InvalidInput("adam_step: optimizer state shape mismatch");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        if (g == 0.0 && state.m[i] == 0.0) continue;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.eps);
    }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double learning_rate) {
    std::vector<std::size_t> sizes;
    params.for_each_array([&](std::span<const double> a) { sizes.push_back(a.size()); });
    std::size_t idx = 0;
    bool mismatch = false;
    grads.for_each_array([&](std::span<const double> a) {
        if (idx >= sizes.size() || sizes[idx++] != a.size()) mismatch = true;
    });
    if (mismatch || idx != sizes.size()) throw InvalidInput("adam_step: gradient shape mismatch");
    std::vector<double> flat = params.flatten();
    const std::vector<double> g = grads.flatten();
    adam_step(std::span<double>(flat), std::span<const double>(g), state, learning_rate);
    params.assign_flat(flat);
}

}  // namespace occ
