#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cxr/error.hpp"
#include "cxr/random.hpp"

namespace cxr::nn {

enum class Activation : std::uint8_t { Relu = 0, Sigmoid = 1, Linear = 2 };
enum class LossKind : std::uint8_t { Mse, Bce };

std::string_view to_string(Activation);
Activation parse_activation(std::string_view);

/// Rows are samples, columns are features.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// y = act(x W + b) with W of shape in_dim x out_dim.
template <typename T>
struct DenseLayer {
    Matrix<T> weights;
    RowVector<T> bias;
    Activation activation = Activation::Linear;

    std::size_t in_dim() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weights.cols()); }

    friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
        return a.activation == b.activation && a.weights.rows() == b.weights.rows() &&
               a.weights.cols() == b.weights.cols() && a.bias.size() == b.bias.size() &&
               a.weights == b.weights && a.bias == b.bias;
    }
};

/// Ordered stack of dense layers with dropout between consecutive layers.
///
/// Every mutation through `layer()` bumps `revision()`, which lets backward()
/// reject activations recorded against older parameters.
template <typename T>
class Network {
public:
    Network() = default;
    Network(std::vector<DenseLayer<T>> layers, double dropout_rate)
        : layers_(std::move(layers)), dropout_rate_(dropout_rate) {
        if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0))
            throw ValidationError("dropout rate must be in [0, 1)");
        if (layers_.empty()) throw ValidationError("network needs at least one layer");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.in_dim() == 0 || l.out_dim() == 0)
                throw ShapeError("layer " + std::to_string(i) + " has an empty dimension");
            if (static_cast<std::size_t>(l.bias.size()) != l.out_dim())
                throw ShapeError("layer " + std::to_string(i) + ": bias size mismatch");
            if (i > 0 && layers_[i - 1].out_dim() != l.in_dim())
                throw ShapeError("layer " + std::to_string(i) + " expects " + std::to_string(l.in_dim()) +
                                 " inputs but layer " + std::to_string(i - 1) + " produces " +
                                 std::to_string(layers_[i - 1].out_dim()));
            if (!l.weights.allFinite() || !l.bias.allFinite())
                throw ValidationError("layer " + std::to_string(i) + " has non-finite parameters");
        }
    }

    const std::vector<DenseLayer<T>>& layers() const { return layers_; }
    const DenseLayer<T>& layer(std::size_t i) const { return layers_.at(i); }
    DenseLayer<T>& layer(std::size_t i) {
        ++revision_;
        return layers_.at(i);
    }
    std::size_t size() const { return layers_.size(); }
    std::size_t in_dim() const { return layers_.front().in_dim(); }
    std::size_t out_dim() const { return layers_.back().out_dim(); }
    double dropout_rate() const { return dropout_rate_; }
    std::uint64_t revision() const { return revision_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.in_dim() * l.out_dim() + l.out_dim();
        return n;
    }

    /// Same architecture, parameters converted to U.
    template <typename U>
    Network<U> cast() const {
        std::vector<DenseLayer<U>> out;
        for (const auto& l : layers_)
            out.push_back({l.weights.template cast<U>(), l.bias.template cast<U>(), l.activation});
        return Network<U>(std::move(out), dropout_rate_);
    }

    /// Parameter equality; the revision counter is ignored.
    friend bool operator==(const Network& a, const Network& b) {
        return a.dropout_rate_ == b.dropout_rate_ && a.layers_ == b.layers_;
    }

private:
    std::vector<DenseLayer<T>> layers_;
    double dropout_rate_ = 0.0;
    std::uint64_t revision_ = 0;
};

/// Uniform init from the seeded stream: He bounds for RELU layers, Glorot
/// bounds otherwise. Biases start at zero.
template <typename T>
DenseLayer<T> make_layer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
    const double fan = act == Activation::Relu ? static_cast<double>(in_dim) : static_cast<double>(in_dim + out_dim) / 2.0;
    const double limit = std::sqrt(3.0 * (act == Activation::Relu ? 2.0 : 1.0) / fan);
    DenseLayer<T> l{Matrix<T>(in_dim, out_dim), RowVector<T>::Zero(out_dim), act};
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
    return l;
}

/// dims = {in, h1, ..., out}; activations.size() == dims.size() - 1.
template <typename T>
Network<T> make_network(std::span<const std::size_t> dims, std::span<const Activation> activations,
                        double dropout_rate, std::uint64_t seed) {
    if (dims.size() < 2 || activations.size() != dims.size() - 1)
        throw ShapeError("make_network: need one activation per layer");
    Rng rng(seed);
    std::vector<DenseLayer<T>> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        layers.push_back(make_layer<T>(dims[i], dims[i + 1], activations[i], rng));
    return Network<T>(std::move(layers), dropout_rate);
}

template <typename T>
void apply_activation(Matrix<T>& z, Activation act) {
    switch (act) {
        case Activation::Relu: z = z.cwiseMax(T(0)); break;
        case Activation::Sigmoid: z = (T(1) / (T(1) + (-z.array()).exp())).matrix(); break;
        case Activation::Linear: break;
    }
}

/// Everything backward() needs from a forward pass.
template <typename T>
struct ForwardPass {
    std::vector<Matrix<T>> inputs;   ///< input seen by layer i (after dropout)
    std::vector<Matrix<T>> outputs;  ///< post-activation output of layer i
    std::vector<Matrix<T>> masks;    ///< inverted-dropout mask on outputs[i]; empty when none
    const void* network = nullptr;
    std::uint64_t revision = 0;

    const Matrix<T>& output() const { return outputs.back(); }
};

/// With training == false (or rate 0) dropout is the identity and `rng` is
/// not touched.
template <typename T>
ForwardPass<T> forward(const Network<T>& net, const Matrix<T>& batch, bool training, Rng* rng) {
    if (static_cast<std::size_t>(batch.cols()) != net.in_dim())
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                         std::to_string(net.in_dim()));
    if (!batch.allFinite()) throw ValidationError("forward: non-finite input");
    const bool drop = training && net.dropout_rate() > 0.0;
    if (drop && rng == nullptr) throw ValidationError("forward: dropout in training mode needs an rng");

    ForwardPass<T> pass;
    pass.network = &net;
    pass.revision = net.revision();
    const std::size_t n = net.size();
    pass.inputs.reserve(n);
    pass.outputs.reserve(n);
    pass.masks.resize(n);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - net.dropout_rate()));

    pass.inputs.push_back(batch);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& l = net.layer(i);
        Matrix<T> z = pass.inputs[i] * l.weights;
        z.rowwise() += l.bias;
        apply_activation(z, l.activation);
        pass.outputs.push_back(std::move(z));
        if (i + 1 == n) break;
        if (drop) {
            Matrix<T> mask(pass.outputs[i].rows(), pass.outputs[i].cols());
            for (Eigen::Index j = 0; j < mask.size(); ++j)
                mask.data()[j] = rng->bernoulli(net.dropout_rate()) ? T(0) : keep_scale;
            pass.inputs.push_back(pass.outputs[i].cwiseProduct(mask));
            pass.masks[i] = std::move(mask);
        } else {
            pass.inputs.push_back(pass.outputs[i]);
        }
    }
    return pass;
}

/// Inference-only forward; no dropout, nothing retained.
template <typename T>
Matrix<T> predict(const Network<T>& net, const Matrix<T>& batch) {
    if (static_cast<std::size_t>(batch.cols()) != net.in_dim())
        throw ShapeError("predict: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                         std::to_string(net.in_dim()));
    Matrix<T> x = batch;
    for (const auto& l : net.layers()) {
        Matrix<T> z = x * l.weights;
        z.rowwise() += l.bias;
        apply_activation(z, l.activation);
        x = std::move(z);
    }
    return x;
}

template <typename T>
struct Gradients {
    std::vector<Matrix<T>> weights;
    std::vector<RowVector<T>> bias;
};

/// Gradients of the loss w.r.t. every parameter, given dL/d(output).
template <typename T>
Gradients<T> backward(const Network<T>& net, const ForwardPass<T>& pass, const Matrix<T>& loss_grad) {
    const std::size_t n = net.size();
    if (pass.network != &net || pass.revision != net.revision() || pass.outputs.size() != n ||
        pass.inputs.size() != n)
        throw ValidationError("backward: activations do not belong to the current network state");
    if (loss_grad.rows() != pass.output().rows() || loss_grad.cols() != pass.output().cols())
        throw ShapeError("backward: loss gradient shape does not match the network output");

    Gradients<T> g;
    g.weights.resize(n);
    g.bias.resize(n);
    Matrix<T> delta = loss_grad;
    for (std::size_t i = n; i-- > 0;) {
        const auto& l = net.layer(i);
        const auto& out = pass.outputs[i];
        switch (l.activation) {
            case Activation::Relu: delta = (out.array() > T(0)).select(delta, T(0)); break;
            case Activation::Sigmoid: delta = delta.cwiseProduct((out.array() * (T(1) - out.array())).matrix()); break;
            case Activation::Linear: break;
        }
        g.weights[i].noalias() = pass.inputs[i].transpose() * delta;
        g.bias[i] = delta.colwise().sum();
        if (i == 0) break;
        Matrix<T> up = delta * l.weights.transpose();
        if (pass.masks[i - 1].size() != 0) up = up.cwiseProduct(pass.masks[i - 1]);
        delta = std::move(up);
    }
    return g;
}

template <typename T>
struct LossResult {
    double value = 0.0;
    Matrix<T> gradient;  ///< dL/d(prediction)
};

inline constexpr double kBceClamp = 1e-7;

/// Both losses average over every element of the prediction matrix.
/// BCE clamps p to [1e-7, 1 - 1e-7]; its gradient is zero where clamping
/// is active.
template <typename T>
LossResult<T> loss(LossKind kind, const Matrix<T>& prediction, const Matrix<T>& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
        throw ShapeError("loss: prediction and target shapes differ");
    if (prediction.size() == 0) throw ShapeError("loss: empty prediction");
    const double inv_n = 1.0 / static_cast<double>(prediction.size());
    LossResult<T> r;
    r.gradient.resize(prediction.rows(), prediction.cols());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < prediction.size(); ++i) {
        const double p = static_cast<double>(prediction.data()[i]);
        const double y = static_cast<double>(target.data()[i]);
        if (kind == LossKind::Mse) {
            acc += (p - y) * (p - y);
            r.gradient.data()[i] = static_cast<T>(2.0 * (p - y) * inv_n);
        } else {
            const double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
            acc += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
            r.gradient.data()[i] = pc == p ? static_cast<T>((pc - y) / (pc * (1.0 - pc)) * inv_n) : T(0);
        }
    }
    r.value = acc * inv_n;
    return r;
}

/// Adam moments for every parameter of a network.
template <typename T>
struct AdamState {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t t = 0;
    std::vector<Matrix<T>> m_weights, v_weights;
    std::vector<RowVector<T>> m_bias, v_bias;

    static AdamState for_network(const Network<T>& net) {
        AdamState s;
        for (const auto& l : net.layers()) {
            s.m_weights.push_back(Matrix<T>::Zero(l.weights.rows(), l.weights.cols()));
            s.v_weights.push_back(Matrix<T>::Zero(l.weights.rows(), l.weights.cols()));
            s.m_bias.push_back(RowVector<T>::Zero(l.bias.size()));
            s.v_bias.push_back(RowVector<T>::Zero(l.bias.size()));
        }
        return s;
    }
};

namespace detail {

template <typename P, typename G, typename M>
void adam_update(P& param, const G& grad, M& m, M& v, const AdamState<typename P::Scalar>& s, double c1, double c2) {
    using T = typename P::Scalar;
    const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
    m.array() = b1 * m.array() + (T(1) - b1) * grad.array();
    v.array() = b2 * v.array() + (T(1) - b2) * grad.array().square();
    param.array() -= static_cast<T>(s.alpha) * (m.array() / static_cast<T>(c1)) /
                     ((v.array() / static_cast<T>(c2)).sqrt() + static_cast<T>(s.epsilon));
}

}  // namespace detail

/// One bias-corrected Adam update. Throws (leaving everything untouched) on
/// shape mismatch or non-finite gradients.
template <typename T>
void adam_step(Network<T>& net, const Gradients<T>& grads, AdamState<T>& state) {
    const std::size_t n = net.size();
    if (grads.weights.size() != n || grads.bias.size() != n || state.m_weights.size() != n)
        throw ShapeError("adam_step: gradient/state layer count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& l = net.layers()[i];
        if (grads.weights[i].rows() != l.weights.rows() || grads.weights[i].cols() != l.weights.cols() ||
            grads.bias[i].size() != l.bias.size() || state.m_weights[i].rows() != l.weights.rows() ||
            state.m_weights[i].cols() != l.weights.cols())
            throw ShapeError("adam_step: shape mismatch at layer " + std::to_string(i));
        if (!grads.weights[i].allFinite() || !grads.bias[i].allFinite())
            throw ValidationError("adam_step: non-finite gradient at layer " + std::to_string(i));
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < n; ++i) {
        auto& l = net.layer(i);
        detail::adam_update(l.weights, grads.weights[i], state.m_weights[i], state.v_weights[i], state, c1, c2);
        detail::adam_update(l.bias, grads.bias[i], state.m_bias[i], state.v_bias[i], state, c1, c2);
    }
}

struct TrainOptions {
    int epochs = 10;
    std::size_t batch_size = 128;
    LossKind loss = LossKind::Mse;
    std::uint64_t seed = 0;
    double adam_alpha = 1e-3;
};

struct TrainResult {
    std::vector<double> loss_history;  ///< sample-weighted mean batch loss per epoch
    std::uint64_t steps = 0;
};

/// Mean loss over the whole set in inference mode.
template <typename T>
double evaluate_loss(const Network<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets, LossKind kind) {
    return loss(kind, predict(net, inputs), targets).value;
}

/// Mini-batch Adam. Each epoch reshuffles the sample order from a stream
/// seeded by `opts.seed`; the same stream drives the dropout masks.
template <typename T>
TrainResult train(Network<T>& net, const Matrix<T>& inputs, const Matrix<T>& targets, const TrainOptions& opts,
                  const std::function<void(int, double)>& on_epoch = {}) {
    if (inputs.rows() == 0) throw ValidationError("train: empty dataset");
    if (inputs.rows() != targets.rows()) throw ShapeError("train: input/target row counts differ");
    if (static_cast<std::size_t>(inputs.cols()) != net.in_dim() ||
        static_cast<std::size_t>(targets.cols()) != net.out_dim())
        throw ShapeError("train: data width does not match the network");
    if (opts.batch_size == 0) throw ValidationError("train: batch size must be positive");
    if (opts.epochs < 0) throw ValidationError("train: negative epoch count");

    Rng rng(opts.seed);
    auto adam = AdamState<T>::for_network(net);
    adam.alpha = opts.adam_alpha;
    const auto n = static_cast<std::size_t>(inputs.rows());
    std::vector<Eigen::Index> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);

    TrainResult result;
    Matrix<T> xb, yb;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double weighted = 0.0;
        for (std::size_t start = 0; start < n; start += opts.batch_size) {
            const std::size_t rows = std::min(opts.batch_size, n - start);
            xb.resize(static_cast<Eigen::Index>(rows), inputs.cols());
            yb.resize(static_cast<Eigen::Index>(rows), targets.cols());
            for (std::size_t r = 0; r < rows; ++r) {
                xb.row(static_cast<Eigen::Index>(r)) = inputs.row(order[start + r]);
                yb.row(static_cast<Eigen::Index>(r)) = targets.row(order[start + r]);
            }
            auto pass = forward(net, xb, true, &rng);
            auto l = loss(opts.loss, pass.output(), yb);
            auto g = backward(net, pass, l.gradient);
            adam_step(net, g, adam);
            weighted += l.value * static_cast<double>(rows);
            ++result.steps;
        }
        result.loss_history.push_back(weighted / static_cast<double>(n));
        if (on_epoch) on_epoch(epoch, result.loss_history.back());
    }
    return result;
}

/// Checkpoint layout (little-endian):
///   "CXRNNET1", u32 version, u32 layer count, f64 dropout rate,
///   per layer: u32 in, u32 out, u8 activation, 3 zero bytes,
///              in*out f32 weights (row-major), out f32 bias;
///   trailing u64 FNV-1a over every preceding byte.
inline constexpr std::string_view kCheckpointMagic = "CXRNNET1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net);
/// Throws FormatError on bad magic/version, truncation, or checksum mismatch.
Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Network<float>& net);
Network<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace cxr::nn
