#pragma once

// Dense feed-forward networks with hand-written reverse-mode gradients.
//
// Parameter layout per layer l (fan_in = widths[l], fan_out = widths[l+1]):
// fan_in*fan_out weights, stored column-major as a fan_in x fan_out matrix
// (so a batch H of shape N x fan_in maps to H * W), followed by fan_out
// biases. Layers are concatenated in order.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"

namespace gpnkit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation : std::uint8_t { tanh = 0, relu = 1, identity = 2 };

/// Softmax is never applied inside forward(); `softmax_deferred` only marks
/// that callers will apply it to the returned logits.
enum class OutputActivation : std::uint8_t { identity = 0, softmax_deferred = 1 };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + s + "'");
}

inline const char* to_string(OutputActivation a) {
    return a == OutputActivation::identity ? "identity" : "softmax_deferred";
}

inline OutputActivation output_activation_from_string(const std::string& s) {
    if (s == "identity") return OutputActivation::identity;
    if (s == "softmax_deferred" || s == "softmax") return OutputActivation::softmax_deferred;
    throw ConfigError("unknown output activation '" + s + "'");
}

struct MlpArchitecture {
    std::vector<int> widths;  // input dim first, output dim last
    Activation hidden = Activation::tanh;
    OutputActivation output = OutputActivation::identity;

    MlpArchitecture() = default;
    MlpArchitecture(std::vector<int> w, Activation h = Activation::tanh,
                    OutputActivation o = OutputActivation::identity)
        : widths(std::move(w)), hidden(h), output(o) {
        validate();
    }

    void validate() const {
        if (widths.size() < 2) throw ShapeError("MlpArchitecture needs at least 2 widths", 2, widths.size());
        for (std::size_t i = 0; i < widths.size(); ++i)
            if (widths[i] < 1) throw ShapeError("MlpArchitecture width " + std::to_string(i) + " must be >= 1", 1, 0);
    }

    std::size_t num_layers() const { return widths.size() - 1; }
    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    int fan_in(std::size_t layer) const { return widths[layer]; }
    int fan_out(std::size_t layer) const { return widths[layer + 1]; }

    std::size_t layer_param_count(std::size_t layer) const {
        return static_cast<std::size_t>(widths[layer]) * widths[layer + 1] + widths[layer + 1];
    }

    /// Offset of layer `layer`'s weight block inside the flat vector.
    std::size_t layer_offset(std::size_t layer) const {
        std::size_t off = 0;
        for (std::size_t l = 0; l < layer; ++l) off += layer_param_count(l);
        return off;
    }

    std::size_t param_count() const { return layer_offset(num_layers()); }

    friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

/// Flattened network parameters together with the architecture they describe.
struct ParamVector {
    VectorXd values;
    MlpArchitecture arch;

    ParamVector() = default;
    explicit ParamVector(MlpArchitecture a)
        : values(VectorXd::Zero(static_cast<Index>(a.param_count()))), arch(std::move(a)) {}
    ParamVector(MlpArchitecture a, VectorXd v) : values(std::move(v)), arch(std::move(a)) {
        if (static_cast<std::size_t>(values.size()) != arch.param_count())
            throw ShapeError("ParamVector length", arch.param_count(), static_cast<std::size_t>(values.size()));
    }

    Index size() const { return values.size(); }

    Eigen::Map<const MatrixXd> weights(std::size_t layer) const {
        return {values.data() + arch.layer_offset(layer), arch.fan_in(layer), arch.fan_out(layer)};
    }
    Eigen::Map<MatrixXd> weights(std::size_t layer) {
        return {values.data() + arch.layer_offset(layer), arch.fan_in(layer), arch.fan_out(layer)};
    }
    Eigen::Map<const VectorXd> bias(std::size_t layer) const {
        return {values.data() + arch.layer_offset(layer) + static_cast<std::size_t>(arch.fan_in(layer)) * arch.fan_out(layer),
                arch.fan_out(layer)};
    }
    Eigen::Map<VectorXd> bias(std::size_t layer) {
        return {values.data() + arch.layer_offset(layer) + static_cast<std::size_t>(arch.fan_in(layer)) * arch.fan_out(layer),
                arch.fan_out(layer)};
    }

    friend bool operator==(const ParamVector& a, const ParamVector& b) {
        return a.arch == b.arch && a.values.size() == b.values.size() && a.values == b.values;
    }
};

/// Per-layer weight matrices and bias vectors as separate values.
struct LayerParams {
    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;
};

inline LayerParams unflatten(const ParamVector& p) {
    LayerParams out;
    for (std::size_t l = 0; l < p.arch.num_layers(); ++l) {
        out.weights.emplace_back(p.weights(l));
        out.biases.emplace_back(p.bias(l));
    }
    return out;
}

inline ParamVector flatten(const MlpArchitecture& arch, const LayerParams& layers) {
    if (layers.weights.size() != arch.num_layers() || layers.biases.size() != arch.num_layers())
        throw ShapeError("flatten: layer count", arch.num_layers(), layers.weights.size());
    ParamVector p(arch);
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        if (layers.weights[l].rows() != arch.fan_in(l) || layers.weights[l].cols() != arch.fan_out(l))
            throw ShapeError("flatten: weight rows of layer " + std::to_string(l),
                             static_cast<std::size_t>(arch.fan_in(l)), static_cast<std::size_t>(layers.weights[l].rows()));
        if (layers.biases[l].size() != arch.fan_out(l))
            throw ShapeError("flatten: bias length of layer " + std::to_string(l),
                             static_cast<std::size_t>(arch.fan_out(l)), static_cast<std::size_t>(layers.biases[l].size()));
        p.weights(l) = layers.weights[l];
        p.bias(l) = layers.biases[l];
    }
    return p;
}

namespace detail {

inline void apply_activation(Activation a, MatrixXd& z) {
    switch (a) {
        case Activation::tanh: z = z.array().tanh(); break;
        case Activation::relu: z = z.array().max(0.0); break;
        case Activation::identity: break;
    }
}

// derivative expressed through the activation output h = act(z)
inline void multiply_activation_grad(Activation a, const MatrixXd& h, MatrixXd& g) {
    switch (a) {
        case Activation::tanh: g.array() *= (1.0 - h.array().square()); break;
        case Activation::relu: g.array() *= (h.array() > 0.0).cast<double>(); break;
        case Activation::identity: break;
    }
}

inline void check_input(const ParamVector& p, const MatrixXd& x) {
    if (static_cast<std::size_t>(p.values.size()) != p.arch.param_count())
        throw ShapeError("parameter vector length", p.arch.param_count(), static_cast<std::size_t>(p.values.size()));
    if (x.cols() != p.arch.input_dim())
        throw ShapeError("forward: input columns", static_cast<std::size_t>(p.arch.input_dim()),
                         static_cast<std::size_t>(x.cols()));
}

}  // namespace detail

/// Activations of every layer from a forward pass; activations[0] is the input.
struct ForwardCache {
    std::vector<MatrixXd> activations;
    const MatrixXd& output() const { return activations.back(); }
};

inline ForwardCache forward_cached(const ParamVector& params, const MatrixXd& x) {
    detail::check_input(params, x);
    const auto& arch = params.arch;
    ForwardCache cache;
    cache.activations.reserve(arch.num_layers() + 1);
    cache.activations.push_back(x);
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        MatrixXd z = cache.activations.back() * params.weights(l);
        z.rowwise() += params.bias(l).transpose();
        if (l + 1 < arch.num_layers()) detail::apply_activation(arch.hidden, z);
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

/// Network output for each row of `x` (N x input_dim -> N x output_dim).
/// For classification architectures these are pre-softmax logits.
inline MatrixXd forward(const ParamVector& params, const MatrixXd& x) {
    detail::check_input(params, x);
    const auto& arch = params.arch;
    MatrixXd h = x;
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        MatrixXd z = h * params.weights(l);
        z.rowwise() += params.bias(l).transpose();
        if (l + 1 < arch.num_layers()) detail::apply_activation(arch.hidden, z);
        h = std::move(z);
    }
    return h;
}

struct Gradients {
    ParamVector params;
    MatrixXd input;  // dL/dx, same shape as x
};

/// Reverse pass from a cached forward. `loss_grad` is dL/d(output).
inline Gradients backward(const ParamVector& params, const ForwardCache& cache, const MatrixXd& loss_grad) {
    const auto& arch = params.arch;
    const MatrixXd& out = cache.output();
    if (loss_grad.rows() != out.rows())
        throw ShapeError("backward: loss_grad rows", static_cast<std::size_t>(out.rows()),
                         static_cast<std::size_t>(loss_grad.rows()));
    if (loss_grad.cols() != out.cols())
        throw ShapeError("backward: loss_grad columns", static_cast<std::size_t>(out.cols()),
                         static_cast<std::size_t>(loss_grad.cols()));
    Gradients grads{ParamVector(arch), MatrixXd()};
    MatrixXd g = loss_grad;
    for (std::size_t l = arch.num_layers(); l-- > 0;) {
        if (l + 1 < arch.num_layers()) detail::multiply_activation_grad(arch.hidden, cache.activations[l + 1], g);
        const MatrixXd& h_in = cache.activations[l];
        grads.params.weights(l).noalias() = h_in.transpose() * g;
        grads.params.bias(l) = g.colwise().sum().transpose();
        MatrixXd g_in = g * params.weights(l).transpose();
        g = std::move(g_in);
    }
    grads.input = std::move(g);
    return grads;
}

inline Gradients backward(const ParamVector& params, const MatrixXd& x, const MatrixXd& loss_grad) {
    return backward(params, forward_cached(params, x), loss_grad);
}

// --------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind : std::uint8_t { sgd, adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    VectorXd first_moment;
    VectorXd second_moment;
    std::int64_t step_count = 0;

    static OptimizerState sgd(double lr) {
        OptimizerState s;
        s.kind = OptimizerKind::sgd;
        s.learning_rate = lr;
        return s;
    }
    static OptimizerState adam(double lr = 1e-3) {
        OptimizerState s;
        s.kind = OptimizerKind::adam;
        s.learning_rate = lr;
        return s;
    }
};

/// In-place update of `params` given `grad`. Moments are lazily
/// zero-initialized on the first call.
inline void optimizer_step(OptimizerState& state, Eigen::Ref<VectorXd> params, const Eigen::Ref<const VectorXd>& grad) {
    if (params.size() != grad.size())
        throw ShapeError("optimizer_step: gradient length", static_cast<std::size_t>(params.size()),
                         static_cast<std::size_t>(grad.size()));
    for (Index i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i])) throw NumericalError("optimizer_step: non-finite gradient", static_cast<std::size_t>(i));
    ++state.step_count;
    if (state.kind == OptimizerKind::sgd) {
        params -= state.learning_rate * grad;
        return;
    }
    if (state.first_moment.size() != params.size()) {
        state.first_moment = VectorXd::Zero(params.size());
        state.second_moment = VectorXd::Zero(params.size());
    }
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseAbs2();
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                      ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

inline ParamVector optimizer_step(OptimizerState& state, const ParamVector& params, const ParamVector& grad) {
    ParamVector out = params;
    optimizer_step(state, out.values, grad.values);
    return out;
}

// --------------------------------------------------------------------------
// Binary checkpoints: "GPNP" | u32 version | u32 n_widths | u32 widths[] |
// u8 hidden | u8 output | u16 reserved | u64 count | f64 values[], all
// little-endian.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("truncated parameter blob");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline void write_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    write_le<std::uint64_t>(os, bits);
}

inline double read_f64(std::istream& is) {
    auto bits = read_le<std::uint64_t>(is);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

}  // namespace detail

inline constexpr char kParamMagic[4] = {'G', 'P', 'N', 'P'};
inline constexpr std::uint32_t kParamVersion = 1;

inline void write_params(std::ostream& os, const ParamVector& p) {
    os.write(kParamMagic, 4);
    detail::write_le<std::uint32_t>(os, kParamVersion);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.arch.widths.size()));
    for (int w : p.arch.widths) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w));
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(p.arch.hidden));
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(p.arch.output));
    detail::write_le<std::uint16_t>(os, 0);
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(p.values.size()));
    for (Index i = 0; i < p.values.size(); ++i) detail::write_f64(os, p.values[i]);
}

inline ParamVector read_params(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kParamMagic, 4) != 0) throw DataError("not a parameter blob (bad magic)");
    if (auto v = detail::read_le<std::uint32_t>(is); v != kParamVersion)
        throw DataError("unsupported parameter blob version " + std::to_string(v));
    auto n = detail::read_le<std::uint32_t>(is);
    if (n < 2 || n > 4096) throw DataError("implausible layer count in parameter blob");
    std::vector<int> widths(n);
    for (auto& w : widths) w = static_cast<int>(detail::read_le<std::uint32_t>(is));
    auto hidden = detail::read_le<std::uint8_t>(is);
    auto output = detail::read_le<std::uint8_t>(is);
    if (hidden > 2 || output > 1) throw DataError("bad activation code in parameter blob");
    detail::read_le<std::uint16_t>(is);
    MlpArchitecture arch(std::move(widths), static_cast<Activation>(hidden), static_cast<OutputActivation>(output));
    auto count = detail::read_le<std::uint64_t>(is);
    if (count != arch.param_count()) throw DataError("parameter blob count does not match its architecture");
    VectorXd values(static_cast<Index>(count));
    for (Index i = 0; i < values.size(); ++i) values[i] = detail::read_f64(is);
    return ParamVector(std::move(arch), std::move(values));
}

/// Reads blobs until end of stream.
inline std::vector<ParamVector> read_params_sequence(std::istream& is) {
    std::vector<ParamVector> out;
    while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_params(is));
    return out;
}

}  // namespace gpnkit
