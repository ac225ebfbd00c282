#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nn_core.hpp"
#include "random.hpp"

namespace gpnkit {

/// Zero-mean diagonal Gaussian prior over MLP parameters, one weight and one
/// bias variance per layer. With `scale_by_fan_in`, weight variance is
/// divided by the layer's fan-in so the prior over functions does not grow
/// with width; bootstrap networks use the raw values.
struct PriorSpec {
    std::vector<double> weight_variance;
    std::vector<double> bias_variance;
    bool scale_by_fan_in = true;

    static PriorSpec uniform(std::size_t layers, double weight_var, double bias_var, bool fan_in_scaled = true) {
        return {std::vector<double>(layers, weight_var), std::vector<double>(layers, bias_var), fan_in_scaled};
    }

    /// 2-layer bootstrap prior: raw variances 40 (layer 1) and 10 (layer 2).
    static PriorSpec bootstrap_default() { return {{40.0, 10.0}, {40.0, 10.0}, false}; }

    void validate(const MlpArchitecture& arch) const {
        if (weight_variance.size() != arch.num_layers())
            throw ShapeError("PriorSpec weight variances", arch.num_layers(), weight_variance.size());
        if (bias_variance.size() != arch.num_layers())
            throw ShapeError("PriorSpec bias variances", arch.num_layers(), bias_variance.size());
        for (std::size_t l = 0; l < arch.num_layers(); ++l)
            if (!(weight_variance[l] >= 0.0) || !(bias_variance[l] >= 0.0))
                throw PreconditionError("PriorSpec variances must be nonnegative");
    }

    friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

/// Variance of each entry of the flattened parameter vector.
inline VectorXd prior_variances(const PriorSpec& prior, const MlpArchitecture& arch) {
    prior.validate(arch);
    VectorXd var(static_cast<Index>(arch.param_count()));
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto off = static_cast<Index>(arch.layer_offset(l));
        const Index nw = static_cast<Index>(arch.fan_in(l)) * arch.fan_out(l);
        const double wv = prior.scale_by_fan_in ? prior.weight_variance[l] / arch.fan_in(l) : prior.weight_variance[l];
        var.segment(off, nw).setConstant(wv);
        var.segment(off + nw, arch.fan_out(l)).setConstant(prior.bias_variance[l]);
    }
    return var;
}

inline ParamVector sample_prior_params(const PriorSpec& prior, const MlpArchitecture& arch, Rng& rng) {
    const VectorXd sd = prior_variances(prior, arch).cwiseSqrt();
    ParamVector p(arch);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Index i = 0; i < p.values.size(); ++i) p.values[i] = sd[i] * n01(rng);
    return p;
}

inline ParamVector sample_prior_params(const PriorSpec& prior, const MlpArchitecture& arch, std::uint64_t seed) {
    Rng rng(seed);
    return sample_prior_params(prior, arch, rng);
}

/// Default prior for trainable networks: fan-in scaled weight variance 2
/// for ReLU (He) and 1 otherwise, bias variance 0.01.
inline PriorSpec default_prior(const MlpArchitecture& arch) {
    const double wv = arch.hidden == Activation::relu ? 2.0 : 1.0;
    return PriorSpec::uniform(arch.num_layers(), wv, 0.01, true);
}

/// Initial parameters: a draw from the default prior, so an untrained
/// network is itself a prior sample.
inline ParamVector init_params(const MlpArchitecture& arch, std::uint64_t seed) {
    return sample_prior_params(default_prior(arch), arch, seed);
}

}  // namespace gpnkit
