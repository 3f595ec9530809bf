#pragma once
// Activation function zoo for the encoder feed-forward blocks: fixed kinds,
// a parametric slope (prelu), Chebyshev polynomials of a squashed input, and
// learnable polynomials (single- and two-branch). Each kind provides forward
// value, input derivative, and parameter derivatives where applicable.
//
// Conventions:
//  - at non-differentiable points (relu family at 0, clamp edges) the
//    right-hand derivative is used
//  - chebyshev kinds squash the input with tanh before applying T_d, which
//    keeps |output| <= 1 for all finite inputs; the squash is a single
//    function below and can be swapped without touching anything else
//  - learnable polynomials clamp the input to [-POLY_CLAMP, POLY_CLAMP]

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegdec/rng.hpp"
#include "eegdec/tensor.hpp"

namespace eegdec {

enum class ActKind {
    relu,
    swish,
    gelu,
    elu,
    leaky_relu,
    prelu,
    sine,
    chebyshev,
    learnable_poly,
    neg_pos_poly,
};

constexpr double POLY_CLAMP = 3.0;

inline bool kind_has_degree(ActKind k) {
    return k == ActKind::chebyshev || k == ActKind::learnable_poly || k == ActKind::neg_pos_poly;
}

inline bool kind_has_learnable(ActKind k) {
    return k == ActKind::prelu || k == ActKind::learnable_poly || k == ActKind::neg_pos_poly;
}

inline std::int64_t learnable_param_count(ActKind k, int degree) {
    switch (k) {
        case ActKind::prelu: return 1;
        case ActKind::learnable_poly: return degree + 1;
        case ActKind::neg_pos_poly: return 2 * degree + 1;  // shared constant term
        default: return 0;
    }
}

struct ActivationSpec {
    ActKind kind = ActKind::relu;
    int degree = 0;              // chebyshev / polynomial kinds only, in {2, 3}
    double elu_alpha = 1.0;
    double leaky_slope = 0.01;
    std::vector<double> params;  // learnable kinds only

    bool has_learnable() const { return kind_has_learnable(kind); }
    std::int64_t param_count() const { return learnable_param_count(kind, degree); }

    void validate() const {
        if (kind_has_degree(kind)) {
            if (degree != 2 && degree != 3)
                throw std::invalid_argument("activation degree must be 2 or 3, got " +
                                            std::to_string(degree));
        } else if (degree != 0) {
            throw std::invalid_argument("degree given for a non-polynomial activation kind");
        }
        if (has_learnable()) {
            if (static_cast<std::int64_t>(params.size()) != param_count())
                throw std::invalid_argument("activation expects " + std::to_string(param_count()) +
                                            " learnable params, got " +
                                            std::to_string(params.size()));
        } else if (!params.empty()) {
            throw std::invalid_argument("learnable params given for a fixed activation kind");
        }
        if (elu_alpha <= 0.0) throw std::invalid_argument("elu_alpha must be > 0");
        if (leaky_slope <= 0.0 || leaky_slope >= 1.0)
            throw std::invalid_argument("leaky_slope must be in (0, 1)");
    }
};

// ---- Chebyshev polynomials of the first kind ----

// T_n(t) by the recurrence T0=1, T1=t, Tn = 2t*T_{n-1} - T_{n-2}.
inline double chebyshev_eval(int degree, double t) {
    if (degree < 0) throw std::invalid_argument("chebyshev degree must be >= 0");
    if (t < -1.0 || t > 1.0)
        throw std::domain_error("chebyshev argument " + std::to_string(t) + " outside [-1, 1]");
    double tm2 = 1.0, tm1 = t;
    if (degree == 0) return tm2;
    if (degree == 1) return tm1;
    double cur = 0.0;
    for (int n = 2; n <= degree; ++n) {
        cur = 2.0 * t * tm1 - tm2;
        tm2 = tm1;
        tm1 = cur;
    }
    return cur;
}

// dT_n/dt by differentiating the recurrence: Tn' = 2 T_{n-1} + 2t T_{n-1}' - T_{n-2}'.
inline double chebyshev_derivative(int degree, double t) {
    double tm2 = 1.0, tm1 = t;      // T_{n-2}, T_{n-1}
    double dm2 = 0.0, dm1 = 1.0;    // their derivatives
    if (degree == 0) return 0.0;
    if (degree == 1) return 1.0;
    double cur = 0.0, dcur = 0.0;
    for (int n = 2; n <= degree; ++n) {
        cur = 2.0 * t * tm1 - tm2;
        dcur = 2.0 * tm1 + 2.0 * t * dm1 - dm2;
        tm2 = tm1;
        tm1 = cur;
        dm2 = dm1;
        dm1 = dcur;
    }
    return dcur;
}

// Squash that confines the chebyshev argument to (-1, 1).
inline double chebyshev_squash(double x) { return std::tanh(x); }
inline double chebyshev_squash_derivative(double x) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
}

// ---- scalar forward / derivatives ----

namespace detail {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * 0.70710678118654752440)); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) * 0.39894228040143267794; }

inline double poly_clamp(double x) { return std::min(POLY_CLAMP, std::max(-POLY_CLAMP, x)); }
inline double poly_clamp_derivative(double x) { return (x >= -POLY_CLAMP && x < POLY_CLAMP) ? 1.0 : 0.0; }

}  // namespace detail

inline double act_value(const ActivationSpec& s, double x) {
    switch (s.kind) {
        case ActKind::relu: return x > 0.0 ? x : 0.0;
        case ActKind::swish: return x * detail::sigmoid(x);
        case ActKind::gelu: return x * detail::norm_cdf(x);
        case ActKind::elu: return x >= 0.0 ? x : s.elu_alpha * (std::exp(x) - 1.0);
        case ActKind::leaky_relu: return x >= 0.0 ? x : s.leaky_slope * x;
        case ActKind::prelu: return x >= 0.0 ? x : s.params[0] * x;
        case ActKind::sine: return std::sin(x);
        case ActKind::chebyshev: return chebyshev_eval(s.degree, chebyshev_squash(x));
        case ActKind::learnable_poly: {
            const double u = detail::poly_clamp(x);
            double y = 0.0, p = 1.0;
            for (int i = 0; i <= s.degree; ++i) {
                y += s.params[static_cast<std::size_t>(i)] * p;
                p *= u;
            }
            return y;
        }
        case ActKind::neg_pos_poly: {
            const double u = detail::poly_clamp(x);
            const int off = x < 0.0 ? 1 : 1 + s.degree;
            double y = s.params[0], p = u;
            for (int i = 1; i <= s.degree; ++i) {
                y += s.params[static_cast<std::size_t>(off + i - 1)] * p;
                p *= u;
            }
            return y;
        }
    }
    throw std::logic_error("unreachable activation kind");
}

inline double act_derivative(const ActivationSpec& s, double x) {
    switch (s.kind) {
        case ActKind::relu: return x >= 0.0 ? 1.0 : 0.0;
        case ActKind::swish: {
            const double sg = detail::sigmoid(x);
            return sg + x * sg * (1.0 - sg);
        }
        case ActKind::gelu: return detail::norm_cdf(x) + x * detail::norm_pdf(x);
        case ActKind::elu: return x >= 0.0 ? 1.0 : s.elu_alpha * std::exp(x);
        case ActKind::leaky_relu: return x >= 0.0 ? 1.0 : s.leaky_slope;
        case ActKind::prelu: return x >= 0.0 ? 1.0 : s.params[0];
        case ActKind::sine: return std::cos(x);
        case ActKind::chebyshev:
            return chebyshev_derivative(s.degree, chebyshev_squash(x)) *
                   chebyshev_squash_derivative(x);
        case ActKind::learnable_poly: {
            const double u = detail::poly_clamp(x);
            double d = 0.0, p = 1.0;
            for (int i = 1; i <= s.degree; ++i) {
                d += static_cast<double>(i) * s.params[static_cast<std::size_t>(i)] * p;
                p *= u;
            }
            return d * detail::poly_clamp_derivative(x);
        }
        case ActKind::neg_pos_poly: {
            const double u = detail::poly_clamp(x);
            const int off = x < 0.0 ? 1 : 1 + s.degree;
            double d = 0.0, p = 1.0;
            for (int i = 1; i <= s.degree; ++i) {
                d += static_cast<double>(i) * s.params[static_cast<std::size_t>(off + i - 1)] * p;
                p *= u;
            }
            return d * detail::poly_clamp_derivative(x);
        }
    }
    throw std::logic_error("unreachable activation kind");
}

// dy/dc_j at a single input, one entry per learnable parameter.
inline void act_param_derivatives(const ActivationSpec& s, double x, double* out) {
    switch (s.kind) {
        case ActKind::prelu:
            out[0] = std::min(x, 0.0);
            return;
        case ActKind::learnable_poly: {
            const double u = detail::poly_clamp(x);
            double p = 1.0;
            for (int i = 0; i <= s.degree; ++i) {
                out[i] = p;
                p *= u;
            }
            return;
        }
        case ActKind::neg_pos_poly: {
            const double u = detail::poly_clamp(x);
            out[0] = 1.0;  // shared constant term
            const bool neg = x < 0.0;
            double p = u;
            for (int i = 1; i <= s.degree; ++i) {
                out[i] = neg ? p : 0.0;
                out[s.degree + i] = neg ? 0.0 : p;
                p *= u;
            }
            return;
        }
        default:
            throw std::invalid_argument("activation kind has no learnable parameters");
    }
}

// ---- tensor-level API ----

inline Tensor act_forward(const ActivationSpec& spec, const Tensor& x) {
    spec.validate();
    Tensor out = x;
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = act_value(spec, x[i]);
    return out;
}

inline Tensor act_grad_input(const ActivationSpec& spec, const Tensor& x) {
    spec.validate();
    Tensor out = x;
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = act_derivative(spec, x[i]);
    return out;
}

// One tensor of dy/dc_j per learnable parameter, each shaped like x.
inline std::vector<Tensor> act_grad_params(const ActivationSpec& spec, const Tensor& x) {
    spec.validate();
    if (!spec.has_learnable())
        throw std::invalid_argument("act_grad_params on activation kind without learnable params");
    const auto np = static_cast<std::size_t>(spec.param_count());
    std::vector<Tensor> out(np, Tensor::zeros_like(x));
    std::vector<double> buf(np);
    for (std::int64_t i = 0; i < x.size(); ++i) {
        act_param_derivatives(spec, x[i], buf.data());
        for (std::size_t j = 0; j < np; ++j) out[j][i] = buf[j];
    }
    return out;
}

// prelu starts at slope 0.25; polynomials start at the identity polynomial
// perturbed by uniform noise in [-noise, noise]. Deterministic given seed.
inline std::vector<double> init_params(ActKind kind, int degree, std::uint64_t seed,
                                       double noise = 0.01) {
    if (!kind_has_learnable(kind))
        throw std::invalid_argument("init_params on activation kind without learnable params");
    if (kind == ActKind::prelu) return {0.25};
    Rng rng(seed);
    std::vector<double> p(static_cast<std::size_t>(learnable_param_count(kind, degree)), 0.0);
    if (kind == ActKind::learnable_poly) {
        p[1] = 1.0;
    } else {
        p[1] = 1.0;                                  // negative-branch linear term
        p[static_cast<std::size_t>(1 + degree)] = 1.0;  // positive-branch linear term
    }
    for (auto& v : p) v += rng.uniform(-noise, noise);
    return p;
}

// ---- config-file spellings ----

inline ActivationSpec activation_from_name(const std::string& name, std::uint64_t seed = 0,
                                           double init_noise = 0.01) {
    ActivationSpec s;
    if (name == "relu") s.kind = ActKind::relu;
    else if (name == "swish") s.kind = ActKind::swish;
    else if (name == "gelu") s.kind = ActKind::gelu;
    else if (name == "elu") s.kind = ActKind::elu;
    else if (name == "leaky_relu") s.kind = ActKind::leaky_relu;
    else if (name == "prelu") s.kind = ActKind::prelu;
    else if (name == "sine") s.kind = ActKind::sine;
    else if (name == "chebyshev2") { s.kind = ActKind::chebyshev; s.degree = 2; }
    else if (name == "chebyshev3") { s.kind = ActKind::chebyshev; s.degree = 3; }
    else if (name == "poly2") { s.kind = ActKind::learnable_poly; s.degree = 2; }
    else if (name == "poly3") { s.kind = ActKind::learnable_poly; s.degree = 3; }
    else if (name == "neg_pos_poly") { s.kind = ActKind::neg_pos_poly; s.degree = 3; }
    else throw std::invalid_argument("unknown activation name: " + name);
    if (s.has_learnable()) s.params = init_params(s.kind, s.degree, seed, init_noise);
    s.validate();
    return s;
}

inline std::string activation_name(const ActivationSpec& s) {
    switch (s.kind) {
        case ActKind::relu: return "relu";
        case ActKind::swish: return "swish";
        case ActKind::gelu: return "gelu";
        case ActKind::elu: return "elu";
        case ActKind::leaky_relu: return "leaky_relu";
        case ActKind::prelu: return "prelu";
        case ActKind::sine: return "sine";
        case ActKind::chebyshev: return "chebyshev" + std::to_string(s.degree);
        case ActKind::learnable_poly: return "poly" + std::to_string(s.degree);
        case ActKind::neg_pos_poly: return "neg_pos_poly";
    }
    throw std::logic_error("unreachable activation kind");
}

inline const std::vector<std::string>& activation_names() {
    static const std::vector<std::string> names = {
        "relu", "swish", "gelu", "elu", "leaky_relu", "prelu",
        "sine", "chebyshev2", "chebyshev3", "poly2", "poly3", "neg_pos_poly",
    };
    return names;
}

}  // namespace eegdec
