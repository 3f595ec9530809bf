#pragma once
// Central-difference gradient verification. The analytic gradient may come
// from the tape or from a closed form; this header never depends on either,
// so it stays a valid independent oracle for both.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "eegdec/tensor.hpp"

namespace eegdec {

using ScalarFn = std::function<double(const Tensor&)>;

// Max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-8).
inline double finite_diff_check(const ScalarFn& f, const Tensor& analytic_grad, const Tensor& x,
                                double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be > 0");
    require_same_shape(analytic_grad, x, "finite_diff_check");
    if (!std::isfinite(f(x)))
        throw std::domain_error("finite_diff_check: function is not finite at x");
    double worst = 0.0;
    Tensor probe = x;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::domain_error("finite_diff_check: function is not finite near x");
        const double central = (fp - fm) / (2.0 * h);
        const double a = analytic_grad[i];
        const double rel = std::fabs(a - central) / (std::fabs(a) + std::fabs(central) + 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

inline double finite_diff_check(const ScalarFn& f, const std::function<Tensor(const Tensor&)>& grad,
                                const Tensor& x, double h) {
    return finite_diff_check(f, grad(x), x, h);
}

}  // namespace eegdec
