#pragma once

#include <functional>

#include "csr/rng.hpp"
#include "csr/tape.hpp"

namespace csr {

// Central-difference gradient verification. loss_fn must be deterministic:
// it is called twice on the unperturbed input and the two values must agree
// bitwise. Returns the max relative error over `samples` coordinates drawn
// without replacement (all coordinates if samples >= numel).
//
//   rel = |analytic - central| / max(|analytic|, |central|, 1e-8)
template <class S>
double grad_check(const std::function<double(const TensorT<S>&)>& loss_fn,
                  const std::function<TensorT<S>(const TensorT<S>&)>& analytic_grad,
                  const TensorT<S>& input, double step, int samples = -1,
                  uint64_t sample_seed = 0) {
    if (step <= 0) throw std::invalid_argument("grad_check: step must be positive");
    double l0 = loss_fn(input);
    double l0b = loss_fn(input);
    if (l0 != l0b) throw std::runtime_error("grad_check: loss_fn is non-deterministic");

    TensorT<S> g = analytic_grad(input);
    const int64_t n = input.numel();
    std::vector<int64_t> coords(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    if (samples > 0 && samples < n) {
        Rng rng(sample_seed);
        rng.shuffle(coords);
        coords.resize(static_cast<size_t>(samples));
    }

    double worst = 0;
    TensorT<S> x = input;
    for (int64_t c : coords) {
        size_t i = static_cast<size_t>(c);
        S orig = x.data[i];
        x.data[i] = static_cast<S>(double(orig) + step);
        double lp = loss_fn(x);
        x.data[i] = static_cast<S>(double(orig) - step);
        double lm = loss_fn(x);
        x.data[i] = orig;
        double central = (lp - lm) / (2.0 * step);
        double analytic = static_cast<double>(g.data[i]);
        double denom = std::max({std::abs(analytic), std::abs(central), 1e-8});
        worst = std::max(worst, std::abs(analytic - central) / denom);
    }
    return worst;
}

}  // namespace csr
