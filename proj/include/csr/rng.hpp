#pragma once

#include <cstdint>
#include <random>

#include "csr/tensor.hpp"

namespace csr {

// Deterministic RNG wrapper. Distributions are hand-rolled from raw mt19937
// draws so that streams are identical across standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<std::mt19937::result_type>(seed)) {}

    // uniform in [0, 1)
    double uniform() { return gen_() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint32_t next_u32() { return gen_(); }

    // integer in [0, n)
    int uniform_int(int n) { return static_cast<int>(uniform() * n) % n; }

    // Box-Muller, one value per call (the pair's second half is discarded so
    // the stream stays insensitive to call grouping).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <class S>
    void fill_uniform(TensorT<S>& t, double lo, double hi) {
        for (auto& v : t.data) v = static_cast<S>(uniform(lo, hi));
    }

    template <class S>
    void fill_normal(TensorT<S>& t, double stddev) {
        for (auto& v : t.data) v = static_cast<S>(normal() * stddev);
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937 gen_;
};

}  // namespace csr
