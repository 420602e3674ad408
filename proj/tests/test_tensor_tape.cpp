#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csr/grad_check.hpp"
#include "csr/rng.hpp"
#include "csr/tape.hpp"

using namespace csr;

namespace {

TensorT<double> random_tensor(Rng& rng, std::vector<int> shape, double lo = -1, double hi = 1) {
    TensorT<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Reduces an arbitrary op output to a scalar via a fixed random weighting, so
// every op can be checked through the same scalar-loss interface.
double weighted(const TensorT<double>& t, const std::vector<double>& w) {
    double acc = 0;
    for (size_t i = 0; i < t.data.size(); ++i) acc += t.data[i] * w[i];
    return acc;
}

// Runs grad_check on loss(x) = sum_i w_i * op(x)_i for a unary tape op.
double check_unary(const std::function<int(TapeT<double>&, int)>& op, const TensorT<double>& x,
                   const std::vector<double>& w, double step = 1e-5) {
    auto loss = [&](const TensorT<double>& in) {
        TapeT<double> t;
        int out = op(t, t.leaf(in, false));
        return weighted(t.value(out), w);
    };
    auto grad = [&](const TensorT<double>& in) {
        TapeT<double> t;
        int xid = t.leaf(in, true);
        int out = op(t, xid);
        TensorT<double> wt(t.value(out).shape, w);
        int s = t.dot(out, t.constant(wt));
        return t.backward(s).at(xid);
    };
    return grad_check<double>(loss, grad, x, step);
}

}  // namespace

TEST_CASE("matmul identity returns the operand") {
    Rng rng(1);
    TapeT<double> t;
    TensorT<double> eye({2, 2}, {1, 0, 0, 1});
    TensorT<double> a = random_tensor(rng, {2, 2});
    int out = t.matmul(t.constant(eye), t.constant(a));
    for (size_t i = 0; i < 4; ++i) CHECK(t.value(out).data[i] == doctest::Approx(a.data[i]));
}

TEST_CASE("relu definition") {
    TapeT<double> t;
    int out = t.relu(t.constant(TensorT<double>({3}, {-1, 0, 2})));
    CHECK(t.value(out).data == std::vector<double>{0, 0, 2});
}

TEST_CASE("l2-normalize on a 3-4-5 triangle") {
    TapeT<double> t;
    int out = t.l2_normalize(t.constant(TensorT<double>({2}, {3, 4})));
    CHECK(t.value(out).data[0] == doctest::Approx(0.6));
    CHECK(t.value(out).data[1] == doctest::Approx(0.8));
}

TEST_CASE("l2-normalize rejects zero input") {
    TapeT<double> t;
    CHECK_THROWS_AS(t.l2_normalize(t.constant(TensorT<double>({2}, 0.0))),
                    std::invalid_argument);
}

TEST_CASE("shape mismatch raises a structured error") {
    TapeT<double> t;
    int a = t.constant(TensorT<double>({2, 2}, 1.0));
    int b = t.constant(TensorT<double>({3}, 1.0));
    CHECK_THROWS_WITH_AS(t.add(a, b), doctest::Contains("add"), std::invalid_argument);
    CHECK_THROWS_AS(t.matmul(a, b), std::invalid_argument);
}

TEST_CASE("gradient of sum is all ones") {
    Rng rng(2);
    TapeT<double> t;
    int x = t.leaf(random_tensor(rng, {3, 4}), true);
    auto gm = t.backward(t.reduce_sum(x));
    for (double v : gm.at(x).data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("gradient of dot(x, x) is 2x") {
    TapeT<double> t;
    int x = t.leaf(TensorT<double>({2}, {1, 2}), true);
    auto gm = t.backward(t.dot(x, x));
    CHECK(gm.at(x).data[0] == doctest::Approx(2.0));
    CHECK(gm.at(x).data[1] == doctest::Approx(4.0));
}

TEST_CASE("cosine against a fixed vector matches finite differences") {
    Rng rng(3);
    TensorT<double> c = random_tensor(rng, {16});
    auto cos_op = [&](TapeT<double>& t, int x) {
        return t.dot(t.l2_normalize(x), t.constant([&] {
            TensorT<double> cn = c;
            double n = l2_norm(cn);
            for (auto& v : cn.data) v /= n;
            return cn;
        }()));
    };
    for (int trial = 0; trial < 20; ++trial) {
        TensorT<double> x = random_tensor(rng, {16});
        std::vector<double> w{1.0};
        CHECK(check_unary(cos_op, x, w, 1e-3) < 1e-3);
    }
}

TEST_CASE("grad_check on sum of squares") {
    Rng rng(4);
    TensorT<double> x = random_tensor(rng, {8});
    auto loss = [](const TensorT<double>& in) {
        double acc = 0;
        for (double v : in.data) acc += v * v;
        return acc;
    };
    auto grad = [](const TensorT<double>& in) {
        TensorT<double> g = in;
        for (auto& v : g.data) v *= 2;
        return g;
    };
    CHECK(grad_check<double>(loss, grad, x, 1e-4) < 1e-4);
}

TEST_CASE("grad_check on a constant loss is exactly zero") {
    Rng rng(5);
    TensorT<double> x = random_tensor(rng, {8});
    auto loss = [](const TensorT<double>&) { return 3.5; };
    auto grad = [](const TensorT<double>& in) { return TensorT<double>(in.shape); };
    CHECK(grad_check<double>(loss, grad, x, 1e-4) == 0.0);
}

TEST_CASE("grad_check rejects a non-deterministic loss") {
    TensorT<double> x({4}, 0.5);
    int calls = 0;
    auto loss = [&](const TensorT<double>&) { return double(++calls); };
    auto grad = [](const TensorT<double>& in) { return TensorT<double>(in.shape); };
    CHECK_THROWS_AS(grad_check<double>(loss, grad, x, 1e-4), std::runtime_error);
}

TEST_CASE("randomized gradient checks for every op") {
    Rng rng(6);
    const int trials = 100;
    int done = 0;
    for (int trial = 0; trial < trials; ++trial) {
        TensorT<double> x = random_tensor(rng, {3, 4});
        TensorT<double> y = random_tensor(rng, {3, 4});
        TensorT<double> b = random_tensor(rng, {4, 5});
        // keep relu and clamp samples away from their kinks
        for (auto& v : x.data)
            if (std::abs(v) < 1e-2) v += v < 0 ? -1e-2 : 1e-2;
        std::vector<double> w12(12), w15(15), w1{1.0};
        for (auto& v : w12) v = rng.uniform(-1, 1);
        for (auto& v : w15) v = rng.uniform(-1, 1);

        auto with_y = [&](auto fn) {
            return [fn, &y](TapeT<double>& t, int a) { return fn(t, a, t.constant(y)); };
        };
        CHECK(check_unary(with_y([](TapeT<double>& t, int a, int c) { return t.add(a, c); }), x,
                          w12) < 1e-3);
        CHECK(check_unary(with_y([](TapeT<double>& t, int a, int c) { return t.subtract(a, c); }),
                          x, w12) < 1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.scale(a, 1.7); }, x, w12) < 1e-3);
        CHECK(check_unary(with_y([](TapeT<double>& t, int a, int c) { return t.multiply(a, c); }),
                          x, w12) < 1e-3);
        CHECK(check_unary([&](TapeT<double>& t, int a) { return t.matmul(a, t.constant(b)); }, x,
                          w15) < 1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.relu(a); }, x, w12) < 1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.reshape(a, {4, 3}); }, x, w12) <
              1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.transpose(a, {1, 0}); }, x,
                          w12) < 1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.reduce_sum(a); }, x, w1) < 1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.reduce_mean(a); }, x, w1) <
              1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.l2_normalize(a); }, x, w12) <
              1e-3);
        CHECK(check_unary(with_y([](TapeT<double>& t, int a, int c) { return t.dot(a, c); }), x,
                          w1) < 1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.clamp(a, -2.0, 2.0); }, x, w12) <
              1e-3);
        CHECK(check_unary([](TapeT<double>& t, int a) { return t.exp_(a); }, x, w12) < 1e-3);
        {
            TensorT<double> pos = random_tensor(rng, {3, 4}, 0.2, 2.0);
            CHECK(check_unary([](TapeT<double>& t, int a) { return t.log_(a); }, pos, w12) <
                  1e-3);
            CHECK(check_unary([](TapeT<double>& t, int a) { return t.reciprocal(a); }, pos,
                              w12) < 1e-3);
        }
        // self-adjoint map: multiplication by a fixed symmetric matrix
        {
            TensorT<double> sym({4, 4});
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j <= i; ++j) {
                    double v = rng.uniform(-1, 1);
                    sym.data[size_t(i) * 4 + j] = v;
                    sym.data[size_t(j) * 4 + i] = v;
                }
            auto apply = [sym](const TensorT<double>& in) {
                TensorT<double> out(in.shape);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 4; ++j)
                        for (int k = 0; k < 4; ++k)
                            out.data[size_t(i) * 4 + j] +=
                                sym.data[size_t(j) * 4 + k] * in.data[size_t(i) * 4 + k];
                return out;
            };
            CHECK(check_unary(
                      [&](TapeT<double>& t, int a) { return t.self_adjoint_linear(a, apply); },
                      x, w12) < 1e-3);
        }
        done++;
    }
    CHECK(done == trials);
}

TEST_CASE("clamp gradient is zero outside the strict interior") {
    TapeT<double> t;
    int x = t.leaf(TensorT<double>({4}, {-1.5, 0.0, 0.5, 1.0}), true);
    auto gm = t.backward(t.reduce_sum(t.clamp(x, 0.0, 1.0)));
    CHECK(gm.at(x).data == std::vector<double>{0, 0, 1, 0});
}

TEST_CASE("forward passes are bitwise deterministic") {
    Rng rng(7);
    TensorT<float> x(std::vector<int>{5, 5});
    for (auto& v : x.data) v = float(rng.uniform(-1, 1));
    auto run = [&] {
        TapeT<float> t;
        int out = t.l2_normalize(t.relu(t.matmul(t.constant(x), t.constant(x))));
        return t.value(out).data;
    };
    CHECK(run() == run());
}

TEST_CASE("backward on a fresh identical tape replays identically") {
    Rng rng(8);
    TensorT<float> x(std::vector<int>{6});
    for (auto& v : x.data) v = float(rng.uniform(-1, 1));
    auto run = [&] {
        TapeT<float> t;
        int xid = t.leaf(x, true);
        int out = t.dot(t.relu(xid), xid);
        return t.backward(out).at(xid).data;
    };
    CHECK(run() == run());
}

TEST_CASE("backward rejects non-scalar and off-tape outputs") {
    TapeT<double> t;
    int x = t.leaf(TensorT<double>({3}, 1.0), true);
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
    CHECK_THROWS_AS(t.backward(99), std::invalid_argument);
}

TEST_CASE("gradients accumulate across fan-out") {
    // y = sum(x) + sum(x) has gradient 2 everywhere
    TapeT<double> t;
    int x = t.leaf(TensorT<double>({3}, {1, 2, 3}), true);
    int s = t.add(t.reduce_sum(x), t.reduce_sum(x));
    auto gm = t.backward(s);
    for (double v : gm.at(x).data) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("constants receive no gradient entries") {
    TapeT<double> t;
    int x = t.leaf(TensorT<double>({3}, {1, 2, 3}), true);
    int c = t.constant(TensorT<double>({3}, {4, 5, 6}));
    auto gm = t.backward(t.dot(x, c));
    CHECK(gm.contains(x));
    CHECK_FALSE(gm.contains(c));
}
