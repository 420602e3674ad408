#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>

#include "csr/tensor.hpp"

namespace csr {

// Reverse-mode tape. Leaves and op outputs live in slots addressed by integer
// ids; recorded nodes are replayed in strict reverse order by backward().
// Single-threaded by construction.
template <class S>
class TapeT {
public:
    using Tensor = TensorT<S>;

    struct GradientMap {
        std::unordered_map<int, Tensor> grads;
        const Tensor& at(int id) const { return grads.at(id); }
        bool contains(int id) const { return grads.count(id) != 0; }
    };

    int leaf(Tensor value, bool requires_grad = false) {
        return push(std::move(value), requires_grad);
    }

    int constant(Tensor value) { return push(std::move(value), false); }

    const Tensor& value(int id) const { return slots_.at(static_cast<size_t>(id)).value; }
    bool requires_grad(int id) const { return slots_.at(static_cast<size_t>(id)).requires_grad; }
    size_t num_nodes() const { return nodes_.size(); }

    // ---- elementwise / structural ops -------------------------------------

    int add(int a, int b) {
        check_same("add", a, b);
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
        int id = push(std::move(out), requires_grad(a) || requires_grad(b));
        record(id, [a, b, id](TapeT& t) {
            t.accumulate(a, t.grad(id));
            t.accumulate(b, t.grad(id));
        });
        return id;
    }

    int subtract(int a, int b) {
        check_same("subtract", a, b);
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
        int id = push(std::move(out), requires_grad(a) || requires_grad(b));
        record(id, [a, b, id](TapeT& t) {
            t.accumulate(a, t.grad(id));
            Tensor neg = t.grad(id);
            for (auto& v : neg.data) v = -v;
            t.accumulate(b, neg);
        });
        return id;
    }

    int scale(int a, S factor) {
        Tensor out = value(a);
        for (auto& v : out.data) v *= factor;
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id, factor](TapeT& t) {
            Tensor g = t.grad(id);
            for (auto& v : g.data) v *= factor;
            t.accumulate(a, g);
        });
        return id;
    }

    int multiply(int a, int b) {
        check_same("elementwise-multiply", a, b);
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
        int id = push(std::move(out), requires_grad(a) || requires_grad(b));
        record(id, [a, b, id](TapeT& t) {
            const Tensor& g = t.grad(id);
            if (t.requires_grad(a)) {
                Tensor ga = g;
                const Tensor& vb2 = t.value(b);
                for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= vb2.data[i];
                t.accumulate(a, ga);
            }
            if (t.requires_grad(b)) {
                Tensor gb = g;
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] *= va.data[i];
                t.accumulate(b, gb);
            }
        });
        return id;
    }

    int matmul(int a, int b) {
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        if (va.rank() != 2 || vb.rank() != 2 || va.shape[1] != vb.shape[0])
            shape_error("matmul", va, vb);
        const int n = va.shape[0], k = va.shape[1], m = vb.shape[1];
        Tensor out({n, m});
        mm_nt(va.data.data(), vb.data.data(), out.data.data(), n, k, m);
        int id = push(std::move(out), requires_grad(a) || requires_grad(b));
        record(id, [a, b, id, n, k, m](TapeT& t) {
            const Tensor& g = t.grad(id);
            if (t.requires_grad(a)) {
                // dA = G * B^T
                Tensor ga({n, k});
                const Tensor& vb2 = t.value(b);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) {
                        S gij = g.data[size_t(i) * m + j];
                        if (gij == S(0)) continue;
                        const S* brow = vb2.data.data() + size_t(j);
                        S* arow = ga.data.data() + size_t(i) * k;
                        for (int p = 0; p < k; ++p) arow[p] += gij * brow[size_t(p) * m];
                    }
                t.accumulate(a, ga);
            }
            if (t.requires_grad(b)) {
                // dB = A^T * G
                Tensor gb({k, m});
                const Tensor& va2 = t.value(a);
                for (int i = 0; i < n; ++i) {
                    const S* arow = va2.data.data() + size_t(i) * k;
                    const S* grow = g.data.data() + size_t(i) * m;
                    for (int p = 0; p < k; ++p) {
                        S aip = arow[p];
                        if (aip == S(0)) continue;
                        S* brow = gb.data.data() + size_t(p) * m;
                        for (int j = 0; j < m; ++j) brow[j] += aip * grow[j];
                    }
                }
                t.accumulate(b, gb);
            }
        });
        return id;
    }

    int relu(int a) {
        Tensor out = value(a);
        for (auto& v : out.data) v = v > S(0) ? v : S(0);
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id](TapeT& t) {
            Tensor g = t.grad(id);
            const Tensor& va = t.value(a);
            for (size_t i = 0; i < g.data.size(); ++i)
                if (va.data[i] <= S(0)) g.data[i] = S(0);
            t.accumulate(a, g);
        });
        return id;
    }

    int reshape(int a, std::vector<int> new_shape) {
        const Tensor& va = value(a);
        if (Tensor::numel_of(new_shape) != va.numel())
            throw std::invalid_argument("reshape: element count mismatch, " +
                                        Tensor::shape_str(va.shape) + " -> " +
                                        Tensor::shape_str(new_shape));
        Tensor out(new_shape, va.data);
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id](TapeT& t) {
            Tensor g = t.grad(id);
            g.shape = t.value(a).shape;
            t.accumulate(a, g);
        });
        return id;
    }

    // Transpose by axis permutation: out axis i comes from input axis perm[i].
    int transpose(int a, std::vector<int> perm) {
        const Tensor& va = value(a);
        const int r = va.rank();
        if (static_cast<int>(perm.size()) != r)
            throw std::invalid_argument("transpose: permutation rank mismatch for shape " +
                                        Tensor::shape_str(va.shape));
        std::vector<int> out_shape(r);
        for (int i = 0; i < r; ++i) out_shape[i] = va.shape[perm[i]];
        Tensor out(out_shape);
        permute_copy(va, perm, out);
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id, perm](TapeT& t) {
            std::vector<int> inv(perm.size());
            for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
            Tensor g(t.value(a).shape);
            permute_copy(t.grad(id), inv, g);
            t.accumulate(a, g);
        });
        return id;
    }

    int reduce_sum(int a) {
        const Tensor& va = value(a);
        double acc = 0;
        for (S v : va.data) acc += double(v);
        Tensor out({1}, {static_cast<S>(acc)});
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id](TapeT& t) {
            S g = t.grad(id).data[0];
            Tensor ga(t.value(a).shape, g);
            t.accumulate(a, ga);
        });
        return id;
    }

    int reduce_mean(int a) {
        int64_t n = value(a).numel();
        return scale(reduce_sum(a), S(1) / static_cast<S>(n));
    }

    int l2_normalize(int a) {
        const Tensor& va = value(a);
        double nrm = l2_norm(va);
        if (nrm == 0) throw std::invalid_argument("l2-normalize: zero-norm input");
        Tensor out = va;
        for (auto& v : out.data) v = static_cast<S>(double(v) / nrm);
        int id = push(std::move(out), requires_grad(a));
        S inv = static_cast<S>(1.0 / nrm);
        record(id, [a, id, inv](TapeT& t) {
            // d(x/|x|) : g -> (g - y (y.g)) / |x|
            const Tensor& y = t.value(id);
            const Tensor& g = t.grad(id);
            double dotyg = 0;
            for (size_t i = 0; i < g.data.size(); ++i) dotyg += double(y.data[i]) * double(g.data[i]);
            Tensor ga = g;
            for (size_t i = 0; i < ga.data.size(); ++i)
                ga.data[i] = static_cast<S>((double(g.data[i]) - double(y.data[i]) * dotyg) * inv);
            t.accumulate(a, ga);
        });
        return id;
    }

    int dot(int a, int b) {
        check_same("dot", a, b);
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        double acc = 0;
        for (size_t i = 0; i < va.data.size(); ++i) acc += double(va.data[i]) * double(vb.data[i]);
        Tensor out({1}, {static_cast<S>(acc)});
        int id = push(std::move(out), requires_grad(a) || requires_grad(b));
        record(id, [a, b, id](TapeT& t) {
            S g = t.grad(id).data[0];
            if (t.requires_grad(a)) {
                Tensor ga = t.value(b);
                for (auto& v : ga.data) v *= g;
                t.accumulate(a, ga);
            }
            if (t.requires_grad(b)) {
                Tensor gb = t.value(a);
                for (auto& v : gb.data) v *= g;
                t.accumulate(b, gb);
            }
        });
        return id;
    }

    // Strict-interior convention: gradient passes only where lo < x < hi.
    int clamp(int a, S lo, S hi) {
        Tensor out = value(a);
        for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id, lo, hi](TapeT& t) {
            Tensor g = t.grad(id);
            const Tensor& va = t.value(a);
            for (size_t i = 0; i < g.data.size(); ++i)
                if (!(va.data[i] > lo && va.data[i] < hi)) g.data[i] = S(0);
            t.accumulate(a, g);
        });
        return id;
    }

    int exp_(int a) {
        Tensor out = value(a);
        for (auto& v : out.data) v = std::exp(v);
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id](TapeT& t) {
            Tensor g = t.grad(id);
            const Tensor& y = t.value(id);
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] *= y.data[i];
            t.accumulate(a, g);
        });
        return id;
    }

    int log_(int a) {
        Tensor out = value(a);
        for (auto& v : out.data) {
            if (v <= S(0)) throw std::invalid_argument("log: non-positive input");
            v = std::log(v);
        }
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id](TapeT& t) {
            Tensor g = t.grad(id);
            const Tensor& va = t.value(a);
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] /= va.data[i];
            t.accumulate(a, g);
        });
        return id;
    }

    int reciprocal(int a) {
        Tensor out = value(a);
        for (auto& v : out.data) {
            if (v == S(0)) throw std::invalid_argument("reciprocal: zero input");
            v = S(1) / v;
        }
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id](TapeT& t) {
            Tensor g = t.grad(id);
            const Tensor& y = t.value(id);
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] *= -y.data[i] * y.data[i];
            t.accumulate(a, g);
        });
        return id;
    }

    // Generic recorded linear map with a self-adjoint realization, used by the
    // spectral filters (F^H M F with a real mask is Hermitian).
    int self_adjoint_linear(int a, std::function<Tensor(const Tensor&)> apply) {
        Tensor out = apply(value(a));
        if (out.shape != value(a).shape)
            throw std::invalid_argument("self_adjoint_linear: shape-changing map");
        int id = push(std::move(out), requires_grad(a));
        record(id, [a, id, apply](TapeT& t) { t.accumulate(a, apply(t.grad(id))); });
        return id;
    }

    // ---- backward ----------------------------------------------------------

    GradientMap backward(int output) {
        if (output < 0 || static_cast<size_t>(output) >= slots_.size())
            throw std::invalid_argument("backward: output id not on tape");
        if (value(output).numel() != 1)
            throw std::invalid_argument("backward: output is not a scalar, shape " +
                                        Tensor::shape_str(value(output).shape));
        for (auto& s : slots_) s.grad.assign(s.value.data.size(), S(0));
        slots_[static_cast<size_t>(output)].grad.assign(1, S(1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (slots_[static_cast<size_t>(it->out)].requires_grad) it->adjoint(*this);
        GradientMap gm;
        for (size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i].requires_grad && slots_[i].is_leaf)
                gm.grads.emplace(static_cast<int>(i), Tensor(slots_[i].value.shape, slots_[i].grad));
        return gm;
    }

    Tensor grad(int id) const {
        const Slot& s = slots_.at(static_cast<size_t>(id));
        return Tensor(s.value.shape, s.grad);
    }

private:
    struct Slot {
        Tensor value;
        std::vector<S> grad;
        bool requires_grad = false;
        bool is_leaf = false;
    };
    struct Node {
        int out;
        std::function<void(TapeT&)> adjoint;
    };

    std::vector<Slot> slots_;
    std::vector<Node> nodes_;

    int push(Tensor v, bool requires_grad) {
        Slot s;
        s.value = std::move(v);
        s.requires_grad = requires_grad;
        s.is_leaf = true;  // cleared by record() for op outputs
        slots_.push_back(std::move(s));
        return static_cast<int>(slots_.size()) - 1;
    }

    void record(int out, std::function<void(TapeT&)> adjoint) {
        slots_[static_cast<size_t>(out)].is_leaf = false;
        nodes_.push_back(Node{out, std::move(adjoint)});
    }

    void accumulate(int id, const Tensor& g) {
        Slot& s = slots_.at(static_cast<size_t>(id));
        if (!s.requires_grad) return;
        for (size_t i = 0; i < s.grad.size(); ++i) s.grad[i] += g.data[i];
    }

    void check_same(const char* op, int a, int b) const {
        if (!value(a).same_shape(value(b))) shape_error(op, value(a), value(b));
    }

    [[noreturn]] static void shape_error(const char* op, const Tensor& a, const Tensor& b) {
        throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                    Tensor::shape_str(a.shape) + " and " +
                                    Tensor::shape_str(b.shape));
    }

    static void mm_nt(const S* a, const S* b, S* c, int n, int k, int m) {
        for (int i = 0; i < n; ++i) {
            const S* arow = a + size_t(i) * k;
            S* crow = c + size_t(i) * m;
            for (int p = 0; p < k; ++p) {
                S aip = arow[p];
                if (aip == S(0)) continue;
                const S* brow = b + size_t(p) * m;
                for (int j = 0; j < m; ++j) crow[j] += aip * brow[j];
            }
        }
    }

    static void permute_copy(const Tensor& in, const std::vector<int>& perm, Tensor& out) {
        const int r = in.rank();
        std::vector<int64_t> in_strides(r, 1);
        for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in.shape[i + 1];
        std::vector<int64_t> walk(r);  // stride in input per output axis
        for (int i = 0; i < r; ++i) walk[i] = in_strides[perm[i]];
        std::vector<int> idx(r, 0);
        const int64_t n = in.numel();
        int64_t src = 0;
        for (int64_t flat = 0; flat < n; ++flat) {
            out.data[static_cast<size_t>(flat)] = in.data[static_cast<size_t>(src)];
            for (int ax = r - 1; ax >= 0; --ax) {
                src += walk[ax];
                if (++idx[ax] < out.shape[ax]) break;
                src -= walk[ax] * out.shape[ax];
                idx[ax] = 0;
            }
        }
    }
};

using Tape = TapeT<float>;

}  // namespace csr
