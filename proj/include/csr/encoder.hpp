#pragma once

#include <fstream>
#include <map>

#include "csr/dataset.hpp"
#include "csr/hash.hpp"
#include "csr/rng.hpp"
#include "csr/spectral.hpp"
#include "csr/tape.hpp"

namespace csr {

// Patch encoder: patchify -> linear embed -> fixed sinusoidal positions ->
// two residual two-layer relu blocks -> mean pool -> project -> l2-normalize.
// Class anchors are a learned K x d table; classification is temperature-
// scaled softmax over cosine similarities.

struct EncoderDims {
    int size = 64;
    int channels = 3;
    int patch = 8;
    int hidden = 128;
    int mid = 256;
    int embed = 64;
    int classes = 6;

    int patches_per_side() const { return size / patch; }
    int num_patches() const { return patches_per_side() * patches_per_side(); }
    int patch_dim() const { return patch * patch * channels; }

    uint64_t arch_hash() const {
        int v[7] = {size, channels, patch, hidden, mid, embed, classes};
        return fnv1a(v, sizeof(v));
    }
};

template <class S>
struct EncoderParamsT {
    TensorT<S> patch_proj;            // (patch_dim, hidden)
    TensorT<S> pos;                   // (num_patches, hidden), fixed sinusoidal
    TensorT<S> w1[2], b1[2];          // (hidden, mid), (1, mid)
    TensorT<S> w2[2], b2[2];          // (mid, hidden), (1, hidden)
    TensorT<S> out_proj;              // (hidden, embed)

    std::vector<TensorT<S>*> trainable() {
        return {&patch_proj, &w1[0], &b1[0], &w2[0], &b2[0],
                &w1[1], &b1[1], &w2[1], &b2[1], &out_proj};
    }
    std::vector<const TensorT<S>*> trainable() const {
        return {&patch_proj, &w1[0], &b1[0], &w2[0], &b2[0],
                &w1[1], &b1[1], &w2[1], &b2[1], &out_proj};
    }
};

template <class S>
struct ModelT {
    EncoderDims dims;
    EncoderParamsT<S> params;
    TensorT<S> anchors;  // (classes, embed), rows unit-norm
    S tau = S(10);

    // instrumentation for the efficiency contracts; meaningful single-threaded
    mutable uint64_t forward_count = 0;
    mutable uint64_t backward_count = 0;
    void reset_counters() const { forward_count = backward_count = 0; }

    template <class T>
    ModelT<T> cast() const {
        ModelT<T> m;
        m.dims = dims;
        m.params.patch_proj = params.patch_proj.template cast<T>();
        m.params.pos = params.pos.template cast<T>();
        for (int b = 0; b < 2; ++b) {
            m.params.w1[b] = params.w1[b].template cast<T>();
            m.params.b1[b] = params.b1[b].template cast<T>();
            m.params.w2[b] = params.w2[b].template cast<T>();
            m.params.b2[b] = params.b2[b].template cast<T>();
        }
        m.params.out_proj = params.out_proj.template cast<T>();
        m.anchors = anchors.template cast<T>();
        m.tau = static_cast<T>(tau);
        return m;
    }
};

using Model = ModelT<float>;

template <class S>
TensorT<S> sinusoidal_positions(int num_patches, int hidden) {
    TensorT<S> pos({num_patches, hidden});
    for (int p = 0; p < num_patches; ++p)
        for (int i = 0; i < hidden; ++i) {
            double rate = std::pow(10000.0, -double(i / 2 * 2) / hidden);
            double angle = p * rate;
            pos.data[static_cast<size_t>(p) * hidden + i] =
                static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    return pos;
}

template <class S>
ModelT<S> init_model(const EncoderDims& dims, uint64_t seed) {
    if (dims.size % dims.patch != 0)
        throw std::invalid_argument("init_model: image size not divisible by patch size");
    ModelT<S> m;
    m.dims = dims;
    Rng rng(seed);
    auto init = [&](TensorT<S>& t, std::vector<int> shape) {
        t = TensorT<S>(std::move(shape));
        double stddev = std::sqrt(2.0 / t.shape[0]);
        rng.fill_normal(t, stddev);
    };
    init(m.params.patch_proj, {dims.patch_dim(), dims.hidden});
    m.params.pos = sinusoidal_positions<S>(dims.num_patches(), dims.hidden);
    for (int b = 0; b < 2; ++b) {
        init(m.params.w1[b], {dims.hidden, dims.mid});
        m.params.b1[b] = TensorT<S>({1, dims.mid});
        init(m.params.w2[b], {dims.mid, dims.hidden});
        m.params.b2[b] = TensorT<S>({1, dims.hidden});
    }
    init(m.params.out_proj, {dims.hidden, dims.embed});
    m.anchors = TensorT<S>({dims.classes, dims.embed});
    rng.fill_normal(m.anchors, 1.0);
    renormalize_anchors(m.anchors);
    return m;
}

template <class S>
void renormalize_anchors(TensorT<S>& anchors) {
    const int k = anchors.shape[0], d = anchors.shape[1];
    for (int i = 0; i < k; ++i) {
        double nrm = 0;
        S* row = anchors.data.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) nrm += double(row[j]) * double(row[j]);
        nrm = std::sqrt(nrm);
        if (nrm == 0) throw std::runtime_error("renormalize_anchors: zero-norm anchor");
        for (int j = 0; j < d; ++j) row[j] = static_cast<S>(double(row[j]) / nrm);
    }
}

// ---- tape graph ------------------------------------------------------------

template <class S>
struct ParamIds {
    int patch_proj, pos, w1[2], b1[2], w2[2], b2[2], out_proj, anchors;
    std::vector<int> all() const {
        return {patch_proj, w1[0], b1[0], w2[0], b2[0],
                w1[1], b1[1], w2[1], b2[1], out_proj, anchors};
    }
};

template <class S>
ParamIds<S> register_params(TapeT<S>& tape, const ModelT<S>& m, bool requires_grad) {
    ParamIds<S> ids{};
    ids.patch_proj = tape.leaf(m.params.patch_proj, requires_grad);
    ids.pos = tape.constant(m.params.pos);
    for (int b = 0; b < 2; ++b) {
        ids.w1[b] = tape.leaf(m.params.w1[b], requires_grad);
        ids.b1[b] = tape.leaf(m.params.b1[b], requires_grad);
        ids.w2[b] = tape.leaf(m.params.w2[b], requires_grad);
        ids.b2[b] = tape.leaf(m.params.b2[b], requires_grad);
    }
    ids.out_proj = tape.leaf(m.params.out_proj, requires_grad);
    ids.anchors = tape.leaf(m.anchors, requires_grad);
    return ids;
}

// Builds the embedding subgraph; returns the unit-norm embedding id (shape (d)).
template <class S>
int build_encoder(TapeT<S>& tape, const ModelT<S>& m, const ParamIds<S>& p, int image_id) {
    const EncoderDims& d = m.dims;
    if (tape.value(image_id).shape != std::vector<int>{d.size, d.size, d.channels})
        throw std::invalid_argument("build_encoder: image shape mismatch, expected " +
                                    TensorT<S>::shape_str({d.size, d.size, d.channels}));
    const int ps = d.patches_per_side(), P = d.patch, C = d.channels;
    const int np = d.num_patches();
    // (H,W,C) -> (ps,P,ps,P,C) -> (ps,ps,P,P,C) -> (np, patch_dim)
    int x = tape.reshape(image_id, {ps, P, ps, P, C});
    x = tape.transpose(x, {0, 2, 1, 3, 4});
    x = tape.reshape(x, {np, d.patch_dim()});
    x = tape.add(tape.matmul(x, p.patch_proj), p.pos);

    int ones_col = tape.constant(TensorT<S>({np, 1}, S(1)));
    for (int b = 0; b < 2; ++b) {
        int h = tape.add(tape.matmul(x, p.w1[b]), tape.matmul(ones_col, p.b1[b]));
        h = tape.relu(h);
        int o = tape.add(tape.matmul(h, p.w2[b]), tape.matmul(ones_col, p.b2[b]));
        x = tape.add(x, o);
    }
    int pool_row = tape.constant(TensorT<S>({1, np}, S(1) / static_cast<S>(np)));
    int pooled = tape.matmul(pool_row, x);  // (1, hidden)
    int z = tape.matmul(pooled, p.out_proj);
    z = tape.reshape(z, {d.embed});
    z = tape.l2_normalize(z);
    m.forward_count++;
    return z;
}

// Cosine similarities to every anchor, shape (K).
template <class S>
int build_cosines(TapeT<S>& tape, const ModelT<S>& m, const ParamIds<S>& p, int z_id) {
    int zc = tape.reshape(z_id, {m.dims.embed, 1});
    int s = tape.matmul(p.anchors, zc);  // (K, 1)
    return tape.reshape(s, {m.dims.classes});
}

// Cross-entropy of temperature-scaled cosine softmax at `label`.
// The log-sum-exp shift is a detached constant, which leaves the gradient exact.
template <class S>
int build_cross_entropy(TapeT<S>& tape, const ModelT<S>& m, int cosines_id, int label) {
    const int k = m.dims.classes;
    if (label < 0 || label >= k) throw std::invalid_argument("build_cross_entropy: bad label");
    int logits = tape.scale(cosines_id, m.tau);
    S mx = *std::max_element(tape.value(logits).data.begin(), tape.value(logits).data.end());
    int shifted = tape.subtract(logits, tape.constant(TensorT<S>({k}, mx)));
    int lse = tape.log_(tape.reduce_sum(tape.exp_(shifted)));
    TensorT<S> onehot({k});
    onehot.data[static_cast<size_t>(label)] = S(1);
    int picked = tape.dot(shifted, tape.constant(onehot));
    return tape.subtract(lse, picked);
}

// ---- inference -------------------------------------------------------------

template <class S>
TensorT<S> encode(const ModelT<S>& m, const TensorT<S>& image) {
    TapeT<S> tape;
    int img = tape.constant(image);
    ParamIds<S> p = register_params(tape, m, false);
    int z = build_encoder(tape, m, p, img);
    return tape.value(z);
}

template <class S>
std::vector<double> zero_shot_probs(const TensorT<S>& z, const TensorT<S>& anchors, double tau) {
    const int k = anchors.shape[0], d = anchors.shape[1];
    std::vector<double> logits(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        double s = 0;
        for (int j = 0; j < d; ++j)
            s += double(z.data[static_cast<size_t>(j)]) *
                 double(anchors.data[static_cast<size_t>(i) * d + j]);
        logits[static_cast<size_t>(i)] = tau * s;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (auto& l : logits) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (auto& l : logits) l /= sum;
    return logits;
}

// argmax of zero_shot_probs; ties break to the lowest index
template <class S>
int classify(const TensorT<S>& z, const TensorT<S>& anchors, double tau) {
    std::vector<double> p = zero_shot_probs(z, anchors, tau);
    int best = 0;
    for (int i = 1; i < static_cast<int>(p.size()); ++i)
        if (p[static_cast<size_t>(i)] > p[static_cast<size_t>(best)]) best = i;
    return best;
}

template <class S>
int classify_image(const ModelT<S>& m, const TensorT<S>& image) {
    return classify(encode(m, image), m.anchors, double(m.tau));
}

// ---- training --------------------------------------------------------------

struct TrainConfig {
    int epochs = 30;
    int batch = 32;
    double lr = 0.05;
    double momentum = 0.9;
    uint64_t seed = 1;
    double holdout_fraction = 0.0;  // carved from the tail when > 0
};

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;
    double final_train_accuracy = 0;
    double final_holdout_accuracy = 0;
};

template <class S>
double batch_accuracy(const ModelT<S>& m, const Dataset& ds, size_t begin, size_t end) {
    int correct = 0;
    for (size_t i = begin; i < end; ++i) {
        TensorT<S> img = ds.images[i].template cast<S>();
        if (classify_image(m, img) == ds.labels[i]) correct++;
    }
    return end > begin ? double(correct) / double(end - begin) : 0.0;
}

// Mini-batch SGD with momentum on cross-entropy; anchors renormalized after
// every update. Throws on non-finite loss, reporting the step index.
template <class S>
TrainReport train(ModelT<S>& m, const Dataset& ds, const TrainConfig& cfg) {
    if (ds.classes < 2) throw std::invalid_argument("train: need at least 2 classes");
    size_t n_total = ds.images.size();
    size_t n_hold = static_cast<size_t>(double(n_total) * cfg.holdout_fraction);
    size_t n_train = n_total - n_hold;

    std::vector<TensorT<S>*> slots;
    {
        auto tp = m.params.trainable();
        slots.assign(tp.begin(), tp.end());
        slots.push_back(&m.anchors);
    }
    std::vector<TensorT<S>> velocity;
    for (auto* t : slots) velocity.emplace_back(t->shape);

    TrainReport report;
    Rng shuffle_rng(cfg.seed);
    std::vector<size_t> order(n_train);
    for (size_t i = 0; i < n_train; ++i) order[i] = i;

    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0;
        int epoch_correct = 0;
        for (size_t start = 0; start < n_train; start += static_cast<size_t>(cfg.batch)) {
            size_t stop = std::min(n_train, start + static_cast<size_t>(cfg.batch));
            std::vector<TensorT<S>> grad_sum;
            for (auto* t : slots) grad_sum.emplace_back(t->shape);
            double batch_loss = 0;
            for (size_t bi = start; bi < stop; ++bi) {
                size_t i = order[bi];
                TapeT<S> tape;
                int img = tape.constant(ds.images[i].template cast<S>());
                ParamIds<S> p = register_params(tape, m, true);
                int z = build_encoder(tape, m, p, img);
                int cos = build_cosines(tape, m, p, z);
                int loss = build_cross_entropy(tape, m, cos, ds.labels[i]);
                double lval = double(tape.value(loss).data[0]);
                if (!std::isfinite(lval))
                    throw std::runtime_error("train: non-finite loss at step " +
                                             std::to_string(step));
                batch_loss += lval;
                {
                    const auto& sv = tape.value(cos);
                    int pred = static_cast<int>(std::max_element(sv.data.begin(), sv.data.end()) -
                                                sv.data.begin());
                    if (pred == ds.labels[i]) epoch_correct++;
                }
                auto gm = tape.backward(loss);
                m.backward_count++;
                std::vector<int> ids = p.all();
                for (size_t s = 0; s < ids.size(); ++s) {
                    const auto& g = gm.at(ids[s]);
                    for (size_t j = 0; j < g.data.size(); ++j) grad_sum[s].data[j] += g.data[j];
                }
                step++;
            }
            double inv = 1.0 / double(stop - start);
            for (size_t s = 0; s < slots.size(); ++s) {
                for (size_t j = 0; j < slots[s]->data.size(); ++j) {
                    double v = cfg.momentum * double(velocity[s].data[j]) -
                               cfg.lr * double(grad_sum[s].data[j]) * inv;
                    velocity[s].data[j] = static_cast<S>(v);
                    slots[s]->data[j] = static_cast<S>(double(slots[s]->data[j]) + v);
                }
            }
            renormalize_anchors(m.anchors);
            epoch_loss += batch_loss;
        }
        report.epoch_loss.push_back(epoch_loss / double(n_train));
        report.epoch_accuracy.push_back(double(epoch_correct) / double(n_train));
    }
    report.final_train_accuracy = batch_accuracy(m, ds, 0, n_train);
    if (n_hold > 0) report.final_holdout_accuracy = batch_accuracy(m, ds, n_train, n_total);
    return report;
}

// ---- loss surfaces for the attack/defense stack ----------------------------

enum class LossKind {
    Constant,
    CeUntargeted,
    CeTargeted,
    DlrTargeted,
    CrossModal,
    LabelFree,
    Rectification,
    FeatureDrift,       // 1 - cos(z, ref_a)
    SpectralSim         // 0.5 * || f(x) - f(G_r x) ||^2, both branches on tape
};

template <class S>
struct LossSpec {
    LossKind kind = LossKind::CeUntargeted;
    int label = -1;
    int target = -1;
    TensorT<S> ref_a;   // anchor_y / z_orig / z_tgt depending on kind
    TensorT<S> ref_b;   // z_adv for rectification
    double lambda = 1.0;
    double radius = 0.0;  // SpectralSim filter radius
};

// Single forward+backward; parameters receive no gradient.
template <class S>
std::pair<double, TensorT<S>> loss_and_input_grad(const ModelT<S>& m, const TensorT<S>& image,
                                                  const LossSpec<S>& spec) {
    if (spec.kind == LossKind::Constant)
        return {0.0, TensorT<S>(image.shape)};

    TapeT<S> tape;
    int img = tape.leaf(image, true);
    ParamIds<S> p = register_params(tape, m, false);

    int loss;
    if (spec.kind == LossKind::SpectralSim) {
        int low = tape_lowpass(tape, img, spec.radius);
        int z = build_encoder(tape, m, p, img);
        int zlow = build_encoder(tape, m, p, low);
        int diff = tape.subtract(z, zlow);
        loss = tape.scale(tape.dot(diff, diff), S(0.5));
    } else {
        int z = build_encoder(tape, m, p, img);
        switch (spec.kind) {
            case LossKind::CeUntargeted: {
                int cos = build_cosines(tape, m, p, z);
                loss = build_cross_entropy(tape, m, cos, spec.label);
                break;
            }
            case LossKind::CeTargeted: {
                int cos = build_cosines(tape, m, p, z);
                loss = build_cross_entropy(tape, m, cos, spec.target);
                break;
            }
            case LossKind::DlrTargeted: {
                int cos = build_cosines(tape, m, p, z);
                loss = build_dlr_targeted(tape, m, cos, spec.label, spec.target);
                break;
            }
            case LossKind::CrossModal:
                loss = tape.dot(z, tape.constant(spec.ref_a));
                break;
            case LossKind::LabelFree:
                loss = tape.dot(z, tape.constant(spec.ref_a));
                break;
            case LossKind::Rectification: {
                int attract = tape.dot(z, tape.constant(spec.ref_a));
                int repulse = tape.dot(z, tape.constant(spec.ref_b));
                loss = tape.subtract(attract, tape.scale(repulse, static_cast<S>(spec.lambda)));
                break;
            }
            case LossKind::FeatureDrift: {
                int cosv = tape.dot(z, tape.constant(spec.ref_a));
                loss = tape.subtract(tape.constant(TensorT<S>({1}, S(1))), cosv);
                break;
            }
            default:
                throw std::invalid_argument("loss_and_input_grad: unknown loss kind");
        }
    }
    double value = double(tape.value(loss).data[0]);
    auto gm = tape.backward(loss);
    m.backward_count++;
    return {value, gm.at(img)};
}

// Targeted DLR on cosine logits: -(s_y - s_t) / (s_p1 - (s_p3 + s_p4)/2).
template <class S>
int build_dlr_targeted(TapeT<S>& tape, const ModelT<S>& m, int cosines_id, int label, int target) {
    const int k = m.dims.classes;
    if (k < 4) throw std::invalid_argument("dlr-targeted: needs at least 4 classes");
    if (label < 0 || label >= k || target < 0 || target >= k)
        throw std::invalid_argument("dlr-targeted: bad label/target index");
    const auto& s = tape.value(cosines_id);
    std::vector<int> order(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return s.data[static_cast<size_t>(a)] > s.data[static_cast<size_t>(b)];
    });
    auto pick = [&](int idx) {
        TensorT<S> onehot({k});
        onehot.data[static_cast<size_t>(idx)] = S(1);
        return tape.dot(cosines_id, tape.constant(onehot));
    };
    int numer = tape.scale(tape.subtract(pick(label), pick(target)), S(-1));
    int denom = tape.subtract(pick(order[0]),
                              tape.scale(tape.add(pick(order[2]), pick(order[3])), S(0.5)));
    double dval = double(tape.value(denom).data[0]);
    if (std::abs(dval) < 1e-12) throw std::runtime_error("dlr-targeted: zero denominator");
    return tape.multiply(numer, tape.reciprocal(denom));
}

// ---- plain (non-tape) loss functions ---------------------------------------

inline double loss_ce_untargeted(const std::vector<double>& probs, int y) {
    return -std::log(probs.at(static_cast<size_t>(y)) + 1e-12);
}

inline double loss_ce_targeted(const std::vector<double>& probs, int y_target) {
    return -std::log(probs.at(static_cast<size_t>(y_target)) + 1e-12);
}

inline double loss_dlr_targeted(const std::vector<double>& logits, int y, int y_target) {
    const int k = static_cast<int>(logits.size());
    if (k < 4) throw std::invalid_argument("loss_dlr_targeted: needs at least 4 logits");
    std::vector<int> order(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return logits[size_t(a)] > logits[size_t(b)]; });
    double denom = logits[size_t(order[0])] -
                   0.5 * (logits[size_t(order[2])] + logits[size_t(order[3])]);
    if (std::abs(denom) < 1e-12) throw std::runtime_error("loss_dlr_targeted: zero denominator");
    return -(logits[size_t(y)] - logits[size_t(y_target)]) / denom;
}

template <class S>
double loss_cross_modal(const TensorT<S>& z, const TensorT<S>& anchor_y) {
    double acc = 0;
    for (size_t i = 0; i < z.data.size(); ++i) acc += double(z.data[i]) * double(anchor_y.data[i]);
    return acc;
}

template <class S>
double loss_label_free(const TensorT<S>& z, const TensorT<S>& z_orig) {
    return loss_cross_modal(z, z_orig);
}

template <class S>
double cosine(const TensorT<S>& a, const TensorT<S>& b) {
    double num = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        num += double(a.data[i]) * double(b.data[i]);
        na += double(a.data[i]) * double(a.data[i]);
        nb += double(b.data[i]) * double(b.data[i]);
    }
    if (na == 0 || nb == 0) throw std::invalid_argument("cosine: zero-norm input");
    return num / (std::sqrt(na) * std::sqrt(nb));
}

// ---- checkpoint persistence ------------------------------------------------

// Textual manifest (key: value lines, blank line terminated), then
// length-prefixed little-endian float32 blobs in declaration order.
template <class S>
void save_checkpoint(const ModelT<S>& m, const std::string& path,
                     const std::map<std::string, std::string>& extra = {}) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f << "format: csr-checkpoint-v1\n";
    f << "size: " << m.dims.size << "\nchannels: " << m.dims.channels
      << "\npatch: " << m.dims.patch << "\nhidden: " << m.dims.hidden
      << "\nmid: " << m.dims.mid << "\nembed: " << m.dims.embed
      << "\nclasses: " << m.dims.classes << "\ntau: " << double(m.tau)
      << "\narch_hash: " << hex64(m.dims.arch_hash()) << "\n";
    for (const auto& [k, v] : extra) f << k << ": " << v << "\n";
    f << "\n";
    auto blob = [&](const TensorT<S>& t) {
        auto ft = t.template cast<float>();
        uint32_t n = static_cast<uint32_t>(ft.data.size());
        f.write(reinterpret_cast<const char*>(&n), 4);
        f.write(reinterpret_cast<const char*>(ft.data.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
    };
    for (const auto* t : m.params.trainable()) blob(*t);
    blob(m.anchors);
}

template <class S = float>
ModelT<S> load_checkpoint(const std::string& path,
                          std::map<std::string, std::string>* manifest_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::map<std::string, std::string> manifest;
    std::string line;
    while (std::getline(f, line) && !line.empty()) {
        auto colon = line.find(": ");
        if (colon == std::string::npos)
            throw std::runtime_error("load_checkpoint: malformed manifest line: " + line);
        manifest[line.substr(0, colon)] = line.substr(colon + 2);
    }
    if (manifest["format"] != "csr-checkpoint-v1")
        throw std::runtime_error("load_checkpoint: unknown format in " + path);
    EncoderDims dims;
    dims.size = std::stoi(manifest.at("size"));
    dims.channels = std::stoi(manifest.at("channels"));
    dims.patch = std::stoi(manifest.at("patch"));
    dims.hidden = std::stoi(manifest.at("hidden"));
    dims.mid = std::stoi(manifest.at("mid"));
    dims.embed = std::stoi(manifest.at("embed"));
    dims.classes = std::stoi(manifest.at("classes"));
    if (hex64(dims.arch_hash()) != manifest.at("arch_hash"))
        throw std::runtime_error("load_checkpoint: architecture hash mismatch");
    ModelT<S> m = init_model<S>(dims, 0);
    m.tau = static_cast<S>(std::stod(manifest.at("tau")));
    auto blob = [&](TensorT<S>& t) {
        uint32_t n = 0;
        f.read(reinterpret_cast<char*>(&n), 4);
        if (!f || n != t.data.size())
            throw std::runtime_error("load_checkpoint: parameter blob size mismatch");
        std::vector<float> buf(n);
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (!f) throw std::runtime_error("load_checkpoint: truncated parameter blob");
        for (size_t i = 0; i < buf.size(); ++i) t.data[i] = static_cast<S>(buf[i]);
    };
    for (auto* t : m.params.trainable()) blob(*t);
    blob(m.anchors);
    if (manifest_out) *manifest_out = manifest;
    return m;
}

}  // namespace csr
