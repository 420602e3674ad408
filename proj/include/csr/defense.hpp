#pragma once

#include "csr/encoder.hpp"
#include "csr/spectral.hpp"

namespace csr {

enum class Ablation { Full, AttractionOnly, RepulsionOnly, NoGreedy };

struct DefenseConfig {
    double radius = 0;           // 0 -> default_radius(image side)
    double tau = 0.85;           // detection threshold on the consistency score
    double epsilon = 4.0 / 255.0;
    double alpha = 2.0 / 255.0;
    int steps = 3;
    double lambda = 1.0;
    Ablation ablation = Ablation::Full;

    // The reference radius 40 is tuned for 224-pixel inputs; keep the retained
    // spectrum fraction constant when the image side differs.
    static double default_radius(int side) { return 40.0 * side / 224.0; }

    double effective_radius(int side) const { return radius > 0 ? radius : default_radius(side); }

    void validate() const {
        if (!(tau > 0 && tau < 1)) throw std::invalid_argument("defense: require 0 < tau < 1");
        if (steps < 1) throw std::invalid_argument("defense: require steps >= 1");
        if (!(alpha > 0 && alpha <= epsilon))
            throw std::invalid_argument("defense: require 0 < alpha <= epsilon");
        if (lambda < 0) throw std::invalid_argument("defense: require lambda >= 0");
    }
};

struct GateDecision {
    double score = 0;  // C(x) in [-1, 1]
    bool is_adversarial = false;
};

template <class S>
struct RectificationTrace {
    std::vector<double> losses;  // L_rec per step, step 0 evaluated at delta = 0
    int best_step = 0;
    TensorT<S> rectified;
};

// C(x) = cos(f(x), f(G_r(x))); two forward passes, no gradients.
template <class S>
double spectral_consistency(const ModelT<S>& m, const TensorT<S>& image, double r) {
    TensorT<S> z = encode(m, image);
    TensorT<S> z_low = encode(m, apply_lowpass(image, r));
    return cosine(z, z_low);
}

// Boundary convention: a score exactly at tau is benign.
template <class S>
GateDecision detect(const ModelT<S>& m, const TensorT<S>& image, const DefenseConfig& cfg) {
    cfg.validate();
    GateDecision d;
    d.score = spectral_consistency(m, image, cfg.effective_radius(image.shape[0]));
    d.is_adversarial = d.score < cfg.tau;
    return d;
}

// L_rec = cos(z_cur, z_tgt) - lambda * cos(z_cur, z_adv)
template <class S>
double rectification_loss(const TensorT<S>& z_cur, const TensorT<S>& z_tgt,
                          const TensorT<S>& z_adv, double lambda) {
    return cosine(z_cur, z_tgt) - lambda * cosine(z_cur, z_adv);
}

// Few-step contrastive rectification given precomputed anchors. The loop
// performs exactly `steps` encoder forward+backward passes. The greedy best is
// evaluated before each gradient step, so delta = 0 is always a candidate.
template <class S>
std::pair<TensorT<S>, RectificationTrace<S>> rectify_from_anchors(const ModelT<S>& m,
                                                                  const TensorT<S>& image,
                                                                  const DefenseConfig& cfg,
                                                                  const TensorT<S>& z_adv,
                                                                  const TensorT<S>& z_tgt) {
    cfg.validate();
    LossSpec<S> spec;
    spec.kind = LossKind::Rectification;
    spec.lambda = cfg.ablation == Ablation::AttractionOnly ? 0.0 : cfg.lambda;
    spec.ref_a = cfg.ablation == Ablation::RepulsionOnly ? TensorT<S>(z_tgt.shape) : z_tgt;
    spec.ref_b = z_adv;

    TensorT<S> delta(image.shape);
    RectificationTrace<S> trace;
    double best_loss = -std::numeric_limits<double>::infinity();
    TensorT<S> best_image = image;
    TensorT<S> current = image;

    auto candidate = [&](const TensorT<S>& d) {
        TensorT<S> x = image;
        for (size_t i = 0; i < x.data.size(); ++i)
            x.data[i] = std::min(S(1), std::max(S(0), S(x.data[i] + d.data[i])));
        return x;
    };

    for (int t = 0; t < cfg.steps; ++t) {
        current = candidate(delta);
        auto [value, grad] = loss_and_input_grad(m, current, spec);
        trace.losses.push_back(value);
        if (value > best_loss) {
            best_loss = value;
            best_image = current;
            trace.best_step = t;
        }
        for (size_t i = 0; i < delta.data.size(); ++i) {
            double g = grad.data[i] > 0 ? 1.0 : (grad.data[i] < 0 ? -1.0 : 0.0);
            double nd = std::min(cfg.epsilon,
                                 std::max(-cfg.epsilon, double(delta.data[i]) + cfg.alpha * g));
            delta.data[i] = static_cast<S>(nd);
        }
    }

    trace.rectified = cfg.ablation == Ablation::NoGreedy ? current : best_image;
    if (cfg.ablation == Ablation::NoGreedy)
        trace.best_step = cfg.steps - 1;
    return {trace.rectified, trace};
}

// Standalone rectification: computes the anchors z_adv = f(x) and
// z_tgt = f(G_r(x)) once, then runs the loop (2 + steps forward passes).
template <class S>
std::pair<TensorT<S>, RectificationTrace<S>> rectify(const ModelT<S>& m, const TensorT<S>& image,
                                                     const DefenseConfig& cfg) {
    cfg.validate();
    const double r = cfg.effective_radius(image.shape[0]);
    TensorT<S> z_adv = encode(m, image);
    TensorT<S> z_tgt = encode(m, apply_lowpass(image, r));
    return rectify_from_anchors(m, image, cfg, z_adv, z_tgt);
}

// Full defense. The gate's two embeddings double as the rectification anchors,
// so a benign-gated input costs exactly 2 encoder forwards and a flagged input
// exactly 2 + steps forwards. Benign inputs pass through bitwise unchanged.
template <class S>
TensorT<S> csr_defend(const ModelT<S>& m, const TensorT<S>& image, const DefenseConfig& cfg,
                      GateDecision* gate_out = nullptr) {
    cfg.validate();
    const double r = cfg.effective_radius(image.shape[0]);
    TensorT<S> z_adv = encode(m, image);
    TensorT<S> z_tgt = encode(m, apply_lowpass(image, r));
    GateDecision gate;
    gate.score = cosine(z_adv, z_tgt);
    gate.is_adversarial = gate.score < cfg.tau;
    if (gate_out) *gate_out = gate;
    if (!gate.is_adversarial) return image;
    return rectify_from_anchors(m, image, cfg, z_adv, z_tgt).first;
}

template <class S>
TensorT<S> lpf_baseline(const ModelT<S>& m, const TensorT<S>& image, double r) {
    (void)m;
    return apply_lowpass(image, r);
}

}  // namespace csr
