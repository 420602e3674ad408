#pragma once

#include "csr/encoder.hpp"
#include "csr/spectral.hpp"

namespace csr {

enum class AttackLoss { CeUntargeted, CeTargeted, DlrTargeted, CrossModal, LabelFree };
enum class AttackVariant { Pgd, ApgdLite };

struct AttackConfig {
    double epsilon = 4.0 / 255.0;  // linf budget in pixel units
    double alpha = 1.0 / 255.0;
    int steps = 10;
    int restarts = 1;
    uint64_t seed = 0;
    AttackLoss loss = AttackLoss::CeUntargeted;
    AttackVariant variant = AttackVariant::Pgd;
    double momentum = 0.75;          // apgd-lite
    double checkpoint_frac = 0.22;   // apgd-lite step-halving window fraction
    int target = -1;                 // targeted attacks; -1 draws uniformly among wrong labels

    void validate() const {
        if (epsilon < 0) throw std::invalid_argument("attack: epsilon must be >= 0");
        if (epsilon > 0 && !(alpha > 0 && alpha <= epsilon))
            throw std::invalid_argument("attack: require 0 < alpha <= epsilon");
        if (steps < 1 || restarts < 1)
            throw std::invalid_argument("attack: require steps >= 1 and restarts >= 1");
    }
};

template <class S>
struct AdversarialResult {
    TensorT<S> image;         // x + delta, clamped to [0,1]
    TensorT<S> delta;
    std::vector<double> loss_trace;  // ascended objective per evaluated iterate
    double best_loss = 0;
    bool success = false;
    int predicted = -1;
    int target = -1;
};

inline int pick_wrong_label(Rng& rng, int classes, int y) {
    int t = rng.uniform_int(classes - 1);
    return t >= y ? t + 1 : t;
}

namespace detail {

// Ascended objective value and its input gradient. For loss kinds the attack
// minimizes, both are negated so the driver always ascends.
template <class S>
std::pair<double, TensorT<S>> attack_objective(const ModelT<S>& m, const TensorT<S>& image,
                                               AttackLoss kind, int label, int target,
                                               const TensorT<S>& reference) {
    LossSpec<S> spec;
    spec.label = label;
    spec.target = target;
    bool negate = false;
    switch (kind) {
        case AttackLoss::CeUntargeted:
            spec.kind = LossKind::CeUntargeted;
            break;
        case AttackLoss::CeTargeted:
            spec.kind = LossKind::CeTargeted;
            negate = true;
            break;
        case AttackLoss::DlrTargeted:
            spec.kind = LossKind::DlrTargeted;
            break;
        case AttackLoss::CrossModal:
            spec.kind = LossKind::CrossModal;
            spec.ref_a = reference;
            negate = true;
            break;
        case AttackLoss::LabelFree:
            spec.kind = LossKind::LabelFree;
            spec.ref_a = reference;
            negate = true;
            break;
    }
    auto [value, grad] = loss_and_input_grad(m, image, spec);
    if (negate) {
        value = -value;
        for (auto& g : grad.data) g = -g;
    }
    return {value, std::move(grad)};
}

}  // namespace detail

// Iterated sign-gradient attack with linf projection and [0,1] pixel clamp,
// returning the best-objective iterate. ApgdLite adds a momentum-blended
// update and halves the step size whenever the best objective fails to
// improve over a checkpoint window.
template <class S>
AdversarialResult<S> gradient_attack(const ModelT<S>& m, const TensorT<S>& image, int label,
                                     const AttackConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    int target = cfg.target;
    bool targeted = cfg.loss == AttackLoss::CeTargeted || cfg.loss == AttackLoss::DlrTargeted;
    if (targeted && target < 0) target = pick_wrong_label(rng, m.dims.classes, label);

    TensorT<S> reference;
    if (cfg.loss == AttackLoss::CrossModal) {
        reference = TensorT<S>({m.dims.embed});
        for (int j = 0; j < m.dims.embed; ++j)
            reference.data[size_t(j)] = m.anchors.data[size_t(label) * m.dims.embed + j];
    } else if (cfg.loss == AttackLoss::LabelFree) {
        reference = encode(m, image);
    }

    const bool apgd = cfg.variant == AttackVariant::ApgdLite;
    const int window = std::max(static_cast<int>(std::ceil(cfg.checkpoint_frac * cfg.steps)), 1);

    AdversarialResult<S> best_overall;
    best_overall.best_loss = -std::numeric_limits<double>::infinity();
    best_overall.target = target;

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        TensorT<S> delta(image.shape);
        if (restart > 0)
            for (auto& v : delta.data) v = static_cast<S>(rng.uniform(-cfg.epsilon, cfg.epsilon));

        TensorT<S> velocity(image.shape);
        TensorT<S> best_delta = delta;
        double best_loss = -std::numeric_limits<double>::infinity();
        double alpha = cfg.alpha;
        int since_improved = 0;
        std::vector<double> trace;

        auto candidate = [&](const TensorT<S>& d) {
            TensorT<S> x = image;
            for (size_t i = 0; i < x.data.size(); ++i)
                x.data[i] = std::min(S(1), std::max(S(0), S(x.data[i] + d.data[i])));
            return x;
        };

        for (int t = 0; t < cfg.steps; ++t) {
            auto [value, grad] =
                detail::attack_objective(m, candidate(delta), cfg.loss, label, target, reference);
            trace.push_back(value);
            if (value > best_loss) {
                best_loss = value;
                best_delta = delta;
                since_improved = 0;
            } else if (apgd && ++since_improved >= window) {
                alpha *= 0.5;
                since_improved = 0;
            }
            for (size_t i = 0; i < delta.data.size(); ++i) {
                double g = grad.data[i] > 0 ? 1.0 : (grad.data[i] < 0 ? -1.0 : 0.0);
                double step = alpha * g;
                double v = apgd ? cfg.momentum * double(velocity.data[i]) + step : step;
                if (apgd) velocity.data[i] = static_cast<S>(v);
                double nd = std::min(cfg.epsilon, std::max(-cfg.epsilon, double(delta.data[i]) + v));
                delta.data[i] = static_cast<S>(nd);
            }
        }
        // final iterate is a candidate too
        {
            auto [value, grad] =
                detail::attack_objective(m, candidate(delta), cfg.loss, label, target, reference);
            (void)grad;
            trace.push_back(value);
            if (value > best_loss) {
                best_loss = value;
                best_delta = delta;
            }
        }

        if (best_loss > best_overall.best_loss) {
            best_overall.best_loss = best_loss;
            best_overall.loss_trace = std::move(trace);
            best_overall.image = candidate(best_delta);
            best_overall.delta = TensorT<S>(image.shape);
            for (size_t i = 0; i < image.data.size(); ++i)
                best_overall.delta.data[i] = best_overall.image.data[i] - image.data[i];
        }
    }

    best_overall.predicted = classify_image(m, best_overall.image);
    best_overall.success =
        targeted ? best_overall.predicted == target : best_overall.predicted != label;
    return best_overall;
}

template <class S>
AdversarialResult<S> pgd_attack(const ModelT<S>& m, const TensorT<S>& image, int label,
                                AttackConfig cfg) {
    cfg.variant = AttackVariant::Pgd;
    return gradient_attack(m, image, label, cfg);
}

template <class S>
AdversarialResult<S> apgd_lite_attack(const ModelT<S>& m, const TensorT<S>& image, int label,
                                      AttackConfig cfg) {
    cfg.variant = AttackVariant::ApgdLite;
    return gradient_attack(m, image, label, cfg);
}

// Attack restricted to a binary frequency band: the optimized variable is the
// raw delta (linf-bounded as written), the effective perturbation is its band
// projection. Maximizes the feature drift 1 - cos(f(x), f(x + P delta)).
template <class S>
std::pair<AdversarialResult<S>, double> band_restricted_attack(const ModelT<S>& m,
                                                               const TensorT<S>& image,
                                                               const FrequencyMask& mask,
                                                               const AttackConfig& cfg) {
    cfg.validate();
    if (!mask.is_binary())
        throw std::invalid_argument("band_restricted_attack: mask must be binary");
    TensorT<S> z_clean = encode(m, image);

    TensorT<S> delta(image.shape);
    TensorT<S> best_delta = delta;
    double best_drift = -1;
    std::vector<double> trace;

    auto eval = [&](const TensorT<S>& d, TensorT<S>* grad_out) {
        TapeT<S> tape;
        int did = tape.leaf(d, grad_out != nullptr);
        int proj = tape_filter(tape, did, mask);
        int x = tape.clamp(tape.add(tape.constant(image), proj), S(0), S(1));
        ParamIds<S> p = register_params(tape, m, false);
        int z = build_encoder(tape, m, p, x);
        int drift = tape.subtract(tape.constant(TensorT<S>({1}, S(1))),
                                  tape.dot(z, tape.constant(z_clean)));
        double value = double(tape.value(drift).data[0]);
        if (grad_out) {
            auto gm = tape.backward(drift);
            m.backward_count++;
            *grad_out = gm.at(did);
        }
        return value;
    };

    for (int t = 0; t < cfg.steps; ++t) {
        TensorT<S> grad;
        double value = eval(delta, &grad);
        trace.push_back(value);
        if (value > best_drift) {
            best_drift = value;
            best_delta = delta;
        }
        for (size_t i = 0; i < delta.data.size(); ++i) {
            double g = grad.data[i] > 0 ? 1.0 : (grad.data[i] < 0 ? -1.0 : 0.0);
            double nd =
                std::min(cfg.epsilon, std::max(-cfg.epsilon, double(delta.data[i]) + cfg.alpha * g));
            delta.data[i] = static_cast<S>(nd);
        }
    }
    {
        double value = eval(delta, nullptr);
        trace.push_back(value);
        if (value > best_drift) {
            best_drift = value;
            best_delta = delta;
        }
    }

    AdversarialResult<S> res;
    res.delta = band_project(best_delta, mask);
    res.image = image;
    for (size_t i = 0; i < res.image.data.size(); ++i)
        res.image.data[i] =
            std::min(S(1), std::max(S(0), S(res.image.data[i] + res.delta.data[i])));
    res.loss_trace = std::move(trace);
    res.best_loss = best_drift;
    res.predicted = classify_image(m, res.image);
    res.success = false;
    return {res, best_drift};
}

}  // namespace csr
