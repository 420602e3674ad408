#pragma once

#include <chrono>
#include <map>

#include "csr/attack.hpp"
#include "csr/defense.hpp"

namespace csr {

// ---- consistency curves ----------------------------------------------------

struct ConsistencyCurve {
    std::string population;
    std::vector<double> radii;
    std::vector<double> mean;
    std::vector<double> stddev;
};

template <class S>
std::vector<ConsistencyCurve> consistency_curve(
    const ModelT<S>& m, const std::map<std::string, std::vector<TensorT<S>>>& populations,
    const std::vector<double>& radii) {
    for (const auto& [name, images] : populations)
        if (images.empty())
            throw std::invalid_argument("consistency_curve: empty population " + name);
    for (double r : radii)
        if (r <= 0) throw std::invalid_argument("consistency_curve: radii must be positive");
    std::vector<ConsistencyCurve> out;
    for (const auto& [name, images] : populations) {
        ConsistencyCurve c;
        c.population = name;
        for (double r : radii) {
            double sum = 0, sumsq = 0;
            for (const auto& img : images) {
                double v = spectral_consistency(m, img, r);
                sum += v;
                sumsq += v * v;
            }
            double n = double(images.size());
            double mean = sum / n;
            c.radii.push_back(r);
            c.mean.push_back(mean);
            c.stddev.push_back(std::sqrt(std::max(0.0, sumsq / n - mean * mean)));
        }
        out.push_back(std::move(c));
    }
    return out;
}

// ---- spectral gradient magnitude -------------------------------------------

struct SgmGrid {
    int h = 0, w = 0;
    int samples = 0;
    std::vector<double> values;  // H x W, DC-centered, channel-averaged

    double at(int u, int v) const { return values[static_cast<size_t>(u) * w + v]; }
};

// Gradient of the true-label cross-entropy with respect to the spectral
// amplitude at each bin: dL/dA(u,v) = Re(conj(e^{i phi(u,v)}) * F(g)(u,v)),
// with g the pixel-space loss gradient.
template <class S>
SgmGrid sgm_heatmap(const ModelT<S>& m, const std::vector<TensorT<S>>& images,
                    const std::vector<int>& labels) {
    if (images.empty()) throw std::invalid_argument("sgm_heatmap: empty image set");
    SgmGrid grid;
    grid.h = images[0].shape[0];
    grid.w = images[0].shape[1];
    grid.values.assign(static_cast<size_t>(grid.h) * grid.w, 0.0);
    for (size_t n = 0; n < images.size(); ++n) {
        LossSpec<S> spec;
        spec.kind = LossKind::CeUntargeted;
        spec.label = labels[n];
        auto [value, g] = loss_and_input_grad(m, images[n], spec);
        (void)value;
        Spectrum gs = dft2(g);
        Spectrum xs = dft2(images[n]);
        for (int u = 0; u < grid.h; ++u)
            for (int v = 0; v < grid.w; ++v) {
                double acc = 0;
                for (int c = 0; c < gs.channels; ++c) {
                    std::complex<double> x = xs.at(c, u, v);
                    double amp = std::abs(x);
                    std::complex<double> phase = amp > 0 ? x / amp : std::complex<double>(1, 0);
                    acc += std::abs((std::conj(phase) * gs.at(c, u, v)).real());
                }
                grid.values[static_cast<size_t>(u) * grid.w + v] += acc / gs.channels;
            }
        grid.samples++;
    }
    for (auto& v : grid.values) v /= grid.samples;
    return grid;
}

// Analytic amplitude gradient for one (channel, u, v) bin of one image.
template <class S>
double sgm_amplitude_gradient(const ModelT<S>& m, const TensorT<S>& image, int label, int c, int u,
                              int v) {
    LossSpec<S> spec;
    spec.kind = LossKind::CeUntargeted;
    spec.label = label;
    auto [value, g] = loss_and_input_grad(m, image, spec);
    (void)value;
    Spectrum gs = dft2(g);
    Spectrum xs = dft2(image);
    std::complex<double> x = xs.at(c, u, v);
    double amp = std::abs(x);
    std::complex<double> phase = amp > 0 ? x / amp : std::complex<double>(1, 0);
    return (std::conj(phase) * gs.at(c, u, v)).real();
}

// Central-difference oracle on the amplitude: scales the bin's modulus while
// holding the phase fixed, reconstructs the (real part of the) image, and
// evaluates the loss.
template <class S>
double sgm_amplitude_fd(const ModelT<S>& m, const TensorT<S>& image, int label, int c, int u, int v,
                        double step) {
    Spectrum xs = dft2(image);
    std::complex<double> x = xs.at(c, u, v);
    double amp = std::abs(x);
    std::complex<double> phase = amp > 0 ? x / amp : std::complex<double>(1, 0);
    auto loss_at = [&](double a) {
        Spectrum sp = xs;
        sp.at(c, u, v) = phase * a;
        TensorT<S> img = idft2<S>(sp, std::numeric_limits<double>::infinity());
        TensorT<S> z = encode(m, img);
        return loss_ce_untargeted(zero_shot_probs(z, m.anchors, double(m.tau)), label);
    };
    return (loss_at(amp + step) - loss_at(amp - step)) / (2.0 * step);
}

// ---- band drift sweep ------------------------------------------------------

struct BandDriftTable {
    std::vector<std::pair<double, double>> bands;  // [lo, hi)
    std::vector<double> epsilons;
    std::vector<std::vector<double>> mean_drift;  // [band][epsilon]
};

template <class S>
BandDriftTable band_drift_sweep(const ModelT<S>& m, const std::vector<TensorT<S>>& images,
                                const std::vector<double>& band_edges,
                                const std::vector<double>& epsilons, AttackConfig cfg) {
    if (band_edges.size() < 2) throw std::invalid_argument("band_drift_sweep: need >= 2 edges");
    for (size_t i = 1; i < epsilons.size(); ++i)
        if (epsilons[i] < epsilons[i - 1])
            throw std::invalid_argument("band_drift_sweep: epsilons must be ascending");
    BandDriftTable table;
    table.epsilons = epsilons;
    const int h = images.at(0).shape[0], w = images.at(0).shape[1];
    for (size_t b = 0; b + 1 < band_edges.size(); ++b) {
        table.bands.emplace_back(band_edges[b], band_edges[b + 1]);
        FrequencyMask mask = band_mask(h, w, band_edges[b], band_edges[b + 1]);
        std::vector<double> row;
        for (double eps : epsilons) {
            AttackConfig c = cfg;
            c.epsilon = eps;
            c.alpha = std::min(cfg.alpha, eps > 0 ? eps : cfg.alpha);
            double sum = 0;
            if (eps == 0) {
                row.push_back(0.0);
                continue;
            }
            for (const auto& img : images) sum += band_restricted_attack(m, img, mask, c).second;
            row.push_back(sum / double(images.size()));
        }
        table.mean_drift.push_back(std::move(row));
    }
    return table;
}

// ---- gradient conflict -----------------------------------------------------

// cosine(-grad L_sim at clean + delta, delta), with
// L_sim = 0.5 || f(x) - f(G_r x) ||^2 and both branches differentiated.
template <class S>
double gradient_conflict(const ModelT<S>& m, const TensorT<S>& image_clean,
                         const TensorT<S>& delta, double r) {
    if (r <= 0) throw std::invalid_argument("gradient_conflict: radius must be positive");
    if (linf_norm(delta) == S(0))
        throw std::invalid_argument("gradient_conflict: zero perturbation has no direction");
    TensorT<S> x = image_clean;
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += delta.data[i];
    LossSpec<S> spec;
    spec.kind = LossKind::SpectralSim;
    spec.radius = r;
    auto [value, g] = loss_and_input_grad(m, x, spec);
    (void)value;
    TensorT<S> neg = g;
    for (auto& v : neg.data) v = -v;
    return cosine(neg, delta);
}

// ---- ROC / AUC -------------------------------------------------------------

struct RocCurve {
    std::vector<double> thresholds;
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0;
};

// Adversarial is the positive class; an input is flagged when score < threshold
// (strict, matching detect). Thresholds sweep the union of observed scores plus
// +/- infinity sentinels; AUC by the trapezoidal rule.
inline RocCurve roc_auc(const std::vector<double>& benign_scores,
                        const std::vector<double>& adversarial_scores) {
    if (benign_scores.empty() || adversarial_scores.empty())
        throw std::invalid_argument("roc_auc: empty score population");
    std::vector<double> thresholds;
    thresholds.push_back(-std::numeric_limits<double>::infinity());
    {
        std::vector<double> all(benign_scores);
        all.insert(all.end(), adversarial_scores.begin(), adversarial_scores.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        for (double v : all) thresholds.push_back(v);
    }
    thresholds.push_back(std::numeric_limits<double>::infinity());

    RocCurve roc;
    for (double th : thresholds) {
        auto frac_below = [th](const std::vector<double>& scores) {
            size_t n = 0;
            for (double s : scores)
                if (s < th) n++;
            return double(n) / double(scores.size());
        };
        roc.thresholds.push_back(th);
        roc.fpr.push_back(frac_below(benign_scores));
        roc.tpr.push_back(frac_below(adversarial_scores));
    }
    double auc = 0;
    for (size_t i = 1; i < roc.fpr.size(); ++i)
        auc += (roc.fpr[i] - roc.fpr[i - 1]) * (roc.tpr[i] + roc.tpr[i - 1]) * 0.5;
    roc.auc = auc;
    return roc;
}

// Youden's J calibration; ties resolve to the smaller threshold.
struct TauCalibration {
    double tau = 0;
    double youden_j = 0;
    bool degenerate = false;
    RocCurve roc;
};

inline TauCalibration calibrate_tau(const std::vector<double>& benign_scores,
                                    const std::vector<double>& adversarial_scores) {
    TauCalibration cal;
    cal.roc = roc_auc(benign_scores, adversarial_scores);
    double best_j = -1;
    double best_tau = 0;
    for (size_t i = 0; i < cal.roc.thresholds.size(); ++i) {
        double th = cal.roc.thresholds[i];
        if (!std::isfinite(th)) continue;
        double j = cal.roc.tpr[i] - cal.roc.fpr[i];
        if (j > best_j + 1e-15) {
            best_j = j;
            best_tau = th;
        }
    }
    if (best_j <= 1e-15) {
        cal.degenerate = true;
        double lo = *std::min_element(benign_scores.begin(), benign_scores.end());
        double hi = *std::max_element(benign_scores.begin(), benign_scores.end());
        for (double s : adversarial_scores) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        best_tau = 0.5 * (lo + hi);
        best_j = 0;
    }
    cal.tau = best_tau;
    cal.youden_j = best_j;
    return cal;
}

// ---- robust accuracy evaluation --------------------------------------------

enum class DefenseMode { None, Lpf, Csr };

struct EvalMetrics {
    std::string mode;
    double clean_acc = 0;
    double robust_acc = 0;
    double gate_tpr = 0;   // fraction of adversarial inputs flagged
    double gate_fpr = 0;   // fraction of benign inputs flagged
    double mean_steps = 0; // rectification steps averaged over all defended inputs
    double wall_ms_per_image = 0;
};

template <class S>
EvalMetrics robust_accuracy_eval(const ModelT<S>& m, DefenseMode mode, const DefenseConfig& cfg,
                                 const std::vector<TensorT<S>>& benign,
                                 const std::vector<TensorT<S>>& adversarial,
                                 const std::vector<int>& labels) {
    if (benign.size() != labels.size() || adversarial.size() != labels.size())
        throw std::invalid_argument("robust_accuracy_eval: population/label size mismatch");
    EvalMetrics out;
    out.mode = mode == DefenseMode::None ? "none" : (mode == DefenseMode::Lpf ? "lpf" : "csr");

    auto defended_predict = [&](const TensorT<S>& img, bool* flagged, int* steps) {
        switch (mode) {
            case DefenseMode::None:
                if (flagged) *flagged = false;
                return classify_image(m, img);
            case DefenseMode::Lpf:
                if (flagged) *flagged = false;
                return classify_image(m, lpf_baseline(m, img, cfg.effective_radius(img.shape[0])));
            case DefenseMode::Csr: {
                GateDecision gate;
                TensorT<S> x = csr_defend(m, img, cfg, &gate);
                if (flagged) *flagged = gate.is_adversarial;
                if (steps && gate.is_adversarial) *steps += cfg.steps;
                return classify_image(m, x);
            }
        }
        return -1;
    };

    using clock = std::chrono::steady_clock;
    int clean_correct = 0, robust_correct = 0, flagged_benign = 0, flagged_adv = 0;
    int total_steps = 0;
    auto t0 = clock::now();
    for (size_t i = 0; i < benign.size(); ++i) {
        bool flagged = false;
        if (defended_predict(benign[i], &flagged, &total_steps) == labels[i]) clean_correct++;
        if (flagged) flagged_benign++;
    }
    for (size_t i = 0; i < adversarial.size(); ++i) {
        bool flagged = false;
        if (defended_predict(adversarial[i], &flagged, &total_steps) == labels[i]) robust_correct++;
        if (flagged) flagged_adv++;
    }
    auto t1 = clock::now();
    double n = double(benign.size());
    out.clean_acc = clean_correct / n;
    out.robust_acc = robust_correct / n;
    out.gate_fpr = flagged_benign / n;
    out.gate_tpr = flagged_adv / n;
    out.mean_steps = total_steps / (2.0 * n);
    out.wall_ms_per_image =
        std::chrono::duration<double, std::milli>(t1 - t0).count() / (2.0 * n);
    return out;
}

}  // namespace csr
