#pragma once

#include <limits>

#include "csr/fft.hpp"
#include "csr/tape.hpp"

namespace csr {

// H x W attenuation grid over the DC-centered spectrum. Values depend only on
// the Euclidean distance from the DC bin at (h/2, w/2).
struct FrequencyMask {
    enum class Kind { GaussianLowpass, BinaryBand };
    int h = 0, w = 0;
    Kind kind = Kind::GaussianLowpass;
    std::vector<double> values;

    double at(int u, int v) const { return values[static_cast<size_t>(u) * w + v]; }
    bool is_binary() const {
        for (double v : values)
            if (v != 0.0 && v != 1.0) return false;
        return true;
    }
};

inline double dc_distance(int u, int v, int h, int w) {
    double du = u - h / 2, dv = v - w / 2;
    return std::sqrt(du * du + dv * dv);
}

// mask(u,v) = exp(-D^2 / (2 r^2))
inline FrequencyMask gaussian_lowpass_mask(int h, int w, double r) {
    if (r <= 0) throw std::invalid_argument("gaussian_lowpass_mask: radius must be positive");
    FrequencyMask m;
    m.h = h;
    m.w = w;
    m.kind = FrequencyMask::Kind::GaussianLowpass;
    m.values.resize(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            double d = dc_distance(u, v, h, w);
            m.values[static_cast<size_t>(u) * w + v] = std::exp(-d * d / (2.0 * r * r));
        }
    return m;
}

// mask(u,v) = 1 iff lo <= D(u,v) < hi
inline FrequencyMask band_mask(int h, int w, double lo, double hi) {
    if (!(lo >= 0 && lo < hi)) throw std::invalid_argument("band_mask: require 0 <= lo < hi");
    FrequencyMask m;
    m.h = h;
    m.w = w;
    m.kind = FrequencyMask::Kind::BinaryBand;
    m.values.resize(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            double d = dc_distance(u, v, h, w);
            m.values[static_cast<size_t>(u) * w + v] = (d >= lo && d < hi) ? 1.0 : 0.0;
        }
    return m;
}

inline void apply_mask(Spectrum& sp, const FrequencyMask& mask) {
    if (sp.h != mask.h || sp.w != mask.w)
        throw std::invalid_argument("apply_mask: mask/spectrum size mismatch");
    for (int c = 0; c < sp.channels; ++c)
        for (int u = 0; u < sp.h; ++u)
            for (int v = 0; v < sp.w; ++v) sp.at(c, u, v) *= mask.at(u, v);
}

// idft2(mask * dft2(x)), no clamp. Linear and exactly self-adjoint for a real
// radially symmetric mask under the orthonormal convention.
template <class S>
TensorT<S> filter_image(const TensorT<S>& image, const FrequencyMask& mask) {
    Spectrum sp = dft2(image);
    apply_mask(sp, mask);
    return idft2<S>(sp);
}

// LPF operator G_r: Gaussian frequency mask then clamp to the valid pixel
// range. The clamp sits outside the differentiable path (anchors are
// constants), so apply_lowpass is a plain function.
template <class S>
TensorT<S> apply_lowpass(const TensorT<S>& image, double r) {
    FrequencyMask mask = gaussian_lowpass_mask(image.shape[0], image.shape[1], r);
    TensorT<S> out = filter_image(image, mask);
    for (auto& v : out.data) v = std::min(S(1), std::max(S(0), v));
    return out;
}

template <class S>
TensorT<S> apply_lowpass_unclamped(const TensorT<S>& image, double r) {
    return filter_image(image, gaussian_lowpass_mask(image.shape[0], image.shape[1], r));
}

// High-pass projection P = I - G (unclamped G).
template <class S>
TensorT<S> highpass_project(const TensorT<S>& image, double r) {
    TensorT<S> low = apply_lowpass_unclamped(image, r);
    TensorT<S> out = image;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= low.data[i];
    return out;
}

template <class S>
TensorT<S> band_project(const TensorT<S>& delta, const FrequencyMask& mask) {
    if (delta.shape[0] != mask.h || delta.shape[1] != mask.w)
        throw std::invalid_argument("band_project: shape mismatch");
    return filter_image(delta, mask);
}

// ---- tape-recorded variants (gradient flows through the filter) -----------

template <class S>
int tape_filter(TapeT<S>& tape, int image_id, FrequencyMask mask) {
    return tape.self_adjoint_linear(
        image_id, [mask](const TensorT<S>& x) { return filter_image(x, mask); });
}

template <class S>
int tape_lowpass(TapeT<S>& tape, int image_id, double r) {
    const auto& shp = tape.value(image_id).shape;
    return tape_filter(tape, image_id, gaussian_lowpass_mask(shp[0], shp[1], r));
}

template <class S>
int tape_highpass(TapeT<S>& tape, int image_id, double r) {
    return tape.subtract(image_id, tape_lowpass(tape, image_id, r));
}

}  // namespace csr
