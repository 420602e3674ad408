#pragma once

#include <complex>
#include <vector>

#include "csr/tensor.hpp"

namespace csr {

// DC-centered per-channel spectrum of an H x W x C image. Storage is
// channel-major: data[c*h*w + u*w + v], with the zero frequency at
// (h/2, w/2). Transforms use the orthonormal convention (forward and
// inverse each scaled by 1/sqrt(HW)); values are kept in double so the
// roundtrip tolerances hold regardless of the image scalar type.
struct Spectrum {
    int h = 0, w = 0, channels = 0;
    std::vector<std::complex<double>> data;

    std::complex<double>& at(int c, int u, int v) {
        return data[(static_cast<size_t>(c) * h + u) * w + v];
    }
    const std::complex<double>& at(int c, int u, int v) const {
        return data[(static_cast<size_t>(c) * h + u) * w + v];
    }
};

namespace detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT over a strided sequence; sign=-1 forward.
inline void fft_pow2(std::complex<double>* a, int n, size_t stride, int sign) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i * stride], a[j * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * 3.14159265358979323846 / len;
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[(i + j) * stride];
                std::complex<double> v = a[(i + j + len / 2) * stride] * w;
                a[(i + j) * stride] = u + v;
                a[(i + j + len / 2) * stride] = u - v;
                w *= wlen;
            }
        }
    }
}

inline void dft_naive(std::complex<double>* a, int n, size_t stride, int sign) {
    std::vector<std::complex<double>> out(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            double ang = sign * 2.0 * 3.14159265358979323846 * k * t / n;
            acc += a[t * stride] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[static_cast<size_t>(k)] = acc;
    }
    for (int k = 0; k < n; ++k) a[k * stride] = out[static_cast<size_t>(k)];
}

inline void fft_1d(std::complex<double>* a, int n, size_t stride, int sign) {
    if (is_pow2(n))
        fft_pow2(a, n, stride, sign);
    else
        dft_naive(a, n, stride, sign);
}

// Unnormalized, un-shifted 2D transform of one h x w plane.
inline void fft_2d(std::complex<double>* plane, int h, int w, int sign) {
    for (int u = 0; u < h; ++u) fft_1d(plane + static_cast<size_t>(u) * w, w, 1, sign);
    for (int v = 0; v < w; ++v) fft_1d(plane + v, h, static_cast<size_t>(w), sign);
}

}  // namespace detail

// image must be H x W x C (or H x W, treated as one channel).
template <class S>
Spectrum dft2(const TensorT<S>& image) {
    if (image.rank() != 3 && image.rank() != 2)
        throw std::invalid_argument("dft2: expected H x W [x C] tensor, got " +
                                    TensorT<S>::shape_str(image.shape));
    const int h = image.shape[0], w = image.shape[1];
    const int c = image.rank() == 3 ? image.shape[2] : 1;
    if (h < 2 || w < 2) throw std::invalid_argument("dft2: each spatial extent must be >= 2");
    Spectrum sp;
    sp.h = h;
    sp.w = w;
    sp.channels = c;
    sp.data.assign(static_cast<size_t>(h) * w * c, {0.0, 0.0});
    const double norm = 1.0 / std::sqrt(double(h) * double(w));
    const int ch = h / 2, cw = w / 2;
    std::vector<std::complex<double>> plane(static_cast<size_t>(h) * w);
    for (int k = 0; k < c; ++k) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                plane[static_cast<size_t>(i) * w + j] =
                    double(image.data[(static_cast<size_t>(i) * w + j) * c + k]);
        detail::fft_2d(plane.data(), h, w, -1);
        // shift DC to (h/2, w/2)
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v)
                sp.at(k, (u + ch) % h, (v + cw) % w) = plane[static_cast<size_t>(u) * w + v] * norm;
    }
    return sp;
}

// Returns the real part; throws if the imaginary residue exceeds imag_tol,
// which signals broken conjugate symmetry upstream.
template <class S = float>
TensorT<S> idft2(const Spectrum& sp, double imag_tol = 1e-4) {
    const int h = sp.h, w = sp.w, c = sp.channels;
    TensorT<S> image(c > 1 ? std::vector<int>{h, w, c} : std::vector<int>{h, w});
    if (c == 1 && image.rank() == 2) image.shape = {h, w};
    const double norm = 1.0 / std::sqrt(double(h) * double(w));
    const int ch = h / 2, cw = w / 2;
    std::vector<std::complex<double>> plane(static_cast<size_t>(h) * w);
    for (int k = 0; k < c; ++k) {
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v)
                plane[static_cast<size_t>(u) * w + v] = sp.at(k, (u + ch) % h, (v + cw) % w);
        detail::fft_2d(plane.data(), h, w, +1);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                std::complex<double> z = plane[static_cast<size_t>(i) * w + j] * norm;
                if (std::abs(z.imag()) > imag_tol)
                    throw std::runtime_error("idft2: imaginary residue " +
                                             std::to_string(std::abs(z.imag())) +
                                             " exceeds tolerance (conjugate symmetry broken)");
                image.data[(static_cast<size_t>(i) * w + j) * c + k] = static_cast<S>(z.real());
            }
    }
    return image;
}

}  // namespace csr
