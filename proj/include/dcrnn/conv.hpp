#pragma once

// Conventional and r-dilated 2D convolution over [batch, ch, time, freq]
// maps, in the true-convolution orientation:
//
//     out(p) = sum_t in(p - r*t) * K(t),   t in [-m, m]^2
//
// Zero "same" padding of r*m per side keeps the spatial dims unchanged, so
// stride-1 stacks preserve the per-frame time resolution. A conventional
// convolution is the r = 1 special case.

#include <cstddef>
#include <stdexcept>
#include <string>

#include "dcrnn/tensor.hpp"

namespace dcrnn {

struct DilatedConvSpec {
    std::size_t kernel_time = 3;   // 2m+1 taps along time
    std::size_t kernel_freq = 3;   // 2m+1 taps along frequency
    std::size_t dilation_time = 1; // r on the time axis
    std::size_t dilation_freq = 1; // r on the frequency axis
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    static constexpr std::size_t stride = 1;

    void validate() const {
        if (kernel_time % 2 == 0 || kernel_time == 0) {
            throw std::invalid_argument("DilatedConvSpec: kernel_time must be odd and positive, got " +
                                        std::to_string(kernel_time));
        }
        if (kernel_freq % 2 == 0 || kernel_freq == 0) {
            throw std::invalid_argument("DilatedConvSpec: kernel_freq must be odd and positive, got " +
                                        std::to_string(kernel_freq));
        }
        if (dilation_time < 1 || dilation_freq < 1) throw std::invalid_argument("DilatedConvSpec: dilation rates must be >= 1");
        if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("DilatedConvSpec: channel counts must be >= 1");
    }
};

namespace detail {

inline void check_conv_shapes(const Tensor& input, const DilatedConvSpec& spec, const Tensor& weights,
                              const Tensor& bias) {
    spec.validate();
    if (input.rank() != 4) {
        throw std::invalid_argument("dilated_conv2d: input must be rank-4 [batch, ch, time, freq], got " +
                                    shape_to_string(input.shape()));
    }
    if (input.dim(1) != spec.in_channels) {
        throw std::invalid_argument("dilated_conv2d: input channel dim is " + std::to_string(input.dim(1)) +
                                    ", spec expects " + std::to_string(spec.in_channels));
    }
    const Shape expected{spec.out_channels, spec.in_channels, spec.kernel_time, spec.kernel_freq};
    if (weights.shape() != expected) {
        throw std::invalid_argument("dilated_conv2d: weight shape " + shape_to_string(weights.shape()) +
                                    " does not match spec " + shape_to_string(expected));
    }
    if (bias.size() != 0 && bias.shape() != Shape{spec.out_channels}) {
        throw std::invalid_argument("dilated_conv2d: bias shape " + shape_to_string(bias.shape()) +
                                    " must be [" + std::to_string(spec.out_channels) + "]");
    }
}

// out(p) += w * in(p - off) over the positions where p - off is in range.
inline void accumulate_shifted(double* out, const double* in, std::size_t n_time, std::size_t n_freq,
                               long off_t, long off_f, double w) {
    const long t_begin = std::max<long>(0, off_t);
    const long t_end = std::min<long>(static_cast<long>(n_time), static_cast<long>(n_time) + off_t);
    const long f_begin = std::max<long>(0, off_f);
    const long f_end = std::min<long>(static_cast<long>(n_freq), static_cast<long>(n_freq) + off_f);
    for (long pt = t_begin; pt < t_end; ++pt) {
        double* orow = out + pt * static_cast<long>(n_freq);
        const double* irow = in + (pt - off_t) * static_cast<long>(n_freq) - off_f;
        for (long pf = f_begin; pf < f_end; ++pf) orow[pf] += w * irow[pf];
    }
}

}  // namespace detail

// Eq.-style r-dilated convolution. `weights` is [out_ch, in_ch, kt, kf] with
// tap (dt, df) at index (dt + m_t, df + m_f); `bias` may be empty (size 0).
inline Tensor dilated_conv2d(const Tensor& input, const DilatedConvSpec& spec, const Tensor& weights,
                             const Tensor& bias = Tensor()) {
    detail::check_conv_shapes(input, spec, weights, bias);
    const std::size_t n_batch = input.dim(0), n_in = spec.in_channels, n_out = spec.out_channels;
    const std::size_t n_time = input.dim(2), n_freq = input.dim(3);
    const std::size_t kt = spec.kernel_time, kf = spec.kernel_freq;
    const long mt = static_cast<long>(kt / 2), mf = static_cast<long>(kf / 2);
    const long rt = static_cast<long>(spec.dilation_time), rf = static_cast<long>(spec.dilation_freq);
    const std::size_t plane = n_time * n_freq;
    const bool has_bias = bias.size() != 0;

    Tensor out({n_batch, n_out, n_time, n_freq});
    for (std::size_t b = 0; b < n_batch; ++b) {
        for (std::size_t oc = 0; oc < n_out; ++oc) {
            double* oplane = out.data().data() + (b * n_out + oc) * plane;
            if (has_bias) std::fill(oplane, oplane + plane, bias.data()[oc]);
            for (std::size_t ic = 0; ic < n_in; ++ic) {
                const double* iplane = input.data().data() + (b * n_in + ic) * plane;
                const double* kern = weights.data().data() + (oc * n_in + ic) * kt * kf;
                for (long dt = -mt; dt <= mt; ++dt)
                    for (long df = -mf; df <= mf; ++df) {
                        const double w = kern[(dt + mt) * static_cast<long>(kf) + (df + mf)];
                        if (w == 0.0) continue;
                        detail::accumulate_shifted(oplane, iplane, n_time, n_freq, rt * dt, rf * df, w);
                    }
            }
        }
    }

    detail::wire(out, {input, weights, bias},
                 [in = input.node(), wn = weights.node(), bn = bias.node(), on = out.node().get(), n_batch, n_in,
                  n_out, n_time, n_freq, kt, kf, mt, mf, rt, rf, plane]() {
                     // d/d(in)(s) = sum_t g(s + r*t) K(t): the shift flips sign.
                     if (in->requires_grad) {
                         in->ensure_grad();
                         for (std::size_t b = 0; b < n_batch; ++b)
                             for (std::size_t ic = 0; ic < n_in; ++ic) {
                                 double* iplane = in->grad.data() + (b * n_in + ic) * plane;
                                 for (std::size_t oc = 0; oc < n_out; ++oc) {
                                     const double* gplane = on->grad.data() + (b * n_out + oc) * plane;
                                     const double* kern = wn->data.data() + (oc * n_in + ic) * kt * kf;
                                     for (long dt = -mt; dt <= mt; ++dt)
                                         for (long df = -mf; df <= mf; ++df) {
                                             const double w = kern[(dt + mt) * static_cast<long>(kf) + (df + mf)];
                                             if (w == 0.0) continue;
                                             detail::accumulate_shifted(iplane, gplane, n_time, n_freq, -rt * dt,
                                                                        -rf * df, w);
                                         }
                                 }
                             }
                     }
                     if (wn->requires_grad) {
                         wn->ensure_grad();
                         for (std::size_t oc = 0; oc < n_out; ++oc)
                             for (std::size_t ic = 0; ic < n_in; ++ic) {
                                 double* kern = wn->grad.data() + (oc * n_in + ic) * kt * kf;
                                 for (long dt = -mt; dt <= mt; ++dt)
                                     for (long df = -mf; df <= mf; ++df) {
                                         double acc = 0.0;
                                         const long off_t = rt * dt, off_f = rf * df;
                                         const long t_begin = std::max<long>(0, off_t);
                                         const long t_end = std::min<long>(static_cast<long>(n_time),
                                                                           static_cast<long>(n_time) + off_t);
                                         const long f_begin = std::max<long>(0, off_f);
                                         const long f_end = std::min<long>(static_cast<long>(n_freq),
                                                                           static_cast<long>(n_freq) + off_f);
                                         for (std::size_t b = 0; b < n_batch; ++b) {
                                             const double* gplane = on->grad.data() + (b * n_out + oc) * plane;
                                             const double* iplane = in->data.data() + (b * n_in + ic) * plane;
                                             for (long pt = t_begin; pt < t_end; ++pt) {
                                                 const double* grow = gplane + pt * static_cast<long>(n_freq);
                                                 const double* irow =
                                                     iplane + (pt - off_t) * static_cast<long>(n_freq) - off_f;
                                                 for (long pf = f_begin; pf < f_end; ++pf) acc += grow[pf] * irow[pf];
                                             }
                                         }
                                         kern[(dt + mt) * static_cast<long>(kf) + (df + mf)] += acc;
                                     }
                             }
                     }
                     if (bn->requires_grad && bn->data.size() == n_out) {
                         bn->ensure_grad();
                         for (std::size_t b = 0; b < n_batch; ++b)
                             for (std::size_t oc = 0; oc < n_out; ++oc) {
                                 const double* gplane = on->grad.data() + (b * n_out + oc) * plane;
                                 double acc = 0.0;
                                 for (std::size_t i = 0; i < plane; ++i) acc += gplane[i];
                                 bn->grad[oc] += acc;
                             }
                     }
                 });
    return out;
}

// Conventional convolution: the one-dilated special case.
inline Tensor conv2d(const Tensor& input, DilatedConvSpec spec, const Tensor& weights, const Tensor& bias = Tensor()) {
    spec.dilation_time = 1;
    spec.dilation_freq = 1;
    return dilated_conv2d(input, spec, weights, bias);
}

}  // namespace dcrnn
