#pragma once

// Brute-force reference convolution for the tests. Written independently of
// the library kernels as literal nested loops over the defining sum
//
//     out(p) = sum over t in [-m, m]^2 of in(p - r*t) * K(t)
//
// with out-of-range input treated as zero. Deliberately unoptimized.

#include <cstddef>
#include <vector>

namespace oracle {

struct ConvCase {
    std::size_t n_batch, in_ch, out_ch, n_time, n_freq, kt, kf, rt, rf;
    std::vector<double> input;    // [n_batch][in_ch][n_time][n_freq]
    std::vector<double> weights;  // [out_ch][in_ch][kt][kf]
    std::vector<double> bias;     // [out_ch], may be empty
};

inline std::vector<double> conv_reference(const ConvCase& c) {
    const long mt = static_cast<long>(c.kt / 2);
    const long mf = static_cast<long>(c.kf / 2);
    std::vector<double> out(c.n_batch * c.out_ch * c.n_time * c.n_freq, 0.0);
    for (std::size_t b = 0; b < c.n_batch; ++b)
        for (std::size_t oc = 0; oc < c.out_ch; ++oc)
            for (std::size_t pt = 0; pt < c.n_time; ++pt)
                for (std::size_t pf = 0; pf < c.n_freq; ++pf) {
                    double acc = c.bias.empty() ? 0.0 : c.bias[oc];
                    for (std::size_t ic = 0; ic < c.in_ch; ++ic)
                        for (long dt = -mt; dt <= mt; ++dt)
                            for (long df = -mf; df <= mf; ++df) {
                                const long st = static_cast<long>(pt) - static_cast<long>(c.rt) * dt;
                                const long sf = static_cast<long>(pf) - static_cast<long>(c.rf) * df;
                                if (st < 0 || st >= static_cast<long>(c.n_time)) continue;
                                if (sf < 0 || sf >= static_cast<long>(c.n_freq)) continue;
                                const double fv =
                                    c.input[((b * c.in_ch + ic) * c.n_time + st) * c.n_freq + sf];
                                const double kv =
                                    c.weights[((oc * c.in_ch + ic) * c.kt + (dt + mt)) * c.kf + (df + mf)];
                                acc += fv * kv;
                            }
                    out[((b * c.out_ch + oc) * c.n_time + pt) * c.n_freq + pf] = acc;
                }
    return out;
}

// The "a trous" view of a dilated kernel: r-1 zeros inserted between taps.
inline std::vector<double> zero_upsample_kernel(const std::vector<double>& weights, std::size_t out_ch,
                                                std::size_t in_ch, std::size_t kt, std::size_t kf, std::size_t rt,
                                                std::size_t rf, std::size_t& up_kt, std::size_t& up_kf) {
    up_kt = rt * (kt - 1) + 1;
    up_kf = rf * (kf - 1) + 1;
    std::vector<double> up(out_ch * in_ch * up_kt * up_kf, 0.0);
    for (std::size_t oc = 0; oc < out_ch; ++oc)
        for (std::size_t ic = 0; ic < in_ch; ++ic)
            for (std::size_t i = 0; i < kt; ++i)
                for (std::size_t j = 0; j < kf; ++j) {
                    up[((oc * in_ch + ic) * up_kt + i * rt) * up_kf + j * rf] =
                        weights[((oc * in_ch + ic) * kt + i) * kf + j];
                }
    return up;
}

}  // namespace oracle
