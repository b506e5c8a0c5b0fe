#pragma once

// Log mel-band energy front end: 20 ms Hamming-windowed frames with 50%
// overlap, power spectrum over the next power-of-two FFT, and a 40-band
// triangular filterbank on the HTK mel scale (unit-peak triangles), followed
// by a natural log with a fixed floor.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcrnn/audio.hpp"
#include "dcrnn/checkpoint.hpp"
#include "dcrnn/tensor.hpp"

namespace dcrnn {

inline constexpr double kFrameLenSeconds = 0.020;
inline constexpr double kFrameHopSeconds = 0.010;
inline constexpr double kLogFloorEpsilon = 1e-10;
inline constexpr std::size_t kDefaultMelBands = 40;

struct FeatureMatrix {
    std::size_t n_frames = 0;
    std::size_t n_mels = 0;
    std::vector<double> values;  // row-major [n_frames x n_mels]
    double frame_hop_seconds = kFrameHopSeconds;
    double frame_len_seconds = kFrameLenSeconds;

    double at(std::size_t frame, std::size_t mel) const { return values[frame * n_mels + mel]; }
    Tensor to_tensor() const { return Tensor::from_data({n_frames, n_mels}, values); }
};

inline std::size_t frame_length_samples(std::uint32_t sample_rate) {
    return static_cast<std::size_t>(std::lround(kFrameLenSeconds * sample_rate));
}

inline std::size_t frame_hop_samples(std::uint32_t sample_rate) {
    return static_cast<std::size_t>(std::lround(kFrameHopSeconds * sample_rate));
}

inline std::size_t frame_count(std::size_t n_samples, std::uint32_t sample_rate) {
    const std::size_t len = frame_length_samples(sample_rate);
    const std::size_t hop = frame_hop_samples(sample_rate);
    if (n_samples < len) return 0;
    return (n_samples - len) / hop + 1;
}

// Hamming-windowed frames; frame count = floor((N - len) / hop) + 1.
inline std::vector<std::vector<double>> frame_signal(const AudioClip& clip) {
    const std::size_t len = frame_length_samples(clip.sample_rate);
    const std::size_t hop = frame_hop_samples(clip.sample_rate);
    if (clip.samples.size() < len) {
        throw std::invalid_argument("frame_signal: clip of " + std::to_string(clip.samples.size()) +
                                    " samples is shorter than one " + std::to_string(len) + "-sample frame");
    }
    std::vector<double> window(len);
    for (std::size_t n = 0; n < len; ++n) {
        window[n] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(len - 1));
    }
    const std::size_t count = (clip.samples.size() - len) / hop + 1;
    std::vector<std::vector<double>> frames(count, std::vector<double>(len));
    for (std::size_t f = 0; f < count; ++f) {
        const double* src = clip.samples.data() + f * hop;
        for (std::size_t n = 0; n < len; ++n) frames[f][n] = src[n] * window[n];
    }
    return frames;
}

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace detail

struct MelFilterbank {
    std::size_t n_mels = 0;
    std::size_t n_bins = 0;           // n_fft/2 + 1
    std::vector<double> weights;      // row-major [n_mels x n_bins]
    std::vector<double> center_freqs;  // Hz, ascending

    double at(std::size_t mel, std::size_t bin) const { return weights[mel * n_bins + bin]; }
};

// Triangular unit-peak filters, centers equally spaced on the HTK mel scale
// between 0 Hz and sr/2.
inline MelFilterbank mel_filterbank(std::uint32_t sample_rate, std::size_t n_fft, std::size_t n_mels) {
    if (n_mels < 1) throw std::invalid_argument("mel_filterbank: n_mels must be >= 1");
    if (n_fft < 2) throw std::invalid_argument("mel_filterbank: n_fft must be >= 2");

    MelFilterbank fb;
    fb.n_mels = n_mels;
    fb.n_bins = n_fft / 2 + 1;
    fb.weights.assign(n_mels * fb.n_bins, 0.0);
    fb.center_freqs.resize(n_mels);

    const double mel_max = detail::hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = detail::mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
    }
    for (std::size_t m = 0; m < n_mels; ++m) fb.center_freqs[m] = edges[m + 1];

    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < fb.n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
            double w = 0.0;
            if (f > lo && f < center) {
                w = (f - lo) / (center - lo);
            } else if (f == center) {
                w = 1.0;
            } else if (f > center && f < hi) {
                w = (hi - f) / (hi - center);
            }
            fb.weights[m * fb.n_bins + k] = w;
        }
    }
    return fb;
}

// Full front end: frames -> power spectrum -> mel energies -> natural log.
inline FeatureMatrix logmel(const AudioClip& clip, std::size_t n_mels = kDefaultMelBands,
                            double floor_epsilon = kLogFloorEpsilon) {
    if (clip.sample_rate < 8000) {
        throw std::invalid_argument("logmel: sample rate " + std::to_string(clip.sample_rate) + " below 8000 Hz");
    }
    if (n_mels < 1) throw std::invalid_argument("logmel: n_mels must be >= 1");

    const auto frames = frame_signal(clip);
    const std::size_t frame_len = frame_length_samples(clip.sample_rate);
    const std::size_t n_fft = detail::next_pow2(frame_len);
    const MelFilterbank fb = mel_filterbank(clip.sample_rate, n_fft, n_mels);

    FeatureMatrix out;
    out.n_frames = frames.size();
    out.n_mels = n_mels;
    out.values.assign(frames.size() * n_mels, 0.0);
    out.frame_hop_seconds = static_cast<double>(frame_hop_samples(clip.sample_rate)) / clip.sample_rate;
    out.frame_len_seconds = static_cast<double>(frame_len) / clip.sample_rate;

    std::vector<std::complex<double>> buf(n_fft);
    std::vector<double> power(fb.n_bins);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        for (std::size_t n = 0; n < frame_len; ++n) buf[n] = frames[f][n];
        detail::fft_radix2(buf);
        for (std::size_t k = 0; k < fb.n_bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t m = 0; m < n_mels; ++m) {
            const double* w = fb.weights.data() + m * fb.n_bins;
            double energy = 0.0;
            for (std::size_t k = 0; k < fb.n_bins; ++k) energy += w[k] * power[k];
            out.values[f * n_mels + m] = std::log(energy + floor_epsilon);
        }
    }
    return out;
}

// --- Feature cache (container with "FEAT" magic) -----------------------------

inline void save_feature_cache(const std::string& path,
                               const std::vector<std::pair<std::string, FeatureMatrix>>& features) {
    NamedTensors records;
    for (const auto& [id, fm] : features) {
        records.emplace_back(id, Tensor::from_data({fm.n_frames, fm.n_mels}, fm.values));
        records.emplace_back(id + "/meta",
                             Tensor::from_data({2}, {fm.frame_hop_seconds, fm.frame_len_seconds}));
    }
    save_container(path, kFeatureMagic, records);
}

inline std::vector<std::pair<std::string, FeatureMatrix>> load_feature_cache(const std::string& path) {
    const NamedTensors records = load_container(path, kFeatureMagic);
    std::map<std::string, Tensor> by_name;
    std::vector<std::string> order;
    for (const auto& [name, tensor] : records) {
        if (name.size() < 5 || name.substr(name.size() - 5) != "/meta") order.push_back(name);
        by_name.emplace(name, tensor);
    }
    std::vector<std::pair<std::string, FeatureMatrix>> out;
    for (const std::string& id : order) {
        const Tensor& values = by_name.at(id);
        if (values.rank() != 2) throw std::runtime_error("feature cache record '" + id + "' is not a matrix");
        auto meta_it = by_name.find(id + "/meta");
        if (meta_it == by_name.end()) throw std::runtime_error("feature cache record '" + id + "' missing meta");
        FeatureMatrix fm;
        fm.n_frames = values.dim(0);
        fm.n_mels = values.dim(1);
        fm.values = values.data();
        fm.frame_hop_seconds = meta_it->second.data()[0];
        fm.frame_len_seconds = meta_it->second.data()[1];
        out.emplace_back(id, std::move(fm));
    }
    return out;
}

}  // namespace dcrnn
