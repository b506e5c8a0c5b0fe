#pragma once

// Layer ops for the CRNN blocks: ReLU, frequency-axis max pooling, batch
// normalization, inverted dropout, and the dense+sigmoid output layer.
// Pooling never touches the time axis; the network keeps one output per
// input frame.

#include <cstddef>
#include <limits>
#include <random>
#include <stdexcept>

#include "dcrnn/tensor.hpp"

namespace dcrnn {

enum class Mode { train, eval };

inline Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    detail::wire(out, {x}, [xn = x.node(), on = out.node().get()]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < xn->grad.size(); ++i) {
            if (xn->data[i] > 0.0) xn->grad[i] += on->grad[i];
        }
    });
    return out;
}

// Max pooling over the frequency axis of [batch, ch, time, freq]. When freq
// is not divisible by `pool` the tail window is padded with -inf, so the
// output width is ceil(freq / pool). Gradient routes to each argmax.
inline Tensor max_pool_freq(const Tensor& x, std::size_t pool) {
    if (pool < 1) throw std::invalid_argument("max_pool_freq: pool must be >= 1");
    if (x.rank() != 4) {
        throw std::invalid_argument("max_pool_freq: expected rank-4 [batch, ch, time, freq], got " +
                                    shape_to_string(x.shape()));
    }
    if (pool == 1) {
        Tensor out = Tensor::from_data(x.shape(), x.data());
        detail::wire(out, {x}, [xn = x.node(), on = out.node().get()]() {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
        return out;
    }
    const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2);
    const std::size_t freq = x.dim(3);
    const std::size_t out_freq = (freq + pool - 1) / pool;
    Tensor out({x.dim(0), x.dim(1), x.dim(2), out_freq});
    std::vector<std::size_t> argmax(rows * out_freq);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in_row = x.data().data() + r * freq;
        double* out_row = out.data().data() + r * out_freq;
        for (std::size_t o = 0; o < out_freq; ++o) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_idx = o * pool;
            const std::size_t end = std::min(freq, (o + 1) * pool);
            for (std::size_t k = o * pool; k < end; ++k) {
                if (in_row[k] > best) {
                    best = in_row[k];
                    best_idx = k;
                }
            }
            out_row[o] = best;
            argmax[r * out_freq + o] = r * freq + best_idx;
        }
    }
    detail::wire(out, {x}, [xn = x.node(), on = out.node().get(), argmax = std::move(argmax)]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < argmax.size(); ++i) xn->grad[argmax[i]] += on->grad[i];
    });
    return out;
}

// Per-channel running statistics for batch normalization.
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.9;
    double epsilon = 1e-5;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

// Batch normalization over [batch, ch, time, freq], normalizing each channel
// across batch x time x freq. Train mode uses batch statistics and updates
// the running stats in place; eval mode is the affine map from running stats.
inline Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode) {
    if (x.rank() != 4) {
        throw std::invalid_argument("batch_norm: expected rank-4 [batch, ch, time, freq], got " +
                                    shape_to_string(x.shape()));
    }
    const std::size_t n_batch = x.dim(0), n_ch = x.dim(1), plane = x.dim(2) * x.dim(3);
    if (gamma.shape() != Shape{n_ch} || beta.shape() != Shape{n_ch}) {
        throw std::invalid_argument("batch_norm: gamma/beta must be [" + std::to_string(n_ch) + "]");
    }
    if (state.running_mean.size() != n_ch) {
        throw std::invalid_argument("batch_norm: state tracks " + std::to_string(state.running_mean.size()) +
                                    " channels, input has " + std::to_string(n_ch));
    }

    Tensor out(x.shape());
    const std::size_t per_ch = n_batch * plane;
    std::vector<double> mean(n_ch), inv_std(n_ch);

    if (mode == Mode::train) {
        for (std::size_t c = 0; c < n_ch; ++c) {
            double m = 0.0;
            for (std::size_t b = 0; b < n_batch; ++b) {
                const double* p = x.data().data() + (b * n_ch + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) m += p[i];
            }
            m /= static_cast<double>(per_ch);
            double v = 0.0;
            for (std::size_t b = 0; b < n_batch; ++b) {
                const double* p = x.data().data() + (b * n_ch + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
            }
            v /= static_cast<double>(per_ch);
            mean[c] = m;
            inv_std[c] = 1.0 / std::sqrt(v + state.epsilon);
            state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * m;
            state.running_var[c] = state.momentum * state.running_var[c] + (1.0 - state.momentum) * v;
        }
    } else {
        for (std::size_t c = 0; c < n_ch; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
        }
    }

    std::vector<double> x_hat(x.size());
    for (std::size_t b = 0; b < n_batch; ++b)
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double* p = x.data().data() + (b * n_ch + c) * plane;
            double* h = x_hat.data() + (b * n_ch + c) * plane;
            double* o = out.data().data() + (b * n_ch + c) * plane;
            const double g = gamma.data()[c], bt = beta.data()[c];
            for (std::size_t i = 0; i < plane; ++i) {
                h[i] = (p[i] - mean[c]) * inv_std[c];
                o[i] = g * h[i] + bt;
            }
        }

    detail::wire(out, {x, gamma, beta},
                 [xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node().get(), x_hat = std::move(x_hat),
                  inv_std = std::move(inv_std), mode, n_batch, n_ch, plane]() {
                     const std::size_t per_ch = n_batch * plane;
                     for (std::size_t c = 0; c < n_ch; ++c) {
                         const double g = gn->data[c];
                         double sum_dy = 0.0, sum_dy_xhat = 0.0;
                         for (std::size_t b = 0; b < n_batch; ++b) {
                             const double* dy = on->grad.data() + (b * n_ch + c) * plane;
                             const double* h = x_hat.data() + (b * n_ch + c) * plane;
                             for (std::size_t i = 0; i < plane; ++i) {
                                 sum_dy += dy[i];
                                 sum_dy_xhat += dy[i] * h[i];
                             }
                         }
                         if (gn->requires_grad) {
                             gn->ensure_grad();
                             gn->grad[c] += sum_dy_xhat;
                         }
                         if (bn->requires_grad) {
                             bn->ensure_grad();
                             bn->grad[c] += sum_dy;
                         }
                         if (xn->requires_grad) {
                             xn->ensure_grad();
                             const double n = static_cast<double>(per_ch);
                             for (std::size_t b = 0; b < n_batch; ++b) {
                                 const double* dy = on->grad.data() + (b * n_ch + c) * plane;
                                 const double* h = x_hat.data() + (b * n_ch + c) * plane;
                                 double* dx = xn->grad.data() + (b * n_ch + c) * plane;
                                 if (mode == Mode::train) {
                                     // Batch statistics depend on x, so the mean
                                     // and variance terms enter the gradient.
                                     for (std::size_t i = 0; i < plane; ++i) {
                                         dx[i] += g * inv_std[c] *
                                                  (dy[i] - sum_dy / n - h[i] * sum_dy_xhat / n);
                                     }
                                 } else {
                                     for (std::size_t i = 0; i < plane; ++i) dx[i] += g * inv_std[c] * dy[i];
                                 }
                             }
                         }
                     }
                 });
    return out;
}

// Inverted dropout: train mode zeroes each element with probability `rate`
// and scales survivors by 1/(1-rate); eval mode is the identity.
inline Tensor dropout(const Tensor& x, double rate, Mode mode, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) {
        Tensor out = Tensor::from_data(x.shape(), x.data());
        detail::wire(out, {x}, [xn = x.node(), on = out.node().get()]() {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
        return out;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> mask(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mask[i] = uni(rng) < rate ? 0.0 : keep_scale;
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * mask[i];
    detail::wire(out, {x}, [xn = x.node(), on = out.node().get(), mask = std::move(mask)]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += mask[i] * on->grad[i];
    });
    return out;
}

// Per-frame affine map followed by a sigmoid: [batch, time, feat] x [feat,
// classes] + [classes] -> probabilities in (0, 1).
inline Tensor dense_sigmoid(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 3) {
        throw std::invalid_argument("dense_sigmoid: expected rank-3 [batch, time, feat], got " +
                                    shape_to_string(x.shape()));
    }
    const std::size_t frames = x.dim(0) * x.dim(1), feat = x.dim(2);
    if (weight.rank() != 2 || weight.dim(0) != feat) {
        throw std::invalid_argument("dense_sigmoid: weight must be [" + std::to_string(feat) + ", classes], got " +
                                    shape_to_string(weight.shape()));
    }
    const std::size_t classes = weight.dim(1);
    if (bias.shape() != Shape{classes}) {
        throw std::invalid_argument("dense_sigmoid: bias must be [" + std::to_string(classes) + "]");
    }

    Tensor out({x.dim(0), x.dim(1), classes});
    for (std::size_t r = 0; r < frames; ++r) {
        const double* xi = x.data().data() + r * feat;
        double* oi = out.data().data() + r * classes;
        for (std::size_t c = 0; c < classes; ++c) oi[c] = bias.data()[c];
        for (std::size_t k = 0; k < feat; ++k) {
            const double v = xi[k];
            const double* wrow = weight.data().data() + k * classes;
            for (std::size_t c = 0; c < classes; ++c) oi[c] += v * wrow[c];
        }
        for (std::size_t c = 0; c < classes; ++c) oi[c] = 1.0 / (1.0 + std::exp(-oi[c]));
    }

    detail::wire(out, {x, weight, bias},
                 [xn = x.node(), wn = weight.node(), bn = bias.node(), on = out.node().get(), frames, feat,
                  classes]() {
                     // dz = dy * p * (1 - p), then the usual affine backward.
                     std::vector<double> dz(frames * classes);
                     for (std::size_t i = 0; i < dz.size(); ++i) {
                         const double p = on->data[i];
                         dz[i] = on->grad[i] * p * (1.0 - p);
                     }
                     if (bn->requires_grad) {
                         bn->ensure_grad();
                         for (std::size_t r = 0; r < frames; ++r)
                             for (std::size_t c = 0; c < classes; ++c) bn->grad[c] += dz[r * classes + c];
                     }
                     if (wn->requires_grad) {
                         wn->ensure_grad();
                         for (std::size_t r = 0; r < frames; ++r) {
                             const double* xi = xn->data.data() + r * feat;
                             const double* dzr = dz.data() + r * classes;
                             for (std::size_t k = 0; k < feat; ++k) {
                                 double* wrow = wn->grad.data() + k * classes;
                                 const double v = xi[k];
                                 for (std::size_t c = 0; c < classes; ++c) wrow[c] += v * dzr[c];
                             }
                         }
                     }
                     if (xn->requires_grad) {
                         xn->ensure_grad();
                         for (std::size_t r = 0; r < frames; ++r) {
                             double* dxr = xn->grad.data() + r * feat;
                             const double* dzr = dz.data() + r * classes;
                             for (std::size_t k = 0; k < feat; ++k) {
                                 const double* wrow = wn->data.data() + k * classes;
                                 double acc = 0.0;
                                 for (std::size_t c = 0; c < classes; ++c) acc += wrow[c] * dzr[c];
                                 dxr[k] += acc;
                             }
                         }
                     }
                 });
    return out;
}

}  // namespace dcrnn
