#pragma once

// Per-frame, per-class binary cross-entropy for multi-label targets, with an
// optional per-frame validity mask so zero-padded chunk tails drop out of
// the mean.

#include <cstddef>
#include <stdexcept>

#include "dcrnn/tensor.hpp"

namespace dcrnn {

inline constexpr double kBceClamp = 1e-7;

// pred: [batch, time, classes] probabilities; target: same shape, 0/1;
// mask: [batch, time] with 1 = valid frame, or an empty tensor for all-valid.
// Returns the mean over valid cells of -[y log p + (1-y) log(1-p)], with
// probabilities clamped to [1e-7, 1 - 1e-7].
inline Tensor bce_loss(const Tensor& pred, const Tensor& target, const Tensor& mask = Tensor()) {
    if (pred.rank() != 3) {
        throw std::invalid_argument("bce_loss: pred must be rank-3 [batch, time, classes], got " +
                                    shape_to_string(pred.shape()));
    }
    detail::require_same_shape(pred, target, "bce_loss");
    const std::size_t n_batch = pred.dim(0), n_time = pred.dim(1), classes = pred.dim(2);
    const bool has_mask = mask.size() != 0;
    if (has_mask && mask.shape() != Shape{n_batch, n_time}) {
        throw std::invalid_argument("bce_loss: mask shape " + shape_to_string(mask.shape()) + " must be [" +
                                    std::to_string(n_batch) + ", " + std::to_string(n_time) + "]");
    }

    double acc = 0.0;
    std::size_t n_valid = 0;
    for (std::size_t b = 0; b < n_batch; ++b)
        for (std::size_t t = 0; t < n_time; ++t) {
            if (has_mask && mask.data()[b * n_time + t] == 0.0) continue;
            n_valid += classes;
            const double* p = pred.data().data() + (b * n_time + t) * classes;
            const double* y = target.data().data() + (b * n_time + t) * classes;
            for (std::size_t c = 0; c < classes; ++c) {
                const double pc = std::clamp(p[c], kBceClamp, 1.0 - kBceClamp);
                acc -= y[c] * std::log(pc) + (1.0 - y[c]) * std::log(1.0 - pc);
            }
        }
    if (n_valid == 0) throw std::invalid_argument("bce_loss: no valid frames under the mask");

    Tensor out = Tensor::scalar(acc / static_cast<double>(n_valid));
    detail::wire(out, {pred}, [pn = pred.node(), yn = target.node(), mn = mask.node(), on = out.node().get(),
                               n_batch, n_time, classes, has_mask, n_valid]() {
        if (!pn->requires_grad) return;
        pn->ensure_grad();
        const double scale = on->grad[0] / static_cast<double>(n_valid);
        for (std::size_t b = 0; b < n_batch; ++b)
            for (std::size_t t = 0; t < n_time; ++t) {
                if (has_mask && mn->data[b * n_time + t] == 0.0) continue;
                const std::size_t base = (b * n_time + t) * classes;
                for (std::size_t c = 0; c < classes; ++c) {
                    const double p = pn->data[base + c];
                    if (p < kBceClamp || p > 1.0 - kBceClamp) continue;  // clamp region: flat
                    const double y = yn->data[base + c];
                    pn->grad[base + c] += scale * (p - y) / (p * (1.0 - p));
                }
            }
    });
    return out;
}

}  // namespace dcrnn
