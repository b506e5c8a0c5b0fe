#pragma once

// Adam optimizer with bias-corrected first/second moments (Kingma & Ba
// defaults: beta1 0.9, beta2 0.999, epsilon 1e-8).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dcrnn/tensor.hpp"

namespace dcrnn {

struct AdamState {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// One Adam update over a fixed parameter list. Gradients are read from each
// tensor's grad buffer (a backward pass must have run). Moment buffers are
// allocated on first use and must keep matching shapes afterwards.
inline void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (state.first_moment.empty()) {
        state.first_moment.resize(params.size());
        state.second_moment.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.first_moment[i].assign(params[i].size(), 0.0);
            state.second_moment[i].assign(params[i].size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    }

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (state.first_moment[i].size() != p.size()) {
            throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " changed size");
        }
        const std::vector<double>& g = p.grad();
        std::vector<double>& m = state.first_moment[i];
        std::vector<double>& v = state.second_moment[i];
        double* values = p.data().data();
        for (std::size_t k = 0; k < g.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            values[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

}  // namespace dcrnn
