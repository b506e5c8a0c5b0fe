#pragma once

// Bidirectional LSTM over [batch, time, feat]. Two independent recurrences
// (left-to-right and right-to-left) share the input; their per-timestep
// outputs are concatenated to [batch, time, 2*hidden]. Gates use the usual
// sigmoid/tanh cell with gate order (input, forget, candidate, output).
// The backward pass is hand-written BPTT over cached gate activations.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dcrnn/tensor.hpp"

namespace dcrnn {

struct LstmDirection {
    Tensor w_input;  // [feat, 4*hidden]
    Tensor w_recur;  // [hidden, 4*hidden]
    Tensor bias;     // [4*hidden]
};

struct BlstmParams {
    std::size_t hidden_size = 0;
    LstmDirection forward_cell;
    LstmDirection backward_cell;

    static BlstmParams zeros(std::size_t feat, std::size_t hidden) {
        BlstmParams p;
        p.hidden_size = hidden;
        for (LstmDirection* d : {&p.forward_cell, &p.backward_cell}) {
            d->w_input = Tensor({feat, 4 * hidden});
            d->w_recur = Tensor({hidden, 4 * hidden});
            d->bias = Tensor({4 * hidden});
        }
        return p;
    }
};

namespace detail {

struct LstmTrace {
    // Indexed by processing step, not absolute time.
    std::vector<double> gates;   // [T][B][4H] post-activation (i, f, g, o)
    std::vector<double> cells;   // [T][B][H]
    std::vector<double> hidden;  // [T][B][H]
};

inline void lstm_run_direction(const Tensor& x, const LstmDirection& dir, std::size_t hidden, bool reverse,
                               LstmTrace& trace) {
    const std::size_t n_batch = x.dim(0), n_time = x.dim(1), feat = x.dim(2);
    const std::size_t gate_w = 4 * hidden;
    trace.gates.assign(n_time * n_batch * gate_w, 0.0);
    trace.cells.assign(n_time * n_batch * hidden, 0.0);
    trace.hidden.assign(n_time * n_batch * hidden, 0.0);

    const double* wx = dir.w_input.data().data();
    const double* wh = dir.w_recur.data().data();
    const double* bias = dir.bias.data().data();

    std::vector<double> z(n_batch * gate_w);
    for (std::size_t s = 0; s < n_time; ++s) {
        const std::size_t t = reverse ? n_time - 1 - s : s;
        const double* h_prev = s == 0 ? nullptr : trace.hidden.data() + (s - 1) * n_batch * hidden;
        const double* c_prev = s == 0 ? nullptr : trace.cells.data() + (s - 1) * n_batch * hidden;
        for (std::size_t b = 0; b < n_batch; ++b) {
            double* zb = z.data() + b * gate_w;
            for (std::size_t j = 0; j < gate_w; ++j) zb[j] = bias[j];
            const double* xb = x.data().data() + (b * n_time + t) * feat;
            for (std::size_t k = 0; k < feat; ++k) {
                const double v = xb[k];
                if (v == 0.0) continue;
                const double* row = wx + k * gate_w;
                for (std::size_t j = 0; j < gate_w; ++j) zb[j] += v * row[j];
            }
            if (h_prev) {
                const double* hb = h_prev + b * hidden;
                for (std::size_t k = 0; k < hidden; ++k) {
                    const double v = hb[k];
                    if (v == 0.0) continue;
                    const double* row = wh + k * gate_w;
                    for (std::size_t j = 0; j < gate_w; ++j) zb[j] += v * row[j];
                }
            }
            double* gates = trace.gates.data() + (s * n_batch + b) * gate_w;
            double* cell = trace.cells.data() + (s * n_batch + b) * hidden;
            double* hout = trace.hidden.data() + (s * n_batch + b) * hidden;
            for (std::size_t k = 0; k < hidden; ++k) {
                const double zi = zb[k], zf = zb[hidden + k], zg = zb[2 * hidden + k], zo = zb[3 * hidden + k];
                const double gi = 1.0 / (1.0 + std::exp(-zi));
                const double gf = 1.0 / (1.0 + std::exp(-zf));
                const double gg = std::tanh(zg);
                const double go = 1.0 / (1.0 + std::exp(-zo));
                const double c = gf * (c_prev ? c_prev[b * hidden + k] : 0.0) + gi * gg;
                gates[k] = gi;
                gates[hidden + k] = gf;
                gates[2 * hidden + k] = gg;
                gates[3 * hidden + k] = go;
                cell[k] = c;
                hout[k] = go * std::tanh(c);
            }
        }
    }
}

// BPTT for one direction. `dh_out(b, s)` must return the output gradient row
// for processing step s. Accumulates into the param grads and dx.
inline void lstm_backward_direction(const TensorNode& x, TensorNode* dx, const LstmDirection& dir,
                                    TensorNode* dwx_node, TensorNode* dwh_node, TensorNode* db_node,
                                    std::size_t hidden, bool reverse, const LstmTrace& trace,
                                    const double* grad_out, std::size_t out_width, std::size_t out_offset) {
    const std::size_t n_batch = x.shape[0], n_time = x.shape[1], feat = x.shape[2];
    const std::size_t gate_w = 4 * hidden;
    const double* wx = dir.w_input.data().data();
    const double* wh = dir.w_recur.data().data();

    std::vector<double> dh(n_batch * hidden, 0.0);
    std::vector<double> dc(n_batch * hidden, 0.0);
    std::vector<double> dz(n_batch * gate_w);

    for (std::size_t s = n_time; s-- > 0;) {
        const std::size_t t = reverse ? n_time - 1 - s : s;
        const double* gates = trace.gates.data() + s * n_batch * gate_w;
        const double* cell = trace.cells.data() + s * n_batch * hidden;
        const double* c_prev = s == 0 ? nullptr : trace.cells.data() + (s - 1) * n_batch * hidden;
        const double* h_prev = s == 0 ? nullptr : trace.hidden.data() + (s - 1) * n_batch * hidden;

        for (std::size_t b = 0; b < n_batch; ++b) {
            const double* go_row = grad_out + (b * n_time + t) * out_width + out_offset;
            double* dhb = dh.data() + b * hidden;
            double* dcb = dc.data() + b * hidden;
            double* dzb = dz.data() + b * gate_w;
            const double* gb = gates + b * gate_w;
            const double* cb = cell + b * hidden;
            for (std::size_t k = 0; k < hidden; ++k) {
                const double gi = gb[k], gf = gb[hidden + k], gg = gb[2 * hidden + k], go = gb[3 * hidden + k];
                const double tc = std::tanh(cb[k]);
                const double dh_total = dhb[k] + go_row[k];
                const double dct = dcb[k] + dh_total * go * (1.0 - tc * tc);
                const double cp = c_prev ? c_prev[b * hidden + k] : 0.0;
                dzb[k] = dct * gg * gi * (1.0 - gi);
                dzb[hidden + k] = dct * cp * gf * (1.0 - gf);
                dzb[2 * hidden + k] = dct * gi * (1.0 - gg * gg);
                dzb[3 * hidden + k] = dh_total * tc * go * (1.0 - go);
                dcb[k] = dct * gf;  // flows to c_{prev}
            }
        }

        if (db_node) {
            for (std::size_t b = 0; b < n_batch; ++b) {
                const double* dzb = dz.data() + b * gate_w;
                for (std::size_t j = 0; j < gate_w; ++j) db_node->grad[j] += dzb[j];
            }
        }
        if (dwx_node) {
            for (std::size_t b = 0; b < n_batch; ++b) {
                const double* xb = x.data.data() + (b * n_time + t) * feat;
                const double* dzb = dz.data() + b * gate_w;
                for (std::size_t k = 0; k < feat; ++k) {
                    const double v = xb[k];
                    if (v == 0.0) continue;
                    double* row = dwx_node->grad.data() + k * gate_w;
                    for (std::size_t j = 0; j < gate_w; ++j) row[j] += v * dzb[j];
                }
            }
        }
        if (dwh_node && h_prev) {
            for (std::size_t b = 0; b < n_batch; ++b) {
                const double* hb = h_prev + b * hidden;
                const double* dzb = dz.data() + b * gate_w;
                for (std::size_t k = 0; k < hidden; ++k) {
                    const double v = hb[k];
                    if (v == 0.0) continue;
                    double* row = dwh_node->grad.data() + k * gate_w;
                    for (std::size_t j = 0; j < gate_w; ++j) row[j] += v * dzb[j];
                }
            }
        }
        if (dx) {
            for (std::size_t b = 0; b < n_batch; ++b) {
                double* dxb = dx->grad.data() + (b * n_time + t) * feat;
                const double* dzb = dz.data() + b * gate_w;
                for (std::size_t k = 0; k < feat; ++k) {
                    const double* row = wx + k * gate_w;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < gate_w; ++j) acc += row[j] * dzb[j];
                    dxb[k] += acc;
                }
            }
        }
        // dh_prev = dz * Wh^T
        std::fill(dh.begin(), dh.end(), 0.0);
        if (s > 0) {
            for (std::size_t b = 0; b < n_batch; ++b) {
                double* dhb = dh.data() + b * hidden;
                const double* dzb = dz.data() + b * gate_w;
                for (std::size_t k = 0; k < hidden; ++k) {
                    const double* row = wh + k * gate_w;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < gate_w; ++j) acc += row[j] * dzb[j];
                    dhb[k] += acc;
                }
            }
        }
    }
}

}  // namespace detail

inline Tensor blstm_forward(const Tensor& x, const BlstmParams& params) {
    if (x.rank() != 3) {
        throw std::invalid_argument("blstm_forward: expected rank-3 [batch, time, feat], got " +
                                    shape_to_string(x.shape()));
    }
    const std::size_t n_batch = x.dim(0), n_time = x.dim(1), feat = x.dim(2);
    const std::size_t hidden = params.hidden_size;
    if (n_time == 0) throw std::invalid_argument("blstm_forward: time length 0 rejected");
    if (hidden == 0) throw std::invalid_argument("blstm_forward: hidden size must be positive");
    for (const LstmDirection* d : {&params.forward_cell, &params.backward_cell}) {
        if (d->w_input.shape() != Shape{feat, 4 * hidden} || d->w_recur.shape() != Shape{hidden, 4 * hidden} ||
            d->bias.shape() != Shape{4 * hidden}) {
            throw std::invalid_argument("blstm_forward: cell parameter shapes do not match feat=" +
                                        std::to_string(feat) + " hidden=" + std::to_string(hidden));
        }
    }

    auto fwd_trace = std::make_shared<detail::LstmTrace>();
    auto bwd_trace = std::make_shared<detail::LstmTrace>();
    detail::lstm_run_direction(x, params.forward_cell, hidden, false, *fwd_trace);
    detail::lstm_run_direction(x, params.backward_cell, hidden, true, *bwd_trace);

    Tensor out({n_batch, n_time, 2 * hidden});
    for (std::size_t b = 0; b < n_batch; ++b)
        for (std::size_t t = 0; t < n_time; ++t) {
            double* orow = out.data().data() + (b * n_time + t) * 2 * hidden;
            const double* hf = fwd_trace->hidden.data() + (t * n_batch + b) * hidden;
            const double* hb = bwd_trace->hidden.data() + ((n_time - 1 - t) * n_batch + b) * hidden;
            std::copy(hf, hf + hidden, orow);
            std::copy(hb, hb + hidden, orow + hidden);
        }

    const LstmDirection fwd = params.forward_cell;
    const LstmDirection bwd = params.backward_cell;
    detail::wire(out,
                 {x, fwd.w_input, fwd.w_recur, fwd.bias, bwd.w_input, bwd.w_recur, bwd.bias},
                 [xn = x.node(), fwd, bwd, on = out.node().get(), fwd_trace, bwd_trace, hidden]() {
                     auto grad_target = [](const Tensor& t) -> TensorNode* {
                         if (!t.node()->requires_grad) return nullptr;
                         t.node()->ensure_grad();
                         return t.node().get();
                     };
                     TensorNode* dx = nullptr;
                     if (xn->requires_grad) {
                         xn->ensure_grad();
                         dx = xn.get();
                     }
                     detail::lstm_backward_direction(*xn, dx, fwd, grad_target(fwd.w_input), grad_target(fwd.w_recur),
                                                     grad_target(fwd.bias), hidden, false, *fwd_trace,
                                                     on->grad.data(), 2 * hidden, 0);
                     detail::lstm_backward_direction(*xn, dx, bwd, grad_target(bwd.w_input), grad_target(bwd.w_recur),
                                                     grad_target(bwd.bias), hidden, true, *bwd_trace,
                                                     on->grad.data(), 2 * hidden, hidden);
                 });
    return out;
}

}  // namespace dcrnn
