#include <gtest/gtest.h>

#include <random>

#include "dcrnn/blstm.hpp"
#include "dcrnn/tensor.hpp"
#include "grad_check.hpp"

using namespace dcrnn;
using testutil::random_tensor;

namespace {

BlstmParams random_params(std::size_t feat, std::size_t hidden, std::mt19937_64& rng, bool requires_grad = false) {
    BlstmParams p = BlstmParams::zeros(feat, hidden);
    for (LstmDirection* d : {&p.forward_cell, &p.backward_cell}) {
        d->w_input = random_tensor({feat, 4 * hidden}, rng, -0.5, 0.5, requires_grad);
        d->w_recur = random_tensor({hidden, 4 * hidden}, rng, -0.5, 0.5, requires_grad);
        d->bias = random_tensor({4 * hidden}, rng, -0.2, 0.2, requires_grad);
    }
    return p;
}

}  // namespace

TEST(Blstm, OutputWidthIsTwiceHidden) {
    std::mt19937_64 rng(1);
    const BlstmParams p = random_params(3, 4, rng);
    const Tensor x = random_tensor({2, 5, 3}, rng);
    const Tensor y = blstm_forward(x, p);
    EXPECT_EQ(y.shape(), (Shape{2, 5, 8}));
}

TEST(Blstm, AllZeroParamsGiveAllZeroOutput) {
    const BlstmParams p = BlstmParams::zeros(3, 4);
    std::mt19937_64 rng(2);
    const Tensor x = random_tensor({1, 6, 3}, rng);
    const Tensor y = blstm_forward(x, p);
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Blstm, ReversedInputSwapsDirectionStreams) {
    // Swapping the cells and reversing time must reproduce the original
    // output with the forward/backward halves exchanged.
    std::mt19937_64 rng(3);
    const std::size_t feat = 3, hidden = 2, n_time = 7;
    const BlstmParams p = random_params(feat, hidden, rng);
    const Tensor x = random_tensor({1, n_time, feat}, rng);

    Tensor x_rev({1, n_time, feat});
    for (std::size_t t = 0; t < n_time; ++t)
        for (std::size_t k = 0; k < feat; ++k) x_rev.data()[t * feat + k] = x.data()[(n_time - 1 - t) * feat + k];

    BlstmParams swapped = p;
    std::swap(swapped.forward_cell, swapped.backward_cell);

    const Tensor y = blstm_forward(x, p);
    const Tensor y_swapped = blstm_forward(x_rev, swapped);
    for (std::size_t t = 0; t < n_time; ++t)
        for (std::size_t k = 0; k < hidden; ++k) {
            const std::size_t tr = n_time - 1 - t;
            // forward half of y at t == backward half of y_swapped at reversed t
            EXPECT_NEAR(y.data()[t * 2 * hidden + k], y_swapped.data()[tr * 2 * hidden + hidden + k], 1e-12);
            // backward half of y at t == forward half of y_swapped at reversed t
            EXPECT_NEAR(y.data()[t * 2 * hidden + hidden + k], y_swapped.data()[tr * 2 * hidden + k], 1e-12);
        }
}

TEST(Blstm, RejectsBadInput) {
    const BlstmParams p = BlstmParams::zeros(3, 4);
    EXPECT_THROW(blstm_forward(Tensor({2, 3}), p), std::invalid_argument);
    EXPECT_THROW(blstm_forward(Tensor({1, 5, 4}), p), std::invalid_argument);  // feat mismatch
}

TEST(Blstm, GradientCheckFiveTimesteps) {
    std::mt19937_64 rng(4);
    const std::size_t feat = 3, hidden = 2;
    BlstmParams p = random_params(feat, hidden, rng, true);
    Tensor x = random_tensor({2, 5, feat}, rng, -1.0, 1.0, true);

    auto loss = [&]() {
        Tensor y = blstm_forward(x, p);
        return sum(mul(y, y));
    };
    testutil::expect_gradients_match(
        {x, p.forward_cell.w_input, p.forward_cell.w_recur, p.forward_cell.bias, p.backward_cell.w_input,
         p.backward_cell.w_recur, p.backward_cell.bias},
        loss);
}

TEST(Blstm, DeterministicForward) {
    std::mt19937_64 rng(5);
    const BlstmParams p = random_params(4, 3, rng);
    const Tensor x = random_tensor({2, 6, 4}, rng);
    const Tensor y1 = blstm_forward(x, p);
    const Tensor y2 = blstm_forward(x, p);
    EXPECT_EQ(y1.data(), y2.data());
}
