#include <gtest/gtest.h>

#include <random>

#include "dcrnn/layers.hpp"
#include "dcrnn/tensor.hpp"
#include "grad_check.hpp"

using namespace dcrnn;
using testutil::random_tensor;

TEST(Relu, ClampsAndMasksGradient) {
    Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0}, true);
    Tensor y = relu(x);
    EXPECT_EQ(y.data(), (std::vector<double>{0.0, 0.0, 2.0}));
    Tensor loss = sum(y);
    backward(loss);
    EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);  // subgradient 0 at the kink
    EXPECT_DOUBLE_EQ(x.grad()[2], 1.0);
}

TEST(Relu, GradientCheck) {
    std::mt19937_64 rng(17);
    Tensor x = random_tensor({4, 7}, rng, -1.0, 1.0, true);
    auto loss = [&]() { return sum(mul(relu(x), relu(x))); };
    testutil::expect_gradients_match({x}, loss);
}

TEST(MaxPoolFreq, PoolOfOneIsIdentity) {
    std::mt19937_64 rng(1);
    Tensor x = random_tensor({2, 3, 4, 5}, rng);
    Tensor y = max_pool_freq(x, 1);
    EXPECT_EQ(y.data(), x.data());
    EXPECT_EQ(y.shape(), x.shape());
}

TEST(MaxPoolFreq, PoolsAlongFreqOnly) {
    // [[1,3],[2,0]] along freq with pool 2 -> [[3],[2]].
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 3, 2, 0});
    Tensor y = max_pool_freq(x, 2);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 1}));
    EXPECT_EQ(y.data(), (std::vector<double>{3, 2}));
}

TEST(MaxPoolFreq, TimeAxisLengthPreserved) {
    std::mt19937_64 rng(2);
    Tensor x = random_tensor({2, 4, 9, 10}, rng);
    Tensor y = max_pool_freq(x, 2);
    EXPECT_EQ(y.dim(2), 9u);
    EXPECT_EQ(y.dim(3), 5u);
}

TEST(MaxPoolFreq, OddWidthPadsWithNegInfinity) {
    Tensor x = Tensor::from_data({1, 1, 1, 5}, {-3, -1, -2, -9, -4});
    Tensor y = max_pool_freq(x, 2);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 3}));
    EXPECT_EQ(y.data(), (std::vector<double>{-1, -2, -4}));  // tail window holds one real value
}

TEST(MaxPoolFreq, RejectsZeroPool) {
    EXPECT_THROW(max_pool_freq(Tensor({1, 1, 2, 2}), 0), std::invalid_argument);
}

TEST(MaxPoolFreq, GradientRoutesToArgmax) {
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({1, 2, 3, 6}, rng, -1.0, 1.0, true);
    auto loss = [&]() {
        Tensor y = max_pool_freq(x, 2);
        return sum(mul(y, y));
    };
    testutil::expect_gradients_match({x}, loss);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
    std::mt19937_64 rng(4);
    Tensor x = random_tensor({3, 2, 4, 5}, rng, -3.0, 5.0);
    Tensor gamma({2}, 1.0);
    Tensor beta({2}, 0.0);
    BatchNormState state(2);
    Tensor y = batch_norm(x, gamma, beta, state, Mode::train);

    const std::size_t plane = 4 * 5;
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t i = 0; i < plane; ++i) mean += y.data()[(b * 2 + c) * plane + i];
        mean /= 3 * plane;
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = y.data()[(b * 2 + c) * plane + i] - mean;
                var += d * d;
            }
        var /= 3 * plane;
        EXPECT_NEAR(mean, 0.0, 1e-6);
        EXPECT_NEAR(var, 1.0, 1e-3);  // epsilon keeps it slightly under 1
    }
}

TEST(BatchNorm, EvalModeIsDeterministicAffine) {
    std::mt19937_64 rng(5);
    Tensor x = random_tensor({2, 3, 2, 2}, rng);
    Tensor gamma = random_tensor({3}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({3}, rng);
    BatchNormState state(3);
    state.running_mean = {0.1, -0.2, 0.3};
    state.running_var = {1.5, 0.7, 2.0};
    const BatchNormState saved = state;

    Tensor y1 = batch_norm(x, gamma, beta, state, Mode::eval);
    Tensor y2 = batch_norm(x, gamma, beta, state, Mode::eval);
    EXPECT_EQ(y1.data(), y2.data());
    EXPECT_EQ(state.running_mean, saved.running_mean);  // eval never touches stats

    for (std::size_t c = 0; c < 3; ++c) {
        const double inv = 1.0 / std::sqrt(saved.running_var[c] + state.epsilon);
        const std::size_t idx = c * 4;  // first element of channel c in batch 0
        const double want = gamma.data()[c] * (x.data()[idx] - saved.running_mean[c]) * inv + beta.data()[c];
        EXPECT_NEAR(y1.data()[idx], want, 1e-12);
    }
}

TEST(BatchNorm, RunningStatsUpdateWithMomentum) {
    Tensor x({2, 1, 1, 2}, 1.0);  // constant input: batch mean 1, var 0
    Tensor gamma({1}, 1.0);
    Tensor beta({1}, 0.0);
    BatchNormState state(1);
    batch_norm(x, gamma, beta, state, Mode::train);
    EXPECT_NEAR(state.running_mean[0], 0.9 * 0.0 + 0.1 * 1.0, 1e-12);
    EXPECT_NEAR(state.running_var[0], 0.9 * 1.0 + 0.1 * 0.0, 1e-12);
}

TEST(BatchNorm, GradientCheckTrainMode) {
    std::mt19937_64 rng(6);
    Tensor x = random_tensor({2, 2, 3, 2}, rng, -1.0, 1.0, true);
    Tensor gamma = random_tensor({2}, rng, 0.5, 1.5, true);
    Tensor beta = random_tensor({2}, rng, -0.5, 0.5, true);
    auto loss = [&]() {
        BatchNormState state(2);  // fresh stats: forward is a pure function
        Tensor y = batch_norm(x, gamma, beta, state, Mode::train);
        return sum(mul(y, y));
    };
    testutil::expect_gradients_match({x, gamma, beta}, loss);
}

TEST(BatchNorm, GradientCheckEvalMode) {
    std::mt19937_64 rng(7);
    Tensor x = random_tensor({2, 2, 3, 2}, rng, -1.0, 1.0, true);
    Tensor gamma = random_tensor({2}, rng, 0.5, 1.5, true);
    Tensor beta = random_tensor({2}, rng, -0.5, 0.5, true);
    BatchNormState state(2);
    state.running_mean = {0.2, -0.1};
    state.running_var = {1.2, 0.8};
    auto loss = [&]() {
        BatchNormState copy = state;
        Tensor y = batch_norm(x, gamma, beta, copy, Mode::eval);
        return sum(mul(y, y));
    };
    testutil::expect_gradients_match({x, gamma, beta}, loss);
}

TEST(Dropout, RateZeroAndEvalAreIdentity) {
    std::mt19937_64 rng(8);
    Tensor x = random_tensor({3, 4}, rng);
    std::mt19937_64 r1(1), r2(2);
    EXPECT_EQ(dropout(x, 0.0, Mode::train, r1).data(), x.data());
    EXPECT_EQ(dropout(x, 0.5, Mode::eval, r2).data(), x.data());
}

TEST(Dropout, RejectsBadRate) {
    std::mt19937_64 rng(9);
    Tensor x({2, 2});
    EXPECT_THROW(dropout(x, 1.0, Mode::train, rng), std::invalid_argument);
    EXPECT_THROW(dropout(x, -0.1, Mode::train, rng), std::invalid_argument);
}

TEST(Dropout, EmpiricalZeroFractionMatchesRate) {
    // 10^6 Monte Carlo samples at rate 0.1: zero fraction within +/- 0.01.
    const std::size_t n = 1000000;
    Tensor x({n}, 1.0);
    std::mt19937_64 rng(10);
    Tensor y = dropout(x, 0.1, Mode::train, rng);
    std::size_t zeros = 0;
    const double keep = 1.0 / 0.9;
    for (double v : y.data()) {
        if (v == 0.0) {
            ++zeros;
        } else {
            EXPECT_NEAR(v, keep, 1e-12);
        }
    }
    EXPECT_NEAR(static_cast<double>(zeros) / n, 0.1, 0.01);
}

TEST(Dropout, GradientCheckWithFrozenMask) {
    std::mt19937_64 rng(11);
    Tensor x = random_tensor({4, 5}, rng, -1.0, 1.0, true);
    auto loss = [&]() {
        std::mt19937_64 mask_rng(123);  // identical mask on every call
        Tensor y = dropout(x, 0.3, Mode::train, mask_rng);
        return sum(mul(y, y));
    };
    testutil::expect_gradients_match({x}, loss);
}

TEST(DenseSigmoid, ZeroParamsGiveHalf) {
    std::mt19937_64 rng(12);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor w({4, 5});
    Tensor b({5});
    Tensor y = dense_sigmoid(x, w, b);
    EXPECT_EQ(y.shape(), (Shape{2, 3, 5}));
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(DenseSigmoid, MonotoneInBias) {
    std::mt19937_64 rng(13);
    Tensor x = random_tensor({1, 2, 3}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor b1({2}, 0.0);
    Tensor b2({2}, 2.0);
    Tensor b3({2}, 12.0);
    Tensor y1 = dense_sigmoid(x, w, b1);
    Tensor y2 = dense_sigmoid(x, w, b2);
    Tensor y3 = dense_sigmoid(x, w, b3);
    for (std::size_t i = 0; i < y1.size(); ++i) {
        EXPECT_LT(y1.data()[i], y2.data()[i]);
        EXPECT_LT(y2.data()[i], y3.data()[i]);
        EXPECT_GT(y1.data()[i], 0.0);
        EXPECT_LT(y3.data()[i], 1.0);
        EXPECT_NEAR(y3.data()[i], 1.0, 1e-3);  // large bias saturates toward 1
    }
}

TEST(DenseSigmoid, GradientCheck) {
    std::mt19937_64 rng(14);
    Tensor x = random_tensor({2, 3, 4}, rng, -1.0, 1.0, true);
    Tensor w = random_tensor({4, 3}, rng, -0.7, 0.7, true);
    Tensor b = random_tensor({3}, rng, -0.3, 0.3, true);
    auto loss = [&]() {
        Tensor y = dense_sigmoid(x, w, b);
        return sum(mul(y, y));
    };
    testutil::expect_gradients_match({x, w, b}, loss);
}
