#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ssgan/nn_kernels.hpp"
#include "ssgan/prng.hpp"

using namespace ssgan;

TEST_CASE("batch_norm_train normalizes with biased variance and eps 1e-5") {
    // One channel, four values: mean 2.5, biased variance 1.25.
    Tensor<double> x(Shape{2, 1, 1, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor<double> gamma(Shape{1}, {2.0});
    Tensor<double> beta(Shape{1}, {0.5});
    Tensor<double> y = batch_norm_train<double>(x, gamma, beta, nullptr, nullptr, nullptr);

    const double inv = 1.0 / std::sqrt(1.25 + 1e-5);
    for (int i = 0; i < 4; ++i) {
        const double want = 2.0 * ((x[i] - 2.5) * inv) + 0.5;
        CHECK(y[i] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("batch_norm_train updates running stats with momentum 0.9") {
    Tensor<double> x(Shape{2, 1, 1, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor<double> gamma = Tensor<double>::full(Shape{1}, 1.0);
    Tensor<double> beta(Shape{1});
    Tensor<double> rm(Shape{1}, {10.0});
    Tensor<double> rv(Shape{1}, {4.0});
    (void)batch_norm_train<double>(x, gamma, beta, &rm, &rv, nullptr);
    CHECK(rm[0] == doctest::Approx(0.9 * 10.0 + 0.1 * 2.5).epsilon(1e-9));
    CHECK(rv[0] == doctest::Approx(0.9 * 4.0 + 0.1 * 1.25).epsilon(1e-9));
}

TEST_CASE("batch_norm_infer uses the provided statistics") {
    Tensor<double> x(Shape{1, 2, 1, 1}, {3.0, -1.0});
    Tensor<double> gamma(Shape{2}, {1.0, 2.0});
    Tensor<double> beta(Shape{2}, {0.0, 1.0});
    Tensor<double> mean(Shape{2}, {1.0, -3.0});
    Tensor<double> var(Shape{2}, {4.0, 0.25});
    Tensor<double> y = batch_norm_infer(x, gamma, beta, mean, var);
    CHECK(y[0] == doctest::Approx((3.0 - 1.0) / std::sqrt(4.0 + 1e-5)).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(2.0 * (-1.0 + 3.0) / std::sqrt(0.25 + 1e-5) + 1.0).epsilon(1e-6));
}

TEST_CASE("activations match hand values") {
    Tensor<double> x(Shape{5}, {-2.0, -0.5, 0.0, 0.5, 2.0});
    Tensor<double> r = activation_forward(x, Activation::Relu, 0.2);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 0.0);
    CHECK(r[3] == 0.5);
    CHECK(r[4] == 2.0);

    Tensor<double> l = activation_forward(x, Activation::LeakyRelu, 0.2);
    CHECK(l[0] == doctest::Approx(-0.4));
    CHECK(l[1] == doctest::Approx(-0.1));
    CHECK(l[3] == 0.5);

    Tensor<double> t = activation_forward(x, Activation::Tanh, 0.2);
    CHECK(t[0] == doctest::Approx(std::tanh(-2.0)).epsilon(1e-12));
    CHECK(t[4] == doctest::Approx(std::tanh(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax_channels is a per-pixel distribution over channels") {
    // Logits ln1, ln2, ln4, ln8 per channel -> probabilities 1/15, 2/15, 4/15, 8/15.
    Tensor<double> logits(Shape{1, 4, 1, 1},
                          {std::log(1.0), std::log(2.0), std::log(4.0), std::log(8.0)});
    Tensor<double> p = softmax_channels(logits);
    CHECK(p[0] == doctest::Approx(1.0 / 15.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(2.0 / 15.0).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(4.0 / 15.0).epsilon(1e-12));
    CHECK(p[3] == doctest::Approx(8.0 / 15.0).epsilon(1e-12));

    Prng prng(3);
    Tensor<double> r = prng_uniform<double>(prng, Shape{2, 4, 3, 5}, -30.0, 30.0);
    Tensor<double> q = softmax_channels(r);
    for (int n = 0; n < 2; ++n)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 5; ++x) {
                double s = 0.0;
                for (int c = 0; c < 4; ++c) {
                    CHECK(q.at(n, c, y, x) >= 0.0);
                    s += q.at(n, c, y, x);
                }
                CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
            }

    // Extreme logits stay finite thanks to the max-shift.
    Tensor<double> hot(Shape{1, 4, 1, 1}, {1000.0, -1000.0, 0.0, 0.0});
    Tensor<double> hp = softmax_channels(hot);
    CHECK(hp[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::isfinite(hp[1]));
}

TEST_CASE("prng_uniform fills the requested range deterministically") {
    Prng a(5), b(5);
    Tensor<float> ta = prng_uniform<float>(a, Shape{100}, -1.0f, 1.0f);
    Tensor<float> tb = prng_uniform<float>(b, Shape{100}, -1.0f, 1.0f);
    for (int i = 0; i < 100; ++i) {
        CHECK(ta[i] == tb[i]);
        CHECK(ta[i] >= -1.0f);
        CHECK(ta[i] < 1.0f);
    }
}
