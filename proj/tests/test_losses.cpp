#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ssgan/gradcheck.hpp"
#include "ssgan/losses.hpp"
#include "ssgan/prng.hpp"

using namespace ssgan;

namespace {

// Equal logits: every class probability is 1/4 at every pixel.
Tensor<double> uniform_logits(int n = 1, int h = 2, int w = 2) {
    return Tensor<double>(Shape{n, kLogitChannels, h, w});
}

MaskBatch full_mask(int n, int h, int w, std::uint8_t cls) {
    MaskBatch m(n, h, w);
    for (auto& v : m.values) v = cls;
    return m;
}

} // namespace

TEST_CASE("uniform-logit fixtures match the hand computations") {
    const double ln4 = std::log(4.0);

    Tape<double> tape;
    Var logits = tape.leaf(uniform_logits());

    Var sup = supervised_loss(tape, logits, full_mask(1, 2, 2, 1));
    CHECK(tape.value(sup)[0] == doctest::Approx(1.386294).epsilon(1e-5));
    CHECK(tape.value(sup)[0] == doctest::Approx(ln4).epsilon(1e-9));

    Var ur = unsupervised_real_loss(tape, logits);
    CHECK(tape.value(ur)[0] == doctest::Approx(0.287682).epsilon(1e-5));
    CHECK(tape.value(ur)[0] == doctest::Approx(-std::log(0.75)).epsilon(1e-9));

    Var uf = unsupervised_fake_loss(tape, logits);
    CHECK(tape.value(uf)[0] == doctest::Approx(1.386294).epsilon(1e-5));
    CHECK(tape.value(uf)[0] == doctest::Approx(-std::log(0.25)).epsilon(1e-9));

    Var g = generator_loss(tape, logits);
    CHECK(tape.value(g)[0] == doctest::Approx(0.287682).epsilon(1e-5));

    Var total = discriminator_loss(tape, sup, ur, uf, 1.0);
    CHECK(tape.value(total)[0] == doctest::Approx(3.060270).epsilon(1e-5));

    CHECK(discriminator_loss(1.386294, 0.287682, 1.386294, 1.0) ==
          doctest::Approx(3.060270).epsilon(1e-6));
    CHECK(discriminator_loss(1.0, 0.2, 0.3, 1.0) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("saturated losses approach zero") {
    // True class dominant by +30 on every labeled pixel.
    Tensor<double> sup_hot(Shape{1, kLogitChannels, 1, 2});
    sup_hot.at(0, 1, 0, 0) = 30.0;
    sup_hot.at(0, 1, 0, 1) = 30.0;
    Tape<double> tape;
    Var l = tape.leaf(sup_hot);
    Var sup = supervised_loss(tape, l, full_mask(1, 1, 2, 1));
    CHECK(tape.value(sup)[0] < 1e-9);

    // Fake logit buried: real_prob ~ 1 -> unsup_real ~ 0; fake dominant ->
    // unsup_fake ~ 0 on the mirrored input.
    Tensor<double> real_hot(Shape{1, kLogitChannels, 1, 1});
    real_hot.at(0, kFakeChannel, 0, 0) = -30.0;
    Tape<double> t2;
    Var lr = t2.leaf(real_hot);
    CHECK(t2.value(unsupervised_real_loss(t2, lr))[0] < 1e-9);

    Tensor<double> fake_hot(Shape{1, kLogitChannels, 1, 1});
    fake_hot.at(0, kFakeChannel, 0, 0) = 30.0;
    Tape<double> t3;
    Var lf = t3.leaf(fake_hot);
    CHECK(t3.value(unsupervised_fake_loss(t3, lf))[0] < 1e-9);
}

TEST_CASE("ignored pixels do not move a mean over identical pixels") {
    Tensor<double> logits(Shape{1, kLogitChannels, 2, 2});
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            logits.at(0, 0, y, x) = 0.3;
            logits.at(0, 1, y, x) = -0.2;
            logits.at(0, 2, y, x) = 0.9;
            logits.at(0, 3, y, x) = 0.1;
        }
    MaskBatch all = full_mask(1, 2, 2, 2);
    MaskBatch half = full_mask(1, 2, 2, 2);
    half.values[1] = kLabelIgnore;
    half.values[3] = kLabelIgnore;

    Tape<double> ta, tb;
    Var la = ta.leaf(logits), lb = tb.leaf(logits);
    const double va = ta.value(supervised_loss(ta, la, all))[0];
    const double vb = tb.value(supervised_loss(tb, lb, half))[0];
    CHECK(va == doctest::Approx(vb).epsilon(1e-12));
}

TEST_CASE("lambda_u = 0 drops the unsupervised branch from the graph") {
    Tape<double> tape;
    Var sup_logits = tape.leaf(uniform_logits());
    Var unsup_logits = tape.leaf(uniform_logits());

    Var sup = supervised_loss(tape, sup_logits, full_mask(1, 2, 2, 0));
    Var ur = unsupervised_real_loss(tape, unsup_logits);
    Var uf = unsupervised_fake_loss(tape, unsup_logits);
    Var total = discriminator_loss(tape, sup, ur, uf, 0.0);

    CHECK(total.id == sup.id); // structurally the supervised node
    tape.backward(total);
    const Tensor<double>& gu = tape.grad(unsup_logits);
    for (std::int64_t i = 0; i < gu.size(); ++i) CHECK(gu[i] == 0.0);

    CHECK_THROWS_AS(discriminator_loss(tape, sup, ur, uf, -0.5), ConfigError);
    CHECK_THROWS_AS(discriminator_loss(1.0, 1.0, 1.0, -0.5), ConfigError);
    CHECK_THROWS_AS(discriminator_loss(std::nan(""), 1.0, 1.0, 1.0), NumericError);
}

TEST_CASE("probability floor caps the per-pixel term and zeroes its gradient") {
    // Fake logit +20 per pixel: p_real ~ 6e-9 < 1e-7, so each term clamps to
    // -ln(1e-7) and contributes no gradient.
    Tensor<double> hot(Shape{1, kLogitChannels, 1, 2});
    hot.at(0, kFakeChannel, 0, 0) = 20.0;
    hot.at(0, kFakeChannel, 0, 1) = 20.0;

    Tape<double> tape;
    Var logits = tape.leaf(hot);
    Var ur = unsupervised_real_loss(tape, logits);
    CHECK(tape.value(ur)[0] == doctest::Approx(-std::log(kProbFloor)).epsilon(1e-9));
    tape.backward(ur);
    const Tensor<double>& g = tape.grad(logits);
    for (std::int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("supervised loss ignores masked pixels and rejects empty batches") {
    Tensor<double> logits(Shape{1, kLogitChannels, 1, 2});
    logits.at(0, 0, 0, 0) = 2.0; // pixel 0 leans background
    logits.at(0, 2, 0, 1) = 9.0; // pixel 1 would dominate if counted

    MaskBatch mask(1, 1, 2); // starts all-ignore
    mask.values[0] = 0;

    Tape<double> tape;
    Var l = tape.leaf(logits);
    Var sup = supervised_loss(tape, l, mask);

    // Only pixel 0 counts: -ln(e^2 / (e^2 + 3)).
    const double want = -std::log(std::exp(2.0) / (std::exp(2.0) + 3.0));
    CHECK(tape.value(sup)[0] == doctest::Approx(want).epsilon(1e-9));

    tape.backward(sup);
    const Tensor<double>& g = tape.grad(l);
    for (int c = 0; c < kLogitChannels; ++c) CHECK(g.at(0, c, 0, 1) == 0.0);

    MaskBatch empty(1, 1, 2);
    Tape<double> t2;
    Var l2 = t2.leaf(logits);
    CHECK_THROWS_AS(supervised_loss(t2, l2, empty), ContractError);

    MaskBatch wrong(1, 2, 2);
    Tape<double> t3;
    Var l3 = t3.leaf(logits);
    CHECK_THROWS_AS(supervised_loss(t3, l3, wrong), ShapeError);
}

TEST_CASE("supervised gradient equals (softmax - onehot) / count") {
    Tensor<double> logits(Shape{1, kLogitChannels, 1, 1}, {0.3, -0.2, 0.9, 0.1});
    MaskBatch mask = full_mask(1, 1, 1, 2);

    Tape<double> tape;
    Var l = tape.leaf(logits);
    tape.backward(supervised_loss(tape, l, mask));

    double z = 0.0;
    for (int c = 0; c < 4; ++c) z += std::exp(logits[c]);
    for (int c = 0; c < 4; ++c) {
        const double p = std::exp(logits[c]) / z;
        const double want = p - (c == 2 ? 1.0 : 0.0);
        CHECK(tape.grad(l)[c] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("losses reject logits without the fake channel") {
    Tape<double> tape;
    Var bad = tape.leaf(Tensor<double>(Shape{1, 3, 2, 2}));
    CHECK_THROWS_AS(unsupervised_real_loss(tape, bad), ShapeError);
    CHECK_THROWS_AS(unsupervised_fake_loss(tape, bad), ShapeError);
    CHECK_THROWS_AS(generator_loss(tape, bad), ShapeError);
    CHECK_THROWS_AS(supervised_loss(tape, bad, full_mask(1, 2, 2, 0)), ShapeError);
}

TEST_CASE("every loss gradient survives a finite-difference audit") {
    Prng root(31);
    auto draw_logits = [&root](std::uint64_t salt) {
        Prng p = root.split(salt);
        return std::vector<Tensor<double>>{
            prng_uniform<double>(p, Shape{1, kLogitChannels, 4, 4}, -2.0, 2.0)};
    };

    MaskBatch mask(1, 4, 4);
    {
        Prng mp = root.split(99);
        for (auto& v : mask.values) {
            const std::int64_t d = mp.next_index(4);
            v = d == 3 ? kLabelIgnore : static_cast<std::uint8_t>(d);
        }
        mask.values[0] = 1;
    }

    auto check = [](auto build, std::vector<Tensor<double>> params) {
        GradCheckReport r = finite_diff_check(build, params, 1e-4);
        CHECK(r.max_rel_error <= 1e-6);
    };
    check([&mask](Tape<double>& t, const std::vector<Var>& v) {
        return supervised_loss(t, v[0], mask);
    }, draw_logits(1));
    check([](Tape<double>& t, const std::vector<Var>& v) {
        return unsupervised_real_loss(t, v[0]);
    }, draw_logits(2));
    check([](Tape<double>& t, const std::vector<Var>& v) {
        return unsupervised_fake_loss(t, v[0]);
    }, draw_logits(3));
    check([](Tape<double>& t, const std::vector<Var>& v) {
        return generator_loss(t, v[0]);
    }, draw_logits(4));
}
