#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "ssgan/adam.hpp"
#include "ssgan/errors.hpp"
#include "ssgan/prng.hpp"
#include "ssgan/tensor.hpp"

using namespace ssgan;

TEST_CASE("shape padding and counts") {
    Shape s{3, 5};
    CHECK(s.rank() == 2);
    CHECK(s.count() == 15);
    CHECK(s.n() == 1);
    CHECK(s.c() == 1);
    CHECK(s.h() == 3);
    CHECK(s.w() == 5);

    Shape t{2, 3, 4, 5};
    CHECK(t.count() == 120);
    CHECK(t.n() == 2);
    CHECK(t.w() == 5);
    CHECK(t.str() == "(2,3,4,5)");
    CHECK(Shape{2, 3} == Shape{2, 3});
    CHECK(Shape{2, 3} != Shape{3, 2});
    CHECK(Shape{2, 3} != Shape{1, 2, 3});

    CHECK_THROWS_AS((Shape{0, 2}), ShapeError);
    CHECK_THROWS_AS(Shape{-1}, ShapeError);
    CHECK_THROWS_AS((Shape{1, 1, 1, 1, 1}), ShapeError);
}

TEST_CASE("tensor layout is row-major within channel-major samples") {
    Tensor<float> t(Shape{2, 3, 4, 5});
    CHECK(t.size() == 120);
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0f);

    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t[t.offset(1, 2, 3, 4)] == 7.0f);
    CHECK(t.offset(0, 0, 0, 1) == 1);
    CHECK(t.offset(0, 0, 1, 0) == 5);
    CHECK(t.offset(0, 1, 0, 0) == 20);
    CHECK(t.offset(1, 0, 0, 0) == 60);

    Tensor<float> u(Shape{2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    CHECK(u.at(0, 0, 1, 0) == 3.0f);
    Tensor<float> r = u.reshaped(Shape{4});
    CHECK(r[2] == 3.0f);
    CHECK_THROWS_AS(u.reshaped(Shape{5}), ShapeError);

    CHECK(Tensor<float>::scalar(2.5f).is_scalar());
    CHECK(Tensor<float>::full(Shape{3}, 2.0f)[2] == 2.0f);
    CHECK_THROWS_AS(Tensor<float>(Shape{2}, {1.0f}), ShapeError);
}

TEST_CASE("prng streams are deterministic and split-independent") {
    Prng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // split() derives an independent child without consuming parent state.
    Prng parent(7);
    Prng child1 = parent.split(1);
    Prng child2 = parent.split(2);
    CHECK(parent.state() == Prng(7).state());
    CHECK(child1.next_u64() != child2.next_u64());
    Prng child1_again = parent.split(1);
    CHECK(child1_again.next_u64() == Prng(7).split(1).next_u64());

    Prng u(3);
    for (int i = 0; i < 1000; ++i) {
        const double d = u.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
    Prng idx(5);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 300; ++i) {
        const std::int64_t k = idx.next_index(7);
        CHECK(k >= 0);
        CHECK(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("prng normal has the requested moments") {
    Prng p(11);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = p.normal(2.0, 3.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("adam first steps match the hand computation") {
    // With constant gradient, mhat equals the gradient and sqrt(vhat) equals
    // its magnitude, so each early step moves by exactly lr*sign(grad).
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    Tensor<float> p(Shape{2}, {1.0f, -2.0f});
    Tensor<float> g(Shape{2}, {0.5f, -1.0f});
    AdamState<float> st;

    adam_step(p, g, st, cfg, "p");
    CHECK(st.t == 1);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-5));
    CHECK(st.m[0] == doctest::Approx(0.05).epsilon(1e-5));
    CHECK(st.v[1] == doctest::Approx(0.001).epsilon(1e-4));

    adam_step(p, g, st, cfg, "p");
    CHECK(st.t == 2);
    CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(-1.8).epsilon(1e-4));
}

TEST_CASE("adam rejects bad gradients and shapes") {
    AdamConfig cfg;
    Tensor<float> p(Shape{2}, {1.0f, 2.0f});
    AdamState<float> st;
    Tensor<float> bad(Shape{2}, {1.0f, std::numeric_limits<float>::quiet_NaN()});
    CHECK_THROWS_AS(adam_step(p, bad, st, cfg, "p"), NumericError);
    Tensor<float> wrong(Shape{3});
    CHECK_THROWS_AS(adam_step(p, wrong, st, cfg, "p"), ShapeError);
    // A rejected step must leave the parameter untouched.
    CHECK(p[0] == 1.0f);
    CHECK(p[1] == 2.0f);
}
