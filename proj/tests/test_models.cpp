#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ssgan/models.hpp"
#include "ssgan/prng.hpp"

using namespace ssgan;

namespace {

GeneratorSpec small_gen_spec(int channels, int tile) {
    GeneratorSpec s;
    s.noise_dim = 12;
    s.base_maps = 8;
    s.up_maps = {8, 6, 4};
    s.out_channels = channels;
    s.tile_h = s.tile_w = tile;
    return s;
}

DiscriminatorSpec small_disc_spec(int channels) {
    DiscriminatorSpec s;
    s.in_channels = channels;
    s.encoder_maps = {6, 8, 8, 8};
    s.decoder_maps = {8, 6, 6};
    return s;
}

} // namespace

TEST_CASE("forward shapes across batch, channel and tile grid") {
    for (int channels : {1, 2, 3}) {
        for (int batch : {1, 2, 4}) {
            for (int tile : {32, 48}) {
                Prng prng(17);
                auto gen = build_generator<float>(small_gen_spec(channels, tile), prng);
                auto disc = build_discriminator<float>(small_disc_spec(channels), prng);

                Prng np(3);
                Tensor<float> z = prng_uniform<float>(np, Shape{batch, 12}, -1.0f, 1.0f);
                Tensor<float> tiles = generator_forward(gen, z, NormMode::Train);
                REQUIRE(tiles.shape() == Shape{batch, channels, tile, tile});
                for (std::int64_t i = 0; i < tiles.size(); ++i) {
                    CHECK(tiles[i] >= -1.0f);
                    CHECK(tiles[i] <= 1.0f);
                }

                Tensor<float> logits = discriminator_forward(disc, tiles, NormMode::Train);
                REQUIRE(logits.shape() == Shape{batch, kLogitChannels, tile, tile});
            }
        }
    }
}

TEST_CASE("initialization distribution and constants") {
    Prng prng(5);
    auto gen = build_generator<float>(GeneratorSpec{}, prng);

    const Tensor<float>& proj = gen.params.at("proj.kernel");
    REQUIRE(proj.size() >= 10000);
    double sum = 0.0, sq = 0.0;
    for (std::int64_t i = 0; i < proj.size(); ++i) {
        sum += proj[i];
        sq += static_cast<double>(proj[i]) * proj[i];
    }
    const double mean = sum / static_cast<double>(proj.size());
    const double stddev = std::sqrt(sq / static_cast<double>(proj.size()) - mean * mean);
    CHECK(std::fabs(mean) < 0.002);
    CHECK(stddev == doctest::Approx(kWeightInitStdDev).epsilon(0.15));

    for (const auto& e : gen.params.entries()) {
        if (e.name.ends_with(".bias") || e.name.ends_with(".bn.beta") ||
            e.name.ends_with(".bn.running_mean")) {
            for (std::int64_t i = 0; i < e.value.size(); ++i) CHECK(e.value[i] == 0.0f);
        }
        if (e.name.ends_with(".bn.gamma") || e.name.ends_with(".bn.running_var")) {
            for (std::int64_t i = 0; i < e.value.size(); ++i) CHECK(e.value[i] == 1.0f);
        }
        CHECK(e.trainable == (e.name.find(".bn.running_") == std::string::npos));
    }
}

TEST_CASE("builders are seed-deterministic") {
    Prng a(9), b(9), c(10);
    auto g1 = build_generator<float>(small_gen_spec(2, 32), a);
    auto g2 = build_generator<float>(small_gen_spec(2, 32), b);
    auto g3 = build_generator<float>(small_gen_spec(2, 32), c);

    REQUIRE(g1.params.entries().size() == g2.params.entries().size());
    bool any_diff_from_g3 = false;
    for (std::size_t i = 0; i < g1.params.entries().size(); ++i) {
        const auto& e1 = g1.params.entries()[i];
        const auto& e2 = g2.params.entries()[i];
        CHECK(e1.name == e2.name);
        REQUIRE(e1.value.size() == e2.value.size());
        for (std::int64_t j = 0; j < e1.value.size(); ++j) {
            CHECK(e1.value[j] == e2.value[j]);
            if (e1.value[j] != g3.params.entries()[i].value[j]) any_diff_from_g3 = true;
        }
    }
    CHECK(any_diff_from_g3);
}

TEST_CASE("running statistics update only when asked") {
    Prng prng(21);
    auto disc = build_discriminator<float>(small_disc_spec(2), prng);
    Prng ip(4);
    Tensor<float> x = prng_uniform<float>(ip, Shape{2, 2, 32, 32}, -1.0f, 1.0f);

    auto snapshot = [&disc]() {
        std::vector<Tensor<float>> s;
        for (const auto& e : disc.params.entries())
            if (!e.trainable) s.push_back(e.value);
        return s;
    };
    auto equal = [](const std::vector<Tensor<float>>& a, const std::vector<Tensor<float>>& b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::int64_t j = 0; j < a[i].size(); ++j)
                if (a[i][j] != b[i][j]) return false;
        return true;
    };

    const auto before = snapshot();

    { // train mode with frozen stats: bitwise unchanged
        Tape<float> tape;
        TapedParams vars = lift_params(tape, disc.params, false);
        (void)discriminator_forward(tape, disc, vars, tape.constant(x), NormMode::Train, false);
        CHECK(equal(before, snapshot()));
    }
    { // inference mode: unchanged
        Tape<float> tape;
        TapedParams vars = lift_params(tape, disc.params, false);
        (void)discriminator_forward(tape, disc, vars, tape.constant(x), NormMode::Infer);
        CHECK(equal(before, snapshot()));
    }
    { // train mode with updates: running stats move
        Tape<float> tape;
        TapedParams vars = lift_params(tape, disc.params, false);
        (void)discriminator_forward(tape, disc, vars, tape.constant(x), NormMode::Train, true);
        CHECK_FALSE(equal(before, snapshot()));
    }
}

TEST_CASE("forward input validation") {
    Prng prng(2);
    auto gen = build_generator<float>(small_gen_spec(1, 32), prng);
    auto disc = build_discriminator<float>(small_disc_spec(2), prng);

    Tensor<float> bad_noise(Shape{2, 13});
    CHECK_THROWS_AS(generator_forward(gen, bad_noise, NormMode::Train), ShapeError);

    Tensor<float> wrong_channels(Shape{1, 3, 32, 32});
    CHECK_THROWS_AS(discriminator_forward(disc, wrong_channels, NormMode::Train), ShapeError);
    Tensor<float> ragged(Shape{1, 2, 24, 32});
    CHECK_THROWS_AS(discriminator_forward(disc, ragged, NormMode::Train), ShapeError);

    GeneratorSpec bad = small_gen_spec(1, 32);
    bad.tile_h = 20;
    Prng p2(3);
    CHECK_THROWS_AS(build_generator<float>(bad, p2), ConfigError);
    DiscriminatorSpec bad_d = small_disc_spec(1);
    bad_d.in_channels = 4;
    CHECK_THROWS_AS(build_discriminator<float>(bad_d, p2), ConfigError);
}
