#include <doctest.h>

#include <cmath>
#include <numeric>

#include "hdqt/errors.hpp"
#include "hdqt/hadamard.hpp"
#include "hdqt/qgemm.hpp"
#include "oracles.hpp"

using hdqt::GemmStats;
using hdqt::Matrix;
using hdqt::QuantConfig;
using hdqt::Rng;

namespace {

QuantConfig config(int in, int acc, std::size_t tile = 32) {
    QuantConfig c;
    c.input_bits = in;
    c.accum_bits = acc;
    c.tile_size = tile;
    return c;
}

std::size_t occupied(const std::vector<std::uint64_t>& bins) {
    return static_cast<std::size_t>(std::count_if(bins.begin(), bins.end(), [](auto b) { return b > 0; }));
}

}  // namespace

TEST_CASE("zero operands give zero outputs") {
    const Matrix x = oracle::random_matrix(4, 6, 1);
    GemmStats stats;
    const Matrix z = hdqt::qgemm_forward(x, Matrix(6, 3), config(4, 8), &stats);
    CHECK(z == Matrix(4, 3));
    CHECK(stats.saturation_count_accum == 0);
    Rng rng(1);
    CHECK(hdqt::qgemm_backward_input(Matrix(4, 3), oracle::random_matrix(6, 3, 2), config(4, 8), rng) ==
          Matrix(4, 6));
    CHECK(hdqt::qgemm_backward_weight(Matrix(4, 6), oracle::random_matrix(4, 3, 2), config(4, 8), rng) ==
          Matrix(6, 3));
}

TEST_CASE("shape errors") {
    Rng rng(0);
    CHECK_THROWS_AS(hdqt::qgemm_forward(Matrix(2, 3), Matrix(4, 2), config(4, 8)), hdqt::ShapeError);
    CHECK_THROWS_AS(hdqt::qgemm_backward_input(Matrix(2, 3), Matrix(4, 2), config(4, 8), rng),
                    hdqt::ShapeError);
    CHECK_THROWS_AS(hdqt::qgemm_backward_weight(Matrix(2, 3), Matrix(4, 2), config(4, 8), rng),
                    hdqt::ShapeError);
}

TEST_CASE("tiny forward pipeline") {
    const Matrix x{{0.5, 0.5}};
    const Matrix w{{0.5}, {0.5}};
    auto cfg = config(4, 8, 2);

    // Without the outlier margin 0.5 maps to the clamped top code 7 of step 1/16,
    // one step below the true value on each operand.
    cfg.fwd_outlier_scale = 1.0;
    const double z1 = hdqt::qgemm_forward(x, w, cfg)(0, 0);
    const double step1 = 0.5 / 8.0;
    CHECK(z1 == 2 * (7 * step1) * (7 * step1));
    CHECK(std::abs(z1 - 0.5) <= 2 * (0.5 * step1 + 0.5 * step1 + step1 * step1));

    // With the default 0.975 margin the grid shrinks and the top code sits lower.
    cfg.fwd_outlier_scale = 0.975;
    const double step = 0.5 * 0.975 / 8.0;
    CHECK(hdqt::qgemm_forward(x, w, cfg)(0, 0) == doctest::Approx(2 * (7 * step) * (7 * step)));
}

TEST_CASE("forward matches the scalar pipeline oracle exactly") {
    for (int acc : {6, 8, 12, 32}) {
        for (std::size_t tile : {1u, 5u, 32u}) {
            const Matrix x = oracle::random_matrix(9, 40, acc * 10 + tile);
            const Matrix w = oracle::random_matrix(40, 7, acc * 10 + tile + 1);
            const Matrix got = hdqt::qgemm_forward(x, w, config(4, acc, tile));
            const Matrix ref = oracle::tiled_qgemm_oracle(x, w, 4, acc, tile, 0.975);
            CHECK(hdqt::max_rel_diff(got, ref) < 1e-14);
        }
    }
}

TEST_CASE("high precision limits") {
    const Matrix x = oracle::random_matrix(16, 16, 3);
    const Matrix w = oracle::random_matrix(16, 16, 4);
    const Matrix g = oracle::random_matrix(16, 16, 5);
    Rng rng(9);
    auto cfg = config(16, 32);
    // The default 0.975 forward clip alone costs more than 1e-3 on the largest entries.
    cfg.fwd_outlier_scale = 1.0;
    CHECK(hdqt::max_rel_diff(hdqt::qgemm_forward(x, w, cfg), hdqt::matmul_ref(x, w)) < 1e-3);
    CHECK(hdqt::max_rel_diff(hdqt::qgemm_backward_input(g, w, cfg, rng),
                             hdqt::matmul_ref(g, hdqt::transpose(w))) < 1e-3);
    CHECK(hdqt::max_rel_diff(hdqt::qgemm_backward_weight(x, g, cfg, rng),
                             hdqt::matmul_ref(hdqt::transpose(x), g)) < 1e-3);
}

TEST_CASE("tile size does not matter without saturation") {
    const Matrix x = oracle::random_matrix(12, 70, 6);
    const Matrix w = oracle::random_matrix(70, 9, 7);
    const Matrix base = hdqt::qgemm_forward(x, w, config(8, 32, 70));
    for (std::size_t s : {1u, 8u, 32u}) {
        CHECK(hdqt::max_rel_diff(hdqt::qgemm_forward(x, w, config(8, 32, s)), base) < 1e-9);
    }
}

TEST_CASE("narrower accumulators never saturate less") {
    const Matrix x = oracle::random_matrix(16, 64, 8);
    const Matrix w = oracle::random_matrix(64, 16, 9);
    std::uint64_t prev = 0;
    for (int acc = 32; acc >= 4; --acc) {
        GemmStats s;
        hdqt::qgemm_forward(x, w, config(4, acc, 64), &s);
        CHECK(s.saturation_count_accum >= prev);
        CHECK(s.accumulations == 16u * 16u);
        prev = s.saturation_count_accum;
    }
    CHECK(prev > 0);
}

TEST_CASE("backward determinism under a seeded stream") {
    const Matrix g = oracle::random_matrix(8, 10, 1);
    const Matrix w = oracle::random_matrix(12, 10, 2);
    const Matrix x = oracle::random_matrix(8, 12, 3);
    Rng a(5), b(5);
    CHECK(hdqt::qgemm_backward_input(g, w, config(4, 8), a) ==
          hdqt::qgemm_backward_input(g, w, config(4, 8), b));
    CHECK(hdqt::qgemm_backward_weight(x, g, config(4, 8), a) ==
          hdqt::qgemm_backward_weight(x, g, config(4, 8), b));
    Rng c(6);
    CHECK(hdqt::qgemm_backward_weight(x, g, config(4, 8), c) !=
          hdqt::qgemm_backward_weight(x, g, config(4, 8), a));
}

TEST_CASE("batch of one degenerates to a plain stochastic GEMM") {
    const Matrix x = oracle::random_matrix(1, 6, 1);
    const Matrix g = oracle::random_matrix(1, 4, 2);
    Rng rng(3);
    const Matrix got = hdqt::qgemm_backward_weight(x, g, config(6, 16), rng);

    Rng act = rng.split("bwd_weight.activation");
    Rng grad = rng.split("bwd_weight.grad");
    const Matrix xt = hdqt::transpose(x);
    const auto xq = hdqt::quantize_stochastic(xt, 6, hdqt::calibrate_scale(xt), act);
    const auto gq = hdqt::quantize_stochastic(g, 6, hdqt::calibrate_scale(g), grad);
    const Matrix ref = hdqt::matmul_ref(hdqt::dequantize(xq), hdqt::dequantize(gq));
    CHECK(hdqt::max_rel_diff(got, ref) < 1e-14);
}

TEST_CASE("stochastic rounding is unbiased through the weight-gradient GEMM") {
    const Matrix x = oracle::random_matrix(16, 8, 11);
    const Matrix g = oracle::random_matrix(16, 8, 12);
    const Matrix ref = hdqt::matmul_ref(hdqt::transpose(x), g);
    const auto cfg = config(4, 16);
    const int draws = 200;
    Matrix mean(8, 8);
    double single_dev = 0.0;
    for (int s = 0; s < draws; ++s) {
        Rng rng(1000 + s);
        const Matrix d = hdqt::qgemm_backward_weight(x, g, cfg, rng);
        for (std::size_t i = 0; i < d.size(); ++i) {
            mean.values()[i] += d.values()[i] / draws;
            const double e = d.values()[i] - ref.values()[i];
            single_dev += e * e;
        }
    }
    single_dev = std::sqrt(single_dev / (draws * ref.size()));
    double mean_dev = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double e = mean.values()[i] - ref.values()[i];
        mean_dev += e * e;
    }
    mean_dev = std::sqrt(mean_dev / ref.size());
    // The clamp at 2^(b-1)-1 leaves a small deterministic bias, so averaging cannot reach 1/sqrt(draws).
    CHECK(mean_dev < single_dev);
    CHECK(mean_dev <= 3.0 * single_dev);
}

TEST_CASE("bin occupancy") {
    const Matrix c(4, 4, 0.7);
    const auto q = hdqt::quantize_nearest(c, 4, hdqt::calibrate_scale(c));
    const auto bins = hdqt::bin_occupancy(q);
    CHECK(bins.size() == 15);
    CHECK(occupied(bins) == 1);

    Matrix ramp(1, 15);
    for (int i = 0; i < 15; ++i) ramp(0, i) = (i - 7) / 8.0;
    const auto all = hdqt::bin_occupancy(hdqt::quantize_nearest(ramp, 4, 1.0));
    CHECK(occupied(all) == 15);
}

TEST_CASE("stats histograms sum to element counts") {
    const Matrix x = oracle::random_matrix(8, 10, 1);
    const Matrix w = oracle::random_matrix(10, 6, 2);
    const Matrix g = oracle::random_matrix(8, 6, 3);
    GemmStats s;
    Rng rng(1);
    hdqt::qgemm_forward(x, w, config(4, 8), &s);
    hdqt::qgemm_backward_input(g, w, config(4, 8), rng, &s);
    hdqt::qgemm_backward_weight(x, g, config(4, 8), rng, &s);
    auto total = [&](const char* role) {
        const auto& b = s.bins_used.at(role);
        return std::accumulate(b.begin(), b.end(), std::uint64_t{0});
    };
    CHECK(total(hdqt::roles::kFwdInput) == x.size());
    CHECK(total(hdqt::roles::kFwdWeight) == w.size());
    CHECK(total(hdqt::roles::kBwdInputGrad) == g.size());
    CHECK(total(hdqt::roles::kBwdInputWeight) == w.size());
    CHECK(total(hdqt::roles::kBwdWeightActivation) == x.size());
    CHECK(total(hdqt::roles::kBwdWeightGrad) == g.size());

    GemmStats m;
    m.merge(s);
    m.merge(s);
    CHECK(m.accumulations == 2 * s.accumulations);
    CHECK(m.bins_used.at(hdqt::roles::kFwdInput)[7] == 2 * s.bins_used.at(hdqt::roles::kFwdInput)[7]);
}

TEST_CASE("heavy-tailed tensors use more bins after the transform") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix g = oracle::student_t2_matrix(128, 64, seed);
        const auto direct = hdqt::quantize_nearest(g, 4, hdqt::calibrate_scale(g));
        const Matrix h = hdqt::apply_block_hadamard(g, hdqt::plan_blocks(64), hdqt::Axis::Cols,
                                                    hdqt::Normalize::InvSqrtN);
        const auto had = hdqt::quantize_nearest(h, 4, hdqt::calibrate_scale(h));
        wins += occupied(hdqt::bin_occupancy(had)) > occupied(hdqt::bin_occupancy(direct));
    }
    CHECK(wins >= 9);
}
