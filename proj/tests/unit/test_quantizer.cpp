#include <doctest.h>

#include <cmath>
#include <set>

#include "hdqt/errors.hpp"
#include "hdqt/quantizer.hpp"
#include "oracles.hpp"

using hdqt::Matrix;
using hdqt::Rng;

TEST_CASE("calibration") {
    CHECK(hdqt::calibrate_scale(Matrix{{-2, 1}}, 1.0) == 0.5);
    CHECK(hdqt::calibrate_scale(Matrix{{0, 0}}, 1.0) == 1.0);
    CHECK(hdqt::calibrate_scale(Matrix{{1, -0.5}}, 0.975) == doctest::Approx(1.0 / 0.975));
}

TEST_CASE("all-zero input gives zero codes") {
    const Matrix z{{0, 0}};
    const auto q = hdqt::quantize_nearest(z, 4, hdqt::calibrate_scale(z));
    CHECK(q.codes == std::vector<std::int32_t>{0, 0});
    CHECK(hdqt::dequantize(q) == z);
}

TEST_CASE("nearest rounding scalar cases") {
    auto one = [](double x, int bits, double alpha) {
        return hdqt::quantize_nearest(Matrix{{x}}, bits, alpha);
    };
    for (int b : {2, 3, 4, 8, 16}) CHECK(one(0.0, b, 3.0).codes[0] == 0);
    auto q = one(0.3, 4, 1.0);
    CHECK(q.codes[0] == 2);
    CHECK(hdqt::dequantize(q)(0, 0) == 0.25);
    q = one(1.0, 4, 1.0);
    CHECK(q.codes[0] == 7);
    CHECK(hdqt::dequantize(q)(0, 0) == 0.875);
    q = one(-1.0, 4, 1.0);
    CHECK(q.codes[0] == -7);
    // Half-way points round away from zero.
    CHECK(one(0.3125, 4, 1.0).codes[0] == 3);
    CHECK(one(-0.3125, 4, 1.0).codes[0] == -3);
}

TEST_CASE("outlier scale saturates the top of the range") {
    const Matrix x{{1.0, 0.99, 0.98, 0.5, -1.0}};
    const double alpha = hdqt::calibrate_scale(x, 0.975);
    const auto q = hdqt::quantize_nearest(x, 4, alpha);
    CHECK(q.codes[0] == 7);
    CHECK(q.codes[1] == 7);
    CHECK(q.codes[2] == 7);
    CHECK(q.codes[4] == -7);
    CHECK(q.saturated == 4);
}

TEST_CASE("invalid parameters") {
    const Matrix x{{0.1}};
    CHECK_THROWS_AS(hdqt::quantize_nearest(x, 1, 1.0), hdqt::ParameterError);
    CHECK_THROWS_AS(hdqt::quantize_nearest(x, 17, 1.0), hdqt::ParameterError);
    CHECK_THROWS_AS(hdqt::quantize_nearest(x, 4, 0.0), hdqt::ParameterError);
    CHECK_THROWS_AS(hdqt::quantize_nearest(x, 4, -1.0), hdqt::ParameterError);
    CHECK_THROWS_AS(hdqt::quantize_nearest(x, 4, INFINITY), hdqt::ParameterError);
    hdqt::QuantConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.accum_bits = 3;
    CHECK_THROWS_AS(cfg.validate(), hdqt::ParameterError);
    cfg = {};
    cfg.tile_size = 0;
    CHECK_THROWS_AS(cfg.validate(), hdqt::ParameterError);
    cfg = {};
    cfg.fwd_outlier_scale = 0.0;
    CHECK_THROWS_AS(cfg.validate(), hdqt::ParameterError);
}

TEST_CASE("code range, idempotence and error bound") {
    for (int b : {2, 3, 4, 8, 12}) {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            const Matrix x = oracle::random_matrix(20, 30, seed);
            const double alpha = hdqt::calibrate_scale(x);
            const auto q = hdqt::quantize_nearest(x, b, alpha);
            const std::int32_t top = (1 << (b - 1)) - 1;
            std::set<std::int32_t> used;
            for (auto c : q.codes) {
                CHECK(std::abs(c) <= top);
                used.insert(c);
            }
            const Matrix back = hdqt::dequantize(q);
            const auto q2 = hdqt::quantize_nearest(back, b, alpha);
            CHECK(q2.codes == q.codes);
            // Inside the unclipped range the error is at most half a step.
            const double step = q.scale;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double xi = x.values()[i];
                if (std::abs(xi) * alpha <= static_cast<double>(top) / (1 << (b - 1))) {
                    CHECK(std::abs(back.values()[i] - xi) <= 0.5 * step + 1e-15);
                }
            }
        }
    }
}

TEST_CASE("stochastic rounding cases") {
    Rng rng(3);
    auto q = hdqt::quantize_stochastic(Matrix{{0.25}}, 4, 1.0, rng);
    CHECK(q.codes[0] == 2);
    for (int i = 0; i < 50; ++i) {
        CHECK(hdqt::quantize_stochastic(Matrix{{5.0}}, 4, 1.0, rng).codes[0] == 7);
        CHECK(hdqt::quantize_stochastic(Matrix{{-5.0}}, 4, 1.0, rng).codes[0] == -7);
    }

    const int n = 100000;
    const Matrix x(1, n, 0.3);
    q = hdqt::quantize_stochastic(x, 4, 1.0, rng);
    double mean = 0.0;
    for (auto c : q.codes) {
        CHECK((c == 2 || c == 3));
        mean += c;
    }
    mean /= n;
    CHECK(std::abs(mean - 2.4) < 0.01);
}

TEST_CASE("stochastic rounding consumes one draw per element") {
    Rng a(9);
    const Matrix x = oracle::random_matrix(5, 7, 2);
    (void)hdqt::quantize_stochastic(x, 4, hdqt::calibrate_scale(x), a);
    CHECK(a.position() > 0);
    Rng b(9);
    for (int i = 0; i < 35; ++i) b.next_unit();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("stochastic rounding is seeded") {
    const Matrix x = oracle::random_matrix(10, 10, 4);
    Rng a(1), b(1);
    CHECK(hdqt::quantize_stochastic(x, 4, 1.0, a).codes ==
          hdqt::quantize_stochastic(x, 4, 1.0, b).codes);
}

TEST_CASE("library SR mean agrees with the oracle estimator") {
    Rng rng(77);
    const int n = 100000;
    const Matrix back = hdqt::dequantize(hdqt::quantize_stochastic(Matrix(1, n, 0.3), 4, 1.0, rng));
    double lib = 0.0;
    for (double v : back.values()) lib += v;
    lib /= n;
    const double ref = oracle::sr_mean_estimator(0.3, n);
    CHECK(std::abs(ref - 0.3) < 0.01);
    CHECK(std::abs(lib - 0.3) < 0.01);
    CHECK(std::abs(lib - ref) < 0.01);
}
