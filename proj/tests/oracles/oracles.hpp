#pragma once

// Deliberately naive reference implementations used as test oracles.
// Nothing here calls into the library except hdqt::Matrix storage.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdqt/matrix.hpp"

namespace oracle {

using hdqt::Matrix;

struct OracleReport {
    std::string case_id;
    double expected = 0.0;
    double actual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// |actual - expected| <= tolerance, with tolerance always explicit.
OracleReport check_close(std::string case_id, double expected, double actual, double tolerance);

/// H[i][j] = (-1)^popcount(i & j), order 2^k.
Matrix dense_hadamard_oracle(int k);

/// Triple loop, long double accumulation.
Matrix scalar_gemm_oracle(const Matrix& a, const Matrix& b);

/// Greedy herding recomputed from scratch at every step.
std::vector<std::size_t> greedy_herding_oracle(const Matrix& points, std::size_t k);

/// Central differences with step eps * max(1, |p|).
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& loss,
                                     const std::vector<double>& params, double eps = 1e-4);

/// Mean of `draws` stochastic roundings of x onto the grid of step
/// 2^-(bits-1) (alpha = 1), using an independent generator.
double sr_mean_estimator(double x, std::size_t draws, int bits = 4, std::uint64_t seed = 1);

/// Mean of `n` calls to `draw`.
double mean_of(const std::function<double()>& draw, std::size_t n);

/// Scalar model of the quantized forward GEMM: symmetric max calibration,
/// half-away rounding, per-add saturating accumulator over tiles.
Matrix tiled_qgemm_oracle(const Matrix& x, const Matrix& w, int bits, int accum_bits,
                          std::size_t tile, double outlier_scale);

/// Forgetting at `task` from a class x task table of optional accuracies.
double forgetting_oracle(const std::vector<std::vector<std::optional<double>>>& acc,
                         std::size_t task);

/// Mean and sample standard deviation.
std::pair<double, double> mean_std_oracle(const std::vector<double>& xs);

/// Gaussian matrix from an independent generator.
Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double std = 1.0);

/// Student-t (df = 2) samples, heavy tailed.
Matrix student_t2_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace oracle
