#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hdqt/matrix.hpp"
#include "hdqt/rng.hpp"

namespace hdqt {

/// Precision scheme shared by every quantized GEMM in a run.
struct QuantConfig {
    int input_bits = 4;
    int accum_bits = 8;
    std::size_t tile_size = 32;
    /// Applied to the calibration maximum of forward-pass operands.
    double fwd_outlier_scale = 0.975;

    /// Throws ParameterError when the invariants do not hold.
    void validate() const;

    bool operator==(const QuantConfig&) const = default;
};

/// Integer codes plus the dequantization multiplier per code unit.
struct QuantTensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int32_t> codes;
    int bits = 0;
    double scale = 1.0;
    /// Inputs that landed outside the representable range and were clamped.
    std::size_t saturated = 0;

    std::int32_t max_code() const { return (std::int32_t{1} << (bits - 1)) - 1; }
    std::int32_t code(std::size_t r, std::size_t c) const { return codes[r * cols + c]; }
};

/// alpha = 1 / (outlier_scale * max|x|); 1 when x is all zero.
double calibrate_scale(const Matrix& x, double outlier_scale = 1.0);

/// Round-half-away-from-zero quantization onto the symmetric code range.
QuantTensor quantize_nearest(const Matrix& x, int bits, double alpha);
/// Unbiased stochastic rounding; consumes one uniform draw per element.
QuantTensor quantize_stochastic(const Matrix& x, int bits, double alpha, Rng& rng);

Matrix dequantize(const QuantTensor& q);

}  // namespace hdqt
