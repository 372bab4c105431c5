#include "hdqt/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdqt/errors.hpp"

namespace hdqt {

namespace {

void check_bits(int bits) {
    if (bits < 2 || bits > 16) {
        throw ParameterError("quantizer: bit-width " + std::to_string(bits) + " outside [2, 16]");
    }
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ParameterError("quantizer: scale factor must be positive and finite");
    }
}

QuantTensor make_tensor(const Matrix& x, int bits, double alpha) {
    QuantTensor q;
    q.rows = x.rows();
    q.cols = x.cols();
    q.bits = bits;
    q.codes.resize(x.size());
    q.scale = std::ldexp(1.0, -(bits - 1)) / alpha;
    return q;
}

}  // namespace

void QuantConfig::validate() const {
    if (input_bits < 2 || input_bits > 16) {
        throw ParameterError("input_bits must lie in [2, 16]");
    }
    if (accum_bits < 4 || accum_bits > 32) {
        throw ParameterError("accum_bits must lie in [4, 32]");
    }
    if (accum_bits < input_bits) {
        throw ParameterError("accum_bits must be >= input_bits");
    }
    if (tile_size < 1) {
        throw ParameterError("tile_size must be >= 1");
    }
    if (!(fwd_outlier_scale > 0.0 && fwd_outlier_scale <= 1.0)) {
        throw ParameterError("fwd_outlier_scale must lie in (0, 1]");
    }
}

double calibrate_scale(const Matrix& x, double outlier_scale) {
    if (x.empty()) {
        throw ShapeError("calibrate_scale: empty tensor");
    }
    if (!(outlier_scale > 0.0 && outlier_scale <= 1.0)) {
        throw ParameterError("calibrate_scale: outlier scale must lie in (0, 1]");
    }
    const double m = max_abs(x);
    if (m == 0.0) {
        return 1.0;
    }
    return 1.0 / (outlier_scale * m);
}

QuantTensor quantize_nearest(const Matrix& x, int bits, double alpha) {
    check_bits(bits);
    check_alpha(alpha);
    QuantTensor q = make_tensor(x, bits, alpha);
    const double levels = std::ldexp(1.0, bits - 1);
    const double top = q.max_code();
    const auto in = x.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double scaled = alpha * in[i];
        double v = std::round(std::clamp(scaled, -1.0, 1.0) * levels);
        if (std::abs(scaled) > 1.0 || std::abs(v) > top) {
            ++q.saturated;
        }
        v = std::clamp(v, -top, top);
        q.codes[i] = static_cast<std::int32_t>(v);
    }
    return q;
}

QuantTensor quantize_stochastic(const Matrix& x, int bits, double alpha, Rng& rng) {
    check_bits(bits);
    check_alpha(alpha);
    QuantTensor q = make_tensor(x, bits, alpha);
    const double levels = std::ldexp(1.0, bits - 1);
    const double top = q.max_code();
    const auto in = x.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double scaled = alpha * in[i];
        const double v = std::clamp(scaled, -1.0, 1.0) * levels;
        const double lower = std::floor(v);
        // Always draw so the stream position does not depend on the data.
        const double u = rng.next_unit();
        double code = lower + (u < v - lower ? 1.0 : 0.0);
        if (std::abs(scaled) > 1.0 || std::abs(code) > top) {
            ++q.saturated;
        }
        code = std::clamp(code, -top, top);
        q.codes[i] = static_cast<std::int32_t>(code);
    }
    return q;
}

Matrix dequantize(const QuantTensor& q) {
    Matrix out(q.rows, q.cols);
    auto dst = out.values();
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
        dst[i] = q.codes[i] * q.scale;
    }
    return out;
}

}  // namespace hdqt
