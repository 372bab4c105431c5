#include "hdqt/hadamard.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "hdqt/errors.hpp"

namespace hdqt {

Matrix sylvester(int k) {
    if (k < 0 || k > 12) {
        throw ParameterError("sylvester: order exponent " + std::to_string(k) + " outside [0, 12]");
    }
    const std::size_t n = std::size_t{1} << k;
    Matrix h(n, n);
    h(0, 0) = 1.0;
    for (std::size_t half = 1; half < n; half *= 2) {
        for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t j = 0; j < half; ++j) {
                const double v = h(i, j);
                h(i, j + half) = v;
                h(i + half, j) = v;
                h(i + half, j + half) = -v;
            }
        }
    }
    return h;
}

std::uint64_t fwht_inplace(std::span<double> v) {
    const std::size_t n = v.size();
    if (!std::has_single_bit(n)) {
        throw ShapeError("fwht: length " + std::to_string(n) + " is not a power of two");
    }
    std::uint64_t ops = 0;
    for (std::size_t h = 1; h < n; h *= 2) {
        for (std::size_t i = 0; i < n; i += 2 * h) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = v[j];
                const double b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        ops += n;
    }
    return ops;
}

BlockPlan plan_blocks(std::size_t dim, std::size_t max_block) {
    if (dim < 1) {
        throw ParameterError("plan_blocks: dimension must be >= 1");
    }
    if (!std::has_single_bit(max_block)) {
        throw ParameterError("plan_blocks: block cap must be a power of two");
    }
    BlockPlan plan;
    plan.dim = dim;
    std::size_t rest = dim;
    while (rest > 0) {
        const std::size_t block = std::min(std::bit_floor(rest), max_block);
        plan.blocks.push_back(block);
        rest -= block;
    }
    return plan;
}

Matrix apply_block_hadamard(const Matrix& x, const BlockPlan& plan, Axis axis,
                            Normalize normalize) {
    const std::size_t len = axis == Axis::Cols ? x.cols() : x.rows();
    if (len != plan.dim) {
        throw ShapeError("apply_block_hadamard: axis length " + std::to_string(len) +
                         " != plan dimension " + std::to_string(plan.dim));
    }
    Matrix out = x;
    std::vector<double> buf;
    const std::size_t lines = axis == Axis::Cols ? x.rows() : x.cols();
    for (std::size_t line = 0; line < lines; ++line) {
        std::size_t offset = 0;
        for (std::size_t block : plan.blocks) {
            if (block > 1) {
                const double s = normalize == Normalize::InvSqrtN
                                     ? 1.0 / std::sqrt(static_cast<double>(block))
                                     : 1.0;
                if (axis == Axis::Cols) {
                    auto seg = out.row(line).subspan(offset, block);
                    fwht_inplace(seg);
                    if (s != 1.0) {
                        for (double& v : seg) v *= s;
                    }
                } else {
                    buf.resize(block);
                    for (std::size_t i = 0; i < block; ++i) buf[i] = out(offset + i, line);
                    fwht_inplace(buf);
                    for (std::size_t i = 0; i < block; ++i) out(offset + i, line) = buf[i] * s;
                }
            }
            offset += block;
        }
    }
    return out;
}

}  // namespace hdqt
