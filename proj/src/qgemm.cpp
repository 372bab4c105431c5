#include "hdqt/qgemm.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "hdqt/errors.hpp"
#include "hdqt/hadamard.hpp"

namespace hdqt {

namespace {

std::int32_t max_abs_code(const QuantTensor& q) {
    std::int32_t m = 0;
    for (auto c : q.codes) {
        m = std::max(m, std::abs(c));
    }
    return m;
}

void record_input(GemmStats* stats, const char* role, const QuantTensor& q) {
    if (stats == nullptr) {
        return;
    }
    stats->saturation_count_inputs += q.saturated;
    stats->add_bins(role, bin_occupancy(q));
}

}  // namespace

void GemmStats::merge(const GemmStats& other) {
    saturation_count_inputs += other.saturation_count_inputs;
    saturation_count_accum += other.saturation_count_accum;
    accumulations += other.accumulations;
    for (const auto& [role, bins] : other.bins_used) {
        add_bins(role, bins);
    }
}

void GemmStats::add_bins(const std::string& role, const std::vector<std::uint64_t>& bins) {
    auto& dst = bins_used[role];
    if (dst.empty()) {
        dst = bins;
        return;
    }
    if (dst.size() != bins.size()) {
        throw ParameterError("GemmStats: histogram width mismatch for role " + role);
    }
    for (std::size_t i = 0; i < bins.size(); ++i) {
        dst[i] += bins[i];
    }
}

std::vector<std::uint64_t> bin_occupancy(const QuantTensor& q) {
    const std::int32_t top = q.max_code();
    std::vector<std::uint64_t> bins(static_cast<std::size_t>(2 * top + 1), 0);
    for (auto c : q.codes) {
        ++bins[static_cast<std::size_t>(c + top)];
    }
    return bins;
}

Matrix saturating_gemm(const QuantTensor& a, const QuantTensor& b, std::size_t tile,
                       int accum_bits, GemmStats* stats) {
    if (a.cols != b.rows) {
        throw ShapeError("saturating_gemm: contraction mismatch " + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows));
    }
    if (tile < 1) {
        throw ParameterError("saturating_gemm: tile must be >= 1");
    }
    if (accum_bits < 2 || accum_bits > 32) {
        throw ParameterError("saturating_gemm: accumulator width outside [2, 32]");
    }
    const std::size_t n = a.rows;
    const std::size_t depth = a.cols;
    const std::size_t m = b.cols;
    const std::int64_t limit = (std::int64_t{1} << (accum_bits - 1)) - 1;
    const double scale = a.scale * b.scale;

    // If no tile can reach the rails, clamping is a no-op and can be skipped.
    const std::int64_t worst = static_cast<std::int64_t>(max_abs_code(a)) * max_abs_code(b) *
                               static_cast<std::int64_t>(std::min(tile, std::max<std::size_t>(depth, 1)));
    const bool can_saturate = worst > limit;

    Matrix out(n, m);
    std::vector<std::int64_t> acc(m);
    std::vector<std::uint8_t> hit(m);
    std::uint64_t saturated = 0;
    std::uint64_t tiles = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t* arow = a.codes.data() + i * depth;
        auto orow = out.row(i);
        for (std::size_t k0 = 0; k0 < depth; k0 += tile) {
            const std::size_t k1 = std::min(depth, k0 + tile);
            std::fill(acc.begin(), acc.end(), 0);
            ++tiles;
            if (can_saturate) {
                std::fill(hit.begin(), hit.end(), 0);
                for (std::size_t k = k0; k < k1; ++k) {
                    const std::int64_t av = arow[k];
                    if (av == 0) continue;
                    const std::int32_t* brow = b.codes.data() + k * m;
                    for (std::size_t j = 0; j < m; ++j) {
                        const std::int64_t s = acc[j] + av * brow[j];
                        const std::int64_t c = std::clamp(s, -limit, limit);
                        hit[j] |= static_cast<std::uint8_t>(c != s);
                        acc[j] = c;
                    }
                }
                for (std::size_t j = 0; j < m; ++j) saturated += hit[j];
            } else {
                for (std::size_t k = k0; k < k1; ++k) {
                    const std::int64_t av = arow[k];
                    if (av == 0) continue;
                    const std::int32_t* brow = b.codes.data() + k * m;
                    for (std::size_t j = 0; j < m; ++j) {
                        acc[j] += av * brow[j];
                    }
                }
            }
            for (std::size_t j = 0; j < m; ++j) {
                orow[j] += static_cast<double>(acc[j]) * scale;
            }
        }
    }
    if (stats != nullptr) {
        stats->saturation_count_accum += saturated;
        stats->accumulations += tiles * m;
    }
    return out;
}

Matrix qgemm_forward(const Matrix& x, const Matrix& w, const QuantConfig& cfg, GemmStats* stats) {
    if (x.cols() != w.rows()) {
        throw ShapeError("qgemm_forward: x is " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + ", w is " + std::to_string(w.rows()) + "x" +
                         std::to_string(w.cols()));
    }
    cfg.validate();
    const QuantTensor xq =
        quantize_nearest(x, cfg.input_bits, calibrate_scale(x, cfg.fwd_outlier_scale));
    const QuantTensor wq =
        quantize_nearest(w, cfg.input_bits, calibrate_scale(w, cfg.fwd_outlier_scale));
    record_input(stats, roles::kFwdInput, xq);
    record_input(stats, roles::kFwdWeight, wq);
    return saturating_gemm(xq, wq, cfg.tile_size, cfg.accum_bits, stats);
}

Matrix qgemm_backward_input(const Matrix& g, const Matrix& w, const QuantConfig& cfg, Rng& rng,
                            GemmStats* stats) {
    if (g.cols() != w.cols()) {
        throw ShapeError("qgemm_backward_input: grad has " + std::to_string(g.cols()) +
                         " columns, weight has " + std::to_string(w.cols()));
    }
    cfg.validate();
    const BlockPlan plan = plan_blocks(g.cols());
    const Matrix gh = apply_block_hadamard(g, plan, Axis::Cols, Normalize::InvSqrtN);
    const Matrix wth = transpose(apply_block_hadamard(w, plan, Axis::Cols, Normalize::InvSqrtN));

    Rng grad_rng = rng.split("bwd_input.grad");
    const QuantTensor gq =
        quantize_stochastic(gh, cfg.input_bits, calibrate_scale(gh), grad_rng);
    const QuantTensor wq = quantize_nearest(wth, cfg.input_bits, calibrate_scale(wth));
    record_input(stats, roles::kBwdInputGrad, gq);
    record_input(stats, roles::kBwdInputWeight, wq);
    return saturating_gemm(gq, wq, std::max<std::size_t>(gq.cols, 1), cfg.accum_bits, stats);
}

Matrix qgemm_backward_weight(const Matrix& x, const Matrix& g, const QuantConfig& cfg, Rng& rng,
                             GemmStats* stats) {
    if (x.rows() != g.rows()) {
        throw ShapeError("qgemm_backward_weight: activation has " + std::to_string(x.rows()) +
                         " rows, grad has " + std::to_string(g.rows()));
    }
    cfg.validate();
    const BlockPlan plan = plan_blocks(x.rows());
    const Matrix xth = apply_block_hadamard(transpose(x), plan, Axis::Cols, Normalize::InvSqrtN);
    const Matrix gh =
        transpose(apply_block_hadamard(transpose(g), plan, Axis::Cols, Normalize::InvSqrtN));

    Rng act_rng = rng.split("bwd_weight.activation");
    Rng grad_rng = rng.split("bwd_weight.grad");
    const QuantTensor xq = quantize_stochastic(xth, cfg.input_bits, calibrate_scale(xth), act_rng);
    const QuantTensor gq = quantize_stochastic(gh, cfg.input_bits, calibrate_scale(gh), grad_rng);
    record_input(stats, roles::kBwdWeightActivation, xq);
    record_input(stats, roles::kBwdWeightGrad, gq);
    return saturating_gemm(xq, gq, std::max<std::size_t>(xq.cols, 1), cfg.accum_bits, stats);
}

}  // namespace hdqt
