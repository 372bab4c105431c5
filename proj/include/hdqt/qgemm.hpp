#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hdqt/matrix.hpp"
#include "hdqt/quantizer.hpp"
#include "hdqt/rng.hpp"

namespace hdqt {

/// Counters gathered while running quantized GEMMs.
struct GemmStats {
    /// Input elements clamped by the quantizer.
    std::uint64_t saturation_count_inputs = 0;
    /// Accumulations (one per output element per tile) that hit the
    /// accumulator rails at least once.
    std::uint64_t saturation_count_accum = 0;
    /// Total accumulations performed; denominator for the rate above.
    std::uint64_t accumulations = 0;
    /// Code occupancy per tensor role, index = code + max_code.
    std::map<std::string, std::vector<std::uint64_t>> bins_used;

    void merge(const GemmStats& other);
    void add_bins(const std::string& role, const std::vector<std::uint64_t>& bins);
};

namespace roles {
inline constexpr const char* kFwdInput = "fwd.input";
inline constexpr const char* kFwdWeight = "fwd.weight";
inline constexpr const char* kBwdInputGrad = "bwd_input.grad";
inline constexpr const char* kBwdInputWeight = "bwd_input.weight";
inline constexpr const char* kBwdWeightActivation = "bwd_weight.activation";
inline constexpr const char* kBwdWeightGrad = "bwd_weight.grad";
}  // namespace roles

/// Count of each code value over the symmetric range, 2^b - 1 bins.
std::vector<std::uint64_t> bin_occupancy(const QuantTensor& q);

/// Integer GEMM a·b over codes. The contraction dimension is cut into tiles
/// of `tile` elements; each tile sums products into a signed accumulator of
/// `accum_bits` that saturates on every add. Tile results are dequantized
/// with a.scale * b.scale and summed at working precision.
Matrix saturating_gemm(const QuantTensor& a, const QuantTensor& b, std::size_t tile,
                       int accum_bits, GemmStats* stats = nullptr);

/// Forward Z = X W with nearest rounding and tiled accumulation.
Matrix qgemm_forward(const Matrix& x, const Matrix& w, const QuantConfig& cfg,
                     GemmStats* stats = nullptr);

/// dX = G W^T computed in the Hadamard domain over the output dimension.
/// G is stochastically rounded, W uses nearest rounding.
Matrix qgemm_backward_input(const Matrix& g, const Matrix& w, const QuantConfig& cfg, Rng& rng,
                            GemmStats* stats = nullptr);

/// dW = X^T G computed in the Hadamard domain over the batch dimension.
/// Both operands are stochastically rounded.
Matrix qgemm_backward_weight(const Matrix& x, const Matrix& g, const QuantConfig& cfg, Rng& rng,
                             GemmStats* stats = nullptr);

}  // namespace hdqt
