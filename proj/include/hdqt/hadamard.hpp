#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hdqt/matrix.hpp"

namespace hdqt {

/// Dense Sylvester Hadamard matrix of order 2^k, 0 <= k <= 12.
Matrix sylvester(int k);

/// In-place unnormalized fast Walsh-Hadamard transform, v <- H_k v.
/// Length must be a power of two. Returns the number of add/sub operations
/// performed (n log2 n).
std::uint64_t fwht_inplace(std::span<double> v);

/// Decomposition of a length into power-of-two diagonal blocks.
struct BlockPlan {
    std::size_t dim = 0;
    std::vector<std::size_t> blocks;

    std::size_t block_count() const { return blocks.size(); }
};

constexpr std::size_t kDefaultMaxBlock = 1024;

/// Greedy binary decomposition of `dim`, largest block first, each block
/// capped at `max_block` (a power of two).
BlockPlan plan_blocks(std::size_t dim, std::size_t max_block = kDefaultMaxBlock);

enum class Axis { Rows, Cols };
enum class Normalize { None, InvSqrtN };

/// Applies BlockDiag(H_n1, H_n2, ...) along `axis`: Axis::Cols transforms
/// every row (x H), Axis::Rows transforms every column (H x).
Matrix apply_block_hadamard(const Matrix& x, const BlockPlan& plan, Axis axis,
                            Normalize normalize);

}  // namespace hdqt
