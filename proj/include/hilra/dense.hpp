#pragma once

#include <span>

#include "hilra/kernels.hpp"
#include "hilra/linalg.hpp"

namespace hilra::dense {

// Above this size direct summation prints a warning to stderr.
inline constexpr std::size_t kWarnSize = 100000;

// u_i = sum_j G(x_i, x_j) q_j, accumulated in long double in index order.
template <class T>
Vector<T> direct_matvec(const Kernel& k, const PointSet& pts, std::span<const T> charges);

// Column-wise direct_matvec for a block of s vectors. Row blocks of the
// kernel matrix are generated on the fly and applied with a dense product,
// so accumulation is in double rather than long double.
template <class T>
Matrix<T> direct_multi_matvec(const Kernel& k, const PointSet& pts, const Matrix<T>& block);

}  // namespace hilra::dense
