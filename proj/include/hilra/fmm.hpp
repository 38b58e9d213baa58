#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hilra/geometry.hpp"
#include "hilra/kernels.hpp"
#include "hilra/linalg.hpp"

namespace hilra::fmm {

// Interpolation order for a target accuracy:
// p = max(2, ceil(-log10 eps)) + 2, plus 2 more for Helmholtz.
int order_for_accuracy(double eps, const Kernel& kernel);

struct FmmConfig {
  int order = 6;            // Chebyshev nodes per dimension
  double eps = 1e-4;        // relative singular-value cutoff of each M2L operator
  double leaf_size = 64.0;  // target points per leaf
  int depth = 0;            // 0 picks default_depth(N, dim, leaf_size)
  bool compress_m2l = true; // false keeps the dense p^dim x p^dim operators

  static FmmConfig for_accuracy(double eps, const Kernel& kernel);
};

// Translation vector between two same-level boxes, in box widths.
using TransferVector = std::array<int, 3>;

// One M2L operator K ~= U diag(sigma) Vh. Dense operators keep K in U with
// empty sigma/Vh.
template <class T>
struct M2LOperator {
  Matrix<T> u;
  Vector<double> sigma;
  Matrix<T> vh;

  bool compressed() const { return sigma.size() > 0; }
  Eigen::Index rank() const { return compressed() ? sigma.size() : u.cols(); }
  Matrix<T> dense() const;
  std::size_t bytes() const;
};

// M2L operators keyed by transfer vector, all at one reference scale.
template <class T>
class M2LTable {
 public:
  M2LTable() = default;
  explicit M2LTable(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return count_; }
  bool contains(const TransferVector& t) const;
  const M2LOperator<T>& at(const TransferVector& t) const;
  void insert(const TransferVector& t, M2LOperator<T> op);
  std::size_t bytes() const;

  static int slot(const TransferVector& t, int dim);
  const M2LOperator<T>* by_slot(int s) const { return present_[s] ? &ops_[s] : nullptr; }
  int slots() const { return static_cast<int>(ops_.size()); }

 private:
  int dim_ = 3;
  std::size_t count_ = 0;
  std::vector<M2LOperator<T>> ops_;
  std::vector<bool> present_;
};

// All transfer vectors with entries in {-3..3} and at least one |entry| > 1:
// 316 in 3D, 40 in 2D.
std::vector<TransferVector> transfer_vectors(int dim);

struct MemoryReport {
  std::size_t tree = 0;
  std::size_t expansions = 0;
  std::size_t m2l_table = 0;
  std::size_t buffers = 0;

  std::size_t total() const { return tree + expansions + m2l_table + buffers; }
};

// Matrix-free kernel-independent FMM over a fixed point set: Chebyshev
// interpolation for P2M/M2M/L2L/L2P, SVD-compressed M2L operators cached by
// transfer vector, direct P2P over the leaf U-lists.
//
// Construction builds the tree, the interaction lists and every operator.
// A constructed engine is immutable; matvec may be called concurrently.
template <class T>
class Fmm {
 public:
  Fmm(const Kernel& kernel, const PointSet& pts, FmmConfig cfg);
  ~Fmm();
  Fmm(Fmm&&) noexcept;
  Fmm& operator=(Fmm&&) noexcept;

  // Potentials in input point order.
  Vector<T> matvec(std::span<const T> charges) const;

  const FmmConfig& config() const;
  const Kernel& kernel() const;
  const UniformTree& tree() const;
  const InteractionLists& lists() const;

  // Laplace kernels share one table across levels; Helmholtz has one per level.
  bool homogeneous() const;
  const M2LTable<T>& table(int level) const;
  // Geometric rescaling of the reference table at a level:
  // K_level = scale * K_ref + shift * 1 1^T.
  double level_scale(int level) const;
  double level_shift(int level) const;

  // Unique operators held vs. V-list pairs they serve.
  std::size_t stored_operators() const;
  std::size_t v_list_pairs() const;

  double precompute_seconds() const;
  MemoryReport memory_report() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

extern template class Fmm<double>;
extern template class Fmm<Complex>;

}  // namespace hilra::fmm
