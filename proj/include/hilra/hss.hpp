#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hilra/fmm.hpp"
#include "hilra/geometry.hpp"
#include "hilra/kernels.hpp"
#include "hilra/linalg.hpp"
#include "hilra/memory.hpp"

namespace hilra::hss {

enum class Sampler { dense, fmm };

struct HssConfig {
  double tol = 1e-4;            // relative rank-revealing tolerance per node
  std::size_t leaf_size = 64;
  int oversampling = 16;        // required gap between sample count and rank
  int initial_samples = 64;
  double growth = 2.0;          // sample-count multiplier on restart
  int max_samples = 4096;
  std::uint64_t seed = 42;
  Sampler sampler = Sampler::dense;
  fmm::FmmConfig fmm{};         // used when sampler == fmm

  void validate() const;
};

// Binary splits of the index range [0, N) down to at most leaf_size indices.
// Node 0 is the root; children of a node are stored after it.
struct ClusterNode {
  std::size_t begin = 0;
  std::size_t end = 0;
  int level = 0;
  int parent = -1;
  int left = -1;
  int right = -1;

  std::size_t size() const { return end - begin; }
  bool leaf() const { return left < 0; }
};

class ClusterTree {
 public:
  static ClusterTree build(std::size_t n, std::size_t leaf_size);

  std::span<const ClusterNode> nodes() const { return nodes_; }
  const ClusterNode& node(int i) const { return nodes_[i]; }
  int levels() const { return levels_; }
  std::size_t size() const { return nodes_.empty() ? 0 : nodes_[0].size(); }
  // Node ids ordered deepest level first.
  std::vector<int> bottom_up() const;

 private:
  std::vector<ClusterNode> nodes_;
  int levels_ = 0;
};

// Symmetric HSS representation: the column generators are the row
// generators (transposed, not conjugated, so complex-symmetric kernels work).
//   leaf:      D = A(I, I), U is |I| x k
//   interior:  U is (k_left + k_right) x k, B = A(J_left, J_right)
// The root carries B but no U.
template <class T>
struct HssFactors {
  ClusterTree tree;
  std::vector<Matrix<T>> d;
  std::vector<Matrix<T>> u;
  std::vector<Matrix<T>> b;
  std::vector<int> rank;
  int samples = 0;   // final sample count
  int restarts = 0;  // adaptive sample growths
  memory::Reservation reservation;

  std::size_t size() const { return tree.size(); }
};

struct TimeBreakdown {
  double sample_s = 0.0;
  double compress_s = 0.0;
};

template <class T>
struct Compressed {
  HssFactors<T> factors;
  TimeBreakdown times;
};

// Points must already be in Morton order; the cluster tree splits that
// order.
template <class T>
Compressed<T> compress(const HssConfig& cfg, const Kernel& kernel, const PointSet& pts);

template <class T>
Vector<T> matvec(const HssFactors<T>& f, std::span<const T> x);

inline constexpr std::size_t kReconstructLimit = 2048;

// Explicit D / U B U^T assembly, for verification at small N.
template <class T>
Matrix<T> reconstruct_dense(const HssFactors<T>& f);

// Structural nestedness: every generator's row count equals the node size at
// a leaf and the sum of child ranks above it. Throws InternalError.
template <class T>
void check_nestedness(const HssFactors<T>& f);

struct LevelRank {
  int level = 0;
  int max_rank = 0;
  double mean_rank = 0.0;
};

struct Stats {
  std::vector<LevelRank> levels;
  int max_rank = 0;
  std::size_t bytes_d = 0;
  std::size_t bytes_u = 0;
  std::size_t bytes_b = 0;

  std::size_t total() const { return bytes_d + bytes_u + bytes_b; }
};

template <class T>
Stats stats(const HssFactors<T>& f);

// Points reordered along a fine Morton curve, with the permutation
// (sorted position -> input index).
struct MortonSorted {
  PointSet points;
  std::vector<std::size_t> order;
};
MortonSorted morton_sorted(const PointSet& pts);

}  // namespace hilra::hss
