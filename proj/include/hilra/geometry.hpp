#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hilra {

// Coordinates are always stored in 3 slots; 2D problems leave z = 0.
using Point = std::array<double, 3>;
using Coords = std::array<std::int64_t, 3>;

struct Bounds {
  Point center{0.0, 0.0, 0.0};
  double half_width = 1.0;

  bool contains(const Point& p, int dim) const;
};

// Source/target geometry. Points live in the root box [-1,1]^dim.
class PointSet {
 public:
  PointSet(int dim, std::vector<Point> points);

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Point> points() const { return points_; }

 private:
  int dim_;
  std::vector<Point> points_;
};

// Cell-centred uniform lattice with `counts[d]` points along axis d on
// [-1,1]^dim.
PointSet make_lattice(int dim, std::array<std::size_t, 3> counts);

// Splits N into per-axis lattice counts: exact n^dim when N is a perfect
// power, otherwise the most balanced factorization (8192 -> 32x16x16).
std::array<std::size_t, 3> lattice_counts(std::size_t n, int dim);
bool is_perfect_power(std::size_t n, int dim);

struct MortonKey {
  int level = 0;
  std::uint64_t index = 0;

  friend bool operator==(const MortonKey&, const MortonKey&) = default;
};

int max_morton_level(int dim);

MortonKey morton_encode(const Point& p, int level, const Bounds& root, int dim);
MortonKey morton_from_coords(const Coords& c, int level, int dim);
Coords morton_decode(const MortonKey& key, int dim);
Bounds box_bounds(const MortonKey& key, const Bounds& root, int dim);

inline MortonKey parent(const MortonKey& k, int dim) {
  return {k.level - 1, k.index >> dim};
}
inline MortonKey child(const MortonKey& k, int which, int dim) {
  return {k.level + 1, (k.index << dim) | static_cast<std::uint64_t>(which)};
}

// Leaf level for N points at a target occupancy q per leaf.
int default_depth(std::size_t n, int dim, double points_per_leaf = 64.0);

// Complete (non-adaptive) tree. Points are held in Morton order; order()
// maps sorted position -> input index.
class UniformTree {
 public:
  static UniformTree build(const PointSet& pts, int depth, Bounds root = {});

  int dim() const { return dim_; }
  int depth() const { return depth_; }
  const Bounds& root() const { return root_; }
  std::size_t size() const { return points_.size(); }

  std::size_t boxes_at(int level) const { return std::size_t{1} << (dim_ * level); }
  std::size_t children_per_box() const { return std::size_t{1} << dim_; }

  std::span<const Point> points() const { return points_; }
  std::span<const std::size_t> order() const { return order_; }

  struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
  };
  // Contiguous sorted-point range of box `index` at `level`.
  Range range(int level, std::size_t index) const;

  Point center(int level, std::size_t index) const;
  double half_width(int level) const;
  Coords coords(int level, std::size_t index) const;

  // Input-order -> Morton-order and back.
  template <class T>
  std::vector<T> to_sorted(std::span<const T> input) const {
    std::vector<T> out(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) out[i] = input[order_[i]];
    return out;
  }
  template <class T>
  std::vector<T> to_input(std::span<const T> sorted) const {
    std::vector<T> out(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) out[order_[i]] = sorted[i];
    return out;
  }

  std::size_t bytes() const;

 private:
  int dim_ = 3;
  int depth_ = 0;
  Bounds root_;
  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> leaf_offsets_;
};

// U-lists at the leaf level (adjacent leaves including self) and V-lists at
// every level (children of the parent's neighbours that are not neighbours).
class InteractionLists {
 public:
  static InteractionLists build(const UniformTree& tree);

  int depth() const { return depth_; }
  std::span<const std::uint32_t> u_list(std::size_t leaf) const;
  std::span<const std::uint32_t> v_list(int level, std::size_t box) const;

  std::size_t v_pairs(int level) const { return v_boxes_[level].size(); }
  std::size_t bytes() const;

 private:
  int depth_ = 0;
  std::vector<std::uint32_t> u_offsets_;
  std::vector<std::uint32_t> u_boxes_;
  std::vector<std::vector<std::uint32_t>> v_offsets_;
  std::vector<std::vector<std::uint32_t>> v_boxes_;
};

// |V| bound per box: 6^dim - 3^dim.
constexpr std::size_t max_v_list_size(int dim) { return dim == 2 ? 27 : 189; }

}  // namespace hilra
