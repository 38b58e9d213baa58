#include "hilra/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hilra/error.hpp"

namespace hilra {

namespace {

constexpr std::size_t kMaxTreeBoxes = std::size_t{1} << 27;

void check_dim(int dim) {
  if (dim != 2 && dim != 3) {
    throw UsageError("dimension must be 2 or 3, got " + std::to_string(dim));
  }
}

std::int64_t box_coordinate(double x, double lo, double width, int level) {
  const std::int64_t n = std::int64_t{1} << level;
  const double t = (x - lo) / width * static_cast<double>(n);
  // Points on a shared face go to the lower-index box.
  auto c = static_cast<std::int64_t>(std::ceil(t)) - 1;
  return std::clamp<std::int64_t>(c, 0, n - 1);
}

}  // namespace

bool Bounds::contains(const Point& p, int dim) const {
  for (int d = 0; d < dim; ++d) {
    if (!(std::abs(p[d] - center[d]) <= half_width)) return false;
  }
  return true;
}

PointSet::PointSet(int dim, std::vector<Point> points) : dim_(dim), points_(std::move(points)) {
  check_dim(dim);
  if (points_.empty()) throw UsageError("point set must contain at least one point");
  const Bounds root;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!root.contains(points_[i], dim)) {
      std::ostringstream msg;
      msg << "point " << i << " lies outside [-1,1]^" << dim;
      throw DomainError(msg.str());
    }
    if (dim == 2) points_[i][2] = 0.0;
  }
}

PointSet make_lattice(int dim, std::array<std::size_t, 3> counts) {
  check_dim(dim);
  if (dim == 2) counts[2] = 1;
  std::vector<Point> pts;
  pts.reserve(counts[0] * counts[1] * counts[2]);
  auto coord = [](std::size_t i, std::size_t n) {
    return -1.0 + (static_cast<double>(i) + 0.5) * (2.0 / static_cast<double>(n));
  };
  for (std::size_t k = 0; k < counts[2]; ++k) {
    for (std::size_t j = 0; j < counts[1]; ++j) {
      for (std::size_t i = 0; i < counts[0]; ++i) {
        pts.push_back({coord(i, counts[0]), coord(j, counts[1]), dim == 3 ? coord(k, counts[2]) : 0.0});
      }
    }
  }
  return PointSet(dim, std::move(pts));
}

bool is_perfect_power(std::size_t n, int dim) {
  const auto r = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n), 1.0 / dim)));
  for (std::size_t c = (r > 0 ? r - 1 : 0); c <= r + 1; ++c) {
    std::size_t p = 1;
    for (int d = 0; d < dim; ++d) p *= c;
    if (p == n) return true;
  }
  return false;
}

std::array<std::size_t, 3> lattice_counts(std::size_t n, int dim) {
  check_dim(dim);
  if (n == 0) throw UsageError("lattice size must be positive");
  std::array<std::size_t, 3> best{n, 1, 1};
  double best_ratio = static_cast<double>(n);
  if (dim == 2) {
    for (std::size_t a = 1; a * a <= n; ++a) {
      if (n % a != 0) continue;
      const std::size_t b = n / a;
      const double ratio = static_cast<double>(b) / static_cast<double>(a);
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best = {b, a, 1};
      }
    }
    return best;
  }
  for (std::size_t c = 1; c * c * c <= n; ++c) {
    if (n % c != 0) continue;
    const std::size_t rest = n / c;
    for (std::size_t b = c; b * b <= rest; ++b) {
      if (rest % b != 0) continue;
      const std::size_t a = rest / b;
      const double ratio = static_cast<double>(a) / static_cast<double>(c);
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best = {a, b, c};
      }
    }
  }
  return best;
}

int max_morton_level(int dim) { return dim == 2 ? 31 : 21; }

MortonKey morton_from_coords(const Coords& c, int level, int dim) {
  std::uint64_t index = 0;
  for (int b = 0; b < level; ++b) {
    for (int d = 0; d < dim; ++d) {
      index |= static_cast<std::uint64_t>((c[d] >> b) & 1) << (b * dim + d);
    }
  }
  return {level, index};
}

MortonKey morton_encode(const Point& p, int level, const Bounds& root, int dim) {
  check_dim(dim);
  if (level < 0 || level > max_morton_level(dim)) {
    throw ConfigError("morton level " + std::to_string(level) + " exceeds key width");
  }
  if (!root.contains(p, dim)) throw DomainError("point outside root box");
  Coords c{0, 0, 0};
  for (int d = 0; d < dim; ++d) {
    c[d] = box_coordinate(p[d], root.center[d] - root.half_width, 2.0 * root.half_width, level);
  }
  return morton_from_coords(c, level, dim);
}

Coords morton_decode(const MortonKey& key, int dim) {
  Coords c{0, 0, 0};
  for (int b = 0; b < key.level; ++b) {
    for (int d = 0; d < dim; ++d) {
      c[d] |= static_cast<std::int64_t>((key.index >> (b * dim + d)) & 1) << b;
    }
  }
  return c;
}

Bounds box_bounds(const MortonKey& key, const Bounds& root, int dim) {
  const Coords c = morton_decode(key, dim);
  const double width = 2.0 * root.half_width / static_cast<double>(std::int64_t{1} << key.level);
  Bounds b;
  b.half_width = 0.5 * width;
  for (int d = 0; d < dim; ++d) {
    b.center[d] = root.center[d] - root.half_width + (static_cast<double>(c[d]) + 0.5) * width;
  }
  return b;
}

int default_depth(std::size_t n, int dim, double points_per_leaf) {
  check_dim(dim);
  const double leaves = static_cast<double>(n) / points_per_leaf;
  const int depth = leaves <= 1.0 ? 0 : static_cast<int>(std::lround(std::log(leaves) / std::log(std::pow(2.0, dim))));
  return std::max(2, depth);
}

UniformTree UniformTree::build(const PointSet& pts, int depth, Bounds root) {
  const int dim = pts.dim();
  if (depth < 0 || depth > max_morton_level(dim) || (std::size_t{1} << (dim * depth)) > kMaxTreeBoxes) {
    throw ConfigError("tree depth " + std::to_string(depth) + " is too large");
  }
  UniformTree tree;
  tree.dim_ = dim;
  tree.depth_ = depth;
  tree.root_ = root;

  const std::size_t n = pts.size();
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = morton_encode(pts[i], depth, root, dim).index;

  tree.order_.resize(n);
  std::iota(tree.order_.begin(), tree.order_.end(), std::size_t{0});
  std::stable_sort(tree.order_.begin(), tree.order_.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  tree.points_.resize(n);
  const std::size_t leaves = tree.boxes_at(depth);
  tree.leaf_offsets_.assign(leaves + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    tree.points_[i] = pts[tree.order_[i]];
    ++tree.leaf_offsets_[keys[tree.order_[i]] + 1];
  }
  std::partial_sum(tree.leaf_offsets_.begin(), tree.leaf_offsets_.end(), tree.leaf_offsets_.begin());
  return tree;
}

UniformTree::Range UniformTree::range(int level, std::size_t index) const {
  const int shift = dim_ * (depth_ - level);
  return {leaf_offsets_[index << shift], leaf_offsets_[(index + 1) << shift]};
}

Point UniformTree::center(int level, std::size_t index) const {
  return box_bounds({level, index}, root_, dim_).center;
}

double UniformTree::half_width(int level) const {
  return root_.half_width / static_cast<double>(std::int64_t{1} << level);
}

Coords UniformTree::coords(int level, std::size_t index) const {
  return morton_decode({level, index}, dim_);
}

std::size_t UniformTree::bytes() const {
  return points_.size() * sizeof(Point) + order_.size() * sizeof(std::size_t) +
         leaf_offsets_.size() * sizeof(std::size_t);
}

InteractionLists InteractionLists::build(const UniformTree& tree) {
  const int dim = tree.dim();
  const int depth = tree.depth();
  if (depth < 2) throw ConfigError("interaction lists need tree depth >= 2");

  InteractionLists lists;
  lists.depth_ = depth;
  lists.v_offsets_.resize(depth + 1);
  lists.v_boxes_.resize(depth + 1);

  const int zr = dim == 3 ? 1 : 0;
  auto in_range = [](const Coords& c, std::int64_t n, int dim) {
    for (int d = 0; d < dim; ++d) {
      if (c[d] < 0 || c[d] >= n) return false;
    }
    return true;
  };
  auto adjacent = [&](const Coords& a, const Coords& b) {
    for (int d = 0; d < dim; ++d) {
      if (std::abs(a[d] - b[d]) > 1) return false;
    }
    return true;
  };

  for (int level = 0; level <= depth; ++level) {
    auto& offsets = lists.v_offsets_[level];
    auto& boxes = lists.v_boxes_[level];
    const std::size_t count = tree.boxes_at(level);
    offsets.assign(count + 1, 0);
    if (level < 2) continue;
    const std::int64_t n_parent = std::int64_t{1} << (level - 1);
    std::vector<std::uint32_t> scratch;
    for (std::size_t b = 0; b < count; ++b) {
      const Coords c = tree.coords(level, b);
      const Coords pc{c[0] >> 1, c[1] >> 1, c[2] >> 1};
      scratch.clear();
      for (std::int64_t dz = -zr; dz <= zr; ++dz) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const Coords pn{pc[0] + dx, pc[1] + dy, pc[2] + dz};
            if (!in_range(pn, n_parent, dim)) continue;
            const auto pkey = morton_from_coords(pn, level - 1, dim);
            for (std::size_t k = 0; k < tree.children_per_box(); ++k) {
              const auto ckey = child(pkey, static_cast<int>(k), dim);
              const Coords cc = morton_decode(ckey, dim);
              if (!adjacent(cc, c)) scratch.push_back(static_cast<std::uint32_t>(ckey.index));
            }
          }
        }
      }
      std::sort(scratch.begin(), scratch.end());
      boxes.insert(boxes.end(), scratch.begin(), scratch.end());
      offsets[b + 1] = static_cast<std::uint32_t>(boxes.size());
    }
  }

  const std::size_t leaves = tree.boxes_at(depth);
  const std::int64_t n_leaf = std::int64_t{1} << depth;
  lists.u_offsets_.assign(leaves + 1, 0);
  for (std::size_t b = 0; b < leaves; ++b) {
    const Coords c = tree.coords(depth, b);
    std::vector<std::uint32_t> scratch;
    for (std::int64_t dz = -zr; dz <= zr; ++dz) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const Coords nc{c[0] + dx, c[1] + dy, c[2] + dz};
          if (!in_range(nc, n_leaf, dim)) continue;
          scratch.push_back(static_cast<std::uint32_t>(morton_from_coords(nc, depth, dim).index));
        }
      }
    }
    std::sort(scratch.begin(), scratch.end());
    lists.u_boxes_.insert(lists.u_boxes_.end(), scratch.begin(), scratch.end());
    lists.u_offsets_[b + 1] = static_cast<std::uint32_t>(lists.u_boxes_.size());
  }
  return lists;
}

std::span<const std::uint32_t> InteractionLists::u_list(std::size_t leaf) const {
  return std::span<const std::uint32_t>(u_boxes_).subspan(u_offsets_[leaf], u_offsets_[leaf + 1] - u_offsets_[leaf]);
}

std::span<const std::uint32_t> InteractionLists::v_list(int level, std::size_t box) const {
  const auto& off = v_offsets_[level];
  return std::span<const std::uint32_t>(v_boxes_[level]).subspan(off[box], off[box + 1] - off[box]);
}

std::size_t InteractionLists::bytes() const {
  std::size_t total = (u_offsets_.size() + u_boxes_.size()) * sizeof(std::uint32_t);
  for (int l = 0; l <= depth_; ++l) {
    total += (v_offsets_[l].size() + v_boxes_[l].size()) * sizeof(std::uint32_t);
  }
  return total;
}

}  // namespace hilra
