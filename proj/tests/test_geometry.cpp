#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "hilra/error.hpp"
#include "hilra/geometry.hpp"

using namespace hilra;

namespace {

PointSet random_points(int dim, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), dim == 3 ? u(rng) : 0.0};
  return PointSet(dim, std::move(pts));
}

Coords ancestor(const UniformTree& tree, int level, std::size_t leaf) {
  const Coords c = tree.coords(tree.depth(), leaf);
  const int shift = tree.depth() - level;
  return {c[0] >> shift, c[1] >> shift, c[2] >> shift};
}

std::size_t index_at(const Coords& c, int level, int dim) { return morton_from_coords(c, level, dim).index; }

}  // namespace

TEST_CASE("morton_encode basic boxes") {
  const Bounds root;
  CHECK(morton_encode({0.0, 0.0, 0.0}, 0, root, 3) == MortonKey{0, 0});
  const double d = 1e-9;
  CHECK(morton_encode({-1 + d, -1 + d, 0.0}, 3, root, 2).index == 0);
  CHECK(morton_encode({0.9, 0.9, 0.9}, 1, root, 3).index == 7);
}

TEST_CASE("morton_encode rejects bad input") {
  const Bounds root;
  CHECK_THROWS_AS(morton_encode({1.5, 0.0, 0.0}, 2, root, 3), DomainError);
  CHECK_THROWS_AS(morton_encode({0.0, 0.0, 0.0}, 22, root, 3), ConfigError);
}

TEST_CASE("points on a shared face go to the lower box") {
  const Bounds root;
  // x = 0 separates boxes 0 and 1 at level 1
  const auto k = morton_encode({0.0, -0.5, 0.0}, 1, root, 2);
  CHECK(morton_decode(k, 2)[0] == 0);
  const auto k2 = morton_encode({0.5, -0.5, 0.0}, 2, root, 2);
  CHECK(morton_decode(k2, 2)[0] == 2);
  // the upper root face stays inside the last box
  CHECK(morton_decode(morton_encode({1.0, 1.0, 1.0}, 3, root, 3), 3)[2] == 7);
}

TEST_CASE("encode/decode round trip contains the point") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> level(0, 12);
  for (int dim : {2, 3}) {
    const auto pts = random_points(dim, 10000, 11 + dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto key = morton_encode(pts[i], level(rng), Bounds{}, dim);
      REQUIRE(box_bounds(key, Bounds{}, dim).contains(pts[i], dim));
    }
  }
}

TEST_CASE("parent of child is identity") {
  for (int dim : {2, 3}) {
    for (std::uint64_t idx : {0ull, 5ull, 37ull}) {
      const MortonKey k{3, idx};
      for (int c = 0; c < (1 << dim); ++c) CHECK(parent(child(k, c, dim), dim) == k);
    }
  }
}

TEST_CASE("lattice helpers") {
  CHECK(lattice_counts(4096, 3) == std::array<std::size_t, 3>{16, 16, 16});
  CHECK(lattice_counts(8192, 3) == std::array<std::size_t, 3>{32, 16, 16});
  CHECK(lattice_counts(1024, 2) == std::array<std::size_t, 3>{32, 32, 1});
  CHECK(is_perfect_power(32768, 3));
  CHECK_FALSE(is_perfect_power(8192, 3));
  CHECK(is_perfect_power(65536, 2));
  CHECK_THROWS_AS(PointSet(4, {{0, 0, 0}}), UsageError);
  CHECK_THROWS_AS(PointSet(3, {}), UsageError);
  CHECK_THROWS_AS(PointSet(3, {{0, 0, 1.01}}), DomainError);
}

TEST_CASE("default depth") {
  CHECK(default_depth(64, 3) == 2);
  CHECK(default_depth(32768, 3) == 3);
  CHECK(default_depth(262144, 2) == 6);
  CHECK(default_depth(250047, 3) == 4);
}

TEST_CASE("build_tree: one point per octant") {
  std::vector<Point> pts;
  for (int k = 0; k < 8; ++k) pts.push_back({k & 1 ? 0.5 : -0.5, k & 2 ? 0.5 : -0.5, k & 4 ? 0.5 : -0.5});
  std::reverse(pts.begin(), pts.end());
  const auto tree = UniformTree::build(PointSet(3, pts), 1);
  for (std::size_t b = 0; b < 8; ++b) CHECK(tree.range(1, b).size() == 1);
  // order maps sorted position back to the input
  CHECK(tree.order()[0] == 7);
}

TEST_CASE("build_tree: 16^3 lattice at depth 2 has 64 points per leaf") {
  const auto pts = make_lattice(3, {16, 16, 16});
  const auto tree = UniformTree::build(pts, 2);
  // brute-force count by box bounds
  std::map<std::uint64_t, std::size_t> counts;
  for (std::size_t b = 0; b < 64; ++b) {
    const auto box = box_bounds({2, b}, Bounds{}, 3);
    for (std::size_t i = 0; i < pts.size(); ++i) counts[b] += box.contains(pts[i], 3);
  }
  for (std::size_t b = 0; b < 64; ++b) {
    CHECK(counts[b] == 64);
    CHECK(tree.range(2, b).size() == 64);
  }
}

TEST_CASE("leaf ranges partition the points and sorting is a permutation") {
  for (int dim : {2, 3}) {
    const auto pts = random_points(dim, 1001, 3);
    const auto tree = UniformTree::build(pts, 2);
    std::size_t next = 0;
    for (std::size_t b = 0; b < tree.boxes_at(2); ++b) {
      const auto r = tree.range(2, b);
      CHECK(r.begin == next);
      next = r.end;
      for (std::size_t i = r.begin; i < r.end; ++i) {
        CHECK(box_bounds({2, b}, Bounds{}, dim).contains(tree.points()[i], dim));
      }
    }
    CHECK(next == pts.size());
    CHECK(tree.range(0, 0).size() == pts.size());

    std::vector<double> charges(pts.size());
    for (std::size_t i = 0; i < charges.size(); ++i) charges[i] = 0.25 * static_cast<double>(i % 17);
    auto sorted = tree.to_sorted<double>(charges);
    auto back = tree.to_input<double>(sorted);
    CHECK(back == charges);
    std::sort(sorted.begin(), sorted.end());
    std::sort(charges.begin(), charges.end());
    CHECK(sorted == charges);
  }
}

TEST_CASE("build_tree rejects depth beyond the key width") {
  const auto pts = make_lattice(3, {2, 2, 2});
  CHECK_THROWS_AS(UniformTree::build(pts, 22), ConfigError);
  CHECK_THROWS_AS(UniformTree::build(pts, 12), ConfigError);
  CHECK_THROWS_AS(InteractionLists::build(UniformTree::build(pts, 1)), ConfigError);
}

TEST_CASE("V-list sizes") {
  const auto pts = make_lattice(3, {8, 8, 8});
  const auto tree = UniformTree::build(pts, 3);
  const auto lists = InteractionLists::build(tree);
  // interior box at level 3
  const auto interior = index_at({3, 4, 3}, 3, 3);
  CHECK(lists.v_list(3, interior).size() == 189);

  // corner at level 2: brute-force over all level-2 boxes
  const Coords corner{0, 0, 0};
  std::size_t expected = 0;
  for (std::size_t b = 0; b < 64; ++b) {
    const Coords c = tree.coords(2, b);
    bool parents_adjacent = true;
    bool adjacent = true;
    for (int d = 0; d < 3; ++d) {
      parents_adjacent &= std::abs((c[d] >> 1) - (corner[d] >> 1)) <= 1;
      adjacent &= std::abs(c[d] - corner[d]) <= 1;
    }
    expected += parents_adjacent && !adjacent;
  }
  const auto got = lists.v_list(2, index_at(corner, 2, 3)).size();
  CHECK(got == expected);
  CHECK(got == 56);
  CHECK(got < 189);

  CHECK(lists.v_list(0, 0).empty());
  for (std::size_t b = 0; b < 8; ++b) CHECK(lists.v_list(1, b).empty());
}

TEST_CASE("interaction lists: bound, symmetry, U/V disjoint") {
  for (int dim : {2, 3}) {
    const int depth = dim == 2 ? 4 : 3;
    const auto pts = random_points(dim, 500, 5);
    const auto tree = UniformTree::build(pts, depth);
    const auto lists = InteractionLists::build(tree);
    for (int level = 2; level <= depth; ++level) {
      for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
        const auto v = lists.v_list(level, b);
        CHECK(v.size() <= max_v_list_size(dim));
        for (auto s : v) {
          const auto back = lists.v_list(level, s);
          CHECK(std::find(back.begin(), back.end(), b) != back.end());
        }
        if (level == depth) {
          const auto u = lists.u_list(b);
          for (auto s : u) CHECK(std::find(v.begin(), v.end(), s) == v.end());
        }
      }
    }
  }
}

TEST_CASE("interaction lists cover every ordered leaf pair exactly once") {
  for (int dim : {2, 3}) {
    for (int depth : {2, 3}) {
      const auto pts = random_points(dim, 64, 9);
      const auto tree = UniformTree::build(pts, depth);
      const auto lists = InteractionLists::build(tree);
      const std::size_t leaves = tree.boxes_at(depth);
      for (std::size_t a = 0; a < leaves; ++a) {
        const auto u = lists.u_list(a);
        const std::set<std::uint32_t> uset(u.begin(), u.end());
        for (std::size_t b = 0; b < leaves; ++b) {
          int cover = uset.count(static_cast<std::uint32_t>(b)) ? 1 : 0;
          for (int level = 2; level <= depth; ++level) {
            const auto va = lists.v_list(level, index_at(ancestor(tree, level, a), level, dim));
            const auto bb = index_at(ancestor(tree, level, b), level, dim);
            cover += static_cast<int>(std::count(va.begin(), va.end(), bb));
          }
          REQUIRE(cover == 1);
        }
      }
    }
  }
}
