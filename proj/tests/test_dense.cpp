#include <numbers>
#include <random>

#include "doctest.h"
#include "hilra/dense.hpp"

using namespace hilra;

TEST_CASE("direct_matvec trivial cases") {
  const PointSet one(3, {{0.1, 0.2, 0.3}});
  const std::vector<double> q1{2.0};
  CHECK(dense::direct_matvec<double>(Kernel::laplace3d(), one, q1)[0] == 0.0);

  const PointSet two(3, {{-0.5, 0, 0}, {0.5, 0, 0}});
  const std::vector<double> q2{1.0, 1.0};
  const auto u = dense::direct_matvec<double>(Kernel::laplace3d(), two, q2);
  CHECK(u[0] == doctest::Approx(1.0 / (4 * std::numbers::pi)));
  CHECK(u[1] == doctest::Approx(1.0 / (4 * std::numbers::pi)));
}

TEST_CASE("uniform charges on a lattice respect its mirror symmetry") {
  const auto pts = make_lattice(3, {8, 8, 8});
  const std::vector<double> q(pts.size(), 1.0);
  const auto u = dense::direct_matvec<double>(Kernel::laplace3d(), pts, q);
  auto idx = [](int i, int j, int k) { return static_cast<std::size_t>(i + 8 * (j + 8 * k)); };
  double worst = 0.0;
  for (int k = 0; k < 8; ++k) {
    for (int j = 0; j < 8; ++j) {
      for (int i = 0; i < 8; ++i) {
        const double v = u[idx(i, j, k)];
        worst = std::max(worst, std::abs(v - u[idx(7 - i, j, k)]));
        worst = std::max(worst, std::abs(v - u[idx(j, i, k)]));
        worst = std::max(worst, std::abs(v - u[idx(i, j, 7 - k)]));
      }
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("direct_multi_matvec agrees with repeated direct_matvec") {
  const auto pts = make_lattice(3, {8, 8, 4});
  const Kernel k = Kernel::helmholtz3d(7.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Matrix<Complex> x(pts.size(), 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = {g(rng), g(rng)};
  const auto y = dense::direct_multi_matvec<Complex>(k, pts, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Vector<Complex> col = x.col(c);
    const auto ref = dense::direct_matvec<Complex>(k, pts, std::span<const Complex>(col.data(), col.size()));
    CHECK((y.col(c) - ref).norm() <= 1e-12 * ref.norm());
  }
}

TEST_CASE("identity block reproduces the dense matrix") {
  const auto pts = make_lattice(2, {6, 5, 1});
  const Kernel k = Kernel::laplace2d();
  const auto a = dense::direct_multi_matvec<double>(k, pts, Matrix<double>::Identity(30, 30));
  CHECK((a - evaluate_block<double>(k, pts, 0, 30, 0, 30)).norm() == 0.0);
}
