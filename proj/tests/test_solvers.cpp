#include <cmath>
#include <random>

#include "doctest.h"
#include "hilra/solvers.hpp"

using namespace hilra;
using namespace hilra::solvers;

namespace {

Vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

pde::Problem laplace(int level) {
  return pde::build_problem(pde::Variant::laplace, std::ldexp(1.0, -level), 0.0, pde::RhsMode::random_smooth);
}

double true_residual(const pde::StencilOperator& op, const Vector<double>& x, const Vector<double>& b) {
  return (b - op.apply<double>(x)).norm() / b.norm();
}

void check_history(const SolveStats& st) {
  REQUIRE(st.history.size() == static_cast<std::size_t>(st.iterations) + 1);
  CHECK(st.history.front() == 1.0);
}

}  // namespace

TEST_CASE("CG basics") {
  const auto p = laplace(3);
  const auto a = stencil_operator<double>(p.op);
  const Identity<double> none;

  const auto zero = cg<double>(a, Vector<double>::Zero(p.op.size()), none, 1e-8, 100);
  CHECK(zero.stats.iterations == 0);
  CHECK(zero.stats.converged);
  CHECK(zero.x.norm() == 0.0);
  check_history(zero.stats);

  const auto res = cg<double>(a, p.b, none, 1e-8, 1000);
  CHECK(res.stats.converged);
  check_history(res.stats);
  CHECK(res.stats.history.back() <= 1e-8);
  CHECK(true_residual(p.op, res.x, p.b) <= 1e-8 * 1.01);
  CHECK(res.stats.method == "cg");
  CHECK(res.stats.precond == "none");

  const auto capped = cg<double>(a, p.b, none, 1e-8, 5);
  CHECK(capped.stats.iterations == 5);
  CHECK_FALSE(capped.stats.converged);
}

TEST_CASE("CG recovers the manufactured solution") {
  const auto p = pde::build_problem(pde::Variant::laplace, 0.0625, 0.0, pde::RhsMode::manufactured);
  const Gmg<double> m(p.op);
  const auto res = cg<double>(stencil_operator<double>(p.op), p.b, m, 1e-10, 200);
  CHECK(res.stats.converged);
  CHECK((res.x - *p.u_exact).norm() <= 1e-8 * p.u_exact->norm());
}

TEST_CASE("CG breaks down on the indefinite Helmholtz operator") {
  const auto p = pde::build_problem(pde::Variant::helmholtz, 0.125, 7.0, pde::RhsMode::random_smooth);
  const Identity<double> none;
  CHECK_THROWS_AS(cg<double>(stencil_operator<double>(p.op), p.b, none, 1e-8, 500), BreakdownError);
}

TEST_CASE("GMRES basics") {
  const Identity<double> none;
  const Operator<double> scalar = [](const Vector<double>& x) { return Vector<double>(3.0 * x); };
  Vector<double> b(1);
  b << 6.0;
  const auto one = gmres<double>(scalar, b, none, 30, 1e-12, 10);
  CHECK(one.stats.iterations == 1);
  CHECK(one.x[0] == doctest::Approx(2.0).epsilon(1e-14));
  check_history(one.stats);

  const Operator<Complex> cscalar = [](const Vector<Complex>& x) { return Vector<Complex>(Complex(1.0, 2.0) * x); };
  Vector<Complex> cb(1);
  cb << Complex(3.0, 1.0);
  const Identity<Complex> cnone;
  const auto cone = gmres<Complex>(cscalar, cb, cnone, 30, 1e-12, 10);
  CHECK(cone.stats.iterations == 1);
  CHECK(std::abs(cone.x[0] - Complex(1.0, -1.0)) <= 1e-14);

  CHECK_THROWS_AS(gmres<double>(scalar, b, none, 0, 1e-8, 10), ConfigError);
  const auto zero = gmres<double>(scalar, Vector<double>::Zero(1), none, 30, 1e-8, 10);
  CHECK(zero.stats.iterations == 0);
  CHECK(zero.x.norm() == 0.0);
}

TEST_CASE("GMRES agrees with CG and is monotone within each cycle") {
  const auto p = laplace(3);
  const auto a = stencil_operator<double>(p.op);
  const Identity<double> none;
  const int restart = 10;
  const auto g = gmres<double>(a, p.b, none, restart, 1e-10, 2000);
  const auto c = cg<double>(a, p.b, none, 1e-10, 2000);
  REQUIRE(g.stats.converged);
  REQUIRE(c.stats.converged);
  check_history(g.stats);
  CHECK(true_residual(p.op, g.x, p.b) <= 1e-9);
  CHECK((g.x - c.x).norm() <= 1e-8 * c.x.norm());
  for (std::size_t i = 1; i < g.stats.history.size(); ++i) {
    if ((i - 1) % restart == 0) continue;  // first step of a new cycle
    CHECK(g.stats.history[i] <= g.stats.history[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("IC(0)") {
  // diagonal matrix: the factor is sqrt(diag) and the solve is exact
  Eigen::SparseMatrix<double, Eigen::RowMajor> d(4, 4);
  for (int i = 0; i < 4; ++i) d.insert(i, i) = (i + 1) * (i + 1);
  const Ic0<double> ic(d);
  for (int i = 0; i < 4; ++i) CHECK(ic.factor().coeff(i, i) == doctest::Approx(i + 1.0));
  Vector<double> r(4);
  r << 1, 8, 27, 64;
  const Vector<double> z = ic.apply(r);
  for (int i = 0; i < 4; ++i) CHECK(z[i] == doctest::Approx(i + 1.0));
  CHECK(ic.shift() == 0.0);

  // exact on a tridiagonal SPD matrix (no fill)
  const int n = 6;
  Eigen::SparseMatrix<double, Eigen::RowMajor> t(n, n);
  for (int i = 0; i < n; ++i) {
    t.insert(i, i) = 4.0;
    if (i > 0) t.insert(i, i - 1) = -1.0;
    if (i + 1 < n) t.insert(i, i + 1) = -1.0;
  }
  const Ic0<double> tic(t);
  const Vector<double> x = random_vector(n, 4);
  CHECK((tic.apply(t * x) - x).norm() <= 1e-13 * x.norm());

  // singular pattern needs one shift; an indefinite one exhausts the retries
  Eigen::SparseMatrix<double, Eigen::RowMajor> s(2, 2);
  s.insert(0, 0) = 1.0;
  s.insert(0, 1) = 1.0;
  s.insert(1, 0) = 1.0;
  s.insert(1, 1) = 1.0;
  CHECK(Ic0<double>(s).shift() == 1e-3);
  s.coeffRef(0, 1) = 2.0;
  s.coeffRef(1, 0) = 2.0;
  CHECK_THROWS_AS(Ic0<double>{s}, NumericalError);

  // complex apply acts on real and imaginary parts independently
  const Ic0<Complex> cic(t);
  const Vector<double> y = random_vector(n, 5);
  const Vector<Complex> zc = cic.apply((x.cast<Complex>() + Complex(0, 1) * y.cast<Complex>()).eval());
  CHECK((zc.real() - tic.apply(x)).norm() <= 1e-14 * x.norm());
  CHECK((zc.imag() - tic.apply(y)).norm() <= 1e-14 * y.norm());
}

TEST_CASE("IC(0) preconditioned CG beats plain CG") {
  const auto p = laplace(3);
  const auto a = stencil_operator<double>(p.op);
  const auto plain = cg<double>(a, p.b, Identity<double>{}, 1e-8, 1000);
  const auto pre = cg<double>(a, p.b, Ic0<double>(p.op.assemble()), 1e-8, 1000);
  REQUIRE(pre.stats.converged);
  CHECK(pre.stats.iterations < plain.stats.iterations);
  CHECK(pre.stats.precond == "ic0");
}

TEST_CASE("grid transfer operators") {
  const std::size_t nf = 15, nc = 7;
  const Vector<double> f = random_vector(nf * nf * nf, 6);
  const Vector<double> c = random_vector(nc * nc * nc, 7);
  // full weighting is the scaled transpose of trilinear prolongation
  const double lhs = restrict_full_weighting<double>(f, nf).dot(c);
  const double rhs = f.dot(prolong_trilinear<double>(c, nf)) / 8.0;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));

  // prolongation reproduces linear functions away from the boundary
  const pde::Lattice fine(3), coarse(2);
  auto linear = [](const Point& p) { return 1.0 + p[0] - 2.0 * p[1] + 0.5 * p[2]; };
  Vector<double> cl(coarse.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) cl[i] = linear(coarse.node(i));
  const Vector<double> fl = prolong_trilinear<double>(cl, nf);
  for (std::size_t k = 1; k + 1 < nf; ++k)
    for (std::size_t j = 1; j + 1 < nf; ++j)
      for (std::size_t i = 1; i + 1 < nf; ++i)
        CHECK(fl[fine.index(i, j, k)] == doctest::Approx(linear(fine.node(fine.index(i, j, k)))).epsilon(1e-13));

  // restriction of a constant is constant in the coarse interior
  const Vector<double> ones = Vector<double>::Ones(nf * nf * nf);
  CHECK(restrict_full_weighting<double>(ones, nf)[coarse.index(3, 3, 3)] == doctest::Approx(1.0));
  CHECK_THROWS_AS(restrict_full_weighting<double>(c, nf), UsageError);
}

TEST_CASE("geometric multigrid") {
  const auto p3 = laplace(3);
  const auto a3 = stencil_operator<double>(p3.op);
  const Gmg<double> exact(p3.op, 1);
  CHECK(exact.levels() == 1);
  CHECK(cg<double>(a3, p3.b, exact, 1e-8, 100).stats.iterations <= 2);

  CHECK_THROWS_AS(Gmg<double>(p3.op, 4), ConfigError);
  CHECK_THROWS_AS(Gmg<double>(p3.op, -1), ConfigError);

  // symmetric as an operator
  const Gmg<double> v(p3.op);
  const Vector<double> u = random_vector(p3.op.size(), 8);
  const Vector<double> w = random_vector(p3.op.size(), 9);
  CHECK(u.dot(v.apply(w)) == doctest::Approx(w.dot(v.apply(u))).epsilon(1e-12));

  // one V-cycle reduces the residual of a random right-hand side
  const auto p4 = laplace(4);
  const Gmg<double> v4(p4.op);
  const Vector<double> b = random_vector(p4.op.size(), 10);
  const double factor = (b - p4.op.apply<double>(v4.apply(b))).norm() / b.norm();
  MESSAGE("V-cycle residual reduction " << factor);
  CHECK(factor <= 0.5);

  // iteration counts are nearly independent of h
  int lo = 1000, hi = 0;
  for (int level : {3, 4, 5}) {
    const auto p = laplace(level);
    const auto res = cg<double>(stencil_operator<double>(p.op), p.b, Gmg<double>(p.op), 1e-8, 200);
    REQUIRE(res.stats.converged);
    lo = std::min(lo, res.stats.iterations);
    hi = std::max(hi, res.stats.iterations);
  }
  CHECK(hi - lo <= 3);
}

TEST_CASE("face collocation nodes") {
  const pde::Lattice lat(3);
  const auto faces = face_nodes(lat, 1);
  CHECK(faces.size() == 6 * 15 * 15);
  for (const auto& p : faces) {
    int on_face = 0;
    for (double c : p) on_face += std::abs(c) == 1.0;
    CHECK(on_face == 1);
  }
  CHECK(face_nodes(lat, 2).size() == 6 * 8 * 8);
  CHECK_THROWS_AS(face_nodes(lat, 0), ConfigError);
}

TEST_CASE("boundary factorization regularization") {
  Eigen::PartialPivLU<Matrix<double>> lu;
  CHECK(factor_regularized<double>(Matrix<double>::Identity(3, 3), lu) == 0.0);
  CHECK(factor_regularized<double>(Matrix<double>::Ones(3, 3), lu) == 1e-10);
  Matrix<double> bad = Matrix<double>::Identity(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(factor_regularized<double>(bad, lu), NumericalError);
}

TEST_CASE("FMM preconditioner") {
  const auto p = laplace(3);
  const Kernel k = Kernel::laplace3d();
  const FmmPreconditioner<double> m(p.op.lattice(), k, fmm::FmmConfig::for_accuracy(1e-4, k));
  CHECK(m.face_count() == 6 * 15 * 15);
  CHECK(m.face_spacing() == 0.125);
  CHECK(m.self_cell().real() == doctest::Approx(2.3800772 / (4 * M_PI) / 0.125));
  CHECK(m.self_panel().real() == doctest::Approx(4 * std::log(1 + std::sqrt(2.0)) / (4 * M_PI) / 0.125));
  CHECK(m.self_cell().imag() == 0.0);

  CHECK(m.apply(Vector<double>::Zero(p.op.size())).norm() == 0.0);
  const Vector<double> r1 = random_vector(p.op.size(), 11);
  const Vector<double> r2 = random_vector(p.op.size(), 12);
  const Vector<double> mix = 2.0 * r1 - 3.0 * r2;
  CHECK((m.apply(mix) - (2.0 * m.apply(r1) - 3.0 * m.apply(r2))).norm() <= 1e-10 * m.apply(mix).norm());

  // approximately inverts the stencil on smooth data
  const Vector<double> approx = m.apply(p.b);
  const double rel = (p.op.apply<double>(approx) - p.b).norm() / p.b.norm();
  MESSAGE("||A M b - b|| / ||b|| = " << rel);
  CHECK(rel < 0.5);

  const auto a = stencil_operator<double>(p.op);
  const auto fmm_run = cg<double>(a, p.b, m, 1e-8, 200);
  const auto ic_run = cg<double>(a, p.b, Ic0<double>(p.op.assemble()), 1e-8, 200);
  REQUIRE(fmm_run.stats.converged);
  CHECK(fmm_run.stats.iterations < ic_run.stats.iterations);
  CHECK(fmm_run.stats.setup_s > 0.0);
  CHECK(fmm_run.stats.precond == "fmm");

  // every converged preconditioner lands on the same solution
  const auto plain = cg<double>(a, p.b, Identity<double>{}, 1e-8, 1000);
  const auto gmg = cg<double>(a, p.b, Gmg<double>(p.op), 1e-8, 200);
  for (const auto* run : {&fmm_run, &ic_run, &gmg}) CHECK((run->x - plain.x).norm() <= 10 * 1e-8 * plain.x.norm());

  CHECK_THROWS_AS(FmmPreconditioner<double>(p.op.lattice(), Kernel::laplace2d(), fmm::FmmConfig{}), UsageError);
  CHECK_THROWS_AS(m.apply(Vector<double>::Zero(5)), UsageError);
}

TEST_CASE("FMM preconditioner for Helmholtz beats multigrid") {
  const auto p = pde::build_problem(pde::Variant::helmholtz, 0.125, 7.0, pde::RhsMode::random_smooth);
  const Kernel k = Kernel::helmholtz3d(7.0);
  const FmmPreconditioner<Complex> m(p.op.lattice(), k, fmm::FmmConfig::for_accuracy(1e-2, k));
  CHECK(m.self_cell().imag() == doctest::Approx(7.0 / (4 * M_PI)));
  const Vector<Complex> b = p.b.cast<Complex>();
  const auto a = stencil_operator<Complex>(p.op);
  const auto f = gmres<Complex>(a, b, m, 30, 1e-6, 500);
  const auto g = gmres<Complex>(a, b, Gmg<Complex>(p.op), 30, 1e-6, 500);
  REQUIRE(f.stats.converged);
  CHECK((b - a(f.x)).norm() <= 1e-5 * b.norm());
  MESSAGE("GMRES iterations: fmm " << f.stats.iterations << ", gmg " << g.stats.iterations);
  CHECK(f.stats.iterations < g.stats.iterations);
}
