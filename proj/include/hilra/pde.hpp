#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <Eigen/SparseCore>

#include "hilra/geometry.hpp"
#include "hilra/linalg.hpp"

namespace hilra::pde {

// Interior nodes of [-1,1]^3 at spacing h = 2^-level:
// x_i = -1 + (i+1) h for i = 0..n-1, n = 2/h - 1. Index i + n (j + n k).
class Lattice {
 public:
  explicit Lattice(int level);
  // Accepts h = 2^-level exactly; anything else is a ConfigError.
  static Lattice from_spacing(double h);

  int level() const { return level_; }
  double h() const { return h_; }
  std::size_t n() const { return n_; }
  std::size_t size() const { return n_ * n_ * n_; }

  double coord(std::size_t i) const { return -1.0 + static_cast<double>(i + 1) * h_; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + n_ * (j + n_ * k); }
  Point node(std::size_t idx) const;
  PointSet points() const;

 private:
  int level_;
  double h_;
  std::size_t n_;
};

enum class Variant { laplace, helmholtz };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

// 7-point -Laplacian (minus kappa^2 for Helmholtz) with zero Dirichlet
// ghosts on the faces.
class StencilOperator {
 public:
  StencilOperator(Lattice lattice, Variant variant, double kappa = 0.0);

  const Lattice& lattice() const { return lattice_; }
  Variant variant() const { return variant_; }
  double kappa() const { return kappa_; }
  std::size_t size() const { return lattice_.size(); }
  double diagonal() const { return 6.0 / (lattice_.h() * lattice_.h()) - shift(); }
  double off_diagonal() const { return -1.0 / (lattice_.h() * lattice_.h()); }

  template <class T>
  void apply(std::span<const T> u, std::span<T> out) const;
  template <class T>
  Vector<T> apply(const Vector<T>& u) const {
    Vector<T> out(u.size());
    apply<T>(std::span<const T>(u.data(), u.size()), std::span<T>(out.data(), out.size()));
    return out;
  }

  Eigen::SparseMatrix<double, Eigen::RowMajor> assemble() const;

  // Discrete eigenvalues: sum over axes of (2 - 2 cos(k pi h / 2)) / h^2,
  // k = 1..n, minus kappa^2.
  double axis_eigenvalue(std::size_t k) const;
  double min_eigenvalue() const { return 3.0 * axis_eigenvalue(1) - shift(); }

 private:
  double shift() const { return variant_ == Variant::helmholtz ? kappa_ * kappa_ : 0.0; }

  Lattice lattice_;
  Variant variant_;
  double kappa_;
};

template <class T>
Vector<T> apply_stencil(const StencilOperator& op, const Vector<T>& u) {
  return op.apply<T>(u);
}

enum class RhsMode { manufactured, random_smooth };

struct Problem {
  StencilOperator op;
  Vector<double> b;
  std::optional<Vector<double>> u_exact;
};

// Manufactured: u_exact = sin(pi x) sin(pi y) sin(pi z), b = A u_exact.
// Random-smooth: b is a seeded sum of all discrete sine modes with
// amplitudes decaying as 1/|m|^2.
// Throws ConfigError when kappa^2 lies within 1e-6 (relative) of a
// discrete Laplacian eigenvalue.
Problem build_problem(Variant variant, double h, double kappa, RhsMode mode, std::uint64_t seed = 42);

}  // namespace hilra::pde
