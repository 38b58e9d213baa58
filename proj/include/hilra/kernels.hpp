#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "hilra/geometry.hpp"
#include "hilra/linalg.hpp"

namespace hilra {

enum class KernelKind { Laplace2D, Laplace3D, Helmholtz3D };

// Concrete Green's functions of the squared distance. G(x, x) = 0.
struct Laplace2DFn {
  using scalar = double;
  static constexpr int dim = 2;
  double operator()(double r2) const {
    return r2 == 0.0 ? 0.0 : -std::log(r2) / (4.0 * std::numbers::pi);
  }
};

struct Laplace3DFn {
  using scalar = double;
  static constexpr int dim = 3;
  double operator()(double r2) const {
    return r2 == 0.0 ? 0.0 : 1.0 / (4.0 * std::numbers::pi * std::sqrt(r2));
  }
};

struct Helmholtz3DFn {
  using scalar = Complex;
  static constexpr int dim = 3;
  double kappa = 0.0;
  Complex operator()(double r2) const {
    if (r2 == 0.0) return {0.0, 0.0};
    const double r = std::sqrt(r2);
    const double s = 1.0 / (4.0 * std::numbers::pi * r);
    return {s * std::cos(kappa * r), s * std::sin(kappa * r)};
  }
};

inline double distance2(const Point& x, const Point& y) {
  const double dx = x[0] - y[0];
  const double dy = x[1] - y[1];
  const double dz = x[2] - y[2];
  return dx * dx + dy * dy + dz * dz;
}

class Kernel {
 public:
  static Kernel laplace2d() { return Kernel(KernelKind::Laplace2D, 0.0); }
  static Kernel laplace3d() { return Kernel(KernelKind::Laplace3D, 0.0); }
  static Kernel helmholtz3d(double kappa) { return Kernel(KernelKind::Helmholtz3D, kappa); }
  // "laplace2d" | "laplace3d" | "helmholtz3d"
  static Kernel parse(std::string_view name, double kappa = 0.0);

  KernelKind kind() const { return kind_; }
  double kappa() const { return kappa_; }
  int dim() const { return kind_ == KernelKind::Laplace2D ? 2 : 3; }
  bool is_complex() const { return kind_ == KernelKind::Helmholtz3D; }
  std::string name() const;

  // Calls f with the concrete functor so hot loops are specialised.
  template <class F>
  decltype(auto) visit(F&& f) const {
    switch (kind_) {
      case KernelKind::Laplace2D:
        return f(Laplace2DFn{});
      case KernelKind::Laplace3D:
        return f(Laplace3DFn{});
      case KernelKind::Helmholtz3D:
        break;
    }
    return f(Helmholtz3DFn{kappa_});
  }

  Complex operator()(const Point& x, const Point& y) const {
    return visit([&](auto g) { return Complex(g(distance2(x, y))); });
  }

 private:
  Kernel(KernelKind kind, double kappa) : kind_(kind), kappa_(kappa) {}
  KernelKind kind_;
  double kappa_;
};

// Real value of a real kernel; throws for Helmholtz.
double evaluate_real(const Kernel& k, const Point& x, const Point& y);
Complex evaluate(const Kernel& k, const Point& x, const Point& y);

// Dense block G(targets[i], sources[j]). T must be complex for Helmholtz.
template <class T>
Matrix<T> evaluate_block(const Kernel& k, std::span<const Point> targets, std::span<const Point> sources);

template <class T>
Matrix<T> evaluate_block(const Kernel& k, const PointSet& pts, std::size_t row_begin, std::size_t rows,
                         std::size_t col_begin, std::size_t cols) {
  return evaluate_block<T>(k, pts.points().subspan(row_begin, rows), pts.points().subspan(col_begin, cols));
}

// Scalar type check shared by every engine templated on T.
template <class T>
void require_scalar(const Kernel& k);

}  // namespace hilra
