#include "hilra/kernels.hpp"

#include "hilra/error.hpp"

namespace hilra {

Kernel Kernel::parse(std::string_view name, double kappa) {
  if (name == "laplace2d") return laplace2d();
  if (name == "laplace3d") return laplace3d();
  if (name == "helmholtz3d") return helmholtz3d(kappa);
  throw UsageError("unknown kernel '" + std::string(name) + "'");
}

std::string Kernel::name() const {
  switch (kind_) {
    case KernelKind::Laplace2D:
      return "laplace2d";
    case KernelKind::Laplace3D:
      return "laplace3d";
    case KernelKind::Helmholtz3D:
      break;
  }
  return "helmholtz3d";
}

double evaluate_real(const Kernel& k, const Point& x, const Point& y) {
  if (k.is_complex()) throw UsageError("complex kernel evaluated as real");
  return k(x, y).real();
}

Complex evaluate(const Kernel& k, const Point& x, const Point& y) { return k(x, y); }

template <class T>
void require_scalar(const Kernel& k) {
  if constexpr (!is_complex_v<T>) {
    if (k.is_complex()) throw UsageError(k.name() + " needs complex arithmetic");
  }
}

template <class T>
Matrix<T> evaluate_block(const Kernel& k, std::span<const Point> targets, std::span<const Point> sources) {
  require_scalar<T>(k);
  Matrix<T> block(targets.size(), sources.size());
  k.visit([&](auto g) {
    using S = typename decltype(g)::scalar;
    if constexpr (is_complex_v<S> && !is_complex_v<T>) {
      return;  // unreachable, rejected above
    } else {
      for (std::size_t j = 0; j < sources.size(); ++j) {
        for (std::size_t i = 0; i < targets.size(); ++i) {
          block(i, j) = T(g(distance2(targets[i], sources[j])));
        }
      }
    }
  });
  return block;
}

template void require_scalar<double>(const Kernel&);
template void require_scalar<Complex>(const Kernel&);
template Matrix<double> evaluate_block<double>(const Kernel&, std::span<const Point>, std::span<const Point>);
template Matrix<Complex> evaluate_block<Complex>(const Kernel&, std::span<const Point>, std::span<const Point>);

}  // namespace hilra
