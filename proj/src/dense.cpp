#include "hilra/dense.hpp"

#include <algorithm>
#include <iostream>

#include "hilra/error.hpp"

namespace hilra::dense {

namespace {

void check(const PointSet& pts, std::size_t rows) {
  if (rows != pts.size()) throw UsageError("charge length does not match point count");
  if (pts.size() > kWarnSize) {
    std::cerr << "warning: direct summation over " << pts.size() << " points is O(N^2)\n";
  }
}

}  // namespace

template <class T>
Vector<T> direct_matvec(const Kernel& k, const PointSet& pts, std::span<const T> charges) {
  require_scalar<T>(k);
  check(pts, charges.size());
  const std::size_t n = pts.size();
  Vector<T> out(n);
  k.visit([&](auto g) {
    using S = typename decltype(g)::scalar;
    if constexpr (is_complex_v<S> && !is_complex_v<T>) {
      return;
    } else {
      using Wide = std::conditional_t<is_complex_v<T>, std::complex<long double>, long double>;
      for (std::size_t i = 0; i < n; ++i) {
        Wide acc{};
        const Point& x = pts[i];
        for (std::size_t j = 0; j < n; ++j) {
          const T gij = T(g(distance2(x, pts[j])));
          acc += static_cast<Wide>(gij) * static_cast<Wide>(charges[j]);
        }
        out[i] = static_cast<T>(acc);
      }
    }
  });
  return out;
}

template <class T>
Matrix<T> direct_multi_matvec(const Kernel& k, const PointSet& pts, const Matrix<T>& block) {
  require_scalar<T>(k);
  check(pts, static_cast<std::size_t>(block.rows()));
  const std::size_t n = pts.size();
  Matrix<T> out(n, block.cols());
  // Keep the generated row panel around 32 MB.
  const std::size_t panel = std::clamp<std::size_t>((std::size_t{1} << 22) / n, 16, 1024);
  for (std::size_t r = 0; r < n; r += panel) {
    const std::size_t rows = std::min(panel, n - r);
    const Matrix<T> a = evaluate_block<T>(k, pts.points().subspan(r, rows), pts.points());
    out.middleRows(r, rows).noalias() = a * block;
  }
  return out;
}

template Vector<double> direct_matvec<double>(const Kernel&, const PointSet&, std::span<const double>);
template Vector<Complex> direct_matvec<Complex>(const Kernel&, const PointSet&, std::span<const Complex>);
template Matrix<double> direct_multi_matvec<double>(const Kernel&, const PointSet&, const Matrix<double>&);
template Matrix<Complex> direct_multi_matvec<Complex>(const Kernel&, const PointSet&, const Matrix<Complex>&);

}  // namespace hilra::dense
