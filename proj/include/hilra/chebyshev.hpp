#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "hilra/linalg.hpp"

namespace hilra::cheb {

// Chebyshev points of the first kind on [-1,1].
inline std::vector<double> nodes(int p) {
  std::vector<double> x(p);
  for (int m = 0; m < p; ++m) x[m] = std::cos((2.0 * m + 1.0) * std::numbers::pi / (2.0 * p));
  return x;
}

// S_p(x_m, x) for every node m: the Lagrange-type interpolation weight of
// node m at position x, 1/p + 2/p sum_{k>=1} T_k(x_m) T_k(x).
inline void weights(int p, std::span<const double> node, double x, double* out) {
  for (int m = 0; m < p; ++m) {
    double tkm_prev = 1.0, tkm = node[m];
    double tkx_prev = 1.0, tkx = x;
    double s = 0.0;
    for (int k = 1; k < p; ++k) {
      s += tkm * tkx;
      const double nm = 2.0 * node[m] * tkm - tkm_prev;
      const double nx = 2.0 * x * tkx - tkx_prev;
      tkm_prev = tkm;
      tkm = nm;
      tkx_prev = tkx;
      tkx = nx;
    }
    out[m] = (1.0 + 2.0 * s) / p;
  }
}

// Child-to-parent interpolation along one axis: entry (m, n) is the weight of
// parent node m at child node n. `upper` selects the child half.
inline Matrix<double> child_transfer(int p, bool upper) {
  const auto x = nodes(p);
  Matrix<double> t(p, p);
  std::vector<double> w(p);
  for (int n = 0; n < p; ++n) {
    weights(p, x, (upper ? 0.5 : -0.5) + 0.5 * x[n], w.data());
    for (int m = 0; m < p; ++m) t(m, n) = w[m];
  }
  return t;
}

// out += (A_z ⊗ A_y ⊗ A_x) in for a p^dim tensor stored x-fastest.
// Each A is p x p.
template <class T>
void tensor_apply(int p, int dim, const Matrix<double>* const* axes, const T* in, T* out, std::vector<T>& scratch) {
  const std::size_t n = dim == 2 ? std::size_t(p) * p : std::size_t(p) * p * p;
  scratch.assign(2 * n, T(0));
  T* a = scratch.data();
  T* b = scratch.data() + n;
  std::copy(in, in + n, a);
  std::size_t stride = 1;
  for (int d = 0; d < dim; ++d) {
    const Matrix<double>& m = *axes[d];
    std::fill(b, b + n, T(0));
    const std::size_t block = stride * p;
    for (std::size_t base = 0; base < n; base += block) {
      for (std::size_t s = 0; s < stride; ++s) {
        const T* src = a + base + s;
        T* dst = b + base + s;
        for (int i = 0; i < p; ++i) {
          T acc(0);
          for (int j = 0; j < p; ++j) acc += m(i, j) * src[j * stride];
          dst[i * stride] = acc;
        }
      }
    }
    std::swap(a, b);
    stride *= p;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i];
}

}  // namespace hilra::cheb
