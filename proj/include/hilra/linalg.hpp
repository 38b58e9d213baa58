#pragma once

#include <complex>
#include <type_traits>

#include <Eigen/Dense>

namespace hilra {

using Complex = std::complex<double>;

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
inline constexpr bool is_complex_v = false;
template <class R>
inline constexpr bool is_complex_v<std::complex<R>> = true;

template <class T>
using real_t = typename Eigen::NumTraits<T>::Real;

}  // namespace hilra
