#include "hilra/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "hilra/error.hpp"

namespace hilra::pde {

Lattice::Lattice(int level) : level_(level) {
  if (level < 1 || level > 9) throw ConfigError("lattice level must lie in [1, 9] (h = 2^-level)");
  h_ = std::ldexp(1.0, -level);
  n_ = (std::size_t{2} << level) - 1;
}

Lattice Lattice::from_spacing(double h) {
  if (!(h > 0.0)) throw ConfigError("lattice spacing must be positive");
  int exp = 0;
  const double mant = std::frexp(h, &exp);
  if (mant != 0.5) throw ConfigError("lattice spacing must be a power of two, h = 2^-k");
  return Lattice(1 - exp);
}

Point Lattice::node(std::size_t idx) const {
  const std::size_t i = idx % n_;
  const std::size_t j = (idx / n_) % n_;
  const std::size_t k = idx / (n_ * n_);
  return {coord(i), coord(j), coord(k)};
}

PointSet Lattice::points() const {
  std::vector<Point> pts(size());
  for (std::size_t idx = 0; idx < pts.size(); ++idx) pts[idx] = node(idx);
  return PointSet(3, std::move(pts));
}

std::string to_string(Variant v) { return v == Variant::laplace ? "laplace" : "helmholtz"; }

Variant parse_variant(const std::string& name) {
  if (name == "laplace") return Variant::laplace;
  if (name == "helmholtz") return Variant::helmholtz;
  throw UsageError("unknown problem '" + name + "' (expected laplace or helmholtz)");
}

StencilOperator::StencilOperator(Lattice lattice, Variant variant, double kappa)
    : lattice_(lattice), variant_(variant), kappa_(kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("wave number must be finite and non-negative");
}

template <class T>
void StencilOperator::apply(std::span<const T> u, std::span<T> out) const {
  if (u.size() != size() || out.size() != size()) throw UsageError("stencil apply: vector length does not match n^3");
  const std::size_t n = lattice_.n();
  const double c = diagonal();
  const double o = off_diagonal();
  const std::size_t sy = n, sz = n * n;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = n * (j + n * k);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = row + i;
        T nb = T(0);
        if (i > 0) nb += u[p - 1];
        if (i + 1 < n) nb += u[p + 1];
        if (j > 0) nb += u[p - sy];
        if (j + 1 < n) nb += u[p + sy];
        if (k > 0) nb += u[p - sz];
        if (k + 1 < n) nb += u[p + sz];
        out[p] = c * u[p] + o * nb;
      }
    }
  }
}

template void StencilOperator::apply<double>(std::span<const double>, std::span<double>) const;
template void StencilOperator::apply<Complex>(std::span<const Complex>, std::span<Complex>) const;

Eigen::SparseMatrix<double, Eigen::RowMajor> StencilOperator::assemble() const {
  const std::size_t n = lattice_.n();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(7 * size());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto p = static_cast<int>(lattice_.index(i, j, k));
        auto add = [&](std::size_t ii, std::size_t jj, std::size_t kk) {
          entries.emplace_back(p, static_cast<int>(lattice_.index(ii, jj, kk)), off_diagonal());
        };
        if (k > 0) add(i, j, k - 1);
        if (j > 0) add(i, j - 1, k);
        if (i > 0) add(i - 1, j, k);
        entries.emplace_back(p, p, diagonal());
        if (i + 1 < n) add(i + 1, j, k);
        if (j + 1 < n) add(i, j + 1, k);
        if (k + 1 < n) add(i, j, k + 1);
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(size(), size());
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

double StencilOperator::axis_eigenvalue(std::size_t k) const {
  const double h = lattice_.h();
  return (2.0 - 2.0 * std::cos(static_cast<double>(k) * std::numbers::pi * h / 2.0)) / (h * h);
}

namespace {

void check_well_posed(const StencilOperator& op, double kappa) {
  const double k2 = kappa * kappa;
  if (k2 == 0.0) return;
  const std::size_t n = op.lattice().n();
  std::vector<double> mu(n);
  for (std::size_t k = 0; k < n; ++k) mu[k] = op.axis_eigenvalue(k + 1);
  // mu is increasing: for each (a, b) find the closest c by binary search.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double rest = k2 - mu[a] - mu[b];
      const auto it = std::lower_bound(mu.begin(), mu.end(), rest);
      for (auto c : {it, it == mu.begin() ? it : it - 1}) {
        if (c == mu.end()) continue;
        const double lambda = mu[a] + mu[b] + *c;
        if (std::abs(lambda - k2) <= 1e-6 * lambda) {
          std::ostringstream msg;
          msg << "kappa^2 = " << k2 << " is within 1e-6 of the discrete eigenvalue " << lambda << " (modes " << a + 1
              << "," << b + 1 << "," << (c - mu.begin()) + 1 << "); the Helmholtz problem is ill-posed";
          throw ConfigError(msg.str());
        }
      }
    }
  }
}

}  // namespace

Problem build_problem(Variant variant, double h, double kappa, RhsMode mode, std::uint64_t seed) {
  const Lattice lat = Lattice::from_spacing(h);
  if (variant == Variant::laplace) kappa = 0.0;
  StencilOperator op(lat, variant, kappa);
  if (variant == Variant::helmholtz) check_well_posed(op, kappa);

  const std::size_t n = lat.n();
  Problem prob{op, Vector<double>(op.size()), std::nullopt};
  if (mode == RhsMode::manufactured) {
    Vector<double> u(op.size());
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
          u[lat.index(i, j, k)] = std::sin(std::numbers::pi * lat.coord(i)) * std::sin(std::numbers::pi * lat.coord(j)) *
                                  std::sin(std::numbers::pi * lat.coord(k));
        }
    prob.b = op.apply<double>(u);
    prob.u_exact = std::move(u);
    return prob;
  }

  // Every discrete sine mode sin(m pi (x+1)/2), m = 1..n per axis, with a
  // Gaussian amplitude decaying as 1/|m|^2; synthesized axis by axis.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> field(op.size());
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t a = 0; a < n; ++a) {
        const double m2 = static_cast<double>((a + 1) * (a + 1) + (b + 1) * (b + 1) + (c + 1) * (c + 1));
        field[lat.index(a, b, c)] = gauss(rng) / m2;
      }
  std::vector<double> basis(n * n);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < n; ++i)
      basis[m * n + i] = std::sin(static_cast<double>(m + 1) * std::numbers::pi * (lat.coord(i) + 1.0) / 2.0);
  std::vector<double> line(n);
  const std::size_t stride[3] = {1, n, n * n};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t st = stride[axis];
    for (std::size_t base = 0; base < op.size(); ++base) {
      if ((base / st) % n != 0) continue;  // first node of each line along the axis
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t m = 0; m < n; ++m) v += field[base + m * st] * basis[m * n + i];
        line[i] = v;
      }
      for (std::size_t i = 0; i < n; ++i) field[base + i * st] = line[i];
    }
  }
  prob.b = Eigen::Map<Vector<double>>(field.data(), static_cast<Eigen::Index>(field.size()));
  return prob;
}

}  // namespace hilra::pde
