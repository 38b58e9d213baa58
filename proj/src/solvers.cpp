#include "hilra/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace hilra::solvers {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class T>
T conj_of(const T& v) {
  if constexpr (is_complex_v<T>) {
    return std::conj(v);
  } else {
    return v;
  }
}

void finish_stats(SolveStats& st, Clock::time_point t0) {
  st.solve_s = seconds_since(t0);
  st.per_iteration_s = st.iterations > 0 ? st.solve_s / st.iterations : 0.0;
}

template <class T>
SolveStats start_stats(const std::string& method, const Preconditioner<T>& m) {
  SolveStats st;
  st.method = method;
  st.precond = m.name();
  st.precond_params = m.params();
  st.setup_s = m.setup_seconds();
  st.history.push_back(1.0);
  return st;
}

}  // namespace

template <class T>
SolveResult<T> cg(const Operator<T>& a, const Vector<T>& b, const Preconditioner<T>& m, double rtol, int maxit) {
  const auto t0 = Clock::now();
  SolveResult<T> res{Vector<T>::Zero(b.size()), start_stats("cg", m)};
  auto& st = res.stats;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    st.converged = true;
    finish_stats(st, t0);
    return res;
  }
  Vector<T> r = b;
  Vector<T> z = m.apply(r);
  Vector<T> p = z;
  T rz = r.dot(z);
  for (int it = 0; it < maxit; ++it) {
    const Vector<T> ap = a(p);
    const double curvature = std::real(p.dot(ap));
    if (!(curvature > 0.0)) {
      throw BreakdownError("CG breakdown: p^T A p <= 0 (operator not positive definite); use GMRES");
    }
    const T alpha = rz / curvature;
    res.x += alpha * p;
    r -= alpha * ap;
    ++st.iterations;
    st.history.push_back(r.norm() / bnorm);
    if (st.history.back() <= rtol) {
      st.converged = true;
      break;
    }
    z = m.apply(r);
    const T rz_next = r.dot(z);
    if (!(std::real(rz_next) > 0.0)) {
      throw BreakdownError("CG breakdown: r^T M r <= 0 (preconditioner not positive definite); use GMRES");
    }
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  finish_stats(st, t0);
  return res;
}

template <class T>
SolveResult<T> gmres(const Operator<T>& a, const Vector<T>& b, const Preconditioner<T>& m, int restart, double rtol,
                     int maxit) {
  if (restart < 1) throw ConfigError("GMRES restart length must be at least 1");
  const auto t0 = Clock::now();
  SolveResult<T> res{Vector<T>::Zero(b.size()), start_stats("gmres", m)};
  auto& st = res.stats;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    st.converged = true;
    finish_stats(st, t0);
    return res;
  }
  const Eigen::Index n = b.size();
  Vector<T> r = b;
  while (st.iterations < maxit && !st.converged) {
    const double beta = r.norm();
    Matrix<T> v(n, restart + 1);
    Matrix<T> h = Matrix<T>::Zero(restart + 1, restart);
    Vector<T> g = Vector<T>::Zero(restart + 1);
    std::vector<double> cs(restart);
    std::vector<T> sn(restart);
    v.col(0) = r / beta;
    g(0) = beta;
    int j = 0;
    for (; j < restart && st.iterations < maxit; ++j) {
      Vector<T> w = a(m.apply(v.col(j)));
      for (int i = 0; i <= j; ++i) {
        h(i, j) = v.col(i).dot(w);
        w -= h(i, j) * v.col(i);
      }
      const double hnext = w.norm();
      for (int i = 0; i < j; ++i) {
        const T t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -conj_of(sn[i]) * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      // rotation zeroing hnext below h(j, j)
      const double aabs = std::abs(h(j, j));
      const double t = std::hypot(aabs, hnext);
      if (aabs == 0.0) {
        cs[j] = 0.0;
        sn[j] = T(1);
        h(j, j) = T(hnext);
      } else {
        const T phase = h(j, j) / aabs;
        cs[j] = aabs / t;
        sn[j] = phase * hnext / t;
        h(j, j) = phase * t;
      }
      g(j + 1) = -conj_of(sn[j]) * g(j);
      g(j) = cs[j] * g(j);
      ++st.iterations;
      st.history.push_back(std::abs(g(j + 1)) / bnorm);
      const bool happy = hnext <= 1e-14 * t;
      if (!happy) v.col(j + 1) = w / hnext;
      if (st.history.back() <= rtol || happy) {
        ++j;
        st.converged = true;
        break;
      }
    }
    const Vector<T> y =
        h.topLeftCorner(j, j).template triangularView<Eigen::Upper>().solve(g.head(j));
    res.x += m.apply(v.leftCols(j) * y);
    r = b - a(res.x);
    if (st.converged && r.norm() > rtol * bnorm * 10.0 && st.iterations < maxit) {
      // the estimate drifted from the true residual; keep iterating
      st.converged = false;
    }
  }
  finish_stats(st, t0);
  return res;
}

// ---------------------------------------------------------------------------

template <class T>
Ic0<T>::Ic0(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a) {
  const auto t0 = Clock::now();
  if (a.rows() != a.cols()) throw UsageError("IC(0) needs a square matrix");
  Eigen::SparseMatrix<double, Eigen::RowMajor> lower = a.triangularView<Eigen::Lower>();
  lower.makeCompressed();
  const Eigen::Index n = lower.rows();
  Vector<double> diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto end = lower.outerIndexPtr()[i + 1];
    if (end == lower.outerIndexPtr()[i] || lower.innerIndexPtr()[end - 1] != i) {
      throw NumericalError("IC(0): missing diagonal entry in row " + std::to_string(i));
    }
    diag(i) = lower.valuePtr()[end - 1];
  }

  double alpha = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> l = lower;
    const int* outer = l.outerIndexPtr();
    const int* inner = l.innerIndexPtr();
    double* val = l.valuePtr();
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      val[outer[i + 1] - 1] += alpha * diag(i);
      for (int p = outer[i]; p < outer[i + 1]; ++p) {
        const int k = inner[p];
        // sparse dot of rows i and k over columns < k
        double s = val[p];
        int pi = outer[i], pk = outer[k];
        while (pi < p && pk < outer[k + 1] - 1) {
          if (inner[pi] == inner[pk]) {
            s -= val[pi++] * val[pk++];
          } else if (inner[pi] < inner[pk]) {
            ++pi;
          } else {
            ++pk;
          }
        }
        if (k < i) {
          val[p] = s / val[outer[k + 1] - 1];
        } else if (s > 0.0 && std::isfinite(s)) {
          val[p] = std::sqrt(s);
        } else {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      l_ = std::move(l);
      lt_ = l_.transpose();
      shift_ = alpha;
      this->setup_s_ = seconds_since(t0);
      return;
    }
    alpha = attempt == 0 ? 1e-3 : 2.0 * alpha;
  }
  throw NumericalError("IC(0) failed: non-positive pivot after 5 diagonal-shift retries");
}

template <class T>
Vector<T> Ic0<T>::apply(const Vector<T>& r) const {
  Vector<T> y = r;
  const Eigen::Index n = l_.rows();
  const int* outer = l_.outerIndexPtr();
  const int* inner = l_.innerIndexPtr();
  const double* val = l_.valuePtr();
  for (Eigen::Index i = 0; i < n; ++i) {
    T s = y(i);
    for (int p = outer[i]; p < outer[i + 1] - 1; ++p) s -= val[p] * y(inner[p]);
    y(i) = s / val[outer[i + 1] - 1];
  }
  const int* touter = lt_.outerIndexPtr();
  const int* tinner = lt_.innerIndexPtr();
  const double* tval = lt_.valuePtr();
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    T s = y(i);
    for (int p = touter[i] + 1; p < touter[i + 1]; ++p) s -= tval[p] * y(tinner[p]);
    y(i) = s / tval[touter[i]];
  }
  return y;
}

template <class T>
std::string Ic0<T>::params() const {
  std::ostringstream s;
  s << "shift=" << shift_;
  return s.str();
}

// ---------------------------------------------------------------------------

namespace {

// Fine index i maps onto coarse indices with 1D prolongation weights:
// odd i -> (i-1)/2 with weight 1; even i -> i/2 - 1 and i/2 with 1/2 each.
struct Stencil1D {
  int count = 0;
  std::size_t idx[2]{};
  double w[2]{};
};

Stencil1D coarse_neighbours(std::size_t i, std::size_t n_coarse) {
  Stencil1D s;
  if (i % 2 == 1) {
    s.idx[0] = (i - 1) / 2;
    s.w[0] = 1.0;
    s.count = 1;
    return s;
  }
  const std::size_t right = i / 2;
  if (right >= 1) {
    s.idx[s.count] = right - 1;
    s.w[s.count++] = 0.5;
  }
  if (right < n_coarse) {
    s.idx[s.count] = right;
    s.w[s.count++] = 0.5;
  }
  return s;
}

}  // namespace

template <class T>
Vector<T> prolong_trilinear(const Vector<T>& coarse, std::size_t n_fine) {
  const std::size_t nc = (n_fine - 1) / 2;
  if (static_cast<std::size_t>(coarse.size()) != nc * nc * nc) throw UsageError("prolongation: coarse size mismatch");
  Vector<T> fine(n_fine * n_fine * n_fine);
  for (std::size_t k = 0; k < n_fine; ++k) {
    const auto sk = coarse_neighbours(k, nc);
    for (std::size_t j = 0; j < n_fine; ++j) {
      const auto sj = coarse_neighbours(j, nc);
      for (std::size_t i = 0; i < n_fine; ++i) {
        const auto si = coarse_neighbours(i, nc);
        T v = T(0);
        for (int c = 0; c < sk.count; ++c)
          for (int b = 0; b < sj.count; ++b)
            for (int a = 0; a < si.count; ++a)
              v += (si.w[a] * sj.w[b] * sk.w[c]) * coarse(si.idx[a] + nc * (sj.idx[b] + nc * sk.idx[c]));
        fine(i + n_fine * (j + n_fine * k)) = v;
      }
    }
  }
  return fine;
}

template <class T>
Vector<T> restrict_full_weighting(const Vector<T>& fine, std::size_t n_fine) {
  const std::size_t nc = (n_fine - 1) / 2;
  if (static_cast<std::size_t>(fine.size()) != n_fine * n_fine * n_fine) {
    throw UsageError("restriction: fine size mismatch");
  }
  // Transpose of prolongation, scaled by 1/8.
  Vector<T> coarse = Vector<T>::Zero(nc * nc * nc);
  for (std::size_t k = 0; k < n_fine; ++k) {
    const auto sk = coarse_neighbours(k, nc);
    for (std::size_t j = 0; j < n_fine; ++j) {
      const auto sj = coarse_neighbours(j, nc);
      for (std::size_t i = 0; i < n_fine; ++i) {
        const auto si = coarse_neighbours(i, nc);
        const T v = fine(i + n_fine * (j + n_fine * k)) * 0.125;
        for (int c = 0; c < sk.count; ++c)
          for (int b = 0; b < sj.count; ++b)
            for (int a = 0; a < si.count; ++a)
              coarse(si.idx[a] + nc * (sj.idx[b] + nc * sk.idx[c])) += (si.w[a] * sj.w[b] * sk.w[c]) * v;
      }
    }
  }
  return coarse;
}

template <class T>
Gmg<T>::Gmg(const pde::StencilOperator& op, int levels, int nu1, int nu2) : nu1_(nu1), nu2_(nu2) {
  const auto t0 = Clock::now();
  const int fine_level = op.lattice().level();
  if (levels == 0) levels = fine_level;
  if (levels < 1 || levels > fine_level) {
    throw ConfigError("GMG: " + std::to_string(levels) + " levels do not nest below h = 2^-" +
                      std::to_string(fine_level));
  }
  if (nu1 < 0 || nu2 < 0) throw ConfigError("GMG smoothing counts must be non-negative");
  for (int l = 0; l < levels; ++l) ops_.emplace_back(pde::Lattice(fine_level - l), op.variant(), op.kappa());
  const auto& coarsest = ops_.back();
  if (coarsest.size() > 5000) throw ConfigError("GMG: coarsest grid too large for a dense solve");
  coarse_.compute(Matrix<double>(coarsest.assemble()));
  this->setup_s_ = seconds_since(t0);
}

template <class T>
Vector<T> Gmg<T>::vcycle(std::size_t level, const Vector<T>& b) const {
  if (level + 1 == ops_.size()) {
    if constexpr (is_complex_v<T>) {
      Vector<T> x(b.size());
      x.real() = coarse_.solve(Vector<double>(b.real()));
      x.imag() = coarse_.solve(Vector<double>(b.imag()));
      return x;
    } else {
      return coarse_.solve(b);
    }
  }
  const auto& op = ops_[level];
  const double omega_over_diag = (2.0 / 3.0) / op.diagonal();
  Vector<T> x = Vector<T>::Zero(b.size());
  for (int s = 0; s < nu1_; ++s) x += omega_over_diag * (b - op.apply<T>(x));
  const Vector<T> r = b - op.apply<T>(x);
  const std::size_t n = op.lattice().n();
  x += prolong_trilinear<T>(vcycle(level + 1, restrict_full_weighting<T>(r, n)), n);
  for (int s = 0; s < nu2_; ++s) x += omega_over_diag * (b - op.apply<T>(x));
  return x;
}

template <class T>
Vector<T> Gmg<T>::apply(const Vector<T>& r) const {
  if (static_cast<std::size_t>(r.size()) != ops_.front().size()) throw UsageError("GMG: vector length mismatch");
  return vcycle(0, r);
}

template <class T>
std::string Gmg<T>::params() const {
  std::ostringstream s;
  s << "levels=" << ops_.size() << ";nu1=" << nu1_ << ";nu2=" << nu2_ << ";omega=2/3";
  return s.str();
}

// ---------------------------------------------------------------------------

std::vector<Point> face_nodes(const pde::Lattice& lattice, int stride) {
  if (stride < 1) throw ConfigError("face collocation stride must be at least 1");
  std::vector<double> c;
  for (std::size_t i = 0; i < lattice.n(); i += stride) c.push_back(lattice.coord(i));
  std::vector<Point> nodes;
  nodes.reserve(6 * c.size() * c.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (double side : {-1.0, 1.0}) {
      for (double v : c) {
        for (double u : c) {
          Point p{};
          p[axis] = side;
          p[(axis + 1) % 3] = u;
          p[(axis + 2) % 3] = v;
          nodes.push_back(p);
        }
      }
    }
  }
  return nodes;
}

template <class T>
double factor_regularized(Matrix<T> a, Eigen::PartialPivLU<Matrix<T>>& lu) {
  auto singular = [&]() {
    const auto& d = lu.matrixLU().diagonal();
    if (!d.allFinite() || (d.array() == T(0)).any()) return true;
    const double rc = lu.rcond();
    return !(rc > std::numeric_limits<double>::epsilon());
  };
  lu.compute(a);
  if (!singular()) return 0.0;
  a.diagonal().array() += T(1e-10);
  lu.compute(a);
  if (!singular()) return 1e-10;
  throw NumericalError("boundary system is singular even after a 1e-10 diagonal shift");
}

template <class T>
FmmPreconditioner<T>::FmmPreconditioner(const pde::Lattice& lattice, const Kernel& kernel, const fmm::FmmConfig& cfg,
                                        int stride)
    : lattice_(lattice), kernel_(kernel) {
  const auto t0 = Clock::now();
  if (kernel.dim() != 3) throw UsageError("FMM preconditioner needs a 3D kernel");
  if (stride == 0) stride = lattice.level() <= 4 ? 1 : 2;
  const double h = lattice.h();
  const std::vector<Point> faces = face_nodes(lattice, stride);
  n_int_ = lattice.size();
  n_face_ = faces.size();
  face_spacing_ = stride * h;

  const double kappa = kernel.kind() == KernelKind::Helmholtz3D ? kernel.kappa() : 0.0;
  const Complex wave(0.0, kappa / (4.0 * 3.14159265358979323846));
  d_i_ = kSelfCellCube / h + wave;
  d_f_ = kSelfCellSquare / face_spacing_ + wave;
  if constexpr (!is_complex_v<T>) {
    if (kappa != 0.0) throw UsageError("Helmholtz FMM preconditioner needs complex arithmetic");
  }

  std::vector<Point> all(n_int_ + n_face_);
  for (std::size_t i = 0; i < n_int_; ++i) all[i] = lattice.node(i);
  std::copy(faces.begin(), faces.end(), all.begin() + static_cast<std::ptrdiff_t>(n_int_));
  fmm_ = std::make_unique<fmm::Fmm<T>>(kernel, PointSet(3, std::move(all)), cfg);

  Matrix<T> s = evaluate_block<T>(kernel, faces, faces);
  if constexpr (is_complex_v<T>) {
    s.diagonal().array() += d_f_;
  } else {
    s.diagonal().array() += d_f_.real();
  }
  regularization_ = factor_regularized<T>(std::move(s), boundary_);
  this->setup_s_ = seconds_since(t0);
}

template <class T>
Vector<T> FmmPreconditioner<T>::apply(const Vector<T>& r) const {
  if (static_cast<std::size_t>(r.size()) != n_int_) throw UsageError("FMM preconditioner: vector length mismatch");
  const double h3 = std::pow(lattice_.h(), 3);
  T di;
  if constexpr (is_complex_v<T>) {
    di = d_i_;
  } else {
    di = d_i_.real();
  }
  std::vector<T> q(n_int_ + n_face_, T(0));
  std::copy(r.data(), r.data() + r.size(), q.begin());
  const Vector<T> pot = fmm_->matvec(q);

  Vector<T> u = h3 * (pot.head(n_int_) + di * r);
  const Vector<T> sigma = -boundary_.solve(Vector<T>(h3 * pot.tail(n_face_)));

  std::fill(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n_int_), T(0));
  std::copy(sigma.data(), sigma.data() + sigma.size(), q.begin() + static_cast<std::ptrdiff_t>(n_int_));
  u += fmm_->matvec(q).head(n_int_);
  return u;
}

template <class T>
std::string FmmPreconditioner<T>::params() const {
  std::ostringstream s;
  s << "eps=" << fmm_->config().eps << ";p=" << fmm_->config().order << ";faces=" << n_face_
    << ";face_spacing=" << face_spacing_;
  if (regularization_ > 0.0) s << ";regularization=" << regularization_;
  return s.str();
}

template SolveResult<double> cg<double>(const Operator<double>&, const Vector<double>&, const Preconditioner<double>&,
                                        double, int);
template SolveResult<Complex> cg<Complex>(const Operator<Complex>&, const Vector<Complex>&,
                                          const Preconditioner<Complex>&, double, int);
template SolveResult<double> gmres<double>(const Operator<double>&, const Vector<double>&,
                                           const Preconditioner<double>&, int, double, int);
template SolveResult<Complex> gmres<Complex>(const Operator<Complex>&, const Vector<Complex>&,
                                             const Preconditioner<Complex>&, int, double, int);
template class Ic0<double>;
template class Ic0<Complex>;
template class Gmg<double>;
template class Gmg<Complex>;
template class FmmPreconditioner<double>;
template class FmmPreconditioner<Complex>;
template Vector<double> restrict_full_weighting<double>(const Vector<double>&, std::size_t);
template Vector<Complex> restrict_full_weighting<Complex>(const Vector<Complex>&, std::size_t);
template Vector<double> prolong_trilinear<double>(const Vector<double>&, std::size_t);
template Vector<Complex> prolong_trilinear<Complex>(const Vector<Complex>&, std::size_t);
template double factor_regularized<double>(Matrix<double>, Eigen::PartialPivLU<Matrix<double>>&);
template double factor_regularized<Complex>(Matrix<Complex>, Eigen::PartialPivLU<Matrix<Complex>>&);

}  // namespace hilra::solvers
