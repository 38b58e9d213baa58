#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SparseCore>

#include "hilra/error.hpp"
#include "hilra/fmm.hpp"
#include "hilra/kernels.hpp"
#include "hilra/linalg.hpp"
#include "hilra/pde.hpp"

namespace hilra::solvers {

// CG met a non-positive curvature or preconditioned inner product; the
// operator is not SPD and GMRES should be used instead.
class BreakdownError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

template <class T>
using Operator = std::function<Vector<T>(const Vector<T>&)>;

template <class T>
Operator<T> stencil_operator(const pde::StencilOperator& op) {
  return [&op](const Vector<T>& u) { return op.apply<T>(u); };
}

template <class T>
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Vector<T> apply(const Vector<T>& r) const = 0;
  virtual std::string name() const = 0;
  virtual std::string params() const { return {}; }
  double setup_seconds() const { return setup_s_; }

 protected:
  double setup_s_ = 0.0;
};

template <class T>
class Identity final : public Preconditioner<T> {
 public:
  Vector<T> apply(const Vector<T>& r) const override { return r; }
  std::string name() const override { return "none"; }
};

struct SolveStats {
  std::string method;
  std::string precond;
  std::string precond_params;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // relative residuals, history[0] = 1
  double setup_s = 0.0;
  double solve_s = 0.0;
  double per_iteration_s = 0.0;
};

template <class T>
struct SolveResult {
  Vector<T> x;
  SolveStats stats;
};

template <class T>
SolveResult<T> cg(const Operator<T>& a, const Vector<T>& b, const Preconditioner<T>& m, double rtol, int maxit);

// Restarted GMRES(restart) with right preconditioning. The history holds
// the Arnoldi residual estimate after every inner step.
template <class T>
SolveResult<T> gmres(const Operator<T>& a, const Vector<T>& b, const Preconditioner<T>& m, int restart, double rtol,
                     int maxit);

// Zero-fill incomplete Cholesky of an SPD sparse matrix. A failed pivot
// retries on A + alpha diag(A) with alpha = 1e-3, 2e-3, ... (5 attempts).
template <class T>
class Ic0 final : public Preconditioner<T> {
 public:
  explicit Ic0(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a);

  Vector<T> apply(const Vector<T>& r) const override;
  std::string name() const override { return "ic0"; }
  std::string params() const override;

  // Lower factor, row-major, diagonal last in every row.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& factor() const { return l_; }
  double shift() const { return shift_; }

 private:
  Eigen::SparseMatrix<double, Eigen::RowMajor> l_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> lt_;
  double shift_ = 0.0;
};

// One V(nu1, nu2)-cycle per application: weighted Jacobi (omega = 2/3),
// full-weighting restriction, trilinear prolongation, rediscretized coarse
// operators and a dense LU solve on the coarsest grid. levels = 0 coarsens
// down to h = 1/2; levels = 1 is a dense solve on the fine grid.
template <class T>
class Gmg final : public Preconditioner<T> {
 public:
  Gmg(const pde::StencilOperator& op, int levels = 0, int nu1 = 1, int nu2 = 1);

  Vector<T> apply(const Vector<T>& r) const override;
  std::string name() const override { return "gmg"; }
  std::string params() const override;
  int levels() const { return static_cast<int>(ops_.size()); }

 private:
  Vector<T> vcycle(std::size_t level, const Vector<T>& b) const;

  std::vector<pde::StencilOperator> ops_;  // fine first
  Eigen::PartialPivLU<Matrix<double>> coarse_;
  int nu1_, nu2_;
};

// Restriction (full weighting) and trilinear prolongation between a fine
// lattice with n points per axis and the coarse one with (n - 1) / 2.
template <class T>
Vector<T> restrict_full_weighting(const Vector<T>& fine, std::size_t n_fine);
template <class T>
Vector<T> prolong_trilinear(const Vector<T>& coarse, std::size_t n_fine);

// Collocation nodes on the six faces of [-1,1]^3: the two in-face
// coordinates run over every stride-th interior lattice coordinate.
std::vector<Point> face_nodes(const pde::Lattice& lattice, int stride);

// Volume potential of the continuous Green's function with a single-layer
// Dirichlet correction on the faces:
//   M^-1 r = h^3 [ (G_ii + D_i) r - G_if (G_ff + D_f)^-1 G_fi r ].
// G_ii r and G_fi r come from one FMM over interior and face nodes; the
// correction back to the interior is a second pass of the same FMM.
// D_i and D_f are the self-cell and self-panel integrals of G.
template <class T>
class FmmPreconditioner final : public Preconditioner<T> {
 public:
  // stride = 0 picks 1 for h >= 2^-4 and 2 below.
  FmmPreconditioner(const pde::Lattice& lattice, const Kernel& kernel, const fmm::FmmConfig& cfg, int stride = 0);

  Vector<T> apply(const Vector<T>& r) const override;
  std::string name() const override { return "fmm"; }
  std::string params() const override;

  std::size_t face_count() const { return n_face_; }
  double face_spacing() const { return face_spacing_; }
  Complex self_cell() const { return d_i_; }
  Complex self_panel() const { return d_f_; }
  const fmm::Fmm<T>& engine() const { return *fmm_; }

 private:
  pde::Lattice lattice_;
  Kernel kernel_;
  std::size_t n_int_ = 0;
  std::size_t n_face_ = 0;
  double face_spacing_ = 0.0;
  Complex d_i_{}, d_f_{};
  std::unique_ptr<fmm::Fmm<T>> fmm_;
  Eigen::PartialPivLU<Matrix<T>> boundary_;
  double regularization_ = 0.0;
};

// Self integrals of 1/(4 pi r): over a cube of side h it is c_v h^2, over a
// square of side a it is c_s a.
inline constexpr double kSelfCellCube = 2.3800772 / (4.0 * 3.14159265358979323846);
inline constexpr double kSelfCellSquare = 3.5254943480781717 / (4.0 * 3.14159265358979323846);

// LU with one 1e-10 diagonal-shift retry when the matrix is numerically
// singular. Returns the shift used; throws NumericalError on a second failure.
template <class T>
double factor_regularized(Matrix<T> a, Eigen::PartialPivLU<Matrix<T>>& lu);

}  // namespace hilra::solvers
