#include "hilra/fmm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "hilra/chebyshev.hpp"
#include "hilra/error.hpp"
#include "hilra/memory.hpp"

namespace hilra::fmm {

int order_for_accuracy(double eps, const Kernel& kernel) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("FMM accuracy must lie in (0, 1)");
  const int digits = static_cast<int>(std::ceil(-std::log10(eps) - 1e-9));
  int p = std::max(2, digits) + 2;
  if (kernel.kind() == KernelKind::Helmholtz3D) p += 2;
  return p;
}

FmmConfig FmmConfig::for_accuracy(double eps, const Kernel& kernel) {
  FmmConfig cfg;
  cfg.eps = eps;
  cfg.order = order_for_accuracy(eps, kernel);
  return cfg;
}

std::vector<TransferVector> transfer_vectors(int dim) {
  std::vector<TransferVector> out;
  const int zr = dim == 3 ? 3 : 0;
  for (int z = -zr; z <= zr; ++z) {
    for (int y = -3; y <= 3; ++y) {
      for (int x = -3; x <= 3; ++x) {
        if (std::max({std::abs(x), std::abs(y), std::abs(z)}) > 1) out.push_back({x, y, z});
      }
    }
  }
  return out;
}

template <class T>
Matrix<T> M2LOperator<T>::dense() const {
  if (!compressed()) return u;
  return u * sigma.template cast<T>().asDiagonal() * vh;
}

template <class T>
std::size_t M2LOperator<T>::bytes() const {
  return (u.size() + vh.size()) * sizeof(T) + sigma.size() * sizeof(double);
}

template <class T>
M2LTable<T>::M2LTable(int dim) : dim_(dim) {
  const int slots = dim == 3 ? 343 : 49;
  ops_.resize(slots);
  present_.assign(slots, false);
}

template <class T>
int M2LTable<T>::slot(const TransferVector& t, int dim) {
  const int s = (t[0] + 3) + 7 * (t[1] + 3);
  return dim == 3 ? s + 49 * (t[2] + 3) : s;
}

template <class T>
bool M2LTable<T>::contains(const TransferVector& t) const {
  for (int d = 0; d < dim_; ++d) {
    if (std::abs(t[d]) > 3) return false;
  }
  return present_[slot(t, dim_)];
}

template <class T>
const M2LOperator<T>& M2LTable<T>::at(const TransferVector& t) const {
  if (!contains(t)) {
    std::ostringstream msg;
    msg << "no M2L operator for transfer vector (" << t[0] << "," << t[1] << "," << t[2] << ")";
    throw InternalError(msg.str());
  }
  return ops_[slot(t, dim_)];
}

template <class T>
void M2LTable<T>::insert(const TransferVector& t, M2LOperator<T> op) {
  const int s = slot(t, dim_);
  if (!present_[s]) ++count_;
  present_[s] = true;
  ops_[s] = std::move(op);
}

template <class T>
std::size_t M2LTable<T>::bytes() const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < ops_.size(); ++s) {
    if (present_[s]) total += ops_[s].bytes();
  }
  return total;
}

namespace {

constexpr std::size_t kChunk = 32;

// Signed axis permutation g with g(t) sorted by |entry|, descending and
// non-negative. Operators of t and g(t) differ only by a permutation of the
// Chebyshev grid.
struct Symmetry {
  std::array<int, 3> axis{0, 1, 2};
  std::array<int, 3> sign{1, 1, 1};
  TransferVector canonical{0, 0, 0};
};

Symmetry canonicalize(const TransferVector& t, int dim) {
  Symmetry g;
  std::stable_sort(g.axis.begin(), g.axis.begin() + dim,
                   [&](int a, int b) { return std::abs(t[a]) > std::abs(t[b]); });
  for (int d = 0; d < dim; ++d) {
    g.sign[d] = t[g.axis[d]] < 0 ? -1 : 1;
    g.canonical[d] = std::abs(t[g.axis[d]]);
  }
  return g;
}

// sigma(l): index of g(x_l) on the tensor grid.
std::vector<int> grid_permutation(const Symmetry& g, int p, int dim) {
  const int n = dim == 3 ? p * p * p : p * p;
  std::vector<int> perm(n);
  for (int l = 0; l < n; ++l) {
    const std::array<int, 3> i{l % p, (l / p) % p, dim == 3 ? l / (p * p) : 0};
    std::array<int, 3> j{0, 0, 0};
    for (int d = 0; d < dim; ++d) {
      const int src = i[g.axis[d]];
      j[d] = g.sign[d] > 0 ? src : p - 1 - src;
    }
    perm[l] = j[0] + p * j[1] + (dim == 3 ? p * p * j[2] : 0);
  }
  return perm;
}

std::vector<Point> grid_points(std::span<const double> nodes, int dim, double half, const Point& center) {
  const int p = static_cast<int>(nodes.size());
  const int n = dim == 3 ? p * p * p : p * p;
  std::vector<Point> pts(n);
  for (int l = 0; l < n; ++l) {
    pts[l] = {center[0] + half * nodes[l % p], center[1] + half * nodes[(l / p) % p],
              dim == 3 ? center[2] + half * nodes[l / (p * p)] : 0.0};
  }
  return pts;
}

}  // namespace

template <class T>
struct Fmm<T>::Impl {
  Kernel kernel;
  FmmConfig cfg;
  UniformTree tree;
  InteractionLists lists;
  int dim = 3;
  int p = 0;
  int ncoef = 0;
  std::vector<double> nodes;
  std::array<Matrix<double>, 2> up;    // child -> parent, per half
  std::array<Matrix<double>, 2> down;  // parent -> child (transposes)
  bool homogeneous = false;
  std::vector<M2LTable<T>> tables;     // [0] when homogeneous, else per level
  std::vector<double> scale;
  std::vector<double> shift;
  // V-list pairs bucketed by table slot, per level.
  struct Bucket {
    std::vector<std::uint32_t> targets;
    std::vector<std::uint32_t> sources;
  };
  std::vector<std::vector<Bucket>> buckets;
  std::size_t pair_count = 0;
  double precompute_seconds = 0.0;
  memory::Reservation tree_bytes;
  memory::Reservation table_bytes;

  Impl(const Kernel& k, const PointSet& pts, FmmConfig c)
      : kernel(k), cfg(c), tree(UniformTree::build(pts, resolve_depth(pts, c))), lists(InteractionLists::build(tree)) {}

  static int resolve_depth(const PointSet& pts, const FmmConfig& c) {
    return c.depth > 0 ? c.depth : default_depth(pts.size(), pts.dim(), c.leaf_size);
  }

  const M2LTable<T>& table(int level) const { return homogeneous ? tables.front() : tables[level]; }

  M2LTable<T> build_table(double half) const;
  void bucket_pairs();
  std::size_t bucket_bytes() const;

  void p2m(std::span<const T> q, Matrix<T>& mult) const;
  void m2m(int level, const Matrix<T>& child, Matrix<T>& parent) const;
  void m2l(int level, const Matrix<T>& mult, Matrix<T>& local) const;
  void l2l(int level, const Matrix<T>& parent, Matrix<T>& child) const;
  void l2p(const Matrix<T>& local, std::span<T> u) const;
  void p2p(std::span<const T> q, std::span<T> u) const;
};

template <class T>
M2LTable<T> Fmm<T>::Impl::build_table(double half) const {
  M2LTable<T> table(dim);
  std::map<TransferVector, M2LOperator<T>> canonical_ops;
  const std::vector<Point> targets = grid_points(nodes, dim, half, {0.0, 0.0, 0.0});
  for (const auto& t : transfer_vectors(dim)) {
    const Symmetry g = canonicalize(t, dim);
    auto it = canonical_ops.find(g.canonical);
    if (it == canonical_ops.end()) {
      const auto& c = g.canonical;
      const Point center{2.0 * half * c[0], 2.0 * half * c[1], 2.0 * half * c[2]};
      const std::vector<Point> sources = grid_points(nodes, dim, half, center);
      Matrix<T> k = evaluate_block<T>(kernel, targets, sources);
      M2LOperator<T> op;
      if (cfg.compress_m2l) {
        Eigen::BDCSVD<Matrix<T>> svd(k, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        if (svd.info() != Eigen::Success || !s.allFinite()) {
          std::ostringstream msg;
          msg << "SVD failed for transfer vector (" << t[0] << "," << t[1] << "," << t[2] << ")";
          throw NumericalError(msg.str());
        }
        Eigen::Index r = 1;
        while (r < s.size() && s[r] >= cfg.eps * s[0]) ++r;
        op.u = svd.matrixU().leftCols(r);
        op.sigma = s.head(r);
        op.vh = svd.matrixV().leftCols(r).adjoint();
      } else {
        op.u = std::move(k);
      }
      it = canonical_ops.emplace(g.canonical, std::move(op)).first;
    }
    const M2LOperator<T>& base = it->second;
    const std::vector<int> perm = grid_permutation(g, p, dim);
    M2LOperator<T> op;
    op.sigma = base.sigma;
    op.u.resize(ncoef, base.u.cols());
    for (int l = 0; l < ncoef; ++l) op.u.row(l) = base.u.row(perm[l]);
    if (base.compressed()) {
      op.vh.resize(base.vh.rows(), ncoef);
      for (int m = 0; m < ncoef; ++m) op.vh.col(m) = base.vh.col(perm[m]);
    } else {
      Matrix<T> cols(ncoef, ncoef);
      for (int m = 0; m < ncoef; ++m) cols.col(m) = op.u.col(perm[m]);
      op.u = std::move(cols);
    }
    table.insert(t, std::move(op));
  }
  return table;
}

template <class T>
void Fmm<T>::Impl::bucket_pairs() {
  const int depth = tree.depth();
  const int slots = dim == 3 ? 343 : 49;
  buckets.assign(depth + 1, std::vector<Bucket>(slots));
  pair_count = 0;
  for (int level = 2; level <= depth; ++level) {
    const auto& tab = table(level);
    for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
      const Coords ct = tree.coords(level, b);
      for (auto s : lists.v_list(level, b)) {
        const Coords cs = tree.coords(level, s);
        const TransferVector t{static_cast<int>(cs[0] - ct[0]), static_cast<int>(cs[1] - ct[1]),
                               static_cast<int>(cs[2] - ct[2])};
        if (!tab.contains(t)) tab.at(t);  // throws InternalError
        auto& bucket = buckets[level][M2LTable<T>::slot(t, dim)];
        bucket.targets.push_back(static_cast<std::uint32_t>(b));
        bucket.sources.push_back(s);
        ++pair_count;
      }
    }
  }
}

template <class T>
std::size_t Fmm<T>::Impl::bucket_bytes() const {
  return 2 * pair_count * sizeof(std::uint32_t);
}

template <class T>
void Fmm<T>::Impl::p2m(std::span<const T> q, Matrix<T>& mult) const {
  const int level = tree.depth();
  const auto pts = tree.points();
  std::vector<double> w(3 * p);
  for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
    const auto r = tree.range(level, b);
    if (r.size() == 0) continue;
    const Point c = tree.center(level, b);
    const double inv = 1.0 / tree.half_width(level);
    T* out = mult.col(b).data();
    for (std::size_t i = r.begin; i < r.end; ++i) {
      for (int d = 0; d < dim; ++d) cheb::weights(p, nodes, (pts[i][d] - c[d]) * inv, &w[d * p]);
      const T qi = q[i];
      if (dim == 2) {
        for (int m1 = 0; m1 < p; ++m1) {
          const T a = qi * w[p + m1];
          for (int m0 = 0; m0 < p; ++m0) out[m0 + p * m1] += a * w[m0];
        }
      } else {
        for (int m2 = 0; m2 < p; ++m2) {
          for (int m1 = 0; m1 < p; ++m1) {
            const T a = qi * w[2 * p + m2] * w[p + m1];
            T* o = out + p * (m1 + p * m2);
            for (int m0 = 0; m0 < p; ++m0) o[m0] += a * w[m0];
          }
        }
      }
    }
  }
}

template <class T>
void Fmm<T>::Impl::m2m(int level, const Matrix<T>& child, Matrix<T>& parent) const {
  // level is the parent level
  const std::size_t nc = tree.children_per_box();
  std::vector<T> scratch;
  std::array<const Matrix<double>*, 3> axes{};
  for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
    for (std::size_t k = 0; k < nc; ++k) {
      for (int d = 0; d < dim; ++d) axes[d] = &up[(k >> d) & 1];
      cheb::tensor_apply<T>(p, dim, axes.data(), child.col(b * nc + k).data(), parent.col(b).data(), scratch);
    }
  }
}

template <class T>
void Fmm<T>::Impl::l2l(int level, const Matrix<T>& parent, Matrix<T>& child) const {
  const std::size_t nc = tree.children_per_box();
  std::vector<T> scratch;
  std::array<const Matrix<double>*, 3> axes{};
  for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
    for (std::size_t k = 0; k < nc; ++k) {
      for (int d = 0; d < dim; ++d) axes[d] = &down[(k >> d) & 1];
      cheb::tensor_apply<T>(p, dim, axes.data(), parent.col(b).data(), child.col(b * nc + k).data(), scratch);
    }
  }
}

template <class T>
void Fmm<T>::Impl::m2l(int level, const Matrix<T>& mult, Matrix<T>& local) const {
  const auto& tab = table(level);
  const double sc = scale[level];
  const double sh = shift[level];
  Matrix<T> gathered(ncoef, static_cast<Eigen::Index>(kChunk));
  Matrix<T> reduced;
  Matrix<T> result;
  for (int s = 0; s < tab.slots(); ++s) {
    const auto& bucket = buckets[level][s];
    if (bucket.targets.empty()) continue;
    const M2LOperator<T>* op = tab.by_slot(s);
    if (op == nullptr) throw InternalError("V-list pair without an M2L operator");
    const std::size_t pairs = bucket.targets.size();
    for (std::size_t first = 0; first < pairs; first += kChunk) {
      const auto cnt = static_cast<Eigen::Index>(std::min(kChunk, pairs - first));
      for (Eigen::Index j = 0; j < cnt; ++j) gathered.col(j) = mult.col(bucket.sources[first + j]);
      auto block = gathered.leftCols(cnt);
      if (op->compressed()) {
        reduced.noalias() = op->vh * block;
        reduced.array().colwise() *= (sc * op->sigma).template cast<T>().array();
        result.noalias() = op->u * reduced;
      } else {
        result.noalias() = op->u * block;
        if (sc != 1.0) result *= T(sc);
      }
      if (sh != 0.0) result.rowwise() += T(sh) * block.colwise().sum();
      for (Eigen::Index j = 0; j < cnt; ++j) local.col(bucket.targets[first + j]) += result.col(j);
    }
  }
}

template <class T>
void Fmm<T>::Impl::l2p(const Matrix<T>& local, std::span<T> u) const {
  const int level = tree.depth();
  const auto pts = tree.points();
  std::vector<double> w(3 * p);
  for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
    const auto r = tree.range(level, b);
    if (r.size() == 0) continue;
    const Point c = tree.center(level, b);
    const double inv = 1.0 / tree.half_width(level);
    const T* f = local.col(b).data();
    for (std::size_t i = r.begin; i < r.end; ++i) {
      for (int d = 0; d < dim; ++d) cheb::weights(p, nodes, (pts[i][d] - c[d]) * inv, &w[d * p]);
      T acc(0);
      if (dim == 2) {
        for (int m1 = 0; m1 < p; ++m1) {
          T row(0);
          for (int m0 = 0; m0 < p; ++m0) row += w[m0] * f[m0 + p * m1];
          acc += w[p + m1] * row;
        }
      } else {
        for (int m2 = 0; m2 < p; ++m2) {
          for (int m1 = 0; m1 < p; ++m1) {
            const T* fr = f + p * (m1 + p * m2);
            T row(0);
            for (int m0 = 0; m0 < p; ++m0) row += w[m0] * fr[m0];
            acc += w[2 * p + m2] * w[p + m1] * row;
          }
        }
      }
      u[i] += acc;
    }
  }
}

template <class T>
void Fmm<T>::Impl::p2p(std::span<const T> q, std::span<T> u) const {
  const int level = tree.depth();
  const auto pts = tree.points();
  kernel.visit([&](auto g) {
    using S = typename decltype(g)::scalar;
    if constexpr (is_complex_v<S> && !is_complex_v<T>) {
      return;
    } else {
      for (std::size_t b = 0; b < tree.boxes_at(level); ++b) {
        const auto tr = tree.range(level, b);
        if (tr.size() == 0) continue;
        for (auto s : lists.u_list(b)) {
          const auto sr = tree.range(level, s);
          for (std::size_t i = tr.begin; i < tr.end; ++i) {
            const Point& x = pts[i];
            T acc(0);
            for (std::size_t j = sr.begin; j < sr.end; ++j) acc += T(g(distance2(x, pts[j]))) * q[j];
            u[i] += acc;
          }
        }
      }
    }
  });
}

template <class T>
Fmm<T>::Fmm(const Kernel& kernel, const PointSet& pts, FmmConfig cfg) {
  require_scalar<T>(kernel);
  if (kernel.dim() != pts.dim()) throw UsageError("kernel and point set dimensions differ");
  if (cfg.order < 2) throw ConfigError("Chebyshev order must be at least 2");
  if (!(cfg.eps > 0.0)) throw ConfigError("M2L cutoff must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  impl_ = std::make_unique<Impl>(kernel, pts, cfg);
  auto& im = *impl_;
  im.dim = pts.dim();
  im.p = cfg.order;
  im.ncoef = im.dim == 3 ? im.p * im.p * im.p : im.p * im.p;
  im.nodes = cheb::nodes(im.p);
  for (int half = 0; half < 2; ++half) {
    im.up[half] = cheb::child_transfer(im.p, half == 1);
    im.down[half] = im.up[half].transpose();
  }

  const int depth = im.tree.depth();
  if (kernel.kind() == KernelKind::Helmholtz3D) {
    const double diameter = 2.0 * im.tree.half_width(depth) * std::sqrt(3.0);
    if (kernel.kappa() * diameter > 2.0 * std::numbers::pi) {
      throw ConfigError("Helmholtz wave number too large for the leaf boxes (kappa * diameter > 2 pi)");
    }
  }

  im.homogeneous = kernel.kind() != KernelKind::Helmholtz3D;
  im.scale.assign(depth + 1, 1.0);
  im.shift.assign(depth + 1, 0.0);
  if (im.homogeneous) {
    im.tables.push_back(im.build_table(1.0));
    for (int level = 2; level <= depth; ++level) {
      const double r = im.tree.half_width(level);
      if (kernel.kind() == KernelKind::Laplace3D) {
        im.scale[level] = 1.0 / r;
      } else {
        im.shift[level] = -std::log(r) / (2.0 * std::numbers::pi);
      }
    }
  } else {
    im.tables.resize(depth + 1);
    for (int level = 2; level <= depth; ++level) im.tables[level] = im.build_table(im.tree.half_width(level));
  }
  im.bucket_pairs();
  im.precompute_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto report = memory_report();
  im.tree_bytes = memory::Reservation("fmm.tree", report.tree);
  im.table_bytes = memory::Reservation("fmm.m2l", report.m2l_table);
}

template <class T>
Fmm<T>::~Fmm() = default;
template <class T>
Fmm<T>::Fmm(Fmm&&) noexcept = default;
template <class T>
Fmm<T>& Fmm<T>::operator=(Fmm&&) noexcept = default;

template <class T>
Vector<T> Fmm<T>::matvec(std::span<const T> charges) const {
  const auto& im = *impl_;
  const auto& tree = im.tree;
  if (charges.size() != tree.size()) throw UsageError("charge vector length does not match point count");
  const auto report = memory_report();
  memory::Reservation expansion_bytes("fmm.expansions", report.expansions);
  memory::Reservation buffer_bytes("fmm.buffers", report.buffers);

  const std::vector<T> q = tree.template to_sorted<T>(charges);
  std::vector<T> u(q.size(), T(0));
  const int depth = tree.depth();

  std::vector<Matrix<T>> mult(depth + 1);
  std::vector<Matrix<T>> local(depth + 1);
  for (int level = 2; level <= depth; ++level) {
    mult[level] = Matrix<T>::Zero(im.ncoef, static_cast<Eigen::Index>(tree.boxes_at(level)));
    local[level] = Matrix<T>::Zero(im.ncoef, static_cast<Eigen::Index>(tree.boxes_at(level)));
  }

  im.p2m(q, mult[depth]);
  for (int level = depth - 1; level >= 2; --level) im.m2m(level, mult[level + 1], mult[level]);
  for (int level = 2; level <= depth; ++level) im.m2l(level, mult[level], local[level]);
  for (int level = 2; level < depth; ++level) im.l2l(level, local[level], local[level + 1]);
  im.l2p(local[depth], u);
  im.p2p(q, u);

  const std::vector<T> out = tree.template to_input<T>(std::span<const T>(u));
  return Eigen::Map<const Vector<T>>(out.data(), static_cast<Eigen::Index>(out.size()));
}

template <class T>
const FmmConfig& Fmm<T>::config() const {
  return impl_->cfg;
}
template <class T>
const Kernel& Fmm<T>::kernel() const {
  return impl_->kernel;
}
template <class T>
const UniformTree& Fmm<T>::tree() const {
  return impl_->tree;
}
template <class T>
const InteractionLists& Fmm<T>::lists() const {
  return impl_->lists;
}
template <class T>
bool Fmm<T>::homogeneous() const {
  return impl_->homogeneous;
}
template <class T>
const M2LTable<T>& Fmm<T>::table(int level) const {
  if (level < 2 || level > impl_->tree.depth()) throw UsageError("no M2L table at level " + std::to_string(level));
  return impl_->table(level);
}
template <class T>
double Fmm<T>::level_scale(int level) const {
  return impl_->scale.at(level);
}
template <class T>
double Fmm<T>::level_shift(int level) const {
  return impl_->shift.at(level);
}

template <class T>
std::size_t Fmm<T>::stored_operators() const {
  std::size_t n = 0;
  for (const auto& t : impl_->tables) n += t.size();
  return n;
}

template <class T>
std::size_t Fmm<T>::v_list_pairs() const {
  return impl_->pair_count;
}

template <class T>
double Fmm<T>::precompute_seconds() const {
  return impl_->precompute_seconds;
}

template <class T>
MemoryReport Fmm<T>::memory_report() const {
  const auto& im = *impl_;
  MemoryReport r;
  r.tree = im.tree.bytes() + im.lists.bytes() + im.bucket_bytes();
  std::size_t boxes = 0;
  for (int level = 2; level <= im.tree.depth(); ++level) boxes += im.tree.boxes_at(level);
  r.expansions = 2 * boxes * static_cast<std::size_t>(im.ncoef) * sizeof(T);
  for (const auto& t : im.tables) r.m2l_table += t.bytes();
  r.m2l_table += 4 * static_cast<std::size_t>(im.p * im.p) * sizeof(double);
  // sorted charges, sorted potentials, M2L chunk scratch
  r.buffers = 2 * im.tree.size() * sizeof(T) + 3 * static_cast<std::size_t>(im.ncoef) * kChunk * sizeof(T);
  return r;
}

template struct M2LOperator<double>;
template struct M2LOperator<Complex>;
template class M2LTable<double>;
template class M2LTable<Complex>;
template class Fmm<double>;
template class Fmm<Complex>;

}  // namespace hilra::fmm
