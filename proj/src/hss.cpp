#include "hilra/hss.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "hilra/dense.hpp"
#include "hilra/error.hpp"

namespace hilra::hss {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Row interpolative decomposition Y ~= U Y(skel, :) with U(skel, :) = I.
template <class T>
struct RowId {
  Matrix<T> u;
  std::vector<Eigen::Index> skel;  // local row indices
};

template <class T>
RowId<T> row_id(const Matrix<T>& y, double tol) {
  const Eigen::Index m = y.rows();
  // Columns of Y^T and of its triangular factor obey the same linear
  // relations, so the pivoted QR can run on the (smaller) R.
  Matrix<T> target;
  if (y.cols() > m) {
    Eigen::HouseholderQR<Matrix<T>> pre(y.transpose());
    target = pre.matrixQR().topRows(m).template triangularView<Eigen::Upper>();
  } else {
    target = y.transpose();
  }
  Eigen::ColPivHouseholderQR<Matrix<T>> qr(target.rows(), m);
  qr.setThreshold(tol);
  qr.compute(target);
  const Eigen::Index k = std::clamp<Eigen::Index>(qr.rank(), 1, m);
  const auto& perm = qr.colsPermutation().indices();
  const Matrix<T>& r = qr.matrixQR();

  Matrix<T> t = r.topRightCorner(k, m - k);
  r.topLeftCorner(k, k).template triangularView<Eigen::Upper>().solveInPlace(t);

  RowId<T> id;
  id.u = Matrix<T>::Zero(m, k);
  id.skel.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    id.skel[j] = perm(j);
    id.u(perm(j), j) = T(1);
  }
  for (Eigen::Index i = 0; i < m - k; ++i) id.u.row(perm(k + i)) = t.col(i).transpose();
  return id;
}

std::vector<Point> gather(const PointSet& pts, const std::vector<std::size_t>& idx) {
  std::vector<Point> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = pts[idx[i]];
  return out;
}

template <class T>
class Builder {
 public:
  Builder(const HssConfig& cfg, const Kernel& kernel, const PointSet& pts)
      : cfg_(cfg), kernel_(kernel), pts_(pts), n_(pts.size()), rng_(cfg.seed) {}

  Compressed<T> run() {
    const auto t_start = Clock::now();
    Compressed<T> out;
    auto& f = out.factors;
    f.tree = ClusterTree::build(n_, cfg_.leaf_size);
    const auto& nodes = f.tree.nodes();
    f.d.assign(nodes.size(), Matrix<T>());
    f.u.assign(nodes.size(), Matrix<T>());
    f.b.assign(nodes.size(), Matrix<T>());
    f.rank.assign(nodes.size(), 0);

    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].leaf()) {
        f.d[i] = evaluate_block<T>(kernel_, pts_, nodes[i].begin, nodes[i].size(), nodes[i].begin, nodes[i].size());
      }
    }
    if (nodes.size() == 1) {
      f.rank[0] = static_cast<int>(n_);
      finish(out, t_start);
      return out;
    }

    int s = std::min<int>(cfg_.initial_samples, static_cast<int>(n_));
    add_samples(s, out.times);
    while (true) {
      const std::optional<int> short_node = try_compress(f);
      if (!short_node) break;
      if (s >= cfg_.max_samples) {
        std::ostringstream msg;
        msg << "HSS compression failed: node " << *short_node << " (indices [" << nodes[*short_node].begin << ", "
            << nodes[*short_node].end << ")) needs more than max_samples=" << cfg_.max_samples << " samples";
        throw NumericalError(msg.str());
      }
      const int grown = static_cast<int>(std::ceil(s * cfg_.growth));
      const int next = std::min({std::max(grown, s + 1), cfg_.max_samples, static_cast<int>(n_)});
      add_samples(next, out.times);
      s = next;
      ++f.restarts;
    }
    f.samples = s;
    samples_ = memory::Reservation();
    omega_ = Matrix<T>();
    sample_ = Matrix<T>();
    finish(out, t_start);
    return out;
  }

 private:
  void finish(Compressed<T>& out, Clock::time_point t_start) {
    check_nestedness(out.factors);
    out.factors.reservation = memory::Reservation("hss.factors", stats(out.factors).total());
    out.times.compress_s = seconds_since(t_start) - out.times.sample_s;
  }

  // Extends the random block and the samples A * Omega to s columns.
  void add_samples(int s, TimeBreakdown& times) {
    const auto t0 = Clock::now();
    const Eigen::Index old = omega_.cols();
    const Eigen::Index extra = s - old;
    Matrix<T> fresh(n_, extra);
    std::normal_distribution<double> gauss;
    for (Eigen::Index j = 0; j < extra; ++j)
      for (std::size_t i = 0; i < n_; ++i) fresh(i, j) = T(gauss(rng_));
    samples_ = memory::Reservation("hss.samples", 2 * n_ * static_cast<std::size_t>(s) * sizeof(T));

    Matrix<T> fresh_sample = sample(fresh);
    omega_.conservativeResize(n_, s);
    omega_.rightCols(extra) = fresh;
    sample_.conservativeResize(n_, s);
    sample_.rightCols(extra) = fresh_sample;
    times.sample_s += seconds_since(t0);
  }

  Matrix<T> sample(const Matrix<T>& block) {
    if (cfg_.sampler == Sampler::dense) return dense::direct_multi_matvec<T>(kernel_, pts_, block);
    if (!fmm_) fmm_.emplace(kernel_, pts_, cfg_.fmm);
    Matrix<T> out(block.rows(), block.cols());
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      const Vector<T> col = block.col(j);
      out.col(j) = fmm_->matvec(std::span<const T>(col.data(), col.size()));
    }
    return out;
  }

  // One bottom-up pass over the current samples. Returns the first node
  // whose rank leaves less than the required oversampling margin.
  std::optional<int> try_compress(HssFactors<T>& f) {
    const auto& tree = f.tree;
    const int s = static_cast<int>(omega_.cols());
    const std::size_t count = tree.nodes().size();
    std::vector<Matrix<T>> y_hat(count), omega_hat(count);
    std::vector<std::vector<std::size_t>> skel(count);
    memory::Reservation work("hss.workspace", 0);
    std::size_t work_bytes = 0;

    for (int id : tree.bottom_up()) {
      const ClusterNode& node = tree.node(id);
      Matrix<T> y, omega_local;
      std::vector<std::size_t> candidates;
      if (node.leaf()) {
        y = sample_.middleRows(node.begin, node.size()) - f.d[id] * omega_.middleRows(node.begin, node.size());
        omega_local = omega_.middleRows(node.begin, node.size());
        candidates.resize(node.size());
        std::iota(candidates.begin(), candidates.end(), node.begin);
      } else {
        const int a = node.left, c = node.right;
        f.b[id] = evaluate_block<T>(kernel_, gather(pts_, skel[a]), gather(pts_, skel[c]));
        if (id == 0) break;
        const Eigen::Index ka = f.rank[a], kc = f.rank[c];
        y.resize(ka + kc, s);
        y.topRows(ka) = y_hat[a] - f.b[id] * omega_hat[c];
        y.bottomRows(kc) = y_hat[c] - f.b[id].transpose() * omega_hat[a];
        omega_local.resize(ka + kc, s);
        omega_local << omega_hat[a], omega_hat[c];
        candidates = skel[a];
        candidates.insert(candidates.end(), skel[c].begin(), skel[c].end());
        for (int child : {a, c}) {
          work_bytes -= (y_hat[child].size() + omega_hat[child].size()) * sizeof(T);
          y_hat[child] = Matrix<T>();
          omega_hat[child] = Matrix<T>();
        }
      }

      RowId<T> id_result = row_id<T>(y, cfg_.tol);
      const int k = static_cast<int>(id_result.skel.size());
      const int m = static_cast<int>(y.rows());
      if (k > s - cfg_.oversampling && k < m && s < static_cast<int>(n_)) return id;

      f.rank[id] = k;
      skel[id].resize(k);
      y_hat[id].resize(k, s);
      for (int j = 0; j < k; ++j) {
        skel[id][j] = candidates[id_result.skel[j]];
        y_hat[id].row(j) = y.row(id_result.skel[j]);
      }
      omega_hat[id] = id_result.u.transpose() * omega_local;
      f.u[id] = std::move(id_result.u);
      work_bytes += (y_hat[id].size() + omega_hat[id].size()) * sizeof(T);
      work.resize(work_bytes);
    }
    f.rank[0] = 0;
    return std::nullopt;
  }

  const HssConfig& cfg_;
  const Kernel& kernel_;
  const PointSet& pts_;
  std::size_t n_;
  std::mt19937_64 rng_;
  Matrix<T> omega_;
  Matrix<T> sample_;
  memory::Reservation samples_;
  std::optional<fmm::Fmm<T>> fmm_;
};

void require_morton_order(const PointSet& pts) {
  const Bounds root{};
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::uint64_t key = morton_encode(pts[i], 2, root, pts.dim()).index;
    if (key < last) throw UsageError("HSS compression expects Morton-ordered points");
    last = key;
  }
}

}  // namespace

void HssConfig::validate() const {
  if (!(tol > 0.0)) throw ConfigError("HSS tolerance must be positive");
  if (leaf_size < 1) throw ConfigError("HSS leaf size must be at least 1");
  if (initial_samples < 8) throw ConfigError("HSS initial sample count must be at least 8");
  if (oversampling < 0 || oversampling >= initial_samples) {
    throw ConfigError("HSS oversampling must lie in [0, initial_samples)");
  }
  if (!(growth > 1.0)) throw ConfigError("HSS sample growth factor must exceed 1");
  if (max_samples < initial_samples) throw ConfigError("HSS max_samples must be at least initial_samples");
}

ClusterTree ClusterTree::build(std::size_t n, std::size_t leaf_size) {
  if (n == 0) throw UsageError("cluster tree over an empty index range");
  if (leaf_size == 0) throw ConfigError("HSS leaf size must be at least 1");
  ClusterTree t;
  t.nodes_.push_back({0, n, 0, -1, -1, -1});
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const ClusterNode node = t.nodes_[i];
    t.levels_ = std::max(t.levels_, node.level + 1);
    if (node.size() <= leaf_size) continue;
    const std::size_t mid = node.begin + node.size() / 2;
    const int id = static_cast<int>(i);
    t.nodes_[i].left = static_cast<int>(t.nodes_.size());
    t.nodes_.push_back({node.begin, mid, node.level + 1, id, -1, -1});
    t.nodes_[i].right = static_cast<int>(t.nodes_.size());
    t.nodes_.push_back({mid, node.end, node.level + 1, id, -1, -1});
  }
  return t;
}

std::vector<int> ClusterTree::bottom_up() const {
  std::vector<int> ids(nodes_.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return nodes_[a].level > nodes_[b].level; });
  return ids;
}

template <class T>
Compressed<T> compress(const HssConfig& cfg, const Kernel& kernel, const PointSet& pts) {
  require_scalar<T>(kernel);
  if (kernel.dim() != pts.dim()) throw UsageError("kernel and point set dimensions differ");
  cfg.validate();
  require_morton_order(pts);
  return Builder<T>(cfg, kernel, pts).run();
}

template <class T>
Vector<T> matvec(const HssFactors<T>& f, std::span<const T> x) {
  const auto& tree = f.tree;
  if (x.size() != f.size()) throw UsageError("HSS matvec: vector length does not match matrix size");
  const Eigen::Map<const Vector<T>> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Vector<T> y = Vector<T>::Zero(xv.size());
  const auto nodes = tree.nodes();
  if (nodes.size() == 1) {
    y = f.d[0] * xv;
    return y;
  }

  std::vector<Vector<T>> x_hat(nodes.size()), y_hat(nodes.size());
  const auto order = tree.bottom_up();
  for (int id : order) {
    if (id == 0) continue;
    const ClusterNode& node = nodes[id];
    if (node.leaf()) {
      x_hat[id] = f.u[id].transpose() * xv.segment(node.begin, node.size());
    } else {
      Vector<T> stacked(x_hat[node.left].size() + x_hat[node.right].size());
      stacked << x_hat[node.left], x_hat[node.right];
      x_hat[id] = f.u[id].transpose() * stacked;
    }
    y_hat[id] = Vector<T>::Zero(f.rank[id]);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int id = *it;
    const ClusterNode& node = nodes[id];
    if (node.leaf()) {
      y.segment(node.begin, node.size()) = f.d[id] * xv.segment(node.begin, node.size()) + f.u[id] * y_hat[id];
      continue;
    }
    const int a = node.left, c = node.right;
    y_hat[a] += f.b[id] * x_hat[c];
    y_hat[c] += f.b[id].transpose() * x_hat[a];
    if (id != 0) {
      const Vector<T> down = f.u[id] * y_hat[id];
      y_hat[a] += down.head(f.rank[a]);
      y_hat[c] += down.tail(f.rank[c]);
    }
  }
  return y;
}

template <class T>
Matrix<T> reconstruct_dense(const HssFactors<T>& f) {
  const std::size_t n = f.size();
  if (n > kReconstructLimit) throw UsageError("reconstruct_dense is limited to N <= 2048");
  const auto nodes = f.tree.nodes();
  Matrix<T> a = Matrix<T>::Zero(n, n);
  // Full-length basis of every node over its own index interval.
  std::vector<Matrix<T>> basis(nodes.size());
  for (int id : f.tree.bottom_up()) {
    const ClusterNode& node = nodes[id];
    if (node.leaf()) {
      a.block(node.begin, node.begin, node.size(), node.size()) = f.d[id];
      if (id != 0) basis[id] = f.u[id];
      continue;
    }
    const int l = node.left, r = node.right;
    const Matrix<T> block = basis[l] * f.b[id] * basis[r].transpose();
    a.block(nodes[l].begin, nodes[r].begin, nodes[l].size(), nodes[r].size()) = block;
    a.block(nodes[r].begin, nodes[l].begin, nodes[r].size(), nodes[l].size()) = block.transpose();
    if (id == 0) break;
    Matrix<T> stacked = Matrix<T>::Zero(node.size(), f.rank[l] + f.rank[r]);
    stacked.topLeftCorner(nodes[l].size(), f.rank[l]) = basis[l];
    stacked.bottomRightCorner(nodes[r].size(), f.rank[r]) = basis[r];
    basis[id] = stacked * f.u[id];
    basis[l] = Matrix<T>();
    basis[r] = Matrix<T>();
  }
  return a;
}

template <class T>
void check_nestedness(const HssFactors<T>& f) {
  const auto nodes = f.tree.nodes();
  auto fail = [](int id, const std::string& what) {
    throw InternalError("HSS nestedness violated at node " + std::to_string(id) + ": " + what);
  };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int id = static_cast<int>(i);
    const ClusterNode& node = nodes[i];
    if (node.leaf() != (f.d[i].size() > 0)) fail(id, "dense diagonal block present exactly at leaves");
    if (node.leaf() && (f.d[i].rows() != static_cast<Eigen::Index>(node.size()) || f.d[i].cols() != f.d[i].rows())) {
      fail(id, "diagonal block shape");
    }
    if (!node.leaf()) {
      const ClusterNode& l = nodes[node.left];
      const ClusterNode& r = nodes[node.right];
      if (l.begin != node.begin || l.end != r.begin || r.end != node.end) fail(id, "children do not partition");
      if (f.b[i].rows() != f.rank[node.left] || f.b[i].cols() != f.rank[node.right]) fail(id, "coupling block shape");
    }
    if (id == 0) continue;
    const Eigen::Index expected_rows =
        node.leaf() ? static_cast<Eigen::Index>(node.size()) : f.rank[node.left] + f.rank[node.right];
    if (f.u[i].rows() != expected_rows) fail(id, "generator rows differ from the children's ranks");
    if (f.u[i].cols() != f.rank[i] || f.rank[i] > expected_rows) fail(id, "generator rank");
  }
}

template <class T>
Stats stats(const HssFactors<T>& f) {
  Stats st;
  const auto nodes = f.tree.nodes();
  std::vector<int> max_rank(f.tree.levels(), 0);
  std::vector<double> sum(f.tree.levels(), 0.0);
  std::vector<int> count(f.tree.levels(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    st.bytes_d += static_cast<std::size_t>(f.d[i].size()) * sizeof(T);
    st.bytes_u += static_cast<std::size_t>(f.u[i].size()) * sizeof(T);
    st.bytes_b += static_cast<std::size_t>(f.b[i].size()) * sizeof(T);
    if (i == 0) continue;
    const int level = nodes[i].level;
    max_rank[level] = std::max(max_rank[level], f.rank[i]);
    sum[level] += f.rank[i];
    ++count[level];
  }
  for (int level = 1; level < f.tree.levels(); ++level) {
    st.levels.push_back({level, max_rank[level], count[level] ? sum[level] / count[level] : 0.0});
    st.max_rank = std::max(st.max_rank, max_rank[level]);
  }
  return st;
}

MortonSorted morton_sorted(const PointSet& pts) {
  const int level = pts.dim() == 3 ? 20 : 30;
  std::vector<std::uint64_t> keys(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) keys[i] = morton_encode(pts[i], level, Bounds{}, pts.dim()).index;
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<Point> sorted(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = pts[order[i]];
  return {PointSet(pts.dim(), std::move(sorted)), std::move(order)};
}

template Compressed<double> compress<double>(const HssConfig&, const Kernel&, const PointSet&);
template Compressed<Complex> compress<Complex>(const HssConfig&, const Kernel&, const PointSet&);
template Vector<double> matvec<double>(const HssFactors<double>&, std::span<const double>);
template Vector<Complex> matvec<Complex>(const HssFactors<Complex>&, std::span<const Complex>);
template Matrix<double> reconstruct_dense<double>(const HssFactors<double>&);
template Matrix<Complex> reconstruct_dense<Complex>(const HssFactors<Complex>&);
template void check_nestedness<double>(const HssFactors<double>&);
template void check_nestedness<Complex>(const HssFactors<Complex>&);
template Stats stats<double>(const HssFactors<double>&);
template Stats stats<Complex>(const HssFactors<Complex>&);

}  // namespace hilra::hss
