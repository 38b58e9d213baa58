#include "hilra/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "hilra/dense.hpp"
#include "hilra/error.hpp"
#include "hilra/fmm.hpp"
#include "hilra/hss.hpp"
#include "hilra/memory.hpp"
#include "hilra/pde.hpp"
#include "hilra/solvers.hpp"

namespace hilra::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const char* const kColumns[] = {
    "experiment", "method",     "kernel",       "dim",          "N",         "h",
    "eps",        "tol",        "kappa",        "p",            "seed",      "t_setup_s",
    "t_sample_s", "t_compress_s", "t_matvec_s", "t_solve_s",    "iters",     "rel_err",
    "alloc_peak_bytes", "rss_peak_bytes", "threads", "m_leaf",  "max_rank",  "table_bytes",
    "note"};
constexpr std::size_t kColumnCount = std::size(kColumns);

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

double parse_double(const std::string& s) { return s.empty() ? kUnset : std::stod(s); }

// Clears the kernel's VmHWM so each run reports its own resident peak.
void reset_rss_peak() {
  std::ofstream clear("/proc/self/clear_refs");
  if (clear) clear << "5";
}

struct MemoryWindow {
  std::size_t baseline;
  MemoryWindow() : baseline(memory::Tracker::instance().live()) {
    memory::Tracker::instance().reset_peaks();
    reset_rss_peak();
  }
  void finish(BenchRecord& r) const {
    const PeakMemory peak = peak_memory_probe();
    r.alloc_peak_bytes = peak.alloc_bytes - std::min(peak.alloc_bytes, baseline);
    r.rss_peak_bytes = peak.rss_bytes;
    if (!peak.rss_bytes) r.note += (r.note.empty() ? "" : ";") + std::string("rss_unavailable");
  }
};

template <class T>
std::vector<T> random_charges(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<T> q(n);
  for (auto& x : q) {
    if constexpr (is_complex_v<T>) {
      const double re = g(rng);
      x = T(re, g(rng));
    } else {
      x = g(rng);
    }
  }
  return q;
}

// Relative l2 error of u against the direct sum: exact for small N, over
// evenly spaced target rows otherwise.
template <class T>
double oracle_error(const Kernel& kernel, const PointSet& pts, std::span<const T> q, const Vector<T>& u) {
  const std::size_t n = pts.size();
  if (n <= kFullOracleLimit) {
    const Vector<T> ref = dense::direct_matvec<T>(kernel, pts, q);
    return (u - ref).norm() / ref.norm();
  }
  const std::size_t rows = kOracleSampleRows;
  std::vector<Point> targets(rows);
  Vector<T> sampled(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t i = r * n / rows;
    targets[r] = pts[i];
    sampled[static_cast<Eigen::Index>(r)] = u[static_cast<Eigen::Index>(i)];
  }
  const Eigen::Map<const Vector<T>> qv(q.data(), static_cast<Eigen::Index>(q.size()));
  Vector<T> ref = Vector<T>::Zero(static_cast<Eigen::Index>(rows));
  constexpr std::size_t block = 4096;
  for (std::size_t c = 0; c < n; c += block) {
    const std::size_t cols = std::min(block, n - c);
    ref += evaluate_block<T>(kernel, targets, pts.points().subspan(c, cols)) *
           qv.segment(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cols));
  }
  return (sampled - ref).norm() / ref.norm();
}

template <class T>
void matvec_fmm(const MatvecSpec& spec, const Kernel& kernel, const PointSet& pts, BenchRecord& r) {
  fmm::FmmConfig cfg = fmm::FmmConfig::for_accuracy(spec.eps, kernel);
  if (spec.leaf_size > 0) cfg.leaf_size = spec.leaf_size;
  const std::vector<T> q = random_charges<T>(pts.size(), spec.seed);

  const MemoryWindow window;
  auto t0 = Clock::now();
  const fmm::Fmm<T> engine(kernel, pts, cfg);
  r.t_setup_s = seconds_since(t0);
  t0 = Clock::now();
  const Vector<T> u = engine.matvec(q);
  r.t_matvec_s = seconds_since(t0);
  window.finish(r);

  r.p = cfg.order;
  r.m_leaf = cfg.leaf_size;
  r.table_bytes = engine.memory_report().m2l_table;
  r.note = "depth=" + std::to_string(engine.tree().depth()) + (r.note.empty() ? "" : ";" + r.note);
  if (spec.check_error) r.rel_err = oracle_error<T>(kernel, pts, q, u);
}

template <class T>
void matvec_hss(const MatvecSpec& spec, const Kernel& kernel, const PointSet& input, BenchRecord& r) {
  hss::HssConfig cfg;
  cfg.tol = spec.tol;
  cfg.seed = spec.seed;
  if (spec.leaf_size > 0) cfg.leaf_size = static_cast<std::size_t>(spec.leaf_size);
  // The cluster tree splits Morton order; the matrix is the same one
  // permuted, so error and timing are taken in sorted order.
  const hss::MortonSorted sorted = hss::morton_sorted(input);
  const PointSet& pts = sorted.points;
  const std::vector<T> q = random_charges<T>(pts.size(), spec.seed);

  const MemoryWindow window;
  auto t0 = Clock::now();
  const hss::Compressed<T> c = hss::compress<T>(cfg, kernel, pts);
  r.t_setup_s = seconds_since(t0);
  t0 = Clock::now();
  const Vector<T> u = hss::matvec<T>(c.factors, q);
  r.t_matvec_s = seconds_since(t0);
  window.finish(r);

  r.t_sample_s = c.times.sample_s;
  r.t_compress_s = c.times.compress_s;
  r.m_leaf = static_cast<double>(cfg.leaf_size);
  r.max_rank = hss::stats(c.factors).max_rank;
  r.note = "samples=" + std::to_string(c.factors.samples) + ";restarts=" + std::to_string(c.factors.restarts) +
           (r.note.empty() ? "" : ";" + r.note);
  if (spec.check_error) r.rel_err = oracle_error<T>(kernel, pts, q, u);
}

constexpr std::size_t kDenseMatrixLimit = std::size_t{1} << 30;

template <class T>
void matvec_dense(const MatvecSpec& spec, const Kernel& kernel, const PointSet& pts, BenchRecord& r) {
  const std::vector<T> q = random_charges<T>(pts.size(), spec.seed);
  const std::size_t n = pts.size();
  const MemoryWindow window;
  if (n * n * sizeof(T) <= kDenseMatrixLimit) {
    auto t0 = Clock::now();
    const memory::Reservation held("dense.matrix", n * n * sizeof(T));
    const Matrix<T> a = evaluate_block<T>(kernel, pts.points(), pts.points());
    r.t_setup_s = seconds_since(t0);
    t0 = Clock::now();
    const Vector<T> u = a * Eigen::Map<const Vector<T>>(q.data(), static_cast<Eigen::Index>(n));
    r.t_matvec_s = seconds_since(t0);
    window.finish(r);
  } else {
    r.t_setup_s = 0.0;
    const auto t0 = Clock::now();
    const Vector<T> u = dense::direct_matvec<T>(kernel, pts, q);
    r.t_matvec_s = seconds_since(t0);
    window.finish(r);
    r.note += (r.note.empty() ? "" : ";") + std::string("matrix_free");
  }
  r.rel_err = 0.0;
}

template <class T>
std::unique_ptr<solvers::Preconditioner<T>> make_preconditioner(const PrecondSpec& spec, const pde::Problem& prob,
                                                                 const Kernel& kernel, int& order) {
  if (spec.precond == "none") return std::make_unique<solvers::Identity<T>>();
  if (spec.precond == "ic0") return std::make_unique<solvers::Ic0<T>>(prob.op.assemble());
  if (spec.precond == "gmg") return std::make_unique<solvers::Gmg<T>>(prob.op);
  if (spec.precond == "fmm") {
    const fmm::FmmConfig cfg = fmm::FmmConfig::for_accuracy(spec.eps, kernel);
    order = cfg.order;
    return std::make_unique<solvers::FmmPreconditioner<T>>(prob.op.lattice(), kernel, cfg);
  }
  throw UsageError("unknown preconditioner '" + spec.precond + "' (expected none, ic0, gmg or fmm)");
}

template <class T>
PrecondOutcome precond_run(const PrecondSpec& spec, const pde::Problem& prob, const Kernel& kernel, BenchRecord& r) {
  const double rtol = spec.rtol > 0.0 ? spec.rtol : (prob.op.variant() == pde::Variant::laplace ? 1e-8 : 1e-6);
  r.tol = rtol;

  const MemoryWindow window;
  int order = 0;
  const auto m = make_preconditioner<T>(spec, prob, kernel, order);
  r.p = order;
  const Vector<T> b = prob.b.cast<T>();
  const solvers::Operator<T> a = solvers::stencil_operator<T>(prob.op);

  std::string method = spec.solver;
  if (method == "auto") method = prob.op.variant() == pde::Variant::laplace ? "cg" : "gmres";
  if (method != "cg" && method != "gmres") throw UsageError("unknown solver '" + spec.solver + "' (expected auto, cg or gmres)");

  std::optional<solvers::SolveResult<T>> res;
  if (method == "cg") {
    try {
      res = solvers::cg<T>(a, b, *m, rtol, spec.maxit);
    } catch (const solvers::BreakdownError&) {
      r.note = "cg_breakdown_switched_to_gmres";
      method = "gmres";
    }
  }
  if (method == "gmres") res = solvers::gmres<T>(a, b, *m, spec.restart, rtol, spec.maxit);
  window.finish(r);

  const auto& st = res->stats;
  r.method = method + "+" + st.precond;
  r.t_setup_s = st.setup_s;
  r.t_solve_s = st.solve_s;
  r.iters = st.iterations;
  r.rel_err = (b - a(res->x)).norm() / b.norm();
  if (!st.precond_params.empty()) r.note += (r.note.empty() ? "" : ";") + st.precond_params;
  if (!st.converged) r.note += (r.note.empty() ? "" : ";") + std::string("not_converged");
  return {r, st.history};
}

std::string plot_header(const std::string& title, const std::string& csv_path, const std::string& png) {
  std::ostringstream os;
  os << "# gnuplot script: gnuplot " << std::filesystem::path(png).replace_extension(".gp").filename().string() << "\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output '" << png << "'\n"
     << "set title '" << title << "'\n"
     << "set key left top\n"
     << "set grid\n"
     << "csv = '" << csv_path << "'\n"
     << "pick(m, e, k, v) = (strcol('method') eq m && strcol('experiment') eq e && strcol('kernel') eq k) ? v : 1/0\n";
  return os.str();
}

}  // namespace

std::string csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kColumnCount; ++i) out += (i ? "," : "") + std::string(kColumns[i]);
  return out;
}

std::string csv_row(const BenchRecord& r) {
  const std::string fields[] = {quote(r.experiment),
                                quote(r.method),
                                quote(r.kernel),
                                std::to_string(r.dim),
                                std::to_string(r.n),
                                format_double(r.h),
                                format_double(r.eps),
                                format_double(r.tol),
                                format_double(r.kappa),
                                r.p > 0 ? std::to_string(r.p) : std::string(),
                                std::to_string(r.seed),
                                format_double(r.t_setup_s),
                                format_double(r.t_sample_s),
                                format_double(r.t_compress_s),
                                format_double(r.t_matvec_s),
                                format_double(r.t_solve_s),
                                r.iters >= 0 ? std::to_string(r.iters) : std::string(),
                                format_double(r.rel_err),
                                std::to_string(r.alloc_peak_bytes),
                                r.rss_peak_bytes ? std::to_string(*r.rss_peak_bytes) : std::string(),
                                std::to_string(r.threads),
                                format_double(r.m_leaf),
                                r.max_rank >= 0 ? std::to_string(r.max_rank) : std::string(),
                                r.table_bytes ? std::to_string(r.table_bytes) : std::string(),
                                quote(r.note)};
  static_assert(std::size(fields) == kColumnCount);
  std::string out;
  for (std::size_t i = 0; i < kColumnCount; ++i) out += (i ? "," : "") + fields[i];
  return out;
}

void append_csv(const std::string& path, const std::vector<BenchRecord>& rows) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw UsageError("cannot open CSV file '" + path + "' for writing");
  if (fresh) out << csv_header() << "\n";
  for (const auto& r : rows) out << csv_row(r) << "\n";
  if (!out) throw UsageError("failed writing CSV file '" + path + "'");
}

std::vector<BenchRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw UsageError("'" + path + "' does not carry the bench header");
  std::vector<BenchRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != kColumnCount) throw UsageError("malformed CSV row in '" + path + "'");
    BenchRecord r;
    r.experiment = f[0];
    r.method = f[1];
    r.kernel = f[2];
    r.dim = std::stoi(f[3]);
    r.n = std::stoull(f[4]);
    r.h = parse_double(f[5]);
    r.eps = parse_double(f[6]);
    r.tol = parse_double(f[7]);
    r.kappa = parse_double(f[8]);
    r.p = f[9].empty() ? 0 : std::stoi(f[9]);
    r.seed = std::stoull(f[10]);
    r.t_setup_s = parse_double(f[11]);
    r.t_sample_s = parse_double(f[12]);
    r.t_compress_s = parse_double(f[13]);
    r.t_matvec_s = parse_double(f[14]);
    r.t_solve_s = parse_double(f[15]);
    r.iters = f[16].empty() ? -1 : std::stoi(f[16]);
    r.rel_err = parse_double(f[17]);
    r.alloc_peak_bytes = std::stoull(f[18]);
    if (!f[19].empty()) r.rss_peak_bytes = std::stoull(f[19]);
    r.threads = std::stoi(f[20]);
    r.m_leaf = parse_double(f[21]);
    r.max_rank = f[22].empty() ? -1 : std::stoi(f[22]);
    r.table_bytes = f[23].empty() ? 0 : std::stoull(f[23]);
    r.note = f[24];
    rows.push_back(std::move(r));
  }
  return rows;
}

PeakMemory peak_memory_probe() {
  return {memory::Tracker::instance().peak(), memory::rss_peak_bytes()};
}

BenchRecord run_matvec(const MatvecSpec& spec) {
  const Kernel kernel = Kernel::parse(spec.kernel, spec.kappa);
  if (spec.n == 0) throw UsageError("N must be positive");
  const PointSet pts = make_lattice(kernel.dim(), lattice_counts(spec.n, kernel.dim()));

  BenchRecord r;
  r.experiment = spec.experiment;
  r.method = spec.method;
  r.kernel = kernel.name();
  r.dim = kernel.dim();
  r.n = pts.size();
  if (kernel.is_complex()) r.kappa = kernel.kappa();
  r.seed = spec.seed;
  r.threads = spec.threads;

  auto dispatch = [&](auto tag) {
    using T = decltype(tag);
    if (spec.method == "fmm") {
      r.eps = spec.eps;
      matvec_fmm<T>(spec, kernel, pts, r);
    } else if (spec.method == "hss") {
      r.tol = spec.tol;
      matvec_hss<T>(spec, kernel, pts, r);
    } else if (spec.method == "dense") {
      matvec_dense<T>(spec, kernel, pts, r);
    } else {
      throw UsageError("unknown method '" + spec.method + "' (expected fmm, hss or dense)");
    }
  };
  if (kernel.is_complex()) dispatch(Complex{});
  else dispatch(0.0);
  return r;
}

PrecondOutcome run_precond(const PrecondSpec& spec) {
  const pde::Variant variant = pde::parse_variant(spec.problem);
  const double h = std::ldexp(1.0, -spec.level);
  const pde::Problem prob = pde::build_problem(variant, h, spec.kappa, pde::RhsMode::random_smooth, spec.seed);
  const bool helm = variant == pde::Variant::helmholtz;
  const Kernel kernel = helm ? Kernel::helmholtz3d(spec.kappa) : Kernel::laplace3d();

  BenchRecord r;
  r.experiment = "precond-" + spec.problem;
  r.kernel = kernel.name();
  r.dim = 3;
  r.n = prob.op.size();
  r.h = h;
  if (spec.precond == "fmm") r.eps = spec.eps;
  if (helm) r.kappa = spec.kappa;
  r.seed = spec.seed;
  r.threads = spec.threads;

  // The FMM preconditioner for Helmholtz is complex; everything else is real.
  if (helm) return precond_run<Complex>(spec, prob, kernel, r);
  return precond_run<double>(spec, prob, kernel, r);
}

std::vector<std::string> sweep_names() { return {"fig2-2d", "fig2-3d", "fig3", "fig4"}; }

std::vector<MatvecSpec> sweep_specs(const std::string& experiment, const SweepLimits& limits) {
  const std::vector<std::size_t> n2 = {4096, 16384, 65536, 262144};  // 64^2 .. 512^2
  const std::vector<std::size_t> n3 = {64, 512, 4096, 32768};        // 4^3 .. 32^3
  std::vector<MatvecSpec> out;
  auto add = [&](const std::string& method, const std::string& kernel, std::size_t n, double leaf = 0.0) {
    MatvecSpec s;
    s.experiment = experiment;
    s.method = method;
    s.kernel = kernel;
    s.n = n;
    s.leaf_size = leaf;
    out.push_back(s);
  };
  if (experiment == "fig2-2d") {
    for (auto n : n2) {
      add("fmm", "laplace2d", n);
      if (n <= limits.hss_max_n_2d) add("hss", "laplace2d", n);
    }
  } else if (experiment == "fig2-3d") {
    for (auto n : n3) {
      add("fmm", "laplace3d", n);
      if (n >= 512 && n <= limits.hss_max_n_3d) add("hss", "laplace3d", n);
    }
  } else if (experiment == "fig3") {
    for (auto n : n3)
      if (n >= 512 && n <= limits.hss_max_n_3d) add("hss", "laplace3d", n);
  } else if (experiment == "fig4") {
    // Fixed leaf occupancy keeps every N on the same tree shape.
    for (auto n : n2) add("fmm", "laplace2d", n, 4.0);
    for (auto n : n3) add("fmm", "laplace3d", n, 1.0);
    for (auto n : n2)
      if (n <= limits.hss_max_n_2d) add("hss", "laplace2d", n);
    for (auto n : n3)
      if (n >= 512 && n <= limits.hss_max_n_3d) add("hss", "laplace3d", n);
  } else {
    throw UsageError("unknown experiment '" + experiment + "' (expected fig2-2d, fig2-3d, fig3 or fig4)");
  }
  return out;
}

int run_sweep(const std::string& experiment, const SweepLimits& limits, std::uint64_t seed, int threads,
              const std::function<void(const BenchRecord&)>& on_row,
              const std::function<void(const MatvecSpec&, const std::string&)>& on_error) {
  int failures = 0;
  for (MatvecSpec spec : sweep_specs(experiment, limits)) {
    spec.seed = seed;
    spec.threads = threads;
    try {
      on_row(run_matvec(spec));
    } catch (const std::exception& e) {
      ++failures;
      on_error(spec, e.what());
    }
  }
  return failures;
}

std::string plot_script(const std::string& experiment, const std::string& csv_path) {
  const std::string png = std::filesystem::path(csv_path).replace_extension("").string() + "-" + experiment + ".png";
  std::ostringstream os;
  if (experiment == "fig2-2d" || experiment == "fig2-3d") {
    const std::string k = experiment == "fig2-2d" ? "laplace2d" : "laplace3d";
    os << plot_header("elapsed time vs N (" + k + ")", csv_path, png) << "set logscale xy\n"
       << "set xlabel 'N'\nset ylabel 'time [s]'\n"
       << "plot csv using (pick('fmm','" << experiment << "','" << k
       << "',column('N'))):(column('t_setup_s')+column('t_matvec_s')) with linespoints title 'FMM total', \\\n"
       << "     csv using (pick('fmm','" << experiment << "','" << k
       << "',column('N'))):'t_matvec_s' with linespoints title 'FMM matvec', \\\n"
       << "     csv using (pick('hss','" << experiment << "','" << k
       << "',column('N'))):(column('t_setup_s')+column('t_matvec_s')) with linespoints title 'HSS total', \\\n"
       << "     csv using (pick('hss','" << experiment << "','" << k
       << "',column('N'))):'t_matvec_s' with linespoints title 'HSS matvec'\n";
  } else if (experiment == "fig3") {
    os << plot_header("HSS time breakdown (laplace3d)", csv_path, png) << "set logscale x\n"
       << "set xlabel 'N'\nset ylabel 'share of total [%]'\nset yrange [0:100]\n"
       << "total(x) = column('t_setup_s') + column('t_matvec_s')\n"
       << "plot csv using (pick('hss','fig3','laplace3d',column('N'))):(100*column('t_sample_s')/total(0)) "
          "with linespoints title 'sampling', \\\n"
       << "     csv using (pick('hss','fig3','laplace3d',column('N'))):(100*column('t_compress_s')/total(0)) "
          "with linespoints title 'compression', \\\n"
       << "     csv using (pick('hss','fig3','laplace3d',column('N'))):(100*column('t_matvec_s')/total(0)) "
          "with linespoints title 'matvec'\n";
  } else if (experiment == "fig4") {
    os << plot_header("peak memory vs N", csv_path, png) << "set logscale xy\n"
       << "set xlabel 'N'\nset ylabel 'tracked bytes'\n"
       << "fmm_bytes(x) = column('alloc_peak_bytes') - column('table_bytes')\n"
       << "plot csv using (pick('fmm','fig4','laplace2d',column('N'))):(fmm_bytes(0)) with linespoints title "
          "'FMM 2D (excl. M2L table)', \\\n"
       << "     csv using (pick('fmm','fig4','laplace3d',column('N'))):(fmm_bytes(0)) with linespoints title "
          "'FMM 3D (excl. M2L table)', \\\n"
       << "     csv using (pick('hss','fig4','laplace2d',column('N'))):'alloc_peak_bytes' with linespoints title "
          "'HSS 2D', \\\n"
       << "     csv using (pick('hss','fig4','laplace3d',column('N'))):'alloc_peak_bytes' with linespoints title "
          "'HSS 3D'\n";
  } else {
    throw UsageError("unknown experiment '" + experiment + "'");
  }
  return os.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("slope needs at least two matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw UsageError("slope needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void print_summary(std::ostream& os, const BenchRecord& r) {
  auto show = [&](const char* label, double v) {
    if (!std::isnan(v)) os << "  " << label << " " << v << "\n";
  };
  os << r.experiment << ": " << r.method << " " << r.kernel << " N=" << r.n << "\n";
  show("eps", r.eps);
  show("tol", r.tol);
  show("h", r.h);
  show("kappa", r.kappa);
  if (r.p > 0) os << "  p " << r.p << "\n";
  show("setup [s]", r.t_setup_s);
  show("  sample [s]", r.t_sample_s);
  show("  compress [s]", r.t_compress_s);
  show("matvec [s]", r.t_matvec_s);
  show("solve [s]", r.t_solve_s);
  if (r.iters >= 0) os << "  iterations " << r.iters << "\n";
  if (r.max_rank >= 0) os << "  max rank " << r.max_rank << "\n";
  show("relative error", r.rel_err);
  os << "  tracked peak " << r.alloc_peak_bytes << " B";
  if (r.rss_peak_bytes) os << ", rss peak " << *r.rss_peak_bytes << " B";
  os << "\n";
  if (!r.note.empty()) os << "  note " << r.note << "\n";
}

}  // namespace hilra::bench
