#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hilra/kernels.hpp"

namespace hilra::bench {

inline constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

// One CSV row. Unset numbers print as empty fields.
struct BenchRecord {
  std::string experiment;
  std::string method;
  std::string kernel;
  int dim = 3;
  std::size_t n = 0;
  double h = kUnset;
  double eps = kUnset;
  double tol = kUnset;
  double kappa = kUnset;
  int p = 0;
  std::uint64_t seed = 42;
  double t_setup_s = kUnset;
  double t_sample_s = kUnset;
  double t_compress_s = kUnset;
  double t_matvec_s = kUnset;
  double t_solve_s = kUnset;
  int iters = -1;
  double rel_err = kUnset;
  std::size_t alloc_peak_bytes = 0;
  std::optional<std::size_t> rss_peak_bytes;
  // trailing columns
  int threads = 1;
  double m_leaf = kUnset;
  int max_rank = -1;
  std::size_t table_bytes = 0;
  std::string note;
};

// The documented header row: the stable schema followed by
// threads,m_leaf,max_rank,table_bytes,note.
std::string csv_header();
std::string csv_row(const BenchRecord& r);
// Appends rows, writing the header first when the file is new or empty.
void append_csv(const std::string& path, const std::vector<BenchRecord>& rows);
std::vector<BenchRecord> read_csv(const std::string& path);

struct PeakMemory {
  std::size_t alloc_bytes = 0;
  std::optional<std::size_t> rss_bytes;

  std::size_t bytes() const { return rss_bytes ? std::max(alloc_bytes, *rss_bytes) : alloc_bytes; }
};

// Tracked allocator high-water mark and the process RSS high-water mark.
PeakMemory peak_memory_probe();

struct MatvecSpec {
  std::string experiment = "matvec";
  std::string method = "fmm";  // fmm | hss | dense
  std::string kernel = "laplace3d";
  double kappa = 7.0;
  std::size_t n = 4096;
  double eps = 1e-4;         // FMM accuracy
  double tol = 1e-4;         // HSS tolerance
  double leaf_size = 0.0;    // 0 keeps the method default
  std::uint64_t seed = 42;
  int threads = 1;
  bool check_error = true;
};

// Full-oracle comparison up to this N, sampled target rows above it.
inline constexpr std::size_t kFullOracleLimit = 16384;
inline constexpr std::size_t kOracleSampleRows = 512;

// Points are the uniform lattice with lattice_counts(n, dim) per axis.
BenchRecord run_matvec(const MatvecSpec& spec);

struct PrecondSpec {
  std::string problem = "laplace";  // laplace | helmholtz
  int level = 4;                    // h = 2^-level
  double kappa = 7.0;
  std::string precond = "fmm";      // none | ic0 | gmg | fmm
  std::string solver = "auto";      // auto | cg | gmres
  double eps = 1e-2;
  double rtol = 0.0;                // 0: 1e-8 for Laplace, 1e-6 for Helmholtz
  int maxit = 2000;
  int restart = 30;
  std::uint64_t seed = 42;
  int threads = 1;
};

struct PrecondOutcome {
  BenchRecord record;
  std::vector<double> history;
};

PrecondOutcome run_precond(const PrecondSpec& spec);

// Names of the matvec sweeps and the runs each one performs.
std::vector<std::string> sweep_names();
struct SweepLimits {
  std::size_t hss_max_n_2d = 16384;
  std::size_t hss_max_n_3d = 32768;
};
std::vector<MatvecSpec> sweep_specs(const std::string& experiment, const SweepLimits& limits = {});

// Runs a sweep, reporting every finished row; failed runs are reported
// through on_error and skipped. Returns the number of failures.
int run_sweep(const std::string& experiment, const SweepLimits& limits, std::uint64_t seed, int threads,
              const std::function<void(const BenchRecord&)>& on_row,
              const std::function<void(const MatvecSpec&, const std::string&)>& on_error);

// Companion gnuplot script for a sweep CSV.
std::string plot_script(const std::string& experiment, const std::string& csv_path);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void print_summary(std::ostream& os, const BenchRecord& r);

}  // namespace hilra::bench
