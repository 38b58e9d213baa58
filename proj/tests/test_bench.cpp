#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hilra/bench.hpp"
#include "hilra/error.hpp"

using namespace hilra;
using namespace hilra::bench;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hilra_test_" + name);
  std::filesystem::remove(p);
  return p;
}

MatvecSpec spec(const std::string& method, const std::string& kernel, std::size_t n) {
  MatvecSpec s;
  s.method = method;
  s.kernel = kernel;
  s.n = n;
  return s;
}

}  // namespace

TEST_CASE("csv header keeps the stable schema first") {
  const std::string stable =
      "experiment,method,kernel,dim,N,h,eps,tol,kappa,p,seed,t_setup_s,t_sample_s,t_compress_s,t_matvec_s,t_solve_s,"
      "iters,rel_err,alloc_peak_bytes,rss_peak_bytes";
  CHECK(csv_header().rfind(stable + ",", 0) == 0);
  CHECK(csv_header() == stable + ",threads,m_leaf,max_rank,table_bytes,note");
}

TEST_CASE("csv round trip") {
  BenchRecord r;
  r.experiment = "unit";
  r.method = "fmm";
  r.kernel = "laplace3d";
  r.n = 512;
  r.eps = 1e-4;
  r.p = 6;
  r.seed = 7;
  r.t_setup_s = 0.25;
  r.t_matvec_s = 0.125;
  r.rel_err = 3.5e-6;
  r.alloc_peak_bytes = 123456;
  r.note = "a,b \"quoted\"";

  BenchRecord s = r;
  s.method = "hss";
  s.rss_peak_bytes = 999;
  s.iters = 12;

  const auto path = temp_file("roundtrip.csv");
  append_csv(path.string(), {r});
  append_csv(path.string(), {s});
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == csv_header());
  int lines = 1;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 3);  // header written once

  const auto rows = read_csv(path.string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].note == r.note);
  CHECK(rows[0].eps == r.eps);
  CHECK(std::isnan(rows[0].tol));
  CHECK_FALSE(rows[0].rss_peak_bytes.has_value());
  CHECK(rows[0].iters == -1);
  CHECK(rows[1].rss_peak_bytes == 999u);
  CHECK(rows[1].iters == 12);
  CHECK(rows[1].seed == 7u);
  CHECK(csv_row(rows[0]) == csv_row(r));
  std::filesystem::remove(path);
}

TEST_CASE("csv errors") {
  CHECK_THROWS_AS(append_csv("/nonexistent-dir/x.csv", {BenchRecord{}}), UsageError);
  const auto path = temp_file("bad.csv");
  std::ofstream(path) << "a,b,c\n";
  CHECK_THROWS_AS(read_csv(path.string()), UsageError);
  std::filesystem::remove(path);
}

TEST_CASE("dense run registers the matrix with the tracker") {
  const BenchRecord r = run_matvec(spec("dense", "laplace3d", 1024));
  CHECK(r.alloc_peak_bytes >= 1024u * 1024u * 8u);
  CHECK(r.rel_err == 0.0);
  CHECK(r.n == 1024);
  CHECK(peak_memory_probe().bytes() >= r.alloc_peak_bytes);
}

TEST_CASE("fmm run") {
  MatvecSpec s = spec("fmm", "laplace2d", 4096);
  const BenchRecord r = run_matvec(s);
  CHECK(r.dim == 2);
  CHECK(r.p == 6);
  CHECK(r.rel_err <= 1e-3);
  CHECK(r.t_setup_s > 0.0);
  CHECK(r.t_matvec_s > 0.0);
  CHECK(r.table_bytes > 0);
  CHECK(r.alloc_peak_bytes > r.table_bytes);

  s.kernel = "helmholtz3d";
  s.n = 4096;
  s.leaf_size = 8;
  const BenchRecord h = run_matvec(s);
  CHECK(h.kappa == 7.0);
  CHECK(h.rel_err <= 1e-3);
}

TEST_CASE("hss run splits its time") {
  const BenchRecord r = run_matvec(spec("hss", "laplace3d", 4096));
  CHECK(r.rel_err <= 1e-3);
  CHECK(r.max_rank > 0);
  // sample + compress account for the measured construction wall time
  CHECK(std::abs(r.t_sample_s + r.t_compress_s - r.t_setup_s) <= 0.05 * r.t_setup_s);
  const double total = r.t_setup_s + r.t_matvec_s;
  CHECK(std::abs(r.t_sample_s + r.t_compress_s + r.t_matvec_s - total) <= 0.05 * total);
}

TEST_CASE("memory growth under N doubling") {
  MatvecSpec f = spec("fmm", "laplace3d", 4096);
  f.leaf_size = 1;
  f.check_error = false;
  const BenchRecord f1 = run_matvec(f);
  f.n = 8192;
  const BenchRecord f2 = run_matvec(f);
  MESSAGE("fmm tracked " << f1.alloc_peak_bytes << " -> " << f2.alloc_peak_bytes);
  CHECK(static_cast<double>(f2.alloc_peak_bytes) <= 2.2 * static_cast<double>(f1.alloc_peak_bytes));

  MatvecSpec h = spec("hss", "laplace3d", 4096);
  h.check_error = false;
  const BenchRecord h1 = run_matvec(h);
  h.n = 8192;
  const BenchRecord h2 = run_matvec(h);
  MESSAGE("hss tracked " << h1.alloc_peak_bytes << " -> " << h2.alloc_peak_bytes);
  CHECK(static_cast<double>(h2.alloc_peak_bytes) > 2.0 * static_cast<double>(h1.alloc_peak_bytes));
}

TEST_CASE("matvec errors") {
  CHECK_THROWS_AS(run_matvec(spec("tree", "laplace3d", 64)), UsageError);
  CHECK_THROWS_AS(run_matvec(spec("fmm", "stokes", 64)), UsageError);
  CHECK_THROWS_AS(run_matvec(spec("fmm", "laplace3d", 0)), UsageError);
  MatvecSpec s = spec("fmm", "helmholtz3d", 4096);
  s.kappa = 200.0;
  CHECK_THROWS_AS(run_matvec(s), ConfigError);
}

TEST_CASE("precond runs") {
  PrecondSpec s;
  s.problem = "laplace";
  s.level = 3;
  s.precond = "none";
  const PrecondOutcome base = run_precond(s);
  CHECK(base.record.method == "cg+none");
  CHECK(base.record.iters > 0);
  CHECK(base.record.rel_err <= 1e-7);
  CHECK(base.history.size() == static_cast<std::size_t>(base.record.iters) + 1);
  CHECK(base.record.tol == 1e-8);
  CHECK(base.record.h == 0.125);

  s.precond = "gmg";
  const PrecondOutcome gmg = run_precond(s);
  CHECK(gmg.record.iters < base.record.iters);

  s.problem = "helmholtz";
  s.level = 3;
  s.kappa = 7.0;
  s.precond = "gmg";
  s.solver = "cg";
  const PrecondOutcome g = run_precond(s);
  CHECK(g.record.method == "gmres+gmg");
  CHECK(g.record.note.find("cg_breakdown_switched_to_gmres") != std::string::npos);
  CHECK(g.record.tol == 1e-6);
  CHECK(g.record.rel_err <= 1e-5);

  s.solver = "bicg";
  CHECK_THROWS_AS(run_precond(s), UsageError);
  s.solver = "auto";
  s.precond = "jacobi";
  CHECK_THROWS_AS(run_precond(s), UsageError);
  s.problem = "wave";
  CHECK_THROWS_AS(run_precond(s), UsageError);
}

TEST_CASE("sweep definitions") {
  CHECK(sweep_names().size() == 4);
  for (const auto& name : sweep_names()) {
    const auto specs = sweep_specs(name);
    CHECK_FALSE(specs.empty());
    for (const auto& s : specs) CHECK(s.experiment == name);
    const std::string gp = plot_script(name, "out.csv");
    CHECK(gp.find("set datafile separator ','") != std::string::npos);
    CHECK(gp.find("'out.csv'") != std::string::npos);
  }
  const auto fig3 = sweep_specs("fig3");
  for (std::size_t i = 1; i < fig3.size(); ++i) CHECK(fig3[i].n == 8 * fig3[i - 1].n);
  SweepLimits small;
  small.hss_max_n_2d = 4096;
  std::size_t hss2d = 0;
  for (const auto& s : sweep_specs("fig2-2d", small)) hss2d += s.method == "hss";
  CHECK(hss2d == 1);
  CHECK_THROWS_AS(sweep_specs("fig9"), UsageError);
  CHECK_THROWS_AS(plot_script("fig9", "x.csv"), UsageError);
}

TEST_CASE("loglog slope") {
  CHECK(loglog_slope({1, 2, 4, 8}, {3, 6, 12, 24}) == doctest::Approx(1.0));
  CHECK(loglog_slope({10, 100}, {1, 100}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), UsageError);
  CHECK_THROWS_AS(loglog_slope({1, 2}, {0, 1}), UsageError);
}

TEST_CASE("summary output") {
  BenchRecord r;
  r.experiment = "x";
  r.method = "hss";
  r.tol = 1e-4;
  r.max_rank = 12;
  std::ostringstream os;
  print_summary(os, r);
  CHECK(os.str().find("max rank 12") != std::string::npos);
  CHECK(os.str().find("eps") == std::string::npos);
}
