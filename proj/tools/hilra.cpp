#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hilra/bench.hpp"
#include "hilra/error.hpp"
#include "hilra/geometry.hpp"
#include "hilra/kernels.hpp"
#include "hilra/pde.hpp"

using namespace hilra;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// Reads key=value lines ('#' comments, blank lines ignored) into
// "--key value" tokens.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back("--" + key);
    if (!value.empty()) out.push_back(value);
  }
  return out;
}

// Pulls --config out of the arguments and splices its settings in right
// after the subcommand name, so flags given on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config.empty()) return args;
  const auto tokens = config_tokens(config);
  auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.empty() || a[0] != '-'; });
  if (sub == args.end()) throw UsageError("--config needs a subcommand (matvec, sweep or precond)");
  args.insert(sub + 1, tokens.begin(), tokens.end());
  return args;
}

// "2^-4", "2^(-4)" or a decimal spacing.
double parse_spacing(const std::string& s) {
  static const std::regex pow2(R"(\s*2\^\(?\s*(-\d+)\s*\)?\s*)");
  std::smatch m;
  if (std::regex_match(s, m, pow2)) return std::ldexp(1.0, std::stoi(m[1].str()));
  try {
    std::size_t used = 0;
    const double h = std::stod(s, &used);
    if (used == s.size()) return h;
  } catch (const std::exception&) {
  }
  throw UsageError("cannot parse spacing '" + s + "' (use 2^-k or a decimal)");
}

struct Common {
  std::string csv = "hilra.csv";
  std::uint64_t seed = 42;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--csv", c.csv, "CSV file to append to")->capture_default_str();
  app->add_option("--seed", c.seed, "seed for every random choice")->capture_default_str();
  app->add_option("--threads", c.threads, "thread count recorded with the run (engines run sequentially)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

std::string sidecar_path(const std::string& csv, const bench::PrecondSpec& s) {
  std::filesystem::path p(csv);
  const std::string stem = p.stem().string() + "-" + s.problem + "-" + s.precond + "-h" + std::to_string(s.level);
  return (p.parent_path() / (stem + ".history")).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical low-rank kernel matvec and preconditioning benchmarks"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "key=value file; command-line flags override it");

  Common common;

  bench::MatvecSpec mv;
  auto* matvec = app.add_subcommand("matvec", "one kernel matvec against the dense oracle");
  add_common(matvec, common);
  matvec->add_option("--method", mv.method, "fmm | hss | dense")
      ->check(CLI::IsMember({"fmm", "hss", "dense"}))
      ->capture_default_str();
  matvec->add_option("--kernel", mv.kernel, "laplace2d | laplace3d | helmholtz3d")
      ->check(CLI::IsMember({"laplace2d", "laplace3d", "helmholtz3d"}))
      ->capture_default_str();
  matvec->add_option("--n", mv.n, "lattice size, a perfect square (2D) or cube (3D)")->required();
  matvec->add_option("--eps", mv.eps, "FMM accuracy")->capture_default_str()->check(CLI::PositiveNumber);
  matvec->add_option("--tol", mv.tol, "HSS tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  matvec->add_option("--kappa", mv.kappa, "Helmholtz wave number")->capture_default_str();
  matvec->add_option("--leaf-size", mv.leaf_size, "points per leaf (0 keeps the default)");
  bool skip_error = false;
  matvec->add_flag("--no-error", skip_error, "skip the oracle comparison");

  std::string experiment;
  bench::SweepLimits limits;
  std::string plot;
  auto* sweep = app.add_subcommand("sweep", "the N-series behind one figure");
  add_common(sweep, common);
  sweep->add_option("--experiment", experiment, "fig2-2d | fig2-3d | fig3 | fig4")
      ->required()
      ->check(CLI::IsMember(bench::sweep_names()));
  sweep->add_option("--hss-max-n-2d", limits.hss_max_n_2d, "largest 2D HSS run")->capture_default_str();
  sweep->add_option("--hss-max-n-3d", limits.hss_max_n_3d, "largest 3D HSS run")->capture_default_str();
  sweep->add_option("--plot", plot, "gnuplot script path (default: next to the CSV)");

  bench::PrecondSpec pc;
  std::string spacing = "2^-4";
  std::string history;
  auto* precond = app.add_subcommand("precond", "preconditioned Krylov solve of the 7-point problem");
  precond->set_help_flag("--help", "print this help message and exit");
  add_common(precond, common);
  precond->add_option("--problem", pc.problem, "laplace | helmholtz")
      ->check(CLI::IsMember({"laplace", "helmholtz"}))
      ->capture_default_str();
  precond->add_option("--h", spacing, "grid spacing 2^-k")->capture_default_str();
  precond->add_option("--kappa", pc.kappa, "Helmholtz wave number")->capture_default_str();
  precond->add_option("--precond", pc.precond, "none | ic0 | gmg | fmm")
      ->check(CLI::IsMember({"none", "ic0", "gmg", "fmm"}))
      ->capture_default_str();
  precond->add_option("--solver", pc.solver, "auto | cg | gmres")
      ->check(CLI::IsMember({"auto", "cg", "gmres"}))
      ->capture_default_str();
  precond->add_option("--eps", pc.eps, "FMM accuracy")->capture_default_str()->check(CLI::PositiveNumber);
  precond->add_option("--rtol", pc.rtol, "relative residual target (default 1e-8 Laplace, 1e-6 Helmholtz)");
  precond->add_option("--maxit", pc.maxit, "iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
  precond->add_option("--restart", pc.restart, "GMRES restart length")->capture_default_str()->check(CLI::PositiveNumber);
  precond->add_option("--history", history, "residual history file (default: next to the CSV)");

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (matvec->parsed()) {
      const Kernel kernel = Kernel::parse(mv.kernel, mv.kappa);
      if (!is_perfect_power(mv.n, kernel.dim())) {
        throw UsageError("N = " + std::to_string(mv.n) + " is not a perfect " +
                         (kernel.dim() == 2 ? "square" : "cube") + " lattice size for " + mv.kernel);
      }
      mv.seed = common.seed;
      mv.threads = common.threads;
      mv.check_error = !skip_error;
      const bench::BenchRecord r = bench::run_matvec(mv);
      bench::append_csv(common.csv, {r});
      bench::print_summary(std::cout, r);
      return kExitOk;
    }

    if (sweep->parsed()) {
      if (plot.empty()) {
        plot = (std::filesystem::path(common.csv).replace_extension("").string()) + "-" + experiment + ".gp";
      }
      std::ofstream(plot) << bench::plot_script(experiment, common.csv);
      const int failures = bench::run_sweep(
          experiment, limits, common.seed, common.threads,
          [&](const bench::BenchRecord& r) {
            bench::append_csv(common.csv, {r});
            bench::print_summary(std::cout, r);
            std::cout.flush();
          },
          [](const bench::MatvecSpec& s, const std::string& what) {
            std::cerr << "error: " << s.method << " " << s.kernel << " N=" << s.n << ": " << what << "\n";
          });
      std::cout << "rows appended to " << common.csv << ", plot script " << plot << "\n";
      if (failures > 0) {
        std::cerr << failures << " run(s) failed; completed rows were kept\n";
        return kExitFailure;
      }
      return kExitOk;
    }

    if (precond->parsed()) {
      const double h = parse_spacing(spacing);
      pc.level = pde::Lattice::from_spacing(h).level();
      pc.seed = common.seed;
      pc.threads = common.threads;
      const bench::PrecondOutcome out = bench::run_precond(pc);
      bench::append_csv(common.csv, {out.record});
      const std::string path = history.empty() ? sidecar_path(common.csv, pc) : history;
      std::ofstream hist(path);
      if (!hist) throw UsageError("cannot write history file '" + path + "'");
      hist.precision(17);
      for (double v : out.history) hist << v << "\n";
      bench::print_summary(std::cout, out.record);
      std::cout << "  history " << path << "\n";
      return kExitOk;
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
