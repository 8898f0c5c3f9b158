// hcap: fixtures, minimization runs, verification, decomposition, pointwise solves, sweeps and correlations.
//
// Exit codes: 0 ok, 2 validation failure (bad input, infeasible problem, failed check), 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hcap/io.hpp"

namespace fs = std::filesystem;
using namespace hcap;

namespace {

constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

class CheckFailed : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidInput("not a number: '" + item + "'");
    }
  }
  return out;
}

std::array<int, 4> parse_counts(const std::string& text) {
  const std::vector<double> v = parse_list(text);
  if (v.size() != 1 && v.size() != 4) throw InvalidInput("grid takes 1 or 4 counts");
  std::array<int, 4> out{};
  for (size_t k = 0; k < 4; ++k) {
    const double c = v.size() == 1 ? v[0] : v[k];
    if (c != static_cast<int>(c) || c < 1) throw InvalidInput("grid counts must be positive integers");
    out[k] = static_cast<int>(c);
  }
  return out;
}

/** \brief "lo,hi" for all axes or "lo0,lo1,lo2,lo3,hi0,hi1,hi2,hi3". */
void apply_box(MomentumBox& box, const std::string& text) {
  const std::vector<double> v = parse_list(text);
  if (v.size() == 2) {
    box.lower.setConstant(v[0]);
    box.upper.setConstant(v[1]);
  } else if (v.size() == 8) {
    for (int k = 0; k < 4; ++k) {
      box.lower(k) = v[static_cast<size_t>(k)];
      box.upper(k) = v[static_cast<size_t>(k + 4)];
    }
  } else {
    throw InvalidInput("box takes 2 or 8 numbers");
  }
  box.validate();
}

/** \brief Writes to path.partial and renames on commit, so an interrupted command leaves only marked files. */
class StagedFile {
 public:
  explicit StagedFile(fs::path path) : path_(std::move(path)), staged_(path_.string() + ".partial") {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(staged_);
    if (!out_) throw InvalidInput("cannot write " + path_.string());
  }
  std::ostream& stream() { return out_; }
  void commit() {
    out_.close();
    if (!out_) throw InvalidInput("write failed for " + path_.string());
    fs::rename(staged_, path_);
  }

 private:
  fs::path path_;
  fs::path staged_;
  std::ofstream out_;
};

void write_json_file(const fs::path& path, const io::Json& j) {
  StagedFile file(path);
  file.stream() << j.dump(2) << '\n';
  file.commit();
}

/** \brief Common overrides for minimize and verify. */
struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_el;
  std::optional<double> smoothing;
  std::string grid;
  std::string position_grid;
  std::optional<double> radius;
  std::string box;
  std::optional<double> c;
  std::optional<double> f;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--tol-el", tol_el, "Euler-Lagrange tolerance (relative)");
    cmd->add_option("--smoothing-delta", smoothing, "smoothing delta for |lambda| (0 = exact Lagrangian)");
    cmd->add_option("--grid", grid, "momentum grid counts: N or N0,N1,N2,N3");
    cmd->add_option("--position-grid", position_grid, "position grid counts: N or N0,N1,N2,N3");
    cmd->add_option("--radius", radius, "position box half-width R");
    cmd->add_option("--box", box, "momentum box: lo,hi or lo0..lo3,hi0..hi3");
    cmd->add_option("--c", c, "trace constraint target");
    cmd->add_option("--f", f, "dimension constraint bound");
  }

  [[nodiscard]] MinimizeConfig resolve() const {
    MinimizeConfig cfg = config_path.empty() ? MinimizeConfig{} : io::config_from_json(io::read_json(config_path));
    if (seed) cfg.seed = *seed;
    if (tol_el) cfg.tol.el = *tol_el;
    if (smoothing) cfg.smoothing = *smoothing;
    if (!box.empty()) apply_box(cfg.box, box);
    if (!grid.empty()) cfg.box.grid_shape = parse_counts(grid);
    if (!position_grid.empty()) cfg.position_counts = parse_counts(position_grid);
    if (radius) cfg.position_radius = *radius;
    if (c) cfg.c = *c;
    if (f) cfg.f = *f;
    cfg.validate();
    return cfg;
  }
};

void print_report_summary(const ELReport& r) {
  std::cout.precision(10);
  std::cout << "case " << to_string(r.which) << "  alpha " << r.alpha << "  beta " << r.beta << '\n'
            << "action " << r.action << "  trace " << r.constraints.trace << "  mod_dim " << r.constraints.mod_dim
            << "  dim_sum " << r.constraints.dim_sum << '\n'
            << "min relative margin " << r.min_relative_margin() << "  max relative residual "
            << r.max_relative_residual() << "  max support g " << r.max_support_gap() << "  min g " << r.min_gap()
            << "  tail ratio " << r.tail_ratio << '\n';
}

bool report_passes(const ELReport& r, double tol) {
  return r.min_relative_margin() >= -tol && r.max_relative_residual() <= tol && beta_sign_check(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogeneous causal action: fixtures, minimization and Euler-Lagrange verification"};
  app.require_subcommand(1);

  // fixture
  auto* fixture = app.add_subcommand("fixture", "write a measure or operator fixture");
  std::string kind, fixture_out;
  double mass = 1.0, k_max = 1.0;
  int k_points = 8, spin = 1, atom_count = 4;
  std::uint64_t fixture_seed = 1;
  std::string fixture_box;
  fixture->add_option("--kind", kind, "dirac-sea | nilpotent | random | q-isigma2 | q-signature")
      ->required()
      ->check(CLI::IsMember({"dirac-sea", "nilpotent", "random", "q-isigma2", "q-signature"}));
  fixture->add_option("--out", fixture_out, "output file")->required();
  fixture->add_option("--mass", mass, "mass for dirac-sea");
  fixture->add_option("--k-points", k_points, "shell points for dirac-sea");
  fixture->add_option("--k-max", k_max, "largest spatial momentum for dirac-sea");
  fixture->add_option("--n", spin, "spin dimension for random");
  fixture->add_option("--atoms", atom_count, "atom count for random");
  fixture->add_option("--seed", fixture_seed, "seed for random");
  fixture->add_option("--box", fixture_box, "momentum box for random: lo,hi or lo0..lo3,hi0..hi3");

  // minimize
  auto* minimize = app.add_subcommand("minimize", "minimize the discretized action and write a run directory");
  RunOptions minimize_opts;
  std::string run_dir;
  minimize_opts.attach(minimize);
  minimize->add_option("--out", run_dir, "run directory")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Euler-Lagrange report for a measure");
  RunOptions verify_opts;
  std::string verify_measure, verify_out, verify_csv, verify_qhat;
  bool verify_check = false;
  verify_opts.attach(verify);
  verify->add_option("--measure", verify_measure, "measure file")->required();
  verify->add_option("--out", verify_out, "report file (JSON)");
  verify->add_option("--probes-csv", verify_csv, "CSV of p, g(p), psd margin");
  verify->add_option("--qhat", verify_qhat, "operator file used as a constant Qhat instead of the action's gradient");
  verify->add_flag("--check", verify_check, "exit 2 unless margins, residuals and the beta sign pass tol-el");

  // decompose
  auto* decomp = app.add_subcommand("decompose", "particle / neutral / sea decomposition");
  std::string decomp_measure, decomp_out;
  decomp->add_option("--measure", decomp_measure, "measure file")->required();
  decomp->add_option("--out", decomp_out, "output directory")->required();

  // pointwise
  auto* pointwise = app.add_subcommand("pointwise", "solve the pointwise variational principle");
  std::string q_path, pointwise_out, pointwise_measure;
  double target_a = 0.0, target_b = 1.0;
  pointwise->add_option("--q", q_path, "operator file")->required();
  pointwise->add_option("--a", target_a, "Tr A")->required();
  pointwise->add_option("--b", target_b, "Tr(SA)")->required();
  pointwise->add_option("--out", pointwise_out, "solution file (JSON); stdout when absent");
  pointwise->add_option("--measure-out", pointwise_measure, "also write the single-atom stationary measure");

  // sweep-alpha
  auto* sweep = app.add_subcommand("sweep-alpha", "CSV of alpha, a(alpha), beta(alpha)");
  std::string sweep_q, sweep_out;
  double alpha_min = -3.0, alpha_max = 3.0;
  int sweep_steps = 601;
  sweep->add_option("--q", sweep_q, "operator file")->required();
  sweep->add_option("--alpha-min", alpha_min, "first alpha");
  sweep->add_option("--alpha-max", alpha_max, "last alpha");
  sweep->add_option("--steps", sweep_steps, "number of samples")->check(CLI::Range(2, 10000000));
  sweep->add_option("--out", sweep_out, "CSV file")->required();

  // correlate
  auto* correlate = app.add_subcommand("correlate", "local correlation spectra over a position grid");
  std::string corr_measure, corr_out, corr_grid = "3";
  double corr_radius = 1.0;
  int basis_size = 0;
  correlate->add_option("--measure", corr_measure, "measure file")->required();
  correlate->add_option("--grid", corr_grid, "position grid counts: N or N0,N1,N2,N3");
  correlate->add_option("--radius", corr_radius, "position box half-width");
  correlate->add_option("--basis-size", basis_size, "use the first N coordinate test functions (0 = all)");
  correlate->add_option("--out", corr_out, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_validation;
  }

  try {
    if (fixture->parsed()) {
      if (kind == "dirac-sea") {
        write_json_file(fixture_out, io::to_json(dirac_sea_fixture(mass, lower_shell_points(mass, k_points, k_max))));
      } else if (kind == "nilpotent") {
        write_json_file(fixture_out, io::to_json(nilpotent_fixture()));
      } else if (kind == "random") {
        MomentumBox box;
        if (!fixture_box.empty()) apply_box(box, fixture_box);
        Rng rng(fixture_seed);
        write_json_file(fixture_out, io::to_json(random_measure(SignatureSpace(spin), box, atom_count, rng)));
      } else {
        const SignatureSpace space(1);
        Matrix q = space.signature();
        if (kind == "q-isigma2") q << 0, 1, -1, 0;
        write_json_file(fixture_out, io::to_json(KreinOperator(space, q)));
      }
    } else if (minimize->parsed()) {
      const MinimizeConfig cfg = minimize_opts.resolve();
      const fs::path dir(run_dir);
      fs::create_directories(dir);
      write_json_file(dir / "config.json", io::to_json(cfg));
      const MinimizeResult result = minimize_action(cfg);
      {
        StagedFile csv(dir / "iterations.csv");
        write_iteration_csv(csv.stream(), result.log);
        csv.commit();
      }
      {
        StagedFile csv(dir / "probes.csv");
        write_probe_csv(csv.stream(), result.report);
        csv.commit();
      }
      write_json_file(dir / "measure.json", io::to_json(result.measure));
      io::Json report = io::to_json(result.report);
      report["optimizer"] = {{"converged", result.converged},
                             {"iterations", result.log.empty() ? 0 : result.log.back().iteration},
                             {"working_alpha", result.working_alpha},
                             {"working_beta", result.working_beta},
                             {"working_case", to_string(result.working_case)}};
      write_json_file(dir / "el_report.json", report);
      print_report_summary(result.report);
      std::cout << (result.converged ? "converged" : "not converged") << " after " << result.log.size() - 1
                << " iterations\n";
    } else if (verify->parsed()) {
      const MinimizeConfig cfg = verify_opts.resolve();
      const OperatorMeasure nu = io::measure_from_json(io::read_json(verify_measure), cfg.tol);
      ELReport report;
      if (verify_qhat.empty()) {
        const GradientField field(nu, cfg.position_grid(), cfg.gradient_options());
        report = verify_el(nu, field, cfg.c, cfg.f, nu.box().grid_points(), cfg.tol);
      } else {
        const KreinOperator q = io::operator_from_json(io::read_json(verify_qhat));
        if (!(q.space() == nu.space())) throw InvalidInput("Qhat and measure live on different spaces");
        report = verify_el(nu, [&q](const Momentum&) { return q; }, cfg.c, cfg.f, nu.box().grid_points(), cfg.tol);
      }
      if (!verify_out.empty()) write_json_file(verify_out, io::to_json(report));
      if (!verify_csv.empty()) {
        StagedFile csv(verify_csv);
        write_probe_csv(csv.stream(), report);
        csv.commit();
      }
      print_report_summary(report);
      if (verify_check && !report_passes(report, cfg.tol.el)) throw CheckFailed("Euler-Lagrange check failed");
    } else if (decomp->parsed()) {
      const OperatorMeasure nu = io::measure_from_json(io::read_json(decomp_measure));
      const MeasureDecomposition parts = decompose(nu);
      const fs::path dir(decomp_out);
      write_json_file(dir / "particle.json", io::to_json(parts.particle));
      write_json_file(dir / "neutral.json", io::to_json(parts.neutral));
      write_json_file(dir / "sea.json", io::to_json(parts.sea));
      std::cout << "particle " << parts.particle.size() << "  neutral " << parts.neutral.size() << "  sea "
                << parts.sea.size() << " atoms\n";
    } else if (pointwise->parsed()) {
      const KreinOperator q = io::operator_from_json(io::read_json(q_path));
      const PointwiseSolution s = solve({q, target_a, target_b});
      const io::Json j = io::to_json(s);
      if (pointwise_out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        write_json_file(pointwise_out, j);
      }
      if (!pointwise_measure.empty()) write_json_file(pointwise_measure, io::to_json(stationary_fixture(s)));
    } else if (sweep->parsed()) {
      const KreinOperator q = io::operator_from_json(io::read_json(sweep_q));
      if (!(alpha_min < alpha_max)) throw InvalidInput("alpha-min must be below alpha-max");
      StagedFile csv(sweep_out);
      csv.stream().precision(17);
      csv.stream() << "alpha,a,a_low,a_high,beta\n";
      for (int i = 0; i < sweep_steps; ++i) {
        const double alpha = alpha_min + (alpha_max - alpha_min) * i / (sweep_steps - 1);
        const AlphaResponse r = a_of_alpha(q, alpha);
        csv.stream() << alpha << ',' << r.a << ',' << r.a_low << ',' << r.a_high << ',' << r.beta << '\n';
      }
      csv.commit();
    } else if (correlate->parsed()) {
      const OperatorMeasure nu = io::measure_from_json(io::read_json(corr_measure));
      std::vector<TestFunction> basis = coordinate_basis(nu);
      if (basis_size < 0) throw InvalidInput("basis size must be non-negative");
      if (basis_size > 0 && static_cast<size_t>(basis_size) < basis.size()) basis.resize(static_cast<size_t>(basis_size));
      const auto rho = empirical_cfs(nu, PositionGrid(corr_radius, parse_counts(corr_grid)), basis);
      StagedFile csv(corr_out);
      write_correlation_csv(csv.stream(), rho);
      csv.commit();
      for (const auto& f : rho)
        if (f.reduced) {
          std::cerr << "warning: Gram matrix singular, basis reduced to rank " << f.rank << '\n';
          break;
        }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (const auto* np = dynamic_cast<const NonsmoothPoint*>(&e)) {
      std::cerr << "  at xi = (" << np->xi().transpose() << "); rerun with --smoothing-delta > 0\n";
    }
    return e.kind() == ErrorKind::validation ? exit_validation : exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  }
  return 0;
}
