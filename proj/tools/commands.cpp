#include "commands.hpp"

#include <dysonlab/report.hpp>

#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <sstream>

namespace dlab::cli {

using nlohmann::json;

namespace {

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

json vjson(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json directions(const DirectionSet& d) {
  return {{"B", d.B}, {"B_star", d.B_star}, {"B_hat", d.B_hat}, {"B_hat_star", d.B_hat_star}};
}

void stamp(json& j, const RunConfig& c) {
  j["config"] = to_json(c);
  j["version"] = version_string();
  j["timestamp"] = timestamp_utc();
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_atomic(path, text);
}

std::string num(double x) { return json(x).dump(); }

int run_solve(const RunConfig& c, std::ostream& out) {
  const VarianceProfile S = load_profile(c.profile);
  const DysonSolution s = solve_dyson(S, cplx(c.z_re, c.z_im), c.eta, solver_options(c));
  json j = {{"command", to_string(c.command)},
            {"n", S.n},
            {"z", cjson(s.z)},
            {"eta", s.eta},
            {"v1", vjson(s.v1)},
            {"v2", vjson(s.v2)},
            {"u", vjson(s.u)},
            {"rho", s.rho},
            {"residual", s.residual},
            {"update", s.update},
            {"iterations", s.iterations}};
  stamp(j, c);
  emit(dump_json(j), c.output, out);
  return exit_ok;
}

int run_stability(const RunConfig& c, std::ostream& out) {
  const VarianceProfile S = load_profile(c.profile);
  const StabilityOptions opt = stability_options(c);
  const DysonSolution s = solve_dyson(S, cplx(c.z_re, c.z_im), c.eta, solver_options(c));
  const MdeMatrices m = assemble_matrices(s);
  const StabilitySpectrum sp = stability_spectrum(m, s, S, opt);
  json j = {{"command", to_string(c.command)},
            {"n", S.n},
            {"z", cjson(s.z)},
            {"eta", s.eta},
            {"rho", s.rho},
            {"beta", cjson(sp.beta)},
            {"beta_star", cjson(sp.beta_star)},
            {"psi", sp.psi},
            {"overlaps", {{"B", cjson(sp.overlap_B)}, {"B_star", cjson(sp.overlap_B_star)}}},
            {"e_minus_projections", {{"B", cjson(sp.e_minus_B)}, {"B_star", cjson(sp.e_minus_B_star)}}},
            {"gap_third", sp.gap_third},
            {"regime", sp.regime},
            {"degenerate", sp.degenerate},
            {"isolated", sp.isolated},
            {"alignment", directions(sp.alignment)},
            {"defect", directions(sp.defect)}};
  stamp(j, c);
  emit(dump_json(j), c.output, out);
  return exit_ok;
}

int run_density(const RunConfig& c, std::ostream& out, std::ostream& err, bool quiet) {
  const VarianceProfile S = load_profile(c.profile);
  const DensityProfile d = sigma_radial(S, RadialGrid{c.rmax, c.dr}, quadrature_options(c), c.threads);
  json summary = {{"command", to_string(c.command)},
                  {"total_mass", d.total_mass},
                  {"support_radius_estimate", d.support_radius_estimate},
                  {"sigma_min_raw", d.sigma_min_raw},
                  {"mass_ok", d.mass_ok},
                  {"nonnegative_ok", d.nonnegative_ok},
                  {"exterior_ok", d.exterior_ok}};
  stamp(summary, c);
  if (c.format == Format::csv) {
    std::ostringstream csv;
    csv << "r,L,sigma\n";
    for (std::size_t k = 0; k < d.radii.size(); ++k)
      csv << num(d.radii[k]) << "," << num(d.L_values[k]) << "," << num(d.sigma_values[k]) << "\n";
    emit(csv.str(), c.output, out);
    if (!c.output.empty())
      write_atomic(c.output + ".summary.json", dump_json(summary));
    else if (!quiet)
      err << summary.dump() << "\n";
  } else {
    json rows = json::array();
    for (std::size_t k = 0; k < d.radii.size(); ++k)
      rows.push_back({{"r", d.radii[k]}, {"L", d.L_values[k]}, {"sigma", d.sigma_values[k]}, {"sigma_raw", d.sigma_raw[k]}});
    summary["rows"] = rows;
    emit(dump_json(summary), c.output, out);
  }
  if (!d.invariants_ok()) {
    err << "dyson-lab: density invariants failed (mass " << d.total_mass << ", min sigma " << d.sigma_min_raw << ")\n";
    return exit_contract;
  }
  return exit_ok;
}

int run_simulate(const RunConfig& c, std::ostream& out, std::ostream& err, bool quiet) {
  const ExperimentReport rep = run_experiment(experiment_config(c));
  json j = to_json(rep);
  stamp(j, c);
  emit(dump_json(j), c.output, out);
  if (!c.csv.empty()) write_atomic(c.csv, records_to_csv(rep.per_trial));
  if (!quiet)
    for (const Check& k : rep.checks)
      err << (k.contract ? "contract " : "trend    ") << k.name << ": " << (k.passed ? "PASS" : "FAIL") << " (value "
          << k.value << ", limit " << k.limit << ")\n";
  return rep.contracts_passed() ? exit_ok : exit_contract;
}

}  // namespace

int run(const RunConfig& c, std::ostream& out, std::ostream& err, bool quiet) {
  validate(c);
  switch (c.command) {
    case Command::solve_dyson: return run_solve(c, out);
    case Command::stability: return run_stability(c, out);
    case Command::density: return run_density(c, out, err, quiet);
    case Command::simulate: return run_simulate(c, out, err, quiet);
  }
  throw config_error("unknown command");
}

namespace {

// Options are parsed into `raw`; only those given on the command line are copied over the
// command's defaults.
struct Bindings {
  RunConfig raw;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> copies;

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T RunConfig::*field, const std::string& help) {
    CLI::Option* o = app->add_option(flag, raw.*field, help);
    copies.emplace_back(o, [this, field](RunConfig& dst) { dst.*field = raw.*field; });
    return o;
  }

  void apply(RunConfig& dst) const {
    for (const auto& [opt, copy] : copies)
      if (opt->count() > 0) copy(dst);
  }
};

void add_point(CLI::App* sub, Bindings& b) {
  b.add(sub, "--profile", &RunConfig::profile, "inline spec (flat:N, two_block:N:a,b,c, ...) or JSON profile file");
  b.add(sub, "--z-re", &RunConfig::z_re, "real part of z");
  b.add(sub, "--z-im", &RunConfig::z_im, "imaginary part of z");
  b.add(sub, "--tol", &RunConfig::tol, "solver tolerance");
  b.add(sub, "--damping", &RunConfig::damping, "fixed-point mixing weight");
  b.add(sub, "--method", &RunConfig::method, "newton or fixed_point");
  b.add(sub, "--out", &RunConfig::output, "output file (default stdout)");
}

}  // namespace

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dyson equation, stability and random-matrix experiments", "dyson-lab"};
  app.require_subcommand(0, 1);
  int threads = 1;
  std::string config_path;
  bool quiet = false, version = false;
  CLI::Option* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "run a JSON config (or re-run a report)");
  app.add_flag("--quiet", quiet, "suppress diagnostics");
  app.add_flag("--version", version, "print the version");

  Bindings b;
  std::string experiment, format;

  CLI::App* solve = app.add_subcommand("solve-dyson", "solve the vector Dyson equation");
  add_point(solve, b);
  b.add(solve, "--eta", &RunConfig::eta, "spectral parameter eta > 0")->required();

  CLI::App* stab = app.add_subcommand("stability", "small eigenvalues of the stability operator");
  add_point(stab, b);
  b.add(stab, "--eta", &RunConfig::eta, "spectral parameter eta > 0")->required();
  b.add(stab, "--rho-star", &RunConfig::rho_star, "small-rho regime threshold");
  b.add(stab, "--envelope", &RunConfig::envelope, "envelope constant");

  CLI::App* dens = app.add_subcommand("density", "log potential and density on a radial grid");
  b.add(dens, "--profile", &RunConfig::profile, "inline spec or JSON profile file");
  b.add(dens, "--rmax", &RunConfig::rmax, "largest radius (>= 1.5)");
  b.add(dens, "--dr", &RunConfig::dr, "radial spacing (<= 0.05)");
  b.add(dens, "--eta-min", &RunConfig::eta_min, "smallest quadrature eta");
  b.add(dens, "--eta-max", &RunConfig::eta_max, "largest quadrature eta");
  b.add(dens, "--nodes", &RunConfig::nodes, "quadrature nodes");
  b.add(dens, "--tol", &RunConfig::tol, "solver tolerance");
  b.add(dens, "--out", &RunConfig::output, "output file (default stdout)");
  CLI::Option* fmt = dens->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo experiments");
  sim->add_option("experiment", experiment, "radius|locallaw|circlaw|deloc|girko|cubic")
      ->required()
      ->check(CLI::IsMember({"radius", "locallaw", "circlaw", "deloc", "girko", "cubic"}));
  b.add(sim, "--profile", &RunConfig::profile, "inline spec or JSON profile file");
  b.add(sim, "--n", &RunConfig::n, "dimensions, comma separated")->delimiter(',');
  b.add(sim, "--trials", &RunConfig::trials, "trials per dimension");
  b.add(sim, "--seed", &RunConfig::seed, "64-bit seed");
  b.add(sim, "--z-re", &RunConfig::z_re, "real part of z (z0 for circlaw)");
  b.add(sim, "--z-im", &RunConfig::z_im, "imaginary part of z (z0 for circlaw)");
  b.add(sim, "--eta", &RunConfig::eta, "fixed eta (default: derived per n)");
  b.add(sim, "--eta-f-multiple", &RunConfig::eta_f_multiple, "eta as a multiple of eta_f");
  b.add(sim, "--eta-exponent", &RunConfig::eta_exponent, "eta = n^exponent");
  b.add(sim, "--dist", &RunConfig::dist, "complex_gaussian|real_gaussian|rademacher");
  b.add(sim, "--hook", &RunConfig::hook, "none|zero|permutation|localized");
  b.add(sim, "--a", &RunConfig::a, "circlaw zoom exponent in [0, 1/2]");
  b.add(sim, "--bump-radius", &RunConfig::bump_radius, "circlaw bump radius");
  b.add(sim, "--bump-amplitude", &RunConfig::bump_amplitude, "circlaw bump amplitude");
  b.add(sim, "--girko-radius", &RunConfig::girko_radius, "girko bump radius");
  b.add(sim, "--grid", &RunConfig::girko_grid, "girko grid points per side");
  b.add(sim, "--refined-grid", &RunConfig::girko_refined, "girko refined grid points per side");
  b.add(sim, "--g-equals-m", &RunConfig::g_equals_m, "cubic: replace G by M");
  b.add(sim, "--rho-star", &RunConfig::rho_star, "small-rho regime threshold");
  b.add(sim, "--out", &RunConfig::output, "report file (default stdout)");
  b.add(sim, "--csv", &RunConfig::csv, "per-trial CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "dyson-lab: error: " << e.what() << "\n";
    return exit_config;
  }
  if (version) {
    out << "dyson-lab " << version_string() << "\n";
    return exit_ok;
  }

  try {
    RunConfig c;
    const std::vector<CLI::App*> used = app.get_subcommands();
    if (!config_path.empty()) {
      if (!used.empty()) throw config_error("--config cannot be combined with a subcommand");
      c = load_config_file(config_path);
    } else if (used.empty()) {
      throw config_error("no command given (solve-dyson, stability, density, simulate or --config)");
    } else {
      const Command cmd = command_from_string(used.front()->get_name());
      c = defaults_for(cmd, cmd == Command::simulate ? experiment : "radius");
      b.apply(c);
      if (fmt->count() > 0) c.format = format == "json" ? Format::json : Format::csv;
    }
    if (threads_opt->count() > 0) c.threads = threads;
    return run(c, out, err, quiet);
  } catch (const config_error& e) {
    err << "dyson-lab: error: " << e.what() << "\n";
    return exit_config;
  } catch (const precondition_error& e) {
    err << "dyson-lab: error: " << e.what() << "\n";
    return exit_config;
  } catch (const numerical_error& e) {
    err << "dyson-lab: numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "dyson-lab: numerical failure: " << e.what() << "\n";
    return exit_numerical;
  }
}

}  // namespace dlab::cli
