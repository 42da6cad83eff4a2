#include <dysonlab/density.hpp>
#include <dysonlab/parallel.hpp>

#include <algorithm>
#include <cmath>

namespace dlab {

VarianceProfile density_solve_profile(const VarianceProfile& S, const QuadratureOptions& q) {
  const int m = std::max(2, q.representative_dim + q.representative_dim % 2);
  if (S.n <= m) return S;
  if (S.kind == ProfileKind::flat || (S.kind == ProfileKind::two_block && S.n % 2 == 0))
    return make_profile(S.kind, m, S.params);
  return S;
}

namespace {

void check_quadrature(const QuadratureOptions& q) {
  if (!(q.eta_min > 0.0 && q.eta_max > q.eta_min) || !std::isfinite(q.eta_max))
    throw config_error("quadrature needs 0 < eta_min < eta_max");
  if (q.eta_min < min_supported_eta) throw config_error("eta_min below the smallest supported value 1e-12");
  if (q.nodes < 2) throw config_error("quadrature needs at least two nodes");
}

LogPotential potential_on(const VarianceProfile& P, double r, const QuadratureOptions& q) {
  std::vector<double> etas(q.nodes);
  const double la = std::log(q.eta_max), lb = std::log(q.eta_min);
  for (int k = 0; k < q.nodes; ++k) etas[k] = std::exp(la + (lb - la) * k / (q.nodes - 1));
  etas.front() = q.eta_max;
  etas.back() = q.eta_min;

  const std::vector<DysonSolution> path = solve_dyson_path(P, cplx(r, 0.0), etas, q.solver);
  std::vector<double> g(q.nodes);  // integrand times eta, as a function of log eta
  double f_min = 0.0;
  for (int k = 0; k < q.nodes; ++k) {
    const double f = pi * path[k].rho - 1.0 / (1.0 + etas[k]);
    if (!std::isfinite(f)) throw numerical_error("log-potential integrand is not finite");
    g[k] = f * etas[k];
    if (k == q.nodes - 1) f_min = f;
  }
  LogPotential out;
  for (int k = 0; k + 1 < q.nodes; ++k)
    out.body += 0.5 * (g[k] + g[k + 1]) * (std::log(etas[k]) - std::log(etas[k + 1]));
  out.head = q.eta_min * f_min;
  // <v1> = 1/eta - (<S 1> + |z|^2)/eta^3 + ..., 1/(1+eta) = 1/eta - 1/eta^2 + 1/eta^3 - ...
  const double T = q.eta_max;
  const double c3 = 1.0 + P.entries.sum() / P.n + r * r;
  out.tail = 1.0 / T - c3 / (2.0 * T * T);
  out.tail_error = c3 * c3 / (3.0 * T * T * T);
  out.value = -(out.head + out.body + out.tail) / (2.0 * pi);
  return out;
}

}  // namespace

LogPotential log_potential_detail(const VarianceProfile& S, double r, const QuadratureOptions& q) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw config_error("radius must be a finite nonnegative number");
  check_quadrature(q);
  return potential_on(density_solve_profile(S, q), r, q);
}

double log_potential(const VarianceProfile& S, double r, const QuadratureOptions& q) {
  return log_potential_detail(S, r, q).value;
}

double log_potential(const VarianceProfile& S, cplx z, const QuadratureOptions& q) {
  return log_potential(S, std::abs(z), q);
}

DensityProfile sigma_radial(const VarianceProfile& S, const RadialGrid& grid, const QuadratureOptions& q,
                            int threads) {
  if (!(grid.dr > 0.0) || grid.dr > 0.05) throw config_error("radial spacing must lie in (0, 0.05]");
  if (!(grid.rmax >= 1.5) || !std::isfinite(grid.rmax)) throw config_error("radial grid must cover [0, 1.5]");
  check_quadrature(q);
  const VarianceProfile P = density_solve_profile(S, q);

  const int last = static_cast<int>(std::ceil(grid.rmax / grid.dr - 1e-9));
  const int nodes = last + 6;  // room for the one-sided stencils at rmax
  std::vector<double> L(nodes);
  parallel_for(nodes, threads, [&](std::size_t k) { L[k] = potential_on(P, k * grid.dr, q).value; });
  auto Lat = [&](int k) { return L[std::abs(k)]; };  // L is even in r

  DensityProfile d;
  const double h = grid.dr;
  for (int k = 0; k <= last; ++k) {
    const double r = k * h;
    double s3, s5, sf = 0.0, sb = 0.0;
    if (k == 0) {
      s3 = 4.0 * (L[1] - L[0]) / (h * h);
      s5 = (16.0 * (L[1] - L[0]) - (L[2] - L[0])) / (3.0 * h * h);
    } else {
      s3 = (L[k + 1] - 2.0 * L[k] + L[k - 1]) / (h * h) + (L[k + 1] - L[k - 1]) / (2.0 * h * r);
      const double d2 = (-Lat(k + 2) + 16.0 * Lat(k + 1) - 30.0 * L[k] + 16.0 * Lat(k - 1) - Lat(k - 2)) / (12.0 * h * h);
      const double d1 = (-Lat(k + 2) + 8.0 * Lat(k + 1) - 8.0 * Lat(k - 1) + Lat(k - 2)) / (12.0 * h);
      s5 = d2 + d1 / r;
      // One-sided six-point stencils, fourth order in both derivatives.
      auto one_sided = [&](int dir) {
        auto f = [&](int j) { return Lat(k + dir * j); };
        const double dd2 = (45 * f(0) - 154 * f(1) + 214 * f(2) - 156 * f(3) + 61 * f(4) - 10 * f(5)) / (12.0 * h * h);
        const double dd1 = dir * (-137 * f(0) + 300 * f(1) - 300 * f(2) + 200 * f(3) - 75 * f(4) + 12 * f(5)) / (60.0 * h);
        return dd2 + dd1 / r;
      };
      sf = one_sided(1);
      sb = one_sided(-1);
    }
    // The centered wide stencil is trusted where L is smooth across it; next to the edge of
    // the support (where L'' jumps) the one-sided stencil closest to the three-point value wins.
    double s = s5;
    if (std::abs(s5 - s3) > sigma_stencil_switch)
      s = k == 0 ? s3 : (std::abs(sf - s3) <= std::abs(sb - s3) ? sf : sb);
    d.radii.push_back(r);
    d.L_values.push_back(L[k]);
    d.sigma_raw.push_back(s);
    d.sigma_values.push_back(std::max(0.0, s));
  }
  d.sigma_min_raw = *std::min_element(d.sigma_raw.begin(), d.sigma_raw.end());
  for (int k = 0; k < last; ++k)
    d.total_mass += pi * (d.sigma_raw[k] * d.radii[k] + d.sigma_raw[k + 1] * d.radii[k + 1]) * h;
  for (int k = 0; k <= last; ++k)
    if (d.sigma_values[k] > 0.01) d.support_radius_estimate = d.radii[k];

  d.mass_ok = std::abs(d.total_mass - 1.0) <= 5e-3;
  d.nonnegative_ok = d.sigma_min_raw >= -1e-6;
  d.exterior_ok = true;
  for (int k = 0; k <= last; ++k)
    if (d.radii[k] >= 1.05 - 1e-12 && d.sigma_values[k] > 1e-4) d.exterior_ok = false;
  return d;
}

double fluctuation_scale(double z2, long n) {
  if (n < 2) throw config_error("fluctuation scale needs n >= 2");
  if (!(z2 >= 0.0) || !std::isfinite(z2)) throw config_error("|z|^2 must be finite and nonnegative");
  const double dn = static_cast<double>(n);
  const double w = 1.0 / std::sqrt(dn);
  if (z2 <= 1.0 - w) return 1.0 / (std::sqrt(1.0 - z2) * dn);
  if (z2 <= 1.0 + w) return std::pow(dn, -0.75);
  if (z2 <= 2.0) return std::pow(z2 - 1.0, 1.0 / 6.0) * std::pow(dn, -2.0 / 3.0);
  return std::pow(dn, -2.0 / 3.0);
}

double xi2_tilde(double z2, double eta) { return std::sqrt(std::abs(1.0 - z2)) + std::cbrt(eta); }

std::vector<ScaleRow> scale_table(const std::vector<double>& z2_values, long n) {
  std::vector<ScaleRow> rows;
  for (double z2 : z2_values) {
    ScaleRow r;
    r.z2 = z2;
    r.eta_f = fluctuation_scale(z2, n);
    r.xi2_tilde = xi2_tilde(z2, r.eta_f);
    r.xi1_tilde = r.xi2_tilde * r.xi2_tilde;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dlab
