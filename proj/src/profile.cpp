#include <dysonlab/profile.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dlab {

std::string to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::flat: return "flat";
    case ProfileKind::two_block: return "two_block";
    case ProfileKind::smooth_kernel: return "smooth_kernel";
    case ProfileKind::custom: return "custom";
  }
  return "custom";
}

ProfileKind profile_kind_from_string(const std::string& s) {
  if (s == "flat") return ProfileKind::flat;
  if (s == "two_block") return ProfileKind::two_block;
  if (s == "smooth_kernel") return ProfileKind::smooth_kernel;
  if (s == "custom") return ProfileKind::custom;
  throw config_error("unknown profile kind '" + s + "'");
}

namespace {

void check_dim(int n) {
  if (n < 2) throw config_error("profile dimension must be at least 2");
  if (n > max_profile_dim) throw config_error("profile dimension exceeds the cap of 4096");
}

void check_param_count(const std::vector<double>& p, std::size_t lo, std::size_t hi, const char* kind) {
  if (p.size() < lo || p.size() > hi)
    throw config_error(std::string("wrong number of parameters for profile kind ") + kind);
  for (double x : p)
    if (!std::isfinite(x)) throw config_error("profile parameters must be finite");
}

}  // namespace

VarianceProfile profile_from_entries(Mat entries, ProfileKind kind, std::vector<double> params) {
  if (entries.rows() != entries.cols()) throw config_error("variance profile must be square");
  const int n = static_cast<int>(entries.rows());
  check_dim(n);
  if (!entries.allFinite()) throw config_error("variance profile has non-finite entries");
  const double lo = entries.minCoeff();
  if (!(lo > 0.0)) throw config_error("variance profile entries must be strictly positive");

  VarianceProfile S;
  S.n = n;
  S.kind = kind;
  S.params = std::move(params);
  S.s_low = lo * n;
  S.s_high = entries.maxCoeff() * n;
  S.entries = std::move(entries);
  S.perron_radius = spectral_radius(S.entries);
  return S;
}

VarianceProfile make_profile(ProfileKind kind, int n, std::vector<double> params) {
  check_dim(n);
  Mat e(n, n);
  const double dn = n;
  switch (kind) {
    case ProfileKind::flat: {
      if (params.empty()) params = {1.0};
      check_param_count(params, 1, 1, "flat");
      e.setConstant(params[0] / dn);
      break;
    }
    case ProfileKind::two_block: {
      check_param_count(params, 3, 3, "two_block");
      const int h = n / 2;
      const double a = params[0] / dn, b = params[1] / dn, c = params[2] / dn;
      e.topLeftCorner(h, h).setConstant(a);
      e.topRightCorner(h, n - h).setConstant(b);
      e.bottomLeftCorner(n - h, h).setConstant(b);
      e.bottomRightCorner(n - h, n - h).setConstant(c);
      break;
    }
    case ProfileKind::smooth_kernel: {
      if (params.empty()) params = {0.5, 1.0};
      if (params.size() == 1) params.push_back(1.0);
      check_param_count(params, 2, 2, "smooth_kernel");
      const double amp = params[0], scale = params[1];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          e(i, j) = scale * (1.0 + amp * std::sin(2.0 * pi * (i / dn + j / dn))) / dn;
      break;
    }
    case ProfileKind::custom:
      throw config_error("custom profiles need explicit entries");
  }
  return profile_from_entries(std::move(e), kind, std::move(params));
}

double spectral_radius(const VarianceProfile& S) { return spectral_radius(S.entries); }

VarianceProfile scaled(const VarianceProfile& S, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw config_error("profile scale factor must be positive");
  std::vector<double> p = S.params;
  switch (S.kind) {
    case ProfileKind::flat:
    case ProfileKind::two_block:
      for (double& x : p) x *= c;
      return make_profile(S.kind, S.n, p);
    case ProfileKind::smooth_kernel:
      p[1] *= c;
      return make_profile(S.kind, S.n, p);
    case ProfileKind::custom:
      break;
  }
  return profile_from_entries(S.entries * c, ProfileKind::custom, p);
}

VarianceProfile normalize(const VarianceProfile& S) {
  VarianceProfile out = scaled(S, 1.0 / S.perron_radius);
  // Regenerated entries can differ from S/rho in the last bit; keep the radius honest.
  out.perron_radius = spectral_radius(out.entries);
  return out;
}

VarianceProfile parse_profile_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() < 2 || parts.size() > 3)
    throw config_error("inline profile must look like kind:N[:p1,p2,...], got '" + spec + "'");
  const ProfileKind kind = profile_kind_from_string(parts[0]);
  int n = 0;
  try {
    std::size_t pos = 0;
    n = std::stoi(parts[1], &pos);
    if (pos != parts[1].size()) throw config_error("");
  } catch (...) {
    throw config_error("inline profile dimension '" + parts[1] + "' is not an integer");
  }
  std::vector<double> params;
  if (parts.size() == 3) {
    std::stringstream ps(parts[2]);
    while (std::getline(ps, item, ',')) {
      try {
        std::size_t pos = 0;
        params.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw config_error("");
      } catch (...) {
        throw config_error("inline profile parameter '" + item + "' is not a number");
      }
    }
  }
  return make_profile(kind, n, params);
}

nlohmann::json to_json(const VarianceProfile& S, bool with_entries) {
  nlohmann::json j;
  j["n"] = S.n;
  j["kind"] = to_string(S.kind);
  j["params"] = S.params;
  if (with_entries || S.kind == ProfileKind::custom) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < S.n; ++i) {
      std::vector<double> r(S.n);
      for (int k = 0; k < S.n; ++k) r[k] = S.entries(i, k);
      rows.push_back(r);
    }
    j["entries"] = rows;
  }
  return j;
}

VarianceProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("profile document must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "n" && it.key() != "kind" && it.key() != "params" && it.key() != "entries")
      throw config_error("unknown profile key '" + it.key() + "'");
  try {
    const int n = j.at("n").get<int>();
    const ProfileKind kind = profile_kind_from_string(j.at("kind").get<std::string>());
    std::vector<double> params = j.value("params", std::vector<double>{});
    if (j.contains("entries")) {
      const auto& rows = j.at("entries");
      if (!rows.is_array() || static_cast<int>(rows.size()) != n)
        throw config_error("profile entries must be an n x n array");
      Mat e(n, n);
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n) throw config_error("profile entries must be an n x n array");
        for (int k = 0; k < n; ++k) e(i, k) = rows[i][k].get<double>();
      }
      return profile_from_entries(std::move(e), kind, std::move(params));
    }
    return make_profile(kind, n, std::move(params));
  } catch (const nlohmann::json::exception& ex) {
    throw config_error(std::string("malformed profile document: ") + ex.what());
  }
}

}  // namespace dlab
