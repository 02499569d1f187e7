#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "confgame/game_model.hpp"
#include "confgame/io.hpp"
#include "confgame/oracle.hpp"

namespace confgame {

inline constexpr double kValidationTol = 1e-12;

struct ValidationCheck {
  std::string name;
  int t = 0, s = 0, u = 0;
  std::string block;  // "reward", "next=j" or empty
  double value = 0.0;
  bool ok = true;
  bool informational = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.ok && !c.informational) return false;
    return true;
  }
  /// Instrument relevance, independence and the orthogonality covariances
  /// only; the residual-mean checks are left out.
  bool identification_ok() const {
    for (const auto& c : checks)
      if (!c.ok && !c.informational && c.name.find("residual_mean") == std::string::npos) return false;
    return true;
  }
  std::vector<ValidationCheck> failures() const {
    std::vector<ValidationCheck> out;
    for (const auto& c : checks)
      if (!c.ok && !c.informational) out.push_back(c);
    return out;
  }
  std::string to_csv() const {
    std::ostringstream os;
    os << "check,point,s,u,block,value,status\n";
    for (const auto& c : checks)
      os << c.name << ',' << c.t << ',' << c.s << ',' << c.u << ',' << c.block << ',' << fmt_double(c.value) << ','
         << (c.informational ? "info" : c.ok ? "ok" : "FAIL") << '\n';
    return os.str();
  }
};

namespace detail {

inline double cov_v(const GameSpec& g, int t, int s, const std::vector<double>& a, const std::vector<double>& b) {
  double ea = 0, eb = 0, eab = 0;
  for (int v = 0; v < g.n_v(); ++v) {
    double p = g.v_prob(t, s, v);
    ea += p * a[v];
    eb += p * b[v];
    eab += p * a[v] * b[v];
  }
  return eab - ea * eb;
}

}  // namespace detail

/// Exact checks of the identification assumptions on every reachable cell.
inline ValidationReport validate_spec(const GameSpec& g, const BehaviorPolicyPair& beh) {
  check_spec(g);
  check_behavior(g, beh);
  JointLaw law = exact_joint_law(g, beh);
  ValidationReport rep;
  auto add = [&](std::string name, int t, int s, int u, std::string block, double value, bool ok, bool info = false) {
    rep.checks.push_back({std::move(name), t, s, u, std::move(block), value, ok, info});
  };
  const int nv = g.n_v();
  for (int t = 0; t < g.n_points(); ++t) {
    const auto& p = g.points[t];
    for (int s = 0; s < g.n_states; ++s)
      for (int u = 0; u < g.n_private; ++u) {
        CellMoments m = cell_moments(law, t, s, u);
        if (m.mass <= 0) continue;
        add("iv_relevance", t, s, u, "", std::abs(m.cov_xz), std::abs(m.cov_xz) > kValidationTol);
        // instrument independent of the private value
        double pz1 = m.f1, worst = 0;
        for (int v = 0; v < nv; ++v) {
          double pv = 0, pzv = 0;
          for (int z = 0; z < 2; ++z)
            for (int x = 0; x < 2; ++x) {
              double q = law.mass(t, s, u, v, z, x) / m.mass;
              pv += q;
              if (z) pzv += q;
            }
          worst = std::max(worst, std::abs(pzv - pz1 * pv));
        }
        add("iv_independent_of_v", t, s, u, "", worst, worst <= kValidationTol);
        std::vector<double> az(nv), aus(nv);
        for (int v = 0; v < nv; ++v) {
          az[v] = p.act_iv[g.at_suv(s, u, v)];
          aus[v] = p.act_base[g.at_suv(s, u, v)];
        }
        auto orthogonality = [&](const std::string& block, const std::vector<double>& ta, const std::vector<double>& tz,
                                 const std::vector<double>& taz, const std::vector<double>& tus) {
          struct Pair {
            const char* name;
            const std::vector<double>* a;
            const std::vector<double>* b;
          } pairs[] = {{"cov_theta_a_alpha_z", &ta, &az},   {"cov_theta_a_alpha_us", &ta, &aus},
                       {"cov_theta_z_alpha_z", &tz, &az},   {"cov_theta_z_alpha_us", &tz, &aus},
                       {"cov_alpha_z_theta_az", &taz, &az}, {"cov_alpha_z_theta_us", &tus, &az},
                       {"cov_theta_az_alpha_us", &taz, &aus}, {"cov_theta_us_alpha_us", &tus, &aus}};
          for (const auto& pr : pairs) {
            double c = detail::cov_v(g, t, s, *pr.a, *pr.b);
            add(pr.name, t, s, u, block, c, std::abs(c) <= kValidationTol);
          }
        };
        std::vector<double> ta(nv), tz(nv), taz(nv), tus(nv);
        double mean_base = 0;
        for (int v = 0; v < nv; ++v) {
          std::size_t i = g.at_suv(s, u, v);
          ta[v] = p.rew_act[i];
          tz[v] = p.rew_iv[i];
          taz[v] = p.rew_int[i];
          tus[v] = p.rew_base[i];
          mean_base += g.v_prob(t, s, v) * p.rew_base[i];
        }
        orthogonality("reward", ta, tz, taz, tus);
        add("reward_residual_mean", t, s, u, "reward", mean_base, std::abs(mean_base) <= kValidationTol);
        if (t + 1 < g.n_points()) {
          for (int j = 0; j < g.n_states; ++j) {
            double mean_j = 0;
            for (int v = 0; v < nv; ++v) {
              double k00 = p.kernel[g.at_kernel(s, u, v, 0, 0, j)], k10 = p.kernel[g.at_kernel(s, u, v, 1, 0, j)];
              double k01 = p.kernel[g.at_kernel(s, u, v, 0, 1, j)], k11 = p.kernel[g.at_kernel(s, u, v, 1, 1, j)];
              ta[v] = k10 - k00;
              tz[v] = k01 - k00;
              taz[v] = k11 - k10 - k01 + k00;
              tus[v] = k00;
              mean_j += g.v_prob(t, s, v) * k00;
            }
            std::string block = "next=" + std::to_string(j);
            orthogonality(block, ta, tz, taz, tus);
            add("transition_residual_mean", t, s, u, block, mean_j, std::abs(mean_j) <= kValidationTol, true);
          }
        }
      }
  }
  return rep;
}

inline ValidationReport validate_spec(const GameSpec& g) { return validate_spec(g, behavior_of(g)); }

}  // namespace confgame
