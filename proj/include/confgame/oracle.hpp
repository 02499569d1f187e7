#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/game_model.hpp"

namespace confgame {

/// Compensated summation.
struct KahanSum {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

inline constexpr double kDefaultCellBudget = 1e7;

/// Exact law of one trajectory, stored in factored form: for every decision
/// point the joint mass of (s, u, v, z, x), plus the law of (s, z) on arrival
/// at each point (index 2H holds the terminal state with the last action).
struct JointLaw {
  GameSpec spec;
  BehaviorPolicyPair behavior;
  std::vector<std::vector<double>> point_mass;  // [t][((s,u,v)*2 + z)*2 + x]
  std::vector<std::vector<double>> state_mass;  // [t][s*2 + z], t = 0..2H

  double mass(int t, int s, int u, int v, int z, int x) const {
    return point_mass[t][(spec.at_suv(s, u, v) * 2 + z) * 2 + x];
  }
  double total_mass(int t) const {
    KahanSum k;
    for (double m : point_mass[t]) k.add(m);
    return k.value();
  }
};

inline JointLaw exact_joint_law(const GameSpec& g, const BehaviorPolicyPair& beh,
                                double cell_budget = kDefaultCellBudget) {
  check_spec(g);
  check_behavior(g, beh);
  const double cells = static_cast<double>(g.suv()) * 4.0 * g.n_states * g.n_points();
  if (cells > cell_budget)
    throw SpaceTooLarge("factored law needs " + std::to_string(cells) + " cells, budget " + std::to_string(cell_budget));
  JointLaw law;
  law.spec = g;
  law.behavior = beh;
  const int T = g.n_points();
  law.point_mass.assign(T, std::vector<double>(static_cast<std::size_t>(g.suv()) * 4, 0.0));
  law.state_mass.assign(T + 1, std::vector<double>(static_cast<std::size_t>(g.n_states) * 2, 0.0));
  for (int s = 0; s < g.n_states; ++s) {
    law.state_mass[0][s * 2 + 1] = g.init_state[s] * beh.init_bob;
    law.state_mass[0][s * 2 + 0] = g.init_state[s] * (1.0 - beh.init_bob);
  }
  for (int t = 0; t < T; ++t) {
    const auto& p = g.points[t];
    std::vector<KahanSum> next(static_cast<std::size_t>(g.n_states) * 2);
    for (int s = 0; s < g.n_states; ++s)
      for (int z = 0; z < 2; ++z) {
        double mz = law.state_mass[t][s * 2 + z];
        if (mz == 0.0) continue;
        for (int u = 0; u < g.n_private; ++u)
          for (int v = 0; v < g.n_v(); ++v) {
            double m = mz * p.u_law[s * g.n_private + u] * g.v_prob(t, s, v);
            double q = beh.prob[t][g.at_suv(s, u, v) * 2 + z];
            for (int x = 0; x < 2; ++x) {
              double mx = m * (x ? q : 1.0 - q);
              law.point_mass[t][(g.at_suv(s, u, v) * 2 + z) * 2 + x] = mx;
              for (int sn = 0; sn < g.n_states; ++sn)
                next[sn * 2 + x].add(mx * p.kernel[g.at_kernel(s, u, v, x, z, sn)]);
            }
          }
      }
    for (std::size_t i = 0; i < next.size(); ++i) law.state_mass[t + 1][i] = next[i].value();
  }
  return law;
}

inline JointLaw exact_joint_law(const GameSpec& g, double cell_budget = kDefaultCellBudget) {
  return exact_joint_law(g, behavior_of(g), cell_budget);
}

/// Number of atoms in the unfactored trajectory table.
inline double trajectory_cell_count(const GameSpec& g) {
  double per_point = static_cast<double>(g.n_private) * g.n_v() * 2.0 * g.n_states;
  return 2.0 * g.n_states * std::pow(per_point, g.n_points());
}

struct TrajectoryAtom {
  double prob = 1.0;
  int b0 = 0;
  std::vector<std::array<int, 4>> point;  // (s, u, v, x) per decision point
  int s_term = 0;
};

/// Visits every positive-mass atom of the full trajectory table.
inline void enumerate_trajectories(const JointLaw& law, const std::function<void(const TrajectoryAtom&)>& visit,
                                   double cell_budget = kDefaultCellBudget) {
  const GameSpec& g = law.spec;
  if (trajectory_cell_count(g) > cell_budget)
    throw SpaceTooLarge("trajectory table has " + std::to_string(trajectory_cell_count(g)) + " cells");
  const int T = g.n_points();
  TrajectoryAtom atom;
  atom.point.resize(T);
  std::function<void(int, int, int, double)> rec = [&](int t, int s, int z, double pr) {
    if (pr == 0.0) return;
    if (t == T) {
      atom.prob = pr;
      atom.s_term = s;
      visit(atom);
      return;
    }
    const auto& p = g.points[t];
    for (int u = 0; u < g.n_private; ++u)
      for (int v = 0; v < g.n_v(); ++v) {
        double q = law.behavior.prob[t][g.at_suv(s, u, v) * 2 + z];
        for (int x = 0; x < 2; ++x) {
          double m = pr * p.u_law[s * g.n_private + u] * g.v_prob(t, s, v) * (x ? q : 1.0 - q);
          if (m == 0.0) continue;
          for (int sn = 0; sn < g.n_states; ++sn) {
            atom.point[t] = {s, u, v, x};
            rec(t + 1, sn, x, m * p.kernel[g.at_kernel(s, u, v, x, z, sn)]);
          }
        }
      }
  };
  for (int b0 = 0; b0 < 2; ++b0)
    for (int s = 0; s < g.n_states; ++s) {
      atom.b0 = b0;
      rec(0, s, b0, g.init_state[s] * (b0 ? law.behavior.init_bob : 1.0 - law.behavior.init_bob));
    }
}

// ---------------------------------------------------------------------------
// Coefficient tables
// ---------------------------------------------------------------------------

/// V-marginalized bilinear coefficients over (s,u), in role terms: `act` is
/// the coefficient of the acting player's action, `iv` of the instrument.
/// For an Alice point (act, iv, inter) = (theta_a, theta_z, theta_az).
struct CoefficientTriple {
  int n_states = 1, n_private = 1;
  std::vector<double> act, iv, inter, base;  // [s*|U|+u]

  std::array<double, 3> at(int s, int u) const {
    std::size_t i = static_cast<std::size_t>(s) * n_private + u;
    return {act[i], iv[i], inter[i]};
  }
};

struct PointTruth {
  CoefficientTriple reward;
  std::vector<CoefficientTriple> transition;  // one per indicator 1{S' = j}
};

/// Exact V-marginal coefficients of every structural block.
inline std::vector<PointTruth> true_coefficients(const GameSpec& g) {
  check_spec(g);
  std::vector<PointTruth> out(g.n_points());
  const std::size_t nsu = static_cast<std::size_t>(g.n_states) * g.n_private;
  auto blank = [&] {
    CoefficientTriple c;
    c.n_states = g.n_states;
    c.n_private = g.n_private;
    c.act.assign(nsu, 0.0);
    c.iv = c.inter = c.base = c.act;
    return c;
  };
  for (int t = 0; t < g.n_points(); ++t) {
    const auto& p = g.points[t];
    out[t].reward = blank();
    out[t].transition.assign(g.n_states, blank());
    for (int s = 0; s < g.n_states; ++s)
      for (int u = 0; u < g.n_private; ++u) {
        std::size_t c = static_cast<std::size_t>(s) * g.n_private + u;
        KahanSum ra, ri, rn, rb;
        std::vector<std::array<KahanSum, 4>> tr(g.n_states);
        for (int v = 0; v < g.n_v(); ++v) {
          double w = g.v_prob(t, s, v);
          std::size_t i = g.at_suv(s, u, v);
          ra.add(w * p.rew_act[i]);
          ri.add(w * p.rew_iv[i]);
          rn.add(w * p.rew_int[i]);
          rb.add(w * p.rew_base[i]);
          for (int j = 0; j < g.n_states; ++j) {
            double k00 = p.kernel[g.at_kernel(s, u, v, 0, 0, j)], k10 = p.kernel[g.at_kernel(s, u, v, 1, 0, j)];
            double k01 = p.kernel[g.at_kernel(s, u, v, 0, 1, j)], k11 = p.kernel[g.at_kernel(s, u, v, 1, 1, j)];
            tr[j][0].add(w * (k10 - k00));
            tr[j][1].add(w * (k01 - k00));
            tr[j][2].add(w * (k11 - k10 - k01 + k00));
            tr[j][3].add(w * k00);
          }
        }
        out[t].reward.act[c] = ra.value();
        out[t].reward.iv[c] = ri.value();
        out[t].reward.inter[c] = rn.value();
        out[t].reward.base[c] = rb.value();
        for (int j = 0; j < g.n_states; ++j) {
          out[t].transition[j].act[c] = tr[j][0].value();
          out[t].transition[j].iv[c] = tr[j][1].value();
          out[t].transition[j].inter[c] = tr[j][2].value();
          out[t].transition[j].base[c] = tr[j][3].value();
        }
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact action values and policy values
// ---------------------------------------------------------------------------

/// Exact Q^P_t(s,u,v,z,x) = qx*x + qz*z + qxz*x*z + q0 in role terms (x the
/// acting player's action at t, z the instrument), plus V-marginal tables.
struct ExactQ {
  struct Tables {
    std::vector<double> qx, qz, qxz, q0;  // [s][u][v]
    std::vector<double> mx, mz, mxz, m0;  // [s][u]
  };
  std::vector<std::array<Tables, 2>> q;  // [t][player]
  double J[2] = {0.0, 0.0};
};

inline ExactQ exact_q(const GameSpec& g, const PolicyPair& pi) {
  check_spec(g);
  check_policy(g, pi);
  const int T = g.n_points();
  ExactQ out;
  out.q.resize(T);
  // W[P][s*2+z]: value-to-go on arrival at t+1.
  std::array<std::vector<double>, 2> W;
  W[0].assign(static_cast<std::size_t>(g.n_states) * 2, 0.0);
  W[1] = W[0];
  for (int t = T - 1; t >= 0; --t) {
    const auto& p = g.points[t];
    const int actor = static_cast<int>(acting_player(t));
    std::array<std::vector<double>, 2> Wt;
    for (int P = 0; P < 2; ++P) {
      auto& tab = out.q[t][P];
      tab.qx.assign(g.suv(), 0.0);
      tab.qz = tab.qxz = tab.q0 = tab.qx;
      tab.mx.assign(static_cast<std::size_t>(g.n_states) * g.n_private, 0.0);
      tab.mz = tab.mxz = tab.m0 = tab.mx;
      Wt[P].assign(static_cast<std::size_t>(g.n_states) * 2, 0.0);
      for (int s = 0; s < g.n_states; ++s)
        for (int u = 0; u < g.n_private; ++u) {
          std::size_t c = static_cast<std::size_t>(s) * g.n_private + u;
          for (int v = 0; v < g.n_v(); ++v) {
            double Q[2][2];  // [x][z]
            for (int x = 0; x < 2; ++x)
              for (int z = 0; z < 2; ++z) {
                KahanSum acc;
                if (P == actor) acc.add(g.reward_mean(t, s, u, v, x, z));
                for (int sn = 0; sn < g.n_states; ++sn)
                  acc.add(p.kernel[g.at_kernel(s, u, v, x, z, sn)] * W[P][sn * 2 + x]);
                Q[x][z] = acc.value();
              }
            std::size_t i = g.at_suv(s, u, v);
            tab.q0[i] = Q[0][0];
            tab.qx[i] = Q[1][0] - Q[0][0];
            tab.qz[i] = Q[0][1] - Q[0][0];
            tab.qxz[i] = Q[1][1] - Q[1][0] - Q[0][1] + Q[0][0];
            double wv = g.v_prob(t, s, v);
            tab.mx[c] += wv * tab.qx[i];
            tab.mz[c] += wv * tab.qz[i];
            tab.mxz[c] += wv * tab.qxz[i];
            tab.m0[c] += wv * tab.q0[i];
            double wu = p.u_law[s * g.n_private + u];
            for (int z = 0; z < 2; ++z) {
              double px = pi.prob(t, s, u, z);
              Wt[P][s * 2 + z] += wu * wv * (px * Q[1][z] + (1.0 - px) * Q[0][z]);
            }
          }
        }
    }
    W = Wt;
  }
  for (int P = 0; P < 2; ++P) {
    KahanSum j;
    for (int s = 0; s < g.n_states; ++s)
      j.add(g.init_state[s] * (pi.init_bob * W[P][s * 2 + 1] + (1.0 - pi.init_bob) * W[P][s * 2]));
    out.J[P] = j.value();
  }
  return out;
}

struct PolicyValue {
  double J_A = 0.0, J_B = 0.0;
  double total() const { return J_A + J_B; }
};

inline PolicyValue exact_policy_value(const GameSpec& g, const PolicyPair& pi) {
  ExactQ q = exact_q(g, pi);
  return {q.J[0], q.J[1]};
}

// ---------------------------------------------------------------------------
// Policy classes and the in-class optimum
// ---------------------------------------------------------------------------

enum class PolicyClassKind { Full, Stationary, Explicit };

/// Finite class of deterministic tabular pairs. Members are numbered so that
/// the index, read as a bit string from the most significant bit, lists the
/// initial Bob rule, then Alice's and Bob's table entries in storage order.
/// Lexicographic order on encodings is numeric order on indices.
struct PolicyClass {
  PolicyClassKind kind = PolicyClassKind::Full;
  int horizon = 1, n_states = 1, n_private = 1;
  std::vector<PolicyPair> members;  // Explicit only

  static PolicyClass full(const GameSpec& g) { return {PolicyClassKind::Full, g.horizon, g.n_states, g.n_private, {}}; }
  static PolicyClass stationary(const GameSpec& g) {
    return {PolicyClassKind::Stationary, g.horizon, g.n_states, g.n_private, {}};
  }
  static PolicyClass of(std::vector<PolicyPair> list) {
    PolicyClass c;
    c.kind = PolicyClassKind::Explicit;
    if (!list.empty()) {
      c.horizon = list[0].horizon;
      c.n_states = list[0].n_states;
      c.n_private = list[0].n_private;
    }
    c.members = std::move(list);
    return c;
  }

  int alice_bits() const { return n_states * n_private * 2; }
  int bob_bits() const { return n_states * 2; }
  int bits() const {
    int per = alice_bits() + bob_bits();
    return 1 + (kind == PolicyClassKind::Full ? horizon * per : per);
  }
  /// Number of members; +inf when it does not fit in 62 bits.
  double size() const {
    if (kind == PolicyClassKind::Explicit) return static_cast<double>(members.size());
    return std::ldexp(1.0, bits());
  }

  PolicyPair decode(unsigned long long idx) const {
    if (kind == PolicyClassKind::Explicit) return members.at(idx);
    PolicyPair p = PolicyPair::constant(horizon, n_states, n_private, 0.0, 0.0, 0.0);
    int pos = bits() - 1;
    auto next = [&] { return static_cast<double>((idx >> pos--) & 1ULL); };
    p.init_bob = next();
    if (kind == PolicyClassKind::Full) {
      for (int h = 0; h < horizon; ++h) {
        for (auto& a : p.alice[h]) a = next();
        for (auto& b : p.bob[h]) b = next();
      }
    } else {
      for (auto& a : p.alice[0]) a = next();
      for (auto& b : p.bob[0]) b = next();
      for (int h = 1; h < horizon; ++h) {
        p.alice[h] = p.alice[0];
        p.bob[h] = p.bob[0];
      }
    }
    return p;
  }
};

/// Replacement rule shared by every argmax in the library: a later candidate
/// wins only if strictly better beyond a relative 1e-12 band.
inline bool strictly_better(double cand, double best) {
  if (std::isinf(best) && best < 0) return cand > best;
  return cand > best + 1e-12 * std::abs(best);
}

struct OptimalPair {
  PolicyPair policy;
  double J = 0.0;
  unsigned long long index = 0;
  bool by_dp = false;
};

inline constexpr double kEnumerationCap = 1e6;

namespace detail {

/// Team dynamic program over the full deterministic class.
inline OptimalPair optimal_pair_dp(const GameSpec& g) {
  const int T = g.n_points();
  PolicyPair pi = PolicyPair::constant(g.horizon, g.n_states, g.n_private, 0.0, 0.0, 0.0);
  std::vector<double> W(static_cast<std::size_t>(g.n_states) * 2, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const auto& p = g.points[t];
    std::vector<double> Wt(W.size(), 0.0);
    for (int s = 0; s < g.n_states; ++s)
      for (int z = 0; z < 2; ++z) {
        // value[u][x] after integrating v
        std::vector<std::array<double, 2>> val(g.n_private, {0.0, 0.0});
        for (int u = 0; u < g.n_private; ++u)
          for (int v = 0; v < g.n_v(); ++v)
            for (int x = 0; x < 2; ++x) {
              double q = g.reward_mean(t, s, u, v, x, z);
              for (int sn = 0; sn < g.n_states; ++sn) q += p.kernel[g.at_kernel(s, u, v, x, z, sn)] * W[sn * 2 + x];
              val[u][x] += g.v_prob(t, s, v) * q;
            }
        if (t % 2 == 0) {
          for (int u = 0; u < g.n_private; ++u) {
            int x = strictly_better(val[u][1], val[u][0]) ? 1 : 0;
            pi.alice[t / 2][(s * g.n_private + u) * 2 + z] = x;
            Wt[s * 2 + z] += p.u_law[s * g.n_private + u] * val[u][x];
          }
        } else {
          double v0 = 0, v1 = 0;
          for (int u = 0; u < g.n_private; ++u) {
            v0 += p.u_law[s * g.n_private + u] * val[u][0];
            v1 += p.u_law[s * g.n_private + u] * val[u][1];
          }
          int x = strictly_better(v1, v0) ? 1 : 0;
          pi.bob[t / 2][s * 2 + z] = x;
          Wt[s * 2 + z] = x ? v1 : v0;
        }
      }
    W = Wt;
  }
  double j0 = 0, j1 = 0;
  for (int s = 0; s < g.n_states; ++s) {
    j0 += g.init_state[s] * W[s * 2];
    j1 += g.init_state[s] * W[s * 2 + 1];
  }
  pi.init_bob = strictly_better(j1, j0) ? 1.0 : 0.0;
  OptimalPair out;
  out.policy = pi;
  out.J = exact_policy_value(g, pi).total();
  out.by_dp = true;
  return out;
}

}  // namespace detail

inline OptimalPair exact_optimal_pair(const GameSpec& g, const PolicyClass& cls) {
  double n = cls.size();
  if (n < 1) throw EmptyClass("policy class is empty");
  if (n > kEnumerationCap) {
    if (cls.kind == PolicyClassKind::Full) return detail::optimal_pair_dp(g);
    throw SpaceTooLarge("policy class has " + std::to_string(n) + " members");
  }
  OptimalPair best;
  best.J = -std::numeric_limits<double>::infinity();
  for (unsigned long long i = 0; i < static_cast<unsigned long long>(n); ++i) {
    PolicyPair p = cls.decode(i);
    double J = exact_policy_value(g, p).total();
    if (strictly_better(J, best.J)) {
      best.J = J;
      best.policy = p;
      best.index = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Identification system on the exact law
// ---------------------------------------------------------------------------

/// Exact conditional moments of (z, x, y) given the cell (s,u) at point t,
/// where y is the acting player's reward.
struct CellMoments {
  double mass = 0.0;
  double f1 = 0.0;           // E[z]
  double f2[2] = {0, 0};     // E[x | z]
  double f3 = 0, f4 = 0, f5 = 0;
  double rho[10] = {};       // E[rho_1..rho_10]
  double cov_xz = 0.0;
};

namespace detail {

/// Iterates (probability, z, x, E[y | s,u,v,z,x]) over one cell.
template <class F>
void for_each_cell_atom(const JointLaw& law, int t, int s, int u, F&& f) {
  const GameSpec& g = law.spec;
  for (int v = 0; v < g.n_v(); ++v)
    for (int z = 0; z < 2; ++z)
      for (int x = 0; x < 2; ++x) f(law.mass(t, s, u, v, z, x), z, x, g.reward_mean(t, s, u, v, x, z), v);
}

}  // namespace detail

inline CellMoments cell_moments(const JointLaw& law, int t, int s, int u) {
  CellMoments m;
  KahanSum mass, ez, mz[2], ex_z[2];
  detail::for_each_cell_atom(law, t, s, u, [&](double p, int z, int x, double, int) {
    mass.add(p);
    ez.add(p * z);
    mz[z].add(p);
    ex_z[z].add(p * x);
  });
  m.mass = mass.value();
  if (m.mass <= 0.0) return m;
  m.f1 = ez.value() / m.mass;
  for (int z = 0; z < 2; ++z) m.f2[z] = mz[z].value() > 0 ? ex_z[z].value() / mz[z].value() : 0.0;
  KahanSum f3, f4, f5, rho[10], exz, ex;
  detail::for_each_cell_atom(law, t, s, u, [&](double p, int z, int x, double y, int) {
    double w = p / m.mass;
    double e1 = z - m.f1, e2 = x - m.f2[z];
    f3.add(w * e2 * y);
    f4.add(w * e2 * x);
    f5.add(w * e2 * x * z);
    double r[10] = {e1 * e2 * y, e1 * e2 * x, z * e1 * e2 * x, e1 * y, e1 * x,
                    z * e1,      x * z * e1,  z * e1 * e2 * y, z * e1 * x * e2, z * e1 * x * z * e2};
    for (int k = 0; k < 10; ++k) rho[k].add(w * r[k]);
    exz.add(w * x * z);
    ex.add(w * x);
  });
  m.f3 = f3.value();
  m.f4 = f4.value();
  m.f5 = f5.value();
  for (int k = 0; k < 10; ++k) m.rho[k] = rho[k].value();
  m.cov_xz = exz.value() - ex.value() * m.f1;
  return m;
}

struct IdentSystem {
  Eigen::Matrix3d M;     // rows: action identity, instrument identity, A-residual moment
  Eigen::Vector3d rhs;
  Eigen::Vector3d theta;  // (act, iv, inter)
  Eigen::RowVector3d cross_row;
  double cross_rhs = 0.0;
  double sigma_min = 0.0;
  double condition = 0.0;
  double relevance = 0.0;  // |Cov(x, z | s,u)|
};

/// Builds and solves the population identification system for the acting
/// player's reward block at point t, cell (s,u).
inline IdentSystem identification_system(const JointLaw& law, int t, int s, int u) {
  CellMoments m = cell_moments(law, t, s, u);
  if (m.mass <= 0.0) throw SingularSystem("cell (" + std::to_string(s) + "," + std::to_string(u) + ") has no mass");
  const double c = m.f1 * (1.0 - m.f1);
  const double* r = m.rho;
  IdentSystem sys;
  sys.M << r[1], 0.0, r[2],
           r[4], r[5], r[6],
           m.f4, 0.0, m.f5;
  sys.rhs << r[0], r[3], m.f3;
  sys.cross_row << r[8] - c * m.f4, 0.0, r[9] - c * m.f5;
  sys.cross_rhs = r[7] - c * m.f3;
  sys.relevance = std::abs(m.cov_xz);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sys.M);
  sys.sigma_min = svd.singularValues()(2);
  sys.condition = svd.singularValues()(0) / std::max(sys.sigma_min, 1e-300);
  if (sys.relevance < 1e-10)
    throw SingularSystem("instrument irrelevant at point " + std::to_string(t) + " (|Cov| = " + std::to_string(sys.relevance) + ")");
  if (sys.sigma_min < 1e-10) throw SingularSystem("sigma_min = " + std::to_string(sys.sigma_min));
  sys.theta = sys.M.colPivHouseholderQr().solve(sys.rhs);
  return sys;
}

inline IdentSystem identification_system(const JointLaw& law, int s, int u) {
  return identification_system(law, 0, s, u);
}

/// LHS - RHS of the three covariance identities at the true coefficients.
struct IdentityResiduals {
  double act_cov = 0, iv_cov = 0, cross_cov = 0, a_residual = 0;
};

inline IdentityResiduals identity_residuals(const JointLaw& law, int t, int s, int u, const std::array<double, 3>& th) {
  CellMoments m = cell_moments(law, t, s, u);
  const double c = m.f1 * (1.0 - m.f1);
  const double* r = m.rho;
  IdentityResiduals out;
  out.act_cov = r[0] - (r[1] * th[0] + r[2] * th[2]);
  out.iv_cov = r[3] - (r[4] * th[0] + r[5] * th[1] + r[6] * th[2]);
  out.cross_cov = (r[7] - c * m.f3) - ((r[8] - c * m.f4) * th[0] + (r[9] - c * m.f5) * th[2]);
  out.a_residual = m.f3 - (m.f4 * th[0] + m.f5 * th[2]);
  return out;
}

}  // namespace confgame
