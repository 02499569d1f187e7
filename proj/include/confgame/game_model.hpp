#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/rng.hpp"

namespace confgame {

enum class Player { Alice = 0, Bob = 1 };

inline const char* player_name(Player p) { return p == Player::Alice ? "A" : "B"; }

/// Decision points are numbered t = 0..2H-1. Even t is Alice's step h = t/2+1,
/// odd t is Bob's step h+1/2. At every point the acting player's action is x
/// and the other player's previous action is the instrument z.
inline Player acting_player(int t) { return t % 2 == 0 ? Player::Alice : Player::Bob; }
inline int stage_of(int t) { return t / 2 + 1; }

/// Structural tables of one decision point. Index layouts (row-major):
///   u_law      [s][u]
///   v1_law     [s][v1]
///   v2_law     [s][v2]
///   act_*      [s][u][v]          v = v1 * n_v2 + v2
///   rew_*      [s][u][v]          reward of the acting player
///   kernel     [s][u][v][x][z][s']
struct PointTables {
  std::vector<double> u_law;
  std::vector<double> v1_law;
  std::vector<double> v2_law;
  std::vector<double> act_iv;    // alpha_z
  std::vector<double> act_base;  // alpha_{u,s}
  std::vector<double> rew_act;
  std::vector<double> rew_iv;
  std::vector<double> rew_int;
  std::vector<double> rew_base;
  std::vector<double> kernel;

  bool operator==(const PointTables&) const = default;
};

struct GameSpec {
  int horizon = 1;
  int n_states = 1;
  int n_private = 1;  // |U|
  int n_v1 = 2;
  int n_v2 = 2;
  double noise = 0.1;      // half-width of uniform reward noise
  double init_bob = 0.5;   // P(B_{1/2} = 1)
  std::vector<double> init_state;
  /// Optional grid coordinates in [0,1]^d, one row per state.
  std::vector<std::vector<double>> coords;
  std::vector<PointTables> points;  // size 2H

  int n_v() const { return n_v1 * n_v2; }
  int n_points() const { return 2 * horizon; }
  int suv() const { return n_states * n_private * n_v(); }

  std::size_t at_suv(int s, int u, int v) const {
    return (static_cast<std::size_t>(s) * n_private + u) * n_v() + v;
  }
  std::size_t at_kernel(int s, int u, int v, int x, int z, int sn) const {
    return ((at_suv(s, u, v) * 2 + x) * 2 + z) * n_states + sn;
  }
  double v_prob(int t, int s, int v) const {
    const auto& p = points[t];
    return p.v1_law[s * n_v1 + v / n_v2] * p.v2_law[s * n_v2 + v % n_v2];
  }
  /// Mean reward of the acting player at point t.
  double reward_mean(int t, int s, int u, int v, int x, int z) const {
    const auto& p = points[t];
    std::size_t i = at_suv(s, u, v);
    return p.rew_act[i] * x + p.rew_iv[i] * z + p.rew_int[i] * x * z + p.rew_base[i];
  }
  double action_prob(int t, int s, int u, int v, int z) const {
    const auto& p = points[t];
    std::size_t i = at_suv(s, u, v);
    return p.act_iv[i] * z + p.act_base[i];
  }

  bool operator==(const GameSpec&) const = default;
};

/// Behavior policy tables: prob[t][(s,u,v) * 2 + z] = P(action = 1).
struct BehaviorPolicyPair {
  double init_bob = 0.5;
  std::vector<std::vector<double>> prob;
};

inline BehaviorPolicyPair behavior_of(const GameSpec& spec) {
  BehaviorPolicyPair b;
  b.init_bob = spec.init_bob;
  b.prob.resize(spec.n_points());
  for (int t = 0; t < spec.n_points(); ++t) {
    b.prob[t].resize(static_cast<std::size_t>(spec.suv()) * 2);
    for (int s = 0; s < spec.n_states; ++s)
      for (int u = 0; u < spec.n_private; ++u)
        for (int v = 0; v < spec.n_v(); ++v)
          for (int z = 0; z < 2; ++z)
            b.prob[t][spec.at_suv(s, u, v) * 2 + z] = spec.action_prob(t, s, u, v, z);
  }
  return b;
}

/// Target policy pair. Alice reads (s, u, b_prev); Bob reads (s, a_prev) only,
/// so a V- or U-dependent Bob rule cannot be expressed.
struct PolicyPair {
  int horizon = 1;
  int n_states = 1;
  int n_private = 1;
  double init_bob = 0.5;                   // pi^B_{1/2}(1)
  std::vector<std::vector<double>> alice;  // [h][(s*|U|+u)*2+b_prev] P(A=1)
  std::vector<std::vector<double>> bob;    // [h][s*2+a_prev]         P(B=1)

  static PolicyPair constant(int H, int nS, int nU, double pa, double pb, double p0) {
    PolicyPair p;
    p.horizon = H;
    p.n_states = nS;
    p.n_private = nU;
    p.init_bob = p0;
    p.alice.assign(H, std::vector<double>(static_cast<std::size_t>(nS) * nU * 2, pa));
    p.bob.assign(H, std::vector<double>(static_cast<std::size_t>(nS) * 2, pb));
    return p;
  }

  /// P(action = 1) at decision point t given the observed state, Alice's
  /// private value (ignored for Bob) and the instrument.
  double prob(int t, int s, int u, int z) const {
    int h = t / 2;
    if (t % 2 == 0) return alice[h][(static_cast<std::size_t>(s) * n_private + u) * 2 + z];
    return bob[h][static_cast<std::size_t>(s) * 2 + z];
  }

  bool operator==(const PolicyPair&) const = default;
};

struct StepRecord {
  int s = 0, u = 0, a = 0;
  double r_a = 0.0;
  int s_half = 0, u_half = 0, b = 0;
  double r_b = 0.0;
  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  int b0 = 0;
  std::vector<StepRecord> steps;
  int s_term = 0;
  bool operator==(const Trajectory&) const = default;
};

/// Observed data only. Private values live in HiddenTraces.
struct OfflineDataset {
  int horizon = 1;
  std::vector<Trajectory> traj;
  std::size_t size() const { return traj.size(); }
  bool operator==(const OfflineDataset&) const = default;
};

struct HiddenStep {
  int v1 = 0, v2 = 0, v1_half = 0, v2_half = 0;
  bool operator==(const HiddenStep&) const = default;
};

struct HiddenTraces {
  int horizon = 1;
  std::vector<std::vector<HiddenStep>> traj;
  bool operator==(const HiddenTraces&) const = default;
};

struct Simulation {
  OfflineDataset data;
  HiddenTraces hidden;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw MalformedSpec(msg);
}

inline void check_prob_rows(const std::vector<double>& p, std::size_t rows, int k,
                            const std::string& name) {
  require(p.size() == rows * static_cast<std::size_t>(k), name + ": wrong table size");
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      double v = p[r * k + j];
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, name + ": probability outside [0,1]");
      sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-9, name + ": row does not sum to 1");
  }
}

}  // namespace detail

/// Structural completeness and probability checks.
inline void check_spec(const GameSpec& g) {
  using detail::require;
  require(g.horizon >= 1, "horizon must be positive");
  require(g.n_states >= 1 && g.n_private >= 1 && g.n_v1 >= 1 && g.n_v2 >= 1,
          "space sizes must be positive");
  require(g.noise >= 0.0 && std::isfinite(g.noise), "noise half-width must be >= 0");
  require(g.init_bob >= 0.0 && g.init_bob <= 1.0, "init_bob outside [0,1]");
  detail::check_prob_rows(g.init_state, 1, g.n_states, "init_state");
  if (!g.coords.empty()) {
    require(static_cast<int>(g.coords.size()) == g.n_states, "coords: one row per state");
    for (const auto& c : g.coords)
      require(!c.empty() && c.size() == g.coords[0].size(), "coords: ragged rows");
  }
  require(static_cast<int>(g.points.size()) == g.n_points(), "need 2H decision points");
  const std::size_t suv = g.suv();
  for (int t = 0; t < g.n_points(); ++t) {
    const auto& p = g.points[t];
    std::string tag = "point " + std::to_string(t) + " ";
    detail::check_prob_rows(p.u_law, g.n_states, g.n_private, tag + "u_law");
    detail::check_prob_rows(p.v1_law, g.n_states, g.n_v1, tag + "v1_law");
    detail::check_prob_rows(p.v2_law, g.n_states, g.n_v2, tag + "v2_law");
    for (const auto* tab : {&p.act_iv, &p.act_base, &p.rew_act, &p.rew_iv, &p.rew_int, &p.rew_base})
      require(tab->size() == suv, tag + "coefficient table has wrong size");
    for (std::size_t i = 0; i < suv; ++i) {
      for (int z = 0; z < 2; ++z) {
        double q = p.act_iv[i] * z + p.act_base[i];
        require(std::isfinite(q) && q >= -1e-12 && q <= 1.0 + 1e-12,
                tag + "action probability outside [0,1]");
      }
      for (const auto* tab : {&p.rew_act, &p.rew_iv, &p.rew_int, &p.rew_base})
        require(std::isfinite((*tab)[i]), tag + "non-finite reward coefficient");
    }
    detail::check_prob_rows(p.kernel, suv * 4, g.n_states, tag + "kernel");
  }
}

inline void check_behavior(const GameSpec& g, const BehaviorPolicyPair& b) {
  using detail::require;
  require(b.init_bob >= 0.0 && b.init_bob <= 1.0, "behavior init rule outside [0,1]");
  require(static_cast<int>(b.prob.size()) == g.n_points(), "behavior: need 2H tables");
  for (const auto& row : b.prob) {
    require(row.size() == static_cast<std::size_t>(g.suv()) * 2, "behavior: wrong table size");
    for (double q : row) require(q >= -1e-12 && q <= 1.0 + 1e-12, "behavior probability outside [0,1]");
  }
}

inline void check_policy(const GameSpec& g, const PolicyPair& p) {
  if (p.horizon != g.horizon || p.n_states != g.n_states || p.n_private != g.n_private ||
      static_cast<int>(p.alice.size()) != g.horizon || static_cast<int>(p.bob.size()) != g.horizon)
    throw MalformedSpec("policy pair does not match the spec's spaces");
  for (const auto& r : p.alice)
    if (r.size() != static_cast<std::size_t>(g.n_states) * g.n_private * 2)
      throw MalformedSpec("alice policy table has wrong size");
  for (const auto& r : p.bob)
    if (r.size() != static_cast<std::size_t>(g.n_states) * 2)
      throw MalformedSpec("bob policy table has wrong size");
}

/// Draws one trajectory from its own stream.
inline void simulate_one(const GameSpec& g, const BehaviorPolicyPair& beh, Stream& rng,
                         Trajectory& tr, std::vector<HiddenStep>& hid) {
  const int H = g.horizon;
  tr.steps.assign(H, StepRecord{});
  hid.assign(H, HiddenStep{});
  tr.b0 = rng.bernoulli(beh.init_bob) ? 1 : 0;
  int s = rng.categorical(g.init_state.data(), g.n_states);
  int z = tr.b0;
  auto noise = [&] { return g.noise * (2.0 * rng.uniform() - 1.0); };
  for (int t = 0; t < 2 * H; ++t) {
    const auto& p = g.points[t];
    int u = rng.categorical(&p.u_law[s * g.n_private], g.n_private);
    int v1 = rng.categorical(&p.v1_law[s * g.n_v1], g.n_v1);
    int v2 = rng.categorical(&p.v2_law[s * g.n_v2], g.n_v2);
    int v = v1 * g.n_v2 + v2;
    int x = rng.bernoulli(beh.prob[t][g.at_suv(s, u, v) * 2 + z]) ? 1 : 0;
    double r = g.reward_mean(t, s, u, v, x, z) + noise();
    int sn = rng.categorical(&p.kernel[g.at_kernel(s, u, v, x, z, 0)], g.n_states);
    auto& st = tr.steps[t / 2];
    auto& hs = hid[t / 2];
    if (t % 2 == 0) {
      st.s = s; st.u = u; st.a = x; st.r_a = r;
      hs.v1 = v1; hs.v2 = v2;
    } else {
      st.s_half = s; st.u_half = u; st.b = x; st.r_b = r;
      hs.v1_half = v1; hs.v2_half = v2;
    }
    s = sn;
    z = x;
  }
  tr.s_term = s;
}

/// n i.i.d. trajectories; trajectory i uses stream (seed, trajectory, i), so
/// the result does not depend on evaluation order.
inline Simulation simulate_dataset(const GameSpec& g, const BehaviorPolicyPair& beh,
                                   std::size_t n, std::uint64_t seed) {
  check_spec(g);
  check_behavior(g, beh);
  Simulation out;
  out.data.horizon = g.horizon;
  out.hidden.horizon = g.horizon;
  out.data.traj.resize(n);
  out.hidden.traj.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream rng(stream_seed(seed, StreamPurpose::kTrajectory, i));
    simulate_one(g, beh, rng, out.data.traj[i], out.hidden.traj[i]);
  }
  return out;
}

inline Simulation simulate_dataset(const GameSpec& g, std::size_t n, std::uint64_t seed) {
  return simulate_dataset(g, behavior_of(g), n, seed);
}

}  // namespace confgame
