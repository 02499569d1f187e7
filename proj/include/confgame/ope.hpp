#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/game_model.hpp"
#include "confgame/io.hpp"
#include "confgame/moments.hpp"
#include "confgame/oracle.hpp"
#include "confgame/sieve.hpp"
#include "confgame/smd.hpp"

namespace confgame {

// ---------------------------------------------------------------------------
// Sufficient statistics
// ---------------------------------------------------------------------------

/// Aggregates of one decision point. Coarse cells are (s,u,z,x) with index
/// cell(s,u)*4 + z*2 + x; `next` holds the conditional law of the next
/// point's cell (s',u') given the coarse cell.
struct PointData {
  std::vector<double> w;     // weight per coarse cell
  std::vector<double> ybar;  // mean reward of the acting player
  Eigen::MatrixXd next;      // coarse x cells, rows sum to 1 where w > 0; empty at the last point
};

struct GameData {
  int horizon = 1;
  Spaces spaces;
  std::size_t n = 0;  // trajectories behind the aggregates
  bool population = false;
  std::vector<PointData> points;
  Eigen::VectorXd init_cell;  // law of (S_1, U_1)
  double reward_scale = 0.0;  // max |reward|

  int coarse() const { return spaces.cells() * 4; }
};

inline int coarse_index(const Spaces& sp, int s, int u, int z, int x) { return sp.cell(s, u) * 4 + z * 2 + x; }

inline Spaces infer_spaces(const OfflineDataset& d) {
  Spaces sp{1, 1, {}};
  auto see = [&](int s, int u) {
    sp.n_states = std::max(sp.n_states, s + 1);
    sp.n_private = std::max(sp.n_private, u + 1);
  };
  for (const auto& tr : d.traj) {
    for (const auto& st : tr.steps) {
      see(st.s, st.u);
      see(st.s_half, st.u_half);
    }
    see(tr.s_term, 0);
  }
  return sp;
}

inline GameData tabulate(const OfflineDataset& d, const Spaces& sp) {
  const int H = d.horizon, T = 2 * H, C = sp.cells();
  GameData g;
  g.horizon = H;
  g.spaces = sp;
  g.n = d.size();
  g.points.resize(T);
  std::vector<Eigen::MatrixXd> nextc(T);
  std::vector<std::vector<double>> ysum(T, std::vector<double>(C * 4, 0.0));
  for (int t = 0; t < T; ++t) {
    g.points[t].w.assign(C * 4, 0.0);
    if (t + 1 < T) nextc[t] = Eigen::MatrixXd::Zero(C * 4, C);
  }
  g.init_cell = Eigen::VectorXd::Zero(C);
  auto check = [&](int s, int u) {
    if (s < 0 || s >= sp.n_states || u < 0 || u >= sp.n_private)
      throw SchemaMismatch("dataset value outside declared spaces");
  };
  for (const auto& tr : d.traj) {
    if (static_cast<int>(tr.steps.size()) != H) throw SchemaMismatch("trajectory length differs from horizon");
    for (int t = 0; t < T; ++t) {
      const auto& st = tr.steps[t / 2];
      int s, u, x, z, sn = -1, un = -1;
      double y;
      if (t % 2 == 0) {
        s = st.s, u = st.u, x = st.a, y = st.r_a;
        z = t == 0 ? tr.b0 : tr.steps[t / 2 - 1].b;
        sn = st.s_half, un = st.u_half;
      } else {
        s = st.s_half, u = st.u_half, x = st.b, y = st.r_b, z = st.a;
        if (t / 2 + 1 < H) sn = tr.steps[t / 2 + 1].s, un = tr.steps[t / 2 + 1].u;
      }
      check(s, u);
      int c = coarse_index(sp, s, u, z, x);
      g.points[t].w[c] += 1.0;
      ysum[t][c] += y;
      g.reward_scale = std::max(g.reward_scale, std::abs(y));
      if (t + 1 < T) {
        check(sn, un);
        nextc[t](c, sp.cell(sn, un)) += 1.0;
      }
      if (t == 0) g.init_cell(sp.cell(s, u)) += 1.0;
    }
  }
  if (g.n > 0) g.init_cell /= static_cast<double>(g.n);
  for (int t = 0; t < T; ++t) {
    auto& p = g.points[t];
    p.ybar.assign(C * 4, 0.0);
    for (int c = 0; c < C * 4; ++c)
      if (p.w[c] > 0) p.ybar[c] = ysum[t][c] / p.w[c];
    if (t + 1 < T) {
      p.next = nextc[t];
      for (int c = 0; c < C * 4; ++c)
        if (p.w[c] > 0) p.next.row(c) /= p.w[c];
    }
  }
  return g;
}

/// Aggregates of the exact law: weights are probabilities and rewards are
/// conditional means. `n` only feeds the eta schedule.
inline GameData tabulate(const JointLaw& law, std::size_t n = 0) {
  const GameSpec& s = law.spec;
  Spaces sp = Spaces::of(s);
  const int T = s.n_points(), C = sp.cells();
  GameData g;
  g.horizon = s.horizon;
  g.spaces = sp;
  g.n = n;
  g.population = true;
  g.points.resize(T);
  g.init_cell = Eigen::VectorXd::Zero(C);
  for (int st = 0; st < s.n_states; ++st)
    for (int u = 0; u < s.n_private; ++u)
      g.init_cell(sp.cell(st, u)) = s.init_state[st] * s.points[0].u_law[st * s.n_private + u];
  for (int t = 0; t < T; ++t) {
    auto& p = g.points[t];
    p.w.assign(C * 4, 0.0);
    p.ybar.assign(C * 4, 0.0);
    if (t + 1 < T) p.next = Eigen::MatrixXd::Zero(C * 4, C);
    for (int st = 0; st < s.n_states; ++st)
      for (int u = 0; u < s.n_private; ++u)
        for (int z = 0; z < 2; ++z)
          for (int x = 0; x < 2; ++x) {
            int c = coarse_index(sp, st, u, z, x);
            KahanSum m, ry;
            std::vector<KahanSum> nx(s.n_states);
            for (int v = 0; v < s.n_v(); ++v) {
              double pm = law.mass(t, st, u, v, z, x);
              if (pm == 0.0) continue;
              m.add(pm);
              double mean = s.reward_mean(t, st, u, v, x, z);
              ry.add(pm * mean);
              g.reward_scale = std::max(g.reward_scale, std::abs(mean) + s.noise);
              for (int sn = 0; sn < s.n_states; ++sn)
                nx[sn].add(pm * s.points[t].kernel[s.at_kernel(st, u, v, x, z, sn)]);
            }
            p.w[c] = m.value();
            if (p.w[c] <= 0) continue;
            p.ybar[c] = ry.value() / p.w[c];
            if (t + 1 < T)
              for (int sn = 0; sn < s.n_states; ++sn)
                for (int un = 0; un < s.n_private; ++un)
                  p.next(c, sp.cell(sn, un)) = nx[sn].value() / p.w[c] * s.points[t + 1].u_law[sn * s.n_private + un];
          }
  }
  return g;
}

/// Weighted rows (one per observed coarse cell) for outcome vector y.
inline std::vector<DecisionRow> coarse_rows(const PointData& p, const Spaces& sp, const Eigen::VectorXd& y) {
  std::vector<DecisionRow> rows;
  for (int c = 0; c < static_cast<int>(p.w.size()); ++c) {
    if (p.w[c] <= 0) continue;
    int cell = c / 4;
    rows.push_back({cell / sp.n_private, cell % sp.n_private, c & 1, (c >> 1) & 1, y(c), p.w[c]});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Block fits as linear operators
// ---------------------------------------------------------------------------

/// The two-stage SMD fit at one point is linear in the outcome: out = L y
/// with out = [coef (3k); zeta (k)]. The loss Hessian does not depend on y.
struct PointOperator {
  int t = 0;
  SieveBasis basis;
  Eigen::MatrixXd Qc;  // cells x k
  Eigen::MatrixXd L;   // 4k x coarse
  Eigen::MatrixXd Z;   // k x 3k
  QuadSolver qs;       // of A (H = 2A)
  NuisanceSet nuisances;
  double total_weight = 0.0;

  int k() const { return basis.k; }
  Eigen::VectorXd fit(const Eigen::VectorXd& y) const { return L * y; }
  /// Region Hessian and pseudo-inverse in the 1/2 d^T H d convention.
  Eigen::MatrixXd H_pinv() const { return 0.5 * qs.A_pinv; }
  double delta_loss(const Eigen::VectorXd& c, const Eigen::VectorXd& center) const {
    Eigen::VectorXd d = c - center;
    return d.dot(qs.A * d);
  }
};

inline PointOperator build_operator(const PointData& p, const SieveBasis& b, int t) {
  const int ncoarse = static_cast<int>(p.w.size()), k = b.k;
  PointOperator op;
  op.t = t;
  op.basis = b;
  op.Qc = b.table();
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(ncoarse);
  auto rows0 = coarse_rows(p, b.spaces, y0);
  op.nuisances = estimate_nuisances(rows0, b);
  std::vector<double> cw(b.spaces.cells(), 0.0);
  for (const auto& r : rows0) cw[b.spaces.cell(r.s, r.u)] += r.w;
  Projector P(b, cw);
  op.total_weight = P.total_weight();
  SmdParts parts0 = smd_parts(assemble_system(rows0, op.nuisances), P);
  Eigen::MatrixXd A = smd_hessian_half(parts0, P.G_inv());
  op.qs = QuadSolver::from(A);
  op.Z = parts0.Z;
  op.L = Eigen::MatrixXd::Zero(4 * k, ncoarse);
  for (int c = 0; c < ncoarse; ++c) {
    if (p.w[c] <= 0) continue;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(ncoarse);
    y(c) = 1.0;
    auto rows = coarse_rows(p, b.spaces, y);
    NuisanceSet ns = estimate_nuisances(rows, b, &op.nuisances);
    SmdParts parts = smd_parts(assemble_system(rows, ns), P);
    Eigen::VectorXd bl = smd_linear_term(parts, P.G_inv());
    Eigen::VectorXd coef = -op.qs.A_pinv * bl;
    if ((op.qs.A * coef + bl).norm() > 1e-6 * std::max(bl.norm(), 1e-12))
      throw IllPosedFit("point " + std::to_string(t) + ": outcome has weight on flat loss directions");
    op.L.col(c).head(3 * k) = coef;
    op.L.col(c).tail(k) = parts.zeta_y - op.Z * coef;
  }
  return op;
}

// ---------------------------------------------------------------------------
// Backward recursion
// ---------------------------------------------------------------------------

enum class BlockKind { Reward, NextAction, NextIv, NextInteraction };

inline const char* block_name(BlockKind k) {
  switch (k) {
    case BlockKind::Reward: return "reward";
    case BlockKind::NextAction: return "next_action";
    case BlockKind::NextIv: return "next_iv";
    case BlockKind::NextInteraction: return "next_interaction";
  }
  return "?";
}

/// Blocks whose fitted expectation is multiplied by the acting player's action.
inline bool block_multiplied(BlockKind k) { return k == BlockKind::NextIv || k == BlockKind::NextInteraction; }

/// Maps a block fit [act; iv; int; zeta] into the Q layout [qx; qz; qxz; q0].
inline Eigen::MatrixXd combine_matrix(BlockKind kind, int k) {
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(4 * k, 4 * k);
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
  if (!block_multiplied(kind)) {
    E = Eigen::MatrixXd::Identity(4 * k, 4 * k);
  } else {
    E.block(0, 0, k, k) = I;          // act -> qx
    E.block(0, 3 * k, k, k) = I;      // zeta -> qx
    E.block(2 * k, k, k, k) = I;      // iv -> qxz
    E.block(2 * k, 2 * k, k, k) = I;  // int -> qxz
  }
  return E;
}

/// Coarse pseudo-outcome as a linear map of the next point's Q coefficients.
inline Eigen::MatrixXd pseudo_matrix(const PointData& p, const Spaces& sp, const Eigen::MatrixXd& Qc, int t,
                                     BlockKind kind, const PolicyPair& pi) {
  const int ncoarse = static_cast<int>(p.w.size()), C = sp.cells(), k = static_cast<int>(Qc.cols());
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(ncoarse, 4 * k);
  for (int c = 0; c < ncoarse; ++c) {
    if (p.w[c] <= 0) continue;
    const int x = c & 1;
    for (int cn = 0; cn < C; ++cn) {
      double pr = p.next(c, cn);
      if (pr == 0.0) continue;
      double pn = pi.prob(t + 1, cn / sp.n_private, cn % sp.n_private, x);
      auto q = Qc.row(cn);
      switch (kind) {
        case BlockKind::NextAction:
          Y.block(c, 0, 1, k) += pr * pn * q;
          Y.block(c, 3 * k, 1, k) += pr * q;
          break;
        case BlockKind::NextIv: Y.block(c, k, 1, k) += pr * q; break;
        case BlockKind::NextInteraction: Y.block(c, 2 * k, 1, k) += pr * pn * q; break;
        case BlockKind::Reward: break;
      }
    }
  }
  return Y;
}

/// Fitted Q for one player at one point: Q(s,u,z,x) = qx x + qz z + qxz x z + q0
/// in role terms, stored as a 4k coefficient vector [qx; qz; qxz; q0].
struct PointQ {
  Eigen::VectorXd coef;
  bool structural = false;  // false when identically zero by construction
};

struct BlockRecord {
  int t = 0;
  int player = 0;
  BlockKind kind = BlockKind::Reward;
  Eigen::VectorXd y;    // coarse outcome
  Eigen::VectorXd out;  // [coef; zeta]
};

struct QHat {
  int horizon = 1;
  SieveBasis basis;
  std::vector<std::array<PointQ, 2>> q;  // [t][player]
  std::vector<BlockRecord> blocks;
  double J[2] = {0.0, 0.0};

  double total() const { return J[0] + J[1]; }

  /// (theta, gamma, omega, zeta) in player terms: theta multiplies Alice's
  /// action a, gamma Bob's action b.
  std::array<double, 4> triple(int t, int player, int s, int u) const {
    const int k = basis.k;
    Eigen::VectorXd qv = basis.eval(s, u);
    const auto& c = q[t][player].coef;
    double qx = qv.dot(c.segment(0, k)), qz = qv.dot(c.segment(k, k));
    double qxz = qv.dot(c.segment(2 * k, k)), q0 = qv.dot(c.segment(3 * k, k));
    if (t % 2 == 0) return {qx, qz, qxz, q0};
    return {qz, qx, qxz, q0};
  }
};

/// J weights on the first point's Q coefficients.
inline Eigen::VectorXd initial_weights(const GameData& d, const Eigen::MatrixXd& Qc, const PolicyPair& pi) {
  const int k = static_cast<int>(Qc.cols());
  Eigen::VectorXd j = Eigen::VectorXd::Zero(4 * k);
  const double p0 = pi.init_bob;
  for (int c = 0; c < d.spaces.cells(); ++c) {
    double m = d.init_cell(c);
    if (m == 0) continue;
    int s = c / d.spaces.n_private, u = c % d.spaces.n_private;
    double px0 = pi.prob(0, s, u, 0), px1 = pi.prob(0, s, u, 1);
    auto q = Qc.row(c).transpose();
    j.segment(0, k) += m * ((1 - p0) * px0 + p0 * px1) * q;
    j.segment(k, k) += m * p0 * q;
    j.segment(2 * k, k) += m * p0 * px1 * q;
    j.segment(3 * k, k) += m * q;
  }
  return j;
}

inline void check_policy_shape(const GameData& d, const PolicyPair& pi) {
  if (pi.horizon != d.horizon || pi.n_states != d.spaces.n_states || pi.n_private != d.spaces.n_private)
    throw SchemaMismatch("policy shape does not match the data");
}

inline std::vector<BlockKind> blocks_at(int t, int player, int T, const std::array<bool, 2>& upstream) {
  std::vector<BlockKind> out;
  if (static_cast<int>(acting_player(t)) == player) out.push_back(BlockKind::Reward);
  if (t + 1 < T && upstream[player])
    for (auto k : {BlockKind::NextAction, BlockKind::NextIv, BlockKind::NextInteraction}) out.push_back(k);
  return out;
}

/// Fits a block given its coarse outcome; returns [coef; zeta].
using BlockFitter = std::function<Eigen::VectorXd(int t, const Eigen::VectorXd& y)>;

/// Backward recursion with an arbitrary block fitter. `upstream_data` feeds
/// the pseudo-outcomes (it differs from the fitting data under cross-fitting).
inline QHat run_recursion(const GameData& d, const SieveBasis& b, const PolicyPair& pi, const BlockFitter& fitter,
                          const std::vector<std::array<PointQ, 2>>* upstream_override = nullptr) {
  check_policy_shape(d, pi);
  const int T = 2 * d.horizon, k = b.k;
  const Eigen::MatrixXd Qc = b.table();
  QHat out;
  out.horizon = d.horizon;
  out.basis = b;
  out.q.resize(T);
  for (int t = T - 1; t >= 0; --t) {
    for (int P = 0; P < 2; ++P) {
      PointQ& cur = out.q[t][P];
      cur.coef = Eigen::VectorXd::Zero(4 * k);
      std::array<bool, 2> up{false, false};
      const std::vector<std::array<PointQ, 2>>& src = upstream_override ? *upstream_override : out.q;
      if (t + 1 < T) up = {src[t + 1][0].structural, src[t + 1][1].structural};
      for (BlockKind kind : blocks_at(t, P, T, up)) {
        Eigen::VectorXd y;
        if (kind == BlockKind::Reward)
          y = Eigen::Map<const Eigen::VectorXd>(d.points[t].ybar.data(), d.points[t].ybar.size());
        else
          y = pseudo_matrix(d.points[t], d.spaces, Qc, t, kind, pi) * src[t + 1][P].coef;
        Eigen::VectorXd o = fitter(t, y);
        cur.coef += combine_matrix(kind, k) * o;
        cur.structural = true;
        out.blocks.push_back({t, P, kind, y, o});
      }
    }
  }
  Eigen::VectorXd j0 = initial_weights(d, Qc, pi);
  for (int P = 0; P < 2; ++P) out.J[P] = j0.dot(out.q[0][P].coef);
  return out;
}

struct EvalOptions {
  BasisKind basis = BasisKind::Saturated;
  NuisanceMode mode = NuisanceMode::Oracle;
  bool cross_fit = false;
};

/// Precomputed per-point operators for one dataset.
struct Engine {
  GameData data;
  SieveBasis basis;
  std::vector<PointOperator> ops;

  Engine() = default;
  Engine(GameData d, const SieveBasis& b) : data(std::move(d)), basis(b) {
    for (int t = 0; t < 2 * data.horizon; ++t) {
      try {
        ops.push_back(build_operator(data.points[t], basis, t));
      } catch (const DegenerateIV& e) {
        throw DegenerateIV(std::string(e.what()) + " (point " + std::to_string(t) + ")");
      } catch (const IllPosedFit& e) {
        throw IllPosedFit(std::string(e.what()) + " (point " + std::to_string(t) + ")");
      } catch (const InsufficientData& e) {
        throw InsufficientData(std::string(e.what()) + " (point " + std::to_string(t) + ")");
      }
    }
  }

  QHat evaluate(const PolicyPair& pi) const {
    return run_recursion(data, basis, pi, [this](int t, const Eigen::VectorXd& y) { return ops[t].fit(y); });
  }
};

inline SieveBasis basis_for_data(const GameData& d, BasisKind kind) { return basis_for(kind, d.spaces, std::max<std::size_t>(d.n, 1)); }

namespace detail {

inline BlockFitter joint_fitter(const GameData& d, const SieveBasis& b) {
  return [&d, b](int t, const Eigen::VectorXd& y) {
    auto rows = coarse_rows(d.points[t], d.spaces, y);
    SmdFit f = fit_joint(rows, b);
    Eigen::VectorXd o(4 * b.k);
    o << f.coef, f.zeta;
    return o;
  };
}

inline OfflineDataset fold_of(const OfflineDataset& d, int fold) {
  OfflineDataset f;
  f.horizon = d.horizon;
  for (std::size_t i = fold; i < d.traj.size(); i += 2) f.traj.push_back(d.traj[i]);
  return f;
}

}  // namespace detail

/// Multi-stage OPE on aggregated data.
inline QHat evaluate_multistage(const GameData& d, const PolicyPair& pi, const SieveBasis& b,
                                NuisanceMode mode = NuisanceMode::Oracle) {
  if (mode == NuisanceMode::Joint) return run_recursion(d, b, pi, detail::joint_fitter(d, b));
  return Engine(d, b).evaluate(pi);
}

/// Multi-stage OPE on a dataset. With cross-fitting the trajectories are
/// split by index parity; each fold's blocks use pseudo-outcomes built from
/// the other fold's next-point fit, and J averages the two folds.
inline QHat evaluate_multistage(const OfflineDataset& data, const Spaces& sp, const PolicyPair& pi,
                                const EvalOptions& opt = {}) {
  if (!opt.cross_fit) {
    GameData d = tabulate(data, sp);
    return evaluate_multistage(d, pi, basis_for_data(d, opt.basis), opt.mode);
  }
  GameData f[2] = {tabulate(detail::fold_of(data, 0), sp), tabulate(detail::fold_of(data, 1), sp)};
  SieveBasis b = basis_for_data(f[0], opt.basis);
  check_policy_shape(f[0], pi);
  std::vector<BlockFitter> fit(2);
  std::vector<Engine> eng;
  for (int i = 0; i < 2; ++i) {
    if (opt.mode == NuisanceMode::Joint) {
      fit[i] = detail::joint_fitter(f[i], b);
    } else {
      eng.emplace_back(f[i], b);
    }
  }
  if (opt.mode == NuisanceMode::Oracle)
    for (int i = 0; i < 2; ++i) fit[i] = [&eng, i](int t, const Eigen::VectorXd& y) { return eng[i].ops[t].fit(y); };
  // Interleave: both folds step back together, each reading the other's Q.
  const int T = 2 * data.horizon, k = b.k;
  std::vector<std::array<PointQ, 2>> q[2];
  q[0].resize(T);
  q[1].resize(T);
  const Eigen::MatrixXd Qc = b.table();
  QHat out;
  out.horizon = data.horizon;
  out.basis = b;
  out.q.resize(T);
  for (int t = T - 1; t >= 0; --t)
    for (int i = 0; i < 2; ++i)
      for (int P = 0; P < 2; ++P) {
        const auto& src = q[1 - i];
        PointQ& cur = q[i][t][P];
        cur.coef = Eigen::VectorXd::Zero(4 * k);
        std::array<bool, 2> up{false, false};
        if (t + 1 < T) up = {src[t + 1][0].structural, src[t + 1][1].structural};
        for (BlockKind kind : blocks_at(t, P, T, up)) {
          Eigen::VectorXd y = kind == BlockKind::Reward
                                  ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(f[i].points[t].ybar.data(),
                                                                                      f[i].points[t].ybar.size()))
                                  : Eigen::VectorXd(pseudo_matrix(f[i].points[t], sp, Qc, t, kind, pi) *
                                                    src[t + 1][P].coef);
          cur.coef += combine_matrix(kind, k) * fit[i](t, y);
          cur.structural = true;
        }
      }
  for (int t = 0; t < T; ++t)
    for (int P = 0; P < 2; ++P) {
      out.q[t][P].coef = 0.5 * (q[0][t][P].coef + q[1][t][P].coef);
      out.q[t][P].structural = q[0][t][P].structural;
    }
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd j0 = initial_weights(f[i], Qc, pi);
    for (int P = 0; P < 2; ++P) out.J[P] += 0.5 * j0.dot(q[i][0][P].coef);
  }
  return out;
}

/// H = 1 entry point.
inline QHat evaluate_single_stage(const OfflineDataset& data, const Spaces& sp, const PolicyPair& pi,
                                  const EvalOptions& opt = {}) {
  if (data.horizon != 1) throw SchemaMismatch("single-stage evaluation needs H = 1 data");
  return evaluate_multistage(data, sp, pi, opt);
}

/// Every stored coefficient is finite and the Q layout has exactly the four
/// bilinear slots {x, z, xz, 1}.
inline void assert_bilinear(const QHat& q) {
  const int k = q.basis.k;
  for (std::size_t t = 0; t < q.q.size(); ++t)
    for (int P = 0; P < 2; ++P) {
      const auto& c = q.q[t][P].coef;
      if (c.size() != 4 * k || !c.allFinite())
        throw IllPosedFit("Q at point " + std::to_string(t) + " is not a finite bilinear form");
    }
}

inline std::string step_label(int t) {
  int h = t / 2 + 1;
  return t % 2 == 0 ? std::to_string(h) : std::to_string(h) + ".5";
}

inline std::string format_qhat(const QHat& q) {
  std::ostringstream os;
  os << "step,player,s,u,theta,gamma,omega,zeta\n";
  const auto& sp = q.basis.spaces;
  for (std::size_t t = 0; t < q.q.size(); ++t)
    for (int P = 0; P < 2; ++P)
      for (int s = 0; s < sp.n_states; ++s)
        for (int u = 0; u < sp.n_private; ++u) {
          auto tr = q.triple(static_cast<int>(t), P, s, u);
          os << step_label(static_cast<int>(t)) << ',' << player_name(static_cast<Player>(P)) << ',' << s << ',' << u;
          for (double v : tr) os << ',' << fmt_double(v);
          os << '\n';
        }
  return os.str();
}

}  // namespace confgame
