#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/oracle.hpp"
#include "confgame/ope.hpp"
#include "confgame/smd.hpp"

namespace confgame {

/// Calibrated on T1 by tools/calibrate_eta (coverage >= 90% at n = 1e4).
inline constexpr double kDefaultCEta = 0.0066;

struct EtaConfig {
  double alpha = 2.0;
  double varsigma = 0.0;
  double d = 1.0;
  double c_eta = kDefaultCEta;
  bool reward_units = true;  // multiply by (max |reward|)^2
  bool zero = false;         // every region collapses to its center
};

enum class PessimismMethod { Exact, Sampled };

struct LearnOptions {
  EtaConfig eta;
  PessimismMethod method = PessimismMethod::Exact;
  int sample_pairs = 7;  // K = 1 + 2 * pairs members per sampled region
};

inline double block_eta(const GameData& d, const EtaConfig& cfg, int t, BlockKind kind) {
  if (cfg.zero) return 0.0;
  double w = kind == BlockKind::Reward ? 1.0 : horizon_weight(d.horizon, stage_of(t));
  double eta = eta_schedule(static_cast<double>(std::max<std::size_t>(d.n, 1)), cfg.alpha, cfg.varsigma, cfg.d,
                            cfg.c_eta, w);
  if (cfg.reward_units) eta *= d.reward_scale * d.reward_scale;
  return eta;
}

struct BlockRegion {
  int t = 0, player = 0;
  BlockKind kind = BlockKind::Reward;
  ConfidenceRegion region;
  Eigen::VectorXd grad;  // dJ / d(block coefficients)
  double support = 0.0;  // contribution to the pessimistic value
};

struct QRegions {
  QHat qhat;
  std::vector<BlockRegion> blocks;
};

/// One region per fitted block: centered at the block fit, Hessian of the
/// point's SMD loss, threshold from the eta schedule. Gradients of J with
/// respect to each block come from an adjoint pass, so the union over
/// upstream members is handled exactly (J is affine in every block).
inline QRegions build_q_regions(const Engine& eng, const PolicyPair& pi, const LearnOptions& opt = {}) {
  QRegions out;
  out.qhat = eng.evaluate(pi);
  const GameData& d = eng.data;
  const int T = 2 * d.horizon, k = eng.basis.k;
  const Eigen::MatrixXd Qc = eng.basis.table();
  std::vector<std::array<Eigen::VectorXd, 2>> lambda(T, {Eigen::VectorXd::Zero(4 * k), Eigen::VectorXd::Zero(4 * k)});
  Eigen::VectorXd j0 = initial_weights(d, Qc, pi);
  lambda[0] = {j0, j0};
  // blocks were recorded from t = T-1 down; walk them forward in t
  std::vector<const BlockRecord*> order;
  for (const auto& b : out.qhat.blocks) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->t < b->t; });
  for (const BlockRecord* rec : order) {
    const PointOperator& op = eng.ops[rec->t];
    Eigen::VectorXd gfull = combine_matrix(rec->kind, k).transpose() * lambda[rec->t][rec->player];
    BlockRegion br;
    br.t = rec->t;
    br.player = rec->player;
    br.kind = rec->kind;
    br.grad = gfull.head(3 * k) - op.Z.transpose() * gfull.tail(k);
    double eta = block_eta(d, opt.eta, rec->t, rec->kind);
    br.region = make_region(rec->out.head(3 * k), op.qs, eta, k);
    if (rec->kind != BlockKind::Reward) {
      Eigen::MatrixXd Y = pseudo_matrix(d.points[rec->t], d.spaces, Qc, rec->t, rec->kind, pi);
      lambda[rec->t + 1][rec->player] += Y.transpose() * (op.L.transpose() * gfull);
    }
    out.blocks.push_back(std::move(br));
  }
  return out;
}

struct PessimisticValue {
  PolicyPair policy;
  double value = 0.0;
  double plug_in = 0.0;
  bool unbounded = false;
  std::string offending_block;
  Eigen::VectorXd direction;
  std::vector<BlockRegion> blocks;
};

inline PessimisticValue pessimistic_value(const QRegions& reg, const PolicyPair& pi, const LearnOptions& opt = {}) {
  PessimisticValue pv;
  pv.policy = pi;
  pv.plug_in = reg.qhat.total();
  pv.value = pv.plug_in;
  pv.blocks = reg.blocks;
  for (auto& b : pv.blocks) {
    const auto& r = b.region;
    if (r.eta <= 0) {
      b.support = 0.0;
      continue;
    }
    if (opt.method == PessimismMethod::Sampled && b.t > 0) {
      double m = 0.0;
      for (const auto& p : region_axis_points(r, opt.sample_pairs)) m = std::min(m, b.grad.dot(p - r.center));
      Eigen::VectorXd nw = r.null_proj * b.grad;
      b.support = nw.norm() > 1e-9 * std::max(b.grad.norm(), 1e-300) ? -std::numeric_limits<double>::infinity() : m;
    } else {
      Eigen::VectorXd dir;
      b.support = support_term(b.grad, r.H_pinv, r.null_proj, r.eta, &dir);
      if (std::isinf(b.support) && !pv.unbounded) pv.direction = dir;
    }
    if (std::isinf(b.support) && !pv.unbounded) {
      pv.unbounded = true;
      pv.offending_block = step_label(b.t) + "/" + player_name(static_cast<Player>(b.player)) + "/" + block_name(b.kind);
    }
    pv.value += b.support;
  }
  if (pv.unbounded) pv.value = -std::numeric_limits<double>::infinity();
  return pv;
}

inline PessimisticValue pessimistic_value(const Engine& eng, const PolicyPair& pi, const LearnOptions& opt = {}) {
  return pessimistic_value(build_q_regions(eng, pi, opt), pi, opt);
}

inline constexpr double kLearnerClassCap = 4096;

struct LearnResult {
  PolicyPair policy;
  unsigned long long index = 0;
  PessimisticValue value;
  std::size_t candidates = 0;
};

/// Exhaustive argmax of the pessimistic value over the class; a later
/// candidate replaces the incumbent only if strictly better.
inline LearnResult learn_policy_pair(const Engine& eng, const PolicyClass& cls, const LearnOptions& opt = {}) {
  double n = cls.size();
  if (n < 1) throw EmptyClass("policy class is empty");
  if (n > kLearnerClassCap) throw SpaceTooLarge("learner class has " + std::to_string(n) + " candidates");
  LearnResult best;
  best.value.value = -std::numeric_limits<double>::infinity();
  bool have = false;
  for (unsigned long long i = 0; i < static_cast<unsigned long long>(n); ++i) {
    PolicyPair p = cls.decode(i);
    PessimisticValue v = pessimistic_value(eng, p, opt);
    if (!have || strictly_better(v.value, best.value.value)) {
      best.policy = p;
      best.index = i;
      best.value = std::move(v);
      have = true;
    }
  }
  best.candidates = static_cast<std::size_t>(n);
  return best;
}

/// J(pi*) - J(pi_hat) against the in-class optimum.
inline double compute_gap(const GameSpec& g, const PolicyPair& learned, double J_star) {
  return J_star - exact_policy_value(g, learned).total();
}

inline double compute_gap(const GameSpec& g, const PolicyPair& learned, const PolicyClass& cls) {
  return compute_gap(g, learned, exact_optimal_pair(g, cls).J);
}

inline double compute_gap(const GameSpec& g, const PolicyPair& learned) {
  return compute_gap(g, learned, PolicyClass::full(g));
}

/// Default learner class: the full deterministic class when it fits under
/// the cap, otherwise the stationary class.
inline PolicyClass default_class(const GameSpec& g) {
  PolicyClass full = PolicyClass::full(g);
  if (full.size() <= kLearnerClassCap) return full;
  return PolicyClass::stationary(g);
}

// ---------------------------------------------------------------------------
// Coverage of the true block coefficients
// ---------------------------------------------------------------------------

struct BlockCoverage {
  int t = 0, player = 0;
  BlockKind kind = BlockKind::Reward;
  double delta_loss = 0.0, eta = 0.0;
  bool covered = false;
  Eigen::VectorXd truth, center;
};

struct CoverageReport {
  std::vector<BlockCoverage> blocks;
  bool all() const {
    for (const auto& b : blocks)
      if (!b.covered) return false;
    return true;
  }
  bool reward_blocks() const {
    for (const auto& b : blocks)
      if (b.kind == BlockKind::Reward && !b.covered) return false;
    return true;
  }
};

/// For every block: the true coefficients (population fit with the true
/// upstream Q) against the sample region built from the same upstream.
inline CoverageReport coverage_event(const Engine& pop, const Engine& eng, const PolicyPair& pi,
                                     const LearnOptions& opt = {}) {
  QHat truth = pop.evaluate(pi);
  const GameData& d = eng.data;
  const int k = eng.basis.k;
  const Eigen::MatrixXd Qc = eng.basis.table();
  CoverageReport rep;
  for (const auto& rec : truth.blocks) {
    Eigen::VectorXd y;
    if (rec.kind == BlockKind::Reward)
      y = Eigen::Map<const Eigen::VectorXd>(d.points[rec.t].ybar.data(), d.points[rec.t].ybar.size());
    else
      y = pseudo_matrix(d.points[rec.t], d.spaces, Qc, rec.t, rec.kind, pi) * truth.q[rec.t + 1][rec.player].coef;
    BlockCoverage bc;
    bc.t = rec.t;
    bc.player = rec.player;
    bc.kind = rec.kind;
    bc.truth = rec.out.head(3 * k);
    bc.center = eng.ops[rec.t].fit(y).head(3 * k);
    bc.delta_loss = eng.ops[rec.t].delta_loss(bc.truth, bc.center);
    bc.eta = block_eta(d, opt.eta, rec.t, rec.kind);
    bc.covered = bc.delta_loss <= bc.eta;
    rep.blocks.push_back(std::move(bc));
  }
  return rep;
}

inline Engine population_engine(const GameSpec& g, BasisKind kind = BasisKind::Saturated) {
  GameData d = tabulate(exact_joint_law(g));
  return Engine(d, build_basis(kind, d.spaces, d.spaces.cells()));
}

}  // namespace confgame
