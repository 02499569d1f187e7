#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/moments.hpp"
#include "confgame/sieve.hpp"

namespace confgame {

/// theta(s,u) = (I_3 kron q(s,u)^T) c with c = [c_act; c_iv; c_int].
inline Eigen::Vector3d theta_at(const Eigen::VectorXd& c, const Eigen::VectorXd& q) {
  const int k = static_cast<int>(q.size());
  return {q.dot(c.segment(0, k)), q.dot(c.segment(k, k)), q.dot(c.segment(2 * k, k))};
}

/// Projected moments e_r = D_r c + d_r (r over the core components), plus
/// the pieces of the intercept projection zeta = zeta_y - Z c.
struct SmdParts {
  std::vector<Eigen::MatrixXd> D;  // k x 3k
  std::vector<Eigen::VectorXd> d;  // k
  Eigen::MatrixXd Z;               // k x 3k
  Eigen::VectorXd zeta_y;          // k
};

inline SmdParts smd_parts(const MomentSystem& sys, const Projector& P) {
  const SieveBasis& b = P.basis();
  const int k = b.k, C = b.spaces.cells();
  std::vector<Eigen::Matrix<double, kCoreMoments, 3>> phi(C, Eigen::Matrix<double, kCoreMoments, 3>::Zero());
  std::vector<Eigen::Matrix<double, kCoreMoments, 1>> alpha(C, Eigen::Matrix<double, kCoreMoments, 1>::Zero());
  Eigen::MatrixXd xz = Eigen::MatrixXd::Zero(C, 4);  // sums of w*(x, z, xz, y)
  for (const auto& r : sys.rows) {
    int c = b.spaces.cell(r.s, r.u);
    phi[c] += r.w * r.phi;
    alpha[c] += r.w * r.alpha;
    xz.row(c) += r.w * Eigen::RowVector4d(r.x, r.z, r.x * r.z, r.y);
  }
  const double W = P.total_weight();
  SmdParts out;
  out.D.assign(kCoreMoments, Eigen::MatrixXd::Zero(k, 3 * k));
  out.d.assign(kCoreMoments, Eigen::VectorXd::Zero(k));
  Eigen::MatrixXd Zs = Eigen::MatrixXd::Zero(k, 3 * k);
  const Eigen::MatrixXd& Q = P.Q();
  for (int c = 0; c < C; ++c) {
    Eigen::VectorXd q = Q.row(c).transpose();
    Eigen::MatrixXd qq = q * q.transpose();
    for (int r = 0; r < kCoreMoments; ++r) {
      for (int j = 0; j < 3; ++j) out.D[r].block(0, j * k, k, k) += phi[c](r, j) * qq;
      out.d[r] += alpha[c](r) * q;
    }
    for (int j = 0; j < 3; ++j) Zs.block(0, j * k, k, k) += xz(c, j) * qq;
  }
  if (W > 0) {
    for (int r = 0; r < kCoreMoments; ++r) {
      out.D[r] /= W;
      out.d[r] /= W;
    }
    Zs /= W;
  }
  out.Z = P.G_inv() * Zs;
  out.zeta_y = P.coef(xz.col(3));
  return out;
}

/// Minimizer of the PSD quadratic c^T A c + 2 b^T c via the pseudo-inverse.
struct QuadSolver {
  Eigen::MatrixXd A, A_pinv, null_proj;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  int rank = 0;

  static QuadSolver from(const Eigen::MatrixXd& A) {
    QuadSolver s;
    s.A = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.A);
    s.eigenvalues = es.eigenvalues();
    s.eigenvectors = es.eigenvectors();
    const int n = static_cast<int>(A.rows());
    double top = n ? s.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
    s.A_pinv = Eigen::MatrixXd::Zero(n, n);
    s.null_proj = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v = s.eigenvectors.col(i);
      if (s.eigenvalues(i) > 1e-10 * std::max(top, 1e-300)) {
        s.A_pinv += v * v.transpose() / s.eigenvalues(i);
        ++s.rank;
      } else {
        s.null_proj += v * v.transpose();
      }
    }
    return s;
  }
  double sigma_min() const { return eigenvalues.size() ? std::max(eigenvalues(0), 0.0) : 0.0; }
};

inline Eigen::MatrixXd smd_hessian_half(const SmdParts& parts, const Eigen::MatrixXd& Ginv) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(parts.D[0].cols(), parts.D[0].cols());
  for (const auto& D : parts.D) A.noalias() += D.transpose() * Ginv * D;
  return A;
}

inline Eigen::VectorXd smd_linear_term(const SmdParts& parts, const Eigen::MatrixXd& Ginv) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(parts.D[0].cols());
  for (std::size_t r = 0; r < parts.D.size(); ++r) b.noalias() += parts.D[r].transpose() * (Ginv * parts.d[r]);
  return b;
}

/// Fitted theta in sieve coefficients, the empirical loss
/// L(c) = sum_r e_r^T G^-1 e_r = c^T A c + 2 b^T c + c0, and diagnostics.
struct SmdFit {
  SieveBasis basis;
  Eigen::VectorXd coef;   // 3k
  Eigen::VectorXd zeta;   // k
  Eigen::MatrixXd A;      // 3k x 3k
  Eigen::VectorXd b;
  double c0 = 0.0;
  double loss = 0.0;
  Eigen::MatrixXd Z;
  Eigen::VectorXd zeta_y;
  double gram_condition = 1.0;
  bool ridge = false;
  int rank = 0;
  double sigma_min = 0.0;
  double total_weight = 0.0;
  // joint mode extras
  Eigen::VectorXd nuisance_coef;
  int iterations = 0;

  Eigen::Vector3d theta(int s, int u) const { return theta_at(coef, basis.eval(s, u)); }
  double intercept(int s, int u) const { return basis.eval(s, u).dot(zeta); }
  double loss_at(const Eigen::VectorXd& c) const { return c.dot(A * c) + 2.0 * b.dot(c) + c0; }
};

inline double gradient_tolerance(const Eigen::VectorXd& b) { return 1e-8 * std::max(b.norm(), 1e-12); }

inline SmdFit fit_smd(const MomentSystem& sys, const SieveBasis& basis) {
  if (sys.rows.empty()) throw InsufficientData("empty moment system");
  std::vector<double> cw(basis.spaces.cells(), 0.0);
  for (const auto& r : sys.rows) cw[basis.spaces.cell(r.s, r.u)] += r.w;
  Projector P(basis, cw);
  SmdParts parts = smd_parts(sys, P);
  SmdFit fit;
  fit.basis = basis;
  fit.A = smd_hessian_half(parts, P.G_inv());
  fit.b = smd_linear_term(parts, P.G_inv());
  fit.c0 = 0;
  for (const auto& d : parts.d) fit.c0 += d.dot(P.G_inv() * d);
  QuadSolver qs = QuadSolver::from(fit.A);
  fit.coef = -qs.A_pinv * fit.b;
  Eigen::VectorXd grad = fit.A * fit.coef + fit.b;
  if (grad.norm() > gradient_tolerance(fit.b))
    throw IllPosedFit("gradient residual " + std::to_string(grad.norm()) + " in null directions");
  fit.loss = std::max(0.0, fit.loss_at(fit.coef));
  fit.Z = parts.Z;
  fit.zeta_y = parts.zeta_y;
  fit.zeta = parts.zeta_y - parts.Z * fit.coef;
  fit.gram_condition = P.condition();
  fit.ridge = P.ridge();
  fit.rank = qs.rank;
  fit.sigma_min = qs.sigma_min();
  fit.total_weight = P.total_weight();
  return fit;
}

/// Two-stage convenience: nuisances, system, fit.
inline SmdFit fit_rows(const std::vector<DecisionRow>& rows, const SieveBasis& basis) {
  NuisanceSet ns = estimate_nuisances(rows, basis);
  return fit_smd(assemble_system(rows, ns), basis);
}

// ---------------------------------------------------------------------------
// Joint estimation of theta and the nuisances
// ---------------------------------------------------------------------------

inline constexpr int kJointMoments = 10;

namespace detail {

struct CoarseRow {
  int s, u, x, z;
  double w, y;
};

inline std::vector<CoarseRow> coarsen(const std::vector<DecisionRow>& rows, const Spaces& sp) {
  std::vector<CoarseRow> out(static_cast<std::size_t>(sp.cells()) * 4);
  for (int c = 0; c < sp.cells(); ++c)
    for (int zx = 0; zx < 4; ++zx) out[c * 4 + zx] = {c / sp.n_private, c % sp.n_private, zx & 1, zx >> 1, 0.0, 0.0};
  for (const auto& r : rows) {
    auto& o = out[sp.cell(r.s, r.u) * 4 + r.z * 2 + r.x];
    o.w += r.w;
    o.y += r.w * r.y;
  }
  std::vector<CoarseRow> kept;
  for (auto& o : out)
    if (o.w > 0) {
      o.y /= o.w;
      kept.push_back(o);
    }
  return kept;
}

/// Whitened stacked moments for parameter vector p = [c(3k); a1; a2_0; a2_1; a3; a4; a5].
inline Eigen::VectorXd joint_residual(const std::vector<CoarseRow>& rows, const Eigen::MatrixXd& Q,
                                      const Eigen::MatrixXd& Lw, double W, const Eigen::VectorXd& p, int k,
                                      int n_private) {
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(k, kJointMoments);
  for (const auto& r : rows) {
    Eigen::VectorXd q = Q.row(r.s * n_private + r.u).transpose();
    Eigen::Vector3d th = theta_at(p.head(3 * k), q);
    auto seg = [&](int j) { return q.dot(p.segment((3 + j) * k, k)); };
    double f1 = seg(0), f2 = seg(1 + r.z), f3 = seg(3), f4 = seg(4), f5 = seg(5);
    double cc = f1 * (1.0 - f1);
    auto rho = rho_features(r.y, r.x, r.z, f1, f2);
    double e2 = r.x - f2;
    double w[kJointMoments] = {
        rho[0] - rho[1] * th(0) - rho[2] * th(2),
        rho[3] - rho[4] * th(0) - rho[5] * th(1) - rho[6] * th(2),
        rho[7] - cc * f3 - (rho[8] - cc * f4) * th(0) - (rho[9] - cc * f5) * th(2),
        e2 * (r.y - r.x * th(0) - r.x * r.z * th(2)),
        r.z - f1,
        (1 - r.z) * e2,
        r.z * e2,
        e2 * r.y - f3,
        e2 * r.x - f4,
        e2 * r.x * r.z - f5};
    for (int j = 0; j < kJointMoments; ++j) E.col(j) += (r.w / W) * w[j] * q;
  }
  Eigen::VectorXd out(k * kJointMoments);
  for (int j = 0; j < kJointMoments; ++j) out.segment(j * k, k) = Lw.transpose() * E.col(j);
  return out;
}

}  // namespace detail

/// Levenberg-Marquardt on the stacked system (w1..w3, w_cov, w4..w8) with
/// every nuisance as a free sieve function, started from the two-stage fit.
inline SmdFit fit_joint(const std::vector<DecisionRow>& rows, const SieveBasis& basis, int max_iter = 200) {
  SmdFit two = fit_rows(rows, basis);
  NuisanceSet ns = estimate_nuisances(rows, basis);
  const int k = basis.k;
  auto cr = detail::coarsen(rows, basis.spaces);
  std::vector<double> cw(basis.spaces.cells(), 0.0);
  for (const auto& r : cr) cw[basis.spaces.cell(r.s, r.u)] += r.w;
  Projector P(basis, cw);
  Eigen::MatrixXd Lw = Eigen::LLT<Eigen::MatrixXd>(P.G_inv()).matrixL();
  Eigen::VectorXd p(9 * k);
  p << two.coef, ns.c1, ns.c2[0], ns.c2[1], ns.c3, ns.c4, ns.c5;
  auto resid = [&](const Eigen::VectorXd& x) {
    return detail::joint_residual(cr, P.Q(), Lw, P.total_weight(), x, k, basis.spaces.n_private);
  };
  Eigen::VectorXd r = resid(p);
  double cost = r.squaredNorm(), lambda = 1e-3;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::MatrixXd J(r.size(), p.size());
    for (int i = 0; i < p.size(); ++i) {
      double h = 1e-6 * std::max(1.0, std::abs(p(i)));
      Eigen::VectorXd pp = p, pm = p;
      pp(i) += h;
      pm(i) -= h;
      J.col(i) = (resid(pp) - resid(pm)) / (2 * h);
    }
    Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * r;
    if (g.norm() < 1e-15) break;
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::MatrixXd M = JtJ;
      M.diagonal() += lambda * (JtJ.diagonal().array() + 1e-12).matrix();
      Eigen::VectorXd step = M.ldlt().solve(-g);
      Eigen::VectorXd pn = p + step;
      Eigen::VectorXd rn = resid(pn);
      double cn = rn.squaredNorm();
      if (cn < cost) {
        improved = true;
        bool tiny = cost - cn < 1e-14 * std::max(cost, 1e-300) || step.norm() < 1e-12 * (1 + p.norm());
        p = pn;
        r = rn;
        cost = cn;
        lambda = std::max(lambda / 10, 1e-12);
        if (tiny) it = max_iter;
      } else {
        lambda *= 10;
      }
    }
    if (!improved) break;
  }
  SmdFit fit = two;
  fit.coef = p.head(3 * k);
  fit.zeta = fit.zeta_y - fit.Z * fit.coef;
  fit.nuisance_coef = p.tail(6 * k);
  fit.loss = cost;
  fit.iterations = std::min(it, max_iter);
  return fit;
}

// ---------------------------------------------------------------------------
// Confidence regions
// ---------------------------------------------------------------------------

/// eta = c_eta * weight * n^(-2 alpha / (2 alpha + 2 varsigma + d)).
inline double eta_schedule(double n, double alpha, double varsigma, double d, double c_eta, double horizon_weight = 1.0) {
  return c_eta * horizon_weight * std::pow(std::max(n, 1.0), -2.0 * alpha / (2.0 * alpha + 2.0 * varsigma + d));
}

/// Weight for a recursion block at integer stage h of an H-stage game.
/// (H-h)^4 vanishes at the last stage; floored at the reward-block weight.
inline double horizon_weight(int H, int h) { return std::max(std::pow(double(H - h), 4), 1.0); }

/// {c : L(c) - L(center) <= eta} with L(c) - L(center) = 1/2 (c-center)^T H (c-center).
struct ConfidenceRegion {
  Eigen::VectorXd center;
  double eta = 0.0;
  Eigen::MatrixXd H;       // 2A
  Eigen::VectorXd g;       // 2b
  double c = 0.0;          // loss at zero
  Eigen::MatrixXd H_pinv;
  Eigen::MatrixXd null_proj;
  Eigen::VectorXd axes_len;  // semi-axis lengths along eigvecs (inf in null space)
  Eigen::MatrixXd axes;
  int basis_k = 0;

  double delta_loss(const Eigen::VectorXd& x) const {
    Eigen::VectorXd d = x - center;
    return 0.5 * d.dot(H * d);
  }
};

inline ConfidenceRegion make_region(const Eigen::VectorXd& center, const QuadSolver& qs, double eta, int basis_k,
                                    const Eigen::VectorXd& b = {}, double c0 = 0.0) {
  ConfidenceRegion r;
  r.center = center;
  r.eta = eta;
  r.H = 2.0 * qs.A;
  r.g = b.size() ? Eigen::VectorXd(2.0 * b) : Eigen::VectorXd(-2.0 * qs.A * center);
  r.c = c0;
  r.H_pinv = 0.5 * qs.A_pinv;
  r.null_proj = qs.null_proj;
  r.axes = qs.eigenvectors;
  r.axes_len.resize(qs.eigenvalues.size());
  double top = qs.eigenvalues.size() ? qs.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < qs.eigenvalues.size(); ++i) {
    double lam = 2.0 * qs.eigenvalues(i);
    r.axes_len(i) = qs.eigenvalues(i) > 1e-10 * std::max(top, 1e-300) ? std::sqrt(2.0 * eta / lam)
                                                                     : std::numeric_limits<double>::infinity();
  }
  r.basis_k = basis_k;
  return r;
}

inline ConfidenceRegion make_region(const SmdFit& fit, double eta) {
  return make_region(fit.coef, QuadSolver::from(fit.A), eta, fit.basis.k, fit.b, fit.c0);
}

inline bool region_contains(const ConfidenceRegion& r, const Eigen::VectorXd& x) {
  if (x.size() != r.center.size())
    throw BasisMismatch("point has " + std::to_string(x.size()) + " coefficients, region " +
                        std::to_string(r.center.size()));
  return r.delta_loss(x) <= r.eta;
}

struct LinearMin {
  double value = 0.0;
  Eigen::VectorXd argmin;
};

/// Support term: min of w.delta over 1/2 delta^T H delta <= eta. Returns
/// -inf when w has a component in the null space of H and eta > 0.
inline double support_term(const Eigen::VectorXd& w, const Eigen::MatrixXd& H_pinv, const Eigen::MatrixXd& null_proj,
                           double eta, Eigen::VectorXd* direction = nullptr) {
  if (eta <= 0.0 || w.size() == 0) return 0.0;
  Eigen::VectorXd nw = null_proj * w;
  if (nw.norm() > 1e-9 * std::max(w.norm(), 1e-300)) {
    if (direction) *direction = nw;
    return -std::numeric_limits<double>::infinity();
  }
  double q = w.dot(H_pinv * w);
  return -std::sqrt(2.0 * eta * std::max(q, 0.0));
}

inline LinearMin region_min_linear(const ConfidenceRegion& r, const Eigen::VectorXd& w) {
  if (w.size() != r.center.size()) throw BasisMismatch("weight vector does not match region basis");
  LinearMin out;
  out.argmin = r.center;
  double base = w.dot(r.center);
  if (r.eta <= 0.0) {
    out.value = base;
    return out;
  }
  Eigen::VectorXd dir;
  double s = support_term(w, r.H_pinv, r.null_proj, r.eta, &dir);
  if (std::isinf(s)) throw UnboundedBelow("objective has weight along a flat direction of the loss");
  double q = w.dot(r.H_pinv * w);
  if (q > 0) out.argmin = r.center - std::sqrt(2.0 * r.eta / q) * (r.H_pinv * w);
  out.value = base + s;
  return out;
}

/// Center plus +/- boundary points along the `pairs` longest finite axes.
inline std::vector<Eigen::VectorXd> region_axis_points(const ConfidenceRegion& r, int pairs) {
  std::vector<int> idx;
  for (int i = 0; i < r.axes_len.size(); ++i)
    if (std::isfinite(r.axes_len(i))) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return r.axes_len(a) > r.axes_len(b); });
  std::vector<Eigen::VectorXd> pts{r.center};
  for (int j = 0; j < pairs && j < static_cast<int>(idx.size()); ++j) {
    Eigen::VectorXd d = r.axes_len(idx[j]) * r.axes.col(idx[j]);
    pts.push_back(r.center + d);
    pts.push_back(r.center - d);
  }
  return pts;
}

}  // namespace confgame
