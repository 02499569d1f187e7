#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/sieve.hpp"

namespace confgame {

/// One observation of a decision point in role terms: x is the acting
/// player's action, z the instrument (other player's previous action).
/// `w` is a frequency or probability weight.
struct DecisionRow {
  int s = 0, u = 0, x = 0, z = 0;
  double y = 0.0;
  double w = 1.0;
};

inline constexpr double kClipLo = 1e-6, kClipHi = 1.0 - 1e-6;
inline constexpr double kMinIvVariance = 1e-6;

/// f1 = E[z|s,u], f2 = E[x|s,u,z], f3 = E[(x-f2)y|s,u], f4 = E[(x-f2)x|s,u],
/// f5 = E[(x-f2)xz|s,u]. Values are kept per cell alongside the fits.
struct NuisanceSet {
  SieveBasis basis;
  Eigen::VectorXd c1, c2[2], c3, c4, c5;  // basis coefficients
  int clipped_f1 = 0, clipped_f2 = 0;
  std::array<double, 5> in_sample_mean{};  // weighted means of w4..w8

  double f1(int s, int u) const { return std::clamp(basis.eval(s, u).dot(c1), 0.0, 1.0); }
  double f2(int s, int u, int z) const { return std::clamp(basis.eval(s, u).dot(c2[z]), kClipLo, kClipHi); }
  double f3(int s, int u) const { return basis.eval(s, u).dot(c3); }
  double f4(int s, int u) const { return basis.eval(s, u).dot(c4); }
  double f5(int s, int u) const { return basis.eval(s, u).dot(c5); }
};

namespace detail {

inline void require_rows(const std::vector<DecisionRow>& rows, const SieveBasis& b) {
  std::size_t used = 0;
  for (const auto& r : rows) {
    if (r.s < 0 || r.s >= b.spaces.n_states || r.u < 0 || r.u >= b.spaces.n_private)
      throw InsufficientData("row outside the basis support");
    if (r.w > 0) ++used;
  }
  if (used < static_cast<std::size_t>(b.k))
    throw InsufficientData("need >= " + std::to_string(b.k) + " weighted rows, got " + std::to_string(used));
}

}  // namespace detail

/// Two-stage nuisance fit. The y-free parts (f1, f2, f4, f5) are shared by
/// every outcome on the same rows, so `estimate_nuisances` can take them
/// from `reuse` and refit only f3.
inline NuisanceSet estimate_nuisances(const std::vector<DecisionRow>& rows, const SieveBasis& b,
                                      const NuisanceSet* reuse = nullptr) {
  detail::require_rows(rows, b);
  const int C = b.spaces.cells();
  std::vector<double> cw(C, 0.0);
  for (const auto& r : rows) cw[b.spaces.cell(r.s, r.u)] += r.w;
  Projector P(b, cw);
  NuisanceSet ns;
  if (reuse) {
    ns = *reuse;
  } else {
    ns.basis = b;
    Eigen::VectorXd sz = Eigen::VectorXd::Zero(C), sz2 = Eigen::VectorXd::Zero(C);
    std::vector<double> czw[2] = {std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
    Eigen::VectorXd sx[2] = {Eigen::VectorXd::Zero(C), Eigen::VectorXd::Zero(C)};
    for (const auto& r : rows) {
      int c = b.spaces.cell(r.s, r.u);
      sz(c) += r.w * r.z;
      sz2(c) += r.w * r.z * r.z;
      czw[r.z][c] += r.w;
      sx[r.z](c) += r.w * r.x;
    }
    for (int c = 0; c < C; ++c) {
      if (cw[c] <= 0) continue;
      double m = sz(c) / cw[c];
      double var = sz2(c) / cw[c] - m * m;
      if (var < kMinIvVariance)
        throw DegenerateIV("Var(instrument | s,u) = " + std::to_string(var) + " in cell " + std::to_string(c));
    }
    ns.c1 = P.coef(sz);
    for (int z = 0; z < 2; ++z) ns.c2[z] = Projector(b, czw[z]).coef(sx[z]);
    Eigen::VectorXd s4 = Eigen::VectorXd::Zero(C), s5 = Eigen::VectorXd::Zero(C);
    for (const auto& r : rows) {
      int c = b.spaces.cell(r.s, r.u);
      double e2 = r.x - ns.f2(r.s, r.u, r.z);
      s4(c) += r.w * e2 * r.x;
      s5(c) += r.w * e2 * r.x * r.z;
    }
    ns.c4 = P.coef(s4);
    ns.c5 = P.coef(s5);
    // clip counts over distinct fitted cells
    for (int s = 0; s < b.spaces.n_states; ++s)
      for (int u = 0; u < b.spaces.n_private; ++u) {
        if (cw[b.spaces.cell(s, u)] <= 0) continue;
        double raw1 = b.eval(s, u).dot(ns.c1);
        if (raw1 < 0 || raw1 > 1) ++ns.clipped_f1;
        for (int z = 0; z < 2; ++z) {
          double raw2 = b.eval(s, u).dot(ns.c2[z]);
          if (raw2 < kClipLo || raw2 > kClipHi) ++ns.clipped_f2;
        }
      }
  }
  Eigen::VectorXd s3 = Eigen::VectorXd::Zero(C);
  for (const auto& r : rows) s3(b.spaces.cell(r.s, r.u)) += r.w * (r.x - ns.f2(r.s, r.u, r.z)) * r.y;
  ns.c3 = P.coef(s3);
  double W = 0;
  std::array<double, 5> acc{};
  for (const auto& r : rows) {
    double e2 = r.x - ns.f2(r.s, r.u, r.z);
    acc[0] += r.w * (r.z - ns.f1(r.s, r.u));
    acc[1] += r.w * e2;
    acc[2] += r.w * (e2 * r.y - ns.f3(r.s, r.u));
    acc[3] += r.w * (e2 * r.x - ns.f4(r.s, r.u));
    acc[4] += r.w * (e2 * r.x * r.z - ns.f5(r.s, r.u));
    W += r.w;
  }
  for (int j = 0; j < 5; ++j) ns.in_sample_mean[j] = W > 0 ? acc[j] / W : 0.0;
  return ns;
}

/// rho_1..rho_10 from raw values.
inline std::array<double, 10> rho_features(double y, int x, int z, double f1, double f2) {
  const double e1 = z - f1, e2 = x - f2;
  return {e1 * e2 * y, e1 * e2 * x,     z * e1 * e2 * x,     e1 * y,
          e1 * x,      e1 * z,          e1 * x * z,          z * e1 * e2 * y,
          z * e1 * x * e2, z * e1 * x * z * e2};
}

inline std::array<double, 10> rho_features(const DecisionRow& r, const NuisanceSet& ns) {
  return rho_features(r.y, r.x, r.z, ns.f1(r.s, r.u), ns.f2(r.s, r.u, r.z));
}

enum class NuisanceMode { Oracle, Joint };

inline const char* mode_name(NuisanceMode m) { return m == NuisanceMode::Oracle ? "oracle" : "joint"; }
inline NuisanceMode parse_mode(const std::string& s) {
  if (s == "oracle" || s == "oracle-nuisance") return NuisanceMode::Oracle;
  if (s == "joint") return NuisanceMode::Joint;
  throw ConfigError("unknown mode '" + s + "'");
}

inline constexpr int kCoreMoments = 4;

/// W_i(theta) = phi * theta(s,u) + alpha. Rows of phi: w1, w2, w3 and the
/// action-residual moment w_cov = (x - f2)(y - x*theta_a - x*z*theta_az).
struct MomentRow {
  int s = 0, u = 0;
  double w = 1.0;
  double x = 0, z = 0, y = 0;
  Eigen::Matrix<double, kCoreMoments, 3> phi;
  Eigen::Matrix<double, kCoreMoments, 1> alpha;
  std::array<double, 5> nuisance_resid{};  // w4..w8, joint mode only

  Eigen::Matrix<double, kCoreMoments, 1> eval(const Eigen::Vector3d& th) const { return phi * th + alpha; }
};

struct MomentSystem {
  NuisanceMode mode = NuisanceMode::Oracle;
  std::vector<MomentRow> rows;
  int components() const { return mode == NuisanceMode::Joint ? kCoreMoments + 5 : kCoreMoments; }
};

inline MomentRow moment_row(const DecisionRow& r, const NuisanceSet& ns, NuisanceMode mode) {
  const double f1 = ns.f1(r.s, r.u), f2 = ns.f2(r.s, r.u, r.z);
  const double f3 = ns.f3(r.s, r.u), f4 = ns.f4(r.s, r.u), f5 = ns.f5(r.s, r.u);
  const double c = f1 * (1.0 - f1);
  auto rho = rho_features(r.y, r.x, r.z, f1, f2);
  const double e2 = r.x - f2;
  MomentRow m;
  m.s = r.s;
  m.u = r.u;
  m.w = r.w;
  m.x = r.x;
  m.z = r.z;
  m.y = r.y;
  m.phi << -rho[1], 0.0, -rho[2],
           -rho[4], -rho[5], -rho[6],
           -(rho[8] - c * f4), 0.0, -(rho[9] - c * f5),
           -e2 * r.x, 0.0, -e2 * r.x * r.z;
  m.alpha << rho[0], rho[3], rho[7] - c * f3, e2 * r.y;
  if (mode == NuisanceMode::Joint)
    m.nuisance_resid = {r.z - f1, e2, e2 * r.y - f3, e2 * r.x - f4, e2 * r.x * r.z - f5};
  return m;
}

inline MomentSystem assemble_system(const std::vector<DecisionRow>& rows, const NuisanceSet& ns,
                                    NuisanceMode mode = NuisanceMode::Oracle) {
  MomentSystem sys;
  sys.mode = mode;
  sys.rows.reserve(rows.size());
  for (const auto& r : rows) sys.rows.push_back(moment_row(r, ns, mode));
  return sys;
}

/// Per-cell weighted mean of W(theta) for theta constant over cells.
inline std::vector<Eigen::Matrix<double, kCoreMoments, 1>> cell_mean_moments(const MomentSystem& sys, const Spaces& sp,
                                                                            const Eigen::Vector3d& th) {
  std::vector<Eigen::Matrix<double, kCoreMoments, 1>> out(sp.cells(), Eigen::Matrix<double, kCoreMoments, 1>::Zero());
  std::vector<double> W(sp.cells(), 0.0);
  for (const auto& r : sys.rows) {
    int c = sp.cell(r.s, r.u);
    out[c] += r.w * r.eval(th);
    W[c] += r.w;
  }
  for (int c = 0; c < sp.cells(); ++c)
    if (W[c] > 0) out[c] /= W[c];
  return out;
}

}  // namespace confgame
