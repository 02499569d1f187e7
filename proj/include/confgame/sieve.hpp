#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/game_model.hpp"

namespace confgame {

enum class BasisKind { Saturated, Polynomial };

inline const char* basis_name(BasisKind k) { return k == BasisKind::Saturated ? "saturated" : "polynomial"; }

inline BasisKind parse_basis_kind(const std::string& s) {
  if (s == "saturated") return BasisKind::Saturated;
  if (s == "polynomial") return BasisKind::Polynomial;
  throw ConfigError("unknown basis kind '" + s + "'");
}

/// Finite (s,u) support: state coordinates (grid points) are optional.
struct Spaces {
  int n_states = 1, n_private = 1;
  std::vector<std::vector<double>> coords;  // [s] -> point in [0,1]^d

  static Spaces of(const GameSpec& g) { return {g.n_states, g.n_private, g.coords}; }
  int cells() const { return n_states * n_private; }
  int cell(int s, int u) const { return s * n_private + u; }
};

/// Basis functions q_1..q_k on (s,u). Polynomial terms are centered
/// monomials in the state coordinates, one copy per value of u.
struct SieveBasis {
  BasisKind kind = BasisKind::Saturated;
  Spaces spaces;
  int k = 1;
  int degree = 0;
  std::vector<std::vector<int>> monomials;  // exponent vectors
  std::vector<std::vector<double>> centered;  // [s] -> coords minus mean

  int size() const { return k; }

  Eigen::VectorXd eval(int s, int u) const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(k);
    if (kind == BasisKind::Saturated) {
      q(spaces.cell(s, u)) = 1.0;
      return q;
    }
    const int m = static_cast<int>(monomials.size());
    for (int j = 0; j < m; ++j) {
      double v = 1.0;
      for (std::size_t d = 0; d < monomials[j].size(); ++d) v *= std::pow(centered[s][d], monomials[j][d]);
      q(u * m + j) = v;
    }
    return q;
  }

  /// Row c holds q(s,u)^T for cell c = s*|U| + u.
  Eigen::MatrixXd table() const {
    Eigen::MatrixXd T(spaces.cells(), k);
    for (int s = 0; s < spaces.n_states; ++s)
      for (int u = 0; u < spaces.n_private; ++u) T.row(spaces.cell(s, u)) = eval(s, u).transpose();
    return T;
  }

  bool same_as(const SieveBasis& o) const {
    return kind == o.kind && k == o.k && degree == o.degree && spaces.n_states == o.spaces.n_states &&
           spaces.n_private == o.spaces.n_private;
  }
};

namespace detail {

inline void monomials_up_to(int d, int deg, std::vector<int>& cur, int pos, int left,
                            std::vector<std::vector<int>>& out) {
  if (pos == d) {
    out.push_back(cur);
    return;
  }
  for (int e = 0; e <= left; ++e) {
    cur[pos] = e;
    monomials_up_to(d, deg, cur, pos + 1, left - e, out);
  }
  cur[pos] = 0;
}

inline double binom(int n, int r) {
  double b = 1;
  for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
  return b;
}

inline int numeric_rank(const Eigen::MatrixXd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const auto& ev = es.eigenvalues();
  double top = ev.cwiseAbs().maxCoeff();
  int r = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-10 * std::max(top, 1e-300)) ++r;
  return r;
}

}  // namespace detail

/// Gram matrix sum_c w_c q_c q_c^T / sum_c w_c over cells.
inline Eigen::MatrixXd gram(const SieveBasis& b, const std::vector<double>& cell_weight) {
  Eigen::MatrixXd Q = b.table();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(b.k, b.k);
  double W = 0;
  for (int c = 0; c < Q.rows(); ++c) {
    if (cell_weight[c] <= 0) continue;
    G.noalias() += cell_weight[c] * Q.row(c).transpose() * Q.row(c);
    W += cell_weight[c];
  }
  if (W > 0) G /= W;
  return G;
}

/// Builds a basis. For the polynomial kind the largest degree with at most k
/// terms is used. `support` (cell weights) defaults to uniform on all cells.
inline SieveBasis build_basis(BasisKind kind, const Spaces& sp, int k = 0, const std::vector<double>& support = {}) {
  if (sp.n_states < 1 || sp.n_private < 1) throw ConfigError("empty space");
  SieveBasis b;
  b.kind = kind;
  b.spaces = sp;
  if (kind == BasisKind::Saturated) {
    b.k = sp.cells();
  } else {
    if (k < 1) throw ConfigError("basis size must be >= 1");
    if (k < sp.n_private) throw ConfigError("polynomial basis needs k >= |U|");
    std::vector<std::vector<double>> pts = sp.coords;
    if (pts.empty())
      for (int s = 0; s < sp.n_states; ++s) pts.push_back({sp.n_states > 1 ? double(s) / (sp.n_states - 1) : 0.0});
    const int d = static_cast<int>(pts[0].size());
    int deg = 0;
    while (sp.n_private * detail::binom(d + deg + 1, deg + 1) <= k) ++deg;
    b.degree = deg;
    std::vector<double> mean(d, 0.0);
    for (auto& p : pts)
      for (int j = 0; j < d; ++j) mean[j] += p[j] / pts.size();
    b.centered = pts;
    for (auto& p : b.centered)
      for (int j = 0; j < d; ++j) p[j] -= mean[j];
    std::vector<int> cur(d, 0);
    detail::monomials_up_to(d, deg, cur, 0, deg, b.monomials);
    std::stable_sort(b.monomials.begin(), b.monomials.end(), [](const auto& a, const auto& c) {
      int sa = 0, sc = 0;
      for (int e : a) sa += e;
      for (int e : c) sc += e;
      return sa < sc;
    });
    b.k = sp.n_private * static_cast<int>(b.monomials.size());
  }
  std::vector<double> w = support.empty() ? std::vector<double>(sp.cells(), 1.0) : support;
  int r = detail::numeric_rank(gram(b, w));
  if (r < b.k)
    throw RankDeficientBasis("Gram rank " + std::to_string(r) + " < " + std::to_string(b.k) + " on support");
  return b;
}

/// Default k(n) schedule for polynomial bases: ceil(c * n^(1/3)), capped so
/// the basis stays identifiable on the finite state grid.
inline int k_schedule(std::size_t n, const Spaces& sp, double c = 2.0) {
  int k = static_cast<int>(std::ceil(c * std::cbrt(static_cast<double>(std::max<std::size_t>(n, 1)))));
  return std::max(sp.n_private, std::min(k, sp.cells()));
}

/// Largest well-posed basis of the requested kind for sample size n.
inline SieveBasis basis_for(BasisKind kind, const Spaces& sp, std::size_t n, double c = 2.0) {
  if (kind == BasisKind::Saturated) return build_basis(kind, sp);
  for (int k = k_schedule(n, sp, c); k >= sp.n_private; --k) {
    try {
      return build_basis(kind, sp, k);
    } catch (const RankDeficientBasis&) {
    }
  }
  throw RankDeficientBasis("no identifiable polynomial basis");
}

// ---------------------------------------------------------------------------
// Series projection
// ---------------------------------------------------------------------------

inline constexpr double kRidge = 1e-8;
inline constexpr double kMaxCondition = 1e12;

/// Weighted least squares onto span{q}, set up once per cell-weight vector.
class Projector {
 public:
  Projector() = default;
  Projector(const SieveBasis& b, const std::vector<double>& cell_weight) : basis_(b), Q_(b.table()) {
    total_ = 0;
    for (double w : cell_weight) total_ += w;
    G_ = gram(b, cell_weight);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G_);
    const auto& sv = svd.singularValues();
    condition_ = sv(0) / std::max(sv(sv.size() - 1), 1e-300);
    Eigen::MatrixXd Gr = G_;
    if (!(condition_ <= kMaxCondition)) {
      Gr += kRidge * Eigen::MatrixXd::Identity(b.k, b.k);
      ridge_ = true;
    }
    Ginv_ = Gr.ldlt().solve(Eigen::MatrixXd::Identity(b.k, b.k));
  }

  const SieveBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& G() const { return G_; }
  const Eigen::MatrixXd& G_inv() const { return Ginv_; }
  const Eigen::MatrixXd& Q() const { return Q_; }
  double total_weight() const { return total_; }
  double condition() const { return condition_; }
  bool ridge() const { return ridge_; }

  /// Coefficients from per-cell weighted sums of y.
  Eigen::VectorXd coef(const Eigen::VectorXd& cell_sum) const {
    if (total_ <= 0) return Eigen::VectorXd::Zero(basis_.k);
    return Ginv_ * (Q_.transpose() * cell_sum) / total_;
  }
  /// Fitted values per cell.
  Eigen::VectorXd fitted(const Eigen::VectorXd& cell_sum) const { return Q_ * coef(cell_sum); }

 private:
  SieveBasis basis_;
  Eigen::MatrixXd Q_, G_, Ginv_;
  double total_ = 0.0, condition_ = 1.0;
  bool ridge_ = false;
};

struct ProjectionRow {
  int s = 0, u = 0;
  double w = 1.0;
  std::vector<double> y;
};

struct SeriesFit {
  SieveBasis basis;
  Eigen::MatrixXd coef;  // k x dims
  double condition = 1.0;
  double residual_norm = 0.0;  // weighted RMS residual over all dims
  bool ridge = false;

  double value(int s, int u, int dim = 0) const { return basis.eval(s, u).dot(coef.col(dim)); }
};

inline SeriesFit project_conditional_mean(const std::vector<ProjectionRow>& rows, const SieveBasis& b) {
  std::size_t used = 0;
  for (const auto& r : rows)
    if (r.w > 0) ++used;
  if (used < static_cast<std::size_t>(b.k) || rows.empty())
    throw InsufficientData("projection needs >= " + std::to_string(b.k) + " rows, got " + std::to_string(used));
  const int dims = static_cast<int>(rows[0].y.size());
  const int C = b.spaces.cells();
  std::vector<double> cw(C, 0.0);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(C, dims);
  for (const auto& r : rows) {
    if (static_cast<int>(r.y.size()) != dims) throw InsufficientData("ragged y rows");
    int c = b.spaces.cell(r.s, r.u);
    cw[c] += r.w;
    for (int j = 0; j < dims; ++j) sums(c, j) += r.w * r.y[j];
  }
  Projector P(b, cw);
  SeriesFit fit;
  fit.basis = b;
  fit.coef.resize(b.k, dims);
  for (int j = 0; j < dims; ++j) fit.coef.col(j) = P.coef(sums.col(j));
  fit.condition = P.condition();
  fit.ridge = P.ridge();
  double ss = 0, W = 0;
  for (const auto& r : rows) {
    Eigen::VectorXd q = b.eval(r.s, r.u);
    for (int j = 0; j < dims; ++j) {
      double e = r.y[j] - q.dot(fit.coef.col(j));
      ss += r.w * e * e;
    }
    W += r.w;
  }
  fit.residual_norm = W > 0 ? std::sqrt(ss / W) : 0.0;
  return fit;
}

}  // namespace confgame
