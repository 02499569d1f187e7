#include <gtest/gtest.h>

#include "confgame/confgame.hpp"

using namespace confgame;

namespace {

std::vector<DecisionRow> alice_rows(const OfflineDataset& d) {
  std::vector<DecisionRow> rows;
  for (const auto& tr : d.traj) {
    const auto& st = tr.steps[0];
    rows.push_back({st.s, st.u, st.a, tr.b0, st.r_a, 1.0});
  }
  return rows;
}

std::vector<DecisionRow> population_rows(const GameSpec& g, int t, GameData* out = nullptr) {
  GameData d = tabulate(exact_joint_law(g));
  const auto& p = d.points[t];
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(p.ybar.data(), p.ybar.size());
  if (out) *out = d;
  return coarse_rows(p, d.spaces, y);
}

}  // namespace

TEST(Rho, PrintedArithmetic) {
  auto r = rho_features(2.0, 1, 1, 0.5, 0.6);
  EXPECT_NEAR(r[0], 0.5 * 0.4 * 2.0, 1e-15);
}

TEST(Rho, ZeroFactors) {
  auto r = rho_features(1.7, 1, 1, 1.0, 0.3);  // z = f1
  for (int i = 0; i < 5; ++i) EXPECT_EQ(r[i], 0.0) << i;
  r = rho_features(1.7, 1, 0, 0.4, 1.0);  // x = f2
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[7], 0.0);
  EXPECT_EQ(r[8], 0.0);
  EXPECT_EQ(r[9], 0.0);
}

TEST(Nuisances, T1Values) {
  Simulation sim = simulate_dataset(make_t1(), 100000, 21);
  NuisanceSet ns = estimate_nuisances(alice_rows(sim.data), build_basis(BasisKind::Saturated, Spaces{1, 1, {}}));
  EXPECT_NEAR(ns.f1(0, 0), 0.5, 0.01);
  EXPECT_NEAR(ns.f2(0, 0, 1) - ns.f2(0, 0, 0), 0.3, 0.015);
  for (double m : ns.in_sample_mean) EXPECT_NEAR(m, 0.0, 1e-10);
}

TEST(Nuisances, DegenerateInstrument) {
  std::vector<DecisionRow> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({0, 0, i % 2, 1, 0.3 * i, 1.0});
  EXPECT_THROW(estimate_nuisances(rows, build_basis(BasisKind::Saturated, Spaces{1, 1, {}})), DegenerateIV);
}

TEST(Nuisances, TooFewRows) {
  std::vector<DecisionRow> rows{{0, 0, 1, 0, 1.0, 1.0}};
  EXPECT_THROW(estimate_nuisances(rows, build_basis(BasisKind::Saturated, Spaces{2, 1, {}})), InsufficientData);
}

TEST(Nuisances, ReuseRefitsOnlyOutcome) {
  Simulation sim = simulate_dataset(make_t1(), 2000, 4);
  auto rows = alice_rows(sim.data);
  SieveBasis b = build_basis(BasisKind::Saturated, Spaces{1, 1, {}});
  NuisanceSet a = estimate_nuisances(rows, b);
  for (auto& r : rows) r.y = 2 * r.y + 1;
  NuisanceSet fresh = estimate_nuisances(rows, b), reused = estimate_nuisances(rows, b, &a);
  EXPECT_NEAR(reused.f3(0, 0), fresh.f3(0, 0), 1e-12);
  EXPECT_EQ(reused.f1(0, 0), a.f1(0, 0));
}

TEST(System, PopulationMomentVanishesAtTruth) {
  for (const auto& g : {make_t1(), make_t2(), make_random_fixture(2)}) {
    auto tc = true_coefficients(g);
    for (int t = 0; t < g.n_points(); ++t) {
      GameData d;
      auto rows = population_rows(g, t, &d);
      SieveBasis b = build_basis(BasisKind::Saturated, d.spaces);
      MomentSystem sys = assemble_system(rows, estimate_nuisances(rows, b));
      for (int s = 0; s < d.spaces.n_states; ++s)
        for (int u = 0; u < d.spaces.n_private; ++u) {
          auto th = tc[t].reward.at(s, u);
          auto m = cell_mean_moments(sys, d.spaces, Eigen::Vector3d(th[0], th[1], th[2]));
          EXPECT_LT(m[d.spaces.cell(s, u)].cwiseAbs().maxCoeff(), 1e-10) << "point " << t;
        }
    }
  }
}

TEST(System, ViolationLeavesMomentNonzero) {
  GameSpec g = make_t1_shared_v1();
  auto rows = population_rows(g, 0);
  SieveBasis b = build_basis(BasisKind::Saturated, Spaces{1, 1, {}});
  MomentSystem sys = assemble_system(rows, estimate_nuisances(rows, b));
  auto th = true_coefficients(g)[0].reward.at(0, 0);
  EXPECT_GT(cell_mean_moments(sys, Spaces{1, 1, {}}, Eigen::Vector3d(th[0], th[1], th[2]))[0].cwiseAbs().maxCoeff(), 1e-3);
}

TEST(System, LinearInTheta) {
  Simulation sim = simulate_dataset(make_t1(), 300, 8);
  auto rows = alice_rows(sim.data);
  SieveBasis b = build_basis(BasisKind::Saturated, Spaces{1, 1, {}});
  MomentSystem sys = assemble_system(rows, estimate_nuisances(rows, b));
  Eigen::Vector3d t1(0.3, -1.0, 2.0), t2(1.5, 0.2, -0.4);
  for (const auto& r : sys.rows) {
    EXPECT_LT((r.eval(t1) - r.eval(t2) - r.phi * (t1 - t2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(r.eval(Eigen::Vector3d::Zero()), r.alpha);
  }
}

TEST(System, PureFeaturePartAtZero) {
  DecisionRow row{0, 0, 1, 1, 2.0, 1.0};
  std::vector<DecisionRow> rows{row, {0, 0, 0, 0, 1.0, 1.0}, {0, 0, 1, 0, 0.5, 1.0}, {0, 0, 0, 1, 0.2, 1.0}};
  SieveBasis b = build_basis(BasisKind::Saturated, Spaces{1, 1, {}});
  NuisanceSet ns = estimate_nuisances(rows, b);
  MomentRow m = moment_row(row, ns, NuisanceMode::Oracle);
  auto rho = rho_features(row, ns);
  EXPECT_NEAR(m.alpha(0), rho[0], 1e-15);
  EXPECT_NEAR(m.alpha(1), rho[3], 1e-15);
  double c = ns.f1(0, 0) * (1 - ns.f1(0, 0));
  EXPECT_NEAR(m.alpha(2), rho[7] - c * ns.f3(0, 0), 1e-15);
}

TEST(System, DuplicatedRowsSameCellMeans) {
  Simulation sim = simulate_dataset(make_t2(), 500, 8);
  std::vector<DecisionRow> rows;
  for (const auto& tr : sim.data.traj) rows.push_back({tr.steps[0].s, 0, tr.steps[0].a, tr.b0, tr.steps[0].r_a, 1.0});
  auto twice = rows;
  twice.insert(twice.end(), rows.begin(), rows.end());
  Spaces sp{2, 1, {}};
  SieveBasis b = build_basis(BasisKind::Saturated, sp);
  Eigen::Vector3d th(0.4, 0.1, 0.2);
  auto a = cell_mean_moments(assemble_system(rows, estimate_nuisances(rows, b)), sp, th);
  auto c = cell_mean_moments(assemble_system(twice, estimate_nuisances(twice, b)), sp, th);
  for (int i = 0; i < 2; ++i) EXPECT_LT((a[i] - c[i]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(System, JointModeAppendsNuisanceResiduals) {
  Simulation sim = simulate_dataset(make_t1(), 200, 8);
  auto rows = alice_rows(sim.data);
  SieveBasis b = build_basis(BasisKind::Saturated, Spaces{1, 1, {}});
  NuisanceSet ns = estimate_nuisances(rows, b);
  MomentSystem sys = assemble_system(rows, ns, NuisanceMode::Joint);
  EXPECT_EQ(sys.components(), kCoreMoments + 5);
  const auto& r = sys.rows[0];
  EXPECT_NEAR(r.nuisance_resid[0], r.z - ns.f1(0, 0), 1e-15);
  EXPECT_NEAR(r.nuisance_resid[1], r.x - ns.f2(0, 0, int(r.z)), 1e-15);
}
