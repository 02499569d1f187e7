#include <gtest/gtest.h>

#include <cmath>

#include "brute.hpp"
#include "confgame/confgame.hpp"

using namespace confgame;

namespace {

GameSpec deterministic_spec() {
  return build_spec(1, 1, 1, 1, 1, {1.0}, 1.0, 0.0, [](int) {
    PointFunctions f;
    f.act_iv = [](int, int, int, int) { return 0.0; };
    f.act_base = [](int, int, int, int) { return 1.0; };
    f.rew_act = [](int, int, int, int) { return 1.0; };
    return f;
  });
}

/// T2 with Alice's action effect negative everywhere and every other reward 0.
GameSpec negative_action_spec() {
  GameSpec g = without_rewards(make_t2());
  for (int t = 0; t < g.n_points(); t += 2) std::fill(g.points[t].rew_act.begin(), g.points[t].rew_act.end(), -0.7);
  return g;
}

PolicyPair random_policy(const GameSpec& g, std::uint64_t seed) {
  Stream rng(seed);
  PolicyPair p = PolicyPair::constant(g.horizon, g.n_states, g.n_private, 0, 0, rng.uniform());
  for (auto& r : p.alice)
    for (auto& x : r) x = rng.uniform();
  for (auto& r : p.bob)
    for (auto& x : r) x = rng.uniform();
  return p;
}

}  // namespace

TEST(JointLaw, MassesSumToOne) {
  for (const auto& g : {make_t1(), make_t2(), make_random_fixture(4)}) {
    JointLaw law = exact_joint_law(g);
    for (int t = 0; t < g.n_points(); ++t) EXPECT_NEAR(law.total_mass(t), 1.0, 1e-12);
    double atoms = 0;
    enumerate_trajectories(law, [&](const TrajectoryAtom& a) { atoms += a.prob; });
    EXPECT_NEAR(atoms, 1.0, 1e-12);
  }
}

TEST(JointLaw, T1CellCount) {
  // b0, then (v1, v2, a) at Alice's point and (v1, v2, b) at Bob's
  EXPECT_EQ(trajectory_cell_count(make_t1()), 2.0 * 8 * 8);
}

TEST(JointLaw, DeterministicSpecIsOneAtom) {
  int atoms = 0;
  enumerate_trajectories(exact_joint_law(deterministic_spec()), [&](const TrajectoryAtom& a) {
    ++atoms;
    EXPECT_DOUBLE_EQ(a.prob, 1.0);
  });
  EXPECT_EQ(atoms, 1);
}

TEST(JointLaw, T2InitialStateMarginal) {
  GameSpec g = make_t2();
  JointLaw law = exact_joint_law(g);
  for (int s = 0; s < 2; ++s) {
    double m = 0;
    for (int v = 0; v < g.n_v(); ++v)
      for (int z = 0; z < 2; ++z)
        for (int x = 0; x < 2; ++x) m += law.mass(0, s, 0, v, z, x);
    EXPECT_NEAR(m, g.init_state[s], 1e-14);
  }
}

TEST(JointLaw, BudgetEnforced) {
  EXPECT_THROW(exact_joint_law(make_t2(3), behavior_of(make_t2(3)), 10.0), SpaceTooLarge);
  EXPECT_THROW(enumerate_trajectories(exact_joint_law(make_t2(3)), [](const TrajectoryAtom&) {}, 100.0), SpaceTooLarge);
}

TEST(TrueCoefficients, T1) {
  auto tc = true_coefficients(make_t1());
  auto a = tc[0].reward.at(0, 0), b = tc[1].reward.at(0, 0);
  EXPECT_NEAR(a[0], 1.2, 1e-15);
  EXPECT_NEAR(a[1], 0.5, 1e-15);
  EXPECT_NEAR(a[2], 0.25, 1e-15);
  EXPECT_NEAR(b[0], 0.8, 1e-15);
  EXPECT_NEAR(b[1], 0.3, 1e-15);
  EXPECT_NEAR(b[2], 0.1, 1e-15);
}

TEST(TrueCoefficients, ZeroRewards) {
  for (const auto& pt : true_coefficients(without_rewards(make_t2())))
    for (double x : pt.reward.act) EXPECT_EQ(x, 0.0);
}

TEST(TrueCoefficients, StateOnlyEffectUnchanged) {
  // T2 Alice action effect: base by state plus a zero-mean V2 term
  auto tc = true_coefficients(make_t2());
  EXPECT_NEAR(tc[0].reward.at(0, 0)[0], 0.6, 1e-15);
  EXPECT_NEAR(tc[0].reward.at(1, 0)[0], -0.5, 1e-15);
}

TEST(TrueCoefficients, TransitionBlocks) {
  // next=1 probability at Alice's T2 point: 0.3 + 0.1 s + 0.3 x - 0.1 z + 0.1 xz
  auto tc = true_coefficients(make_t2());
  auto t1 = tc[0].transition[1].at(1, 0);
  EXPECT_NEAR(t1[0], 0.3, 1e-15);
  EXPECT_NEAR(t1[1], -0.1, 1e-15);
  EXPECT_NEAR(t1[2], 0.1, 1e-15);
  EXPECT_NEAR(tc[0].transition[1].base[1], 0.4, 1e-15);
}

TEST(PolicyValue, T1HandValues) {
  GameSpec g = make_t1();
  PolicyValue v = exact_policy_value(g, PolicyPair::constant(1, 1, 1, 1, 0.5, 1.0));
  EXPECT_NEAR(v.J_A, 1.95, 1e-14);
  v = exact_policy_value(g, PolicyPair::constant(1, 1, 1, 0, 0.5, 0.5));
  EXPECT_NEAR(v.J_A, 0.25, 1e-14);
  // Bob with a = 0 and b ~ 0.5: 0.5 * 0.8
  EXPECT_NEAR(v.J_B, 0.4, 1e-14);
}

TEST(PolicyValue, ZeroRewardSpec) {
  PolicyValue v = exact_policy_value(without_rewards(make_t2()), random_policy(make_t2(), 3));
  EXPECT_EQ(v.J_A, 0.0);
  EXPECT_EQ(v.J_B, 0.0);
}

TEST(PolicyValue, MatchesBruteRecursion) {
  for (std::uint64_t k = 0; k < 6; ++k) {
    GameSpec g = k < 2 ? make_t2(2 + int(k)) : make_random_fixture(k, 2, 2, 2);
    PolicyPair pi = random_policy(g, 100 + k);
    brute::FullQ b = brute::full_q(g, pi);
    PolicyValue v = exact_policy_value(g, pi);
    EXPECT_NEAR(v.J_A, b.J[0], 1e-12);
    EXPECT_NEAR(v.J_B, b.J[1], 1e-12);
  }
}

TEST(ExactQ, BilinearAndMatchesBrute) {
  GameSpec g = make_random_fixture(9, 2, 2, 2);
  PolicyPair pi = random_policy(g, 5);
  ExactQ q = exact_q(g, pi);
  brute::FullQ b = brute::full_q(g, pi);
  for (int t = 0; t < g.n_points(); ++t)
    for (int P = 0; P < 2; ++P)
      for (int s = 0; s < g.n_states; ++s)
        for (int u = 0; u < g.n_private; ++u)
          for (int v = 0; v < g.n_v(); ++v) {
            std::size_t i = g.at_suv(s, u, v);
            const auto& T = q.q[t][P];
            for (int x = 0; x < 2; ++x)
              for (int z = 0; z < 2; ++z)
                EXPECT_NEAR(T.qx[i] * x + T.qz[i] * z + T.qxz[i] * x * z + T.q0[i], b.at(g, t, P, s, u, v, x, z), 1e-12);
          }
}

TEST(OptimalPair, ZeroRewardTakesFirst) {
  GameSpec g = without_rewards(make_t1());
  OptimalPair o = exact_optimal_pair(g, PolicyClass::full(g));
  EXPECT_EQ(o.J, 0.0);
  EXPECT_EQ(o.index, 0u);
}

TEST(OptimalPair, T1AgreesWithSearch) {
  GameSpec g = make_t1();
  PolicyClass cls = PolicyClass::full(g);
  EXPECT_EQ(cls.size(), 32.0);
  double best = -1e9;
  for (unsigned long long i = 0; i < 32; ++i) best = std::max(best, brute::value(g, cls.decode(i)));
  OptimalPair o = exact_optimal_pair(g, cls);
  EXPECT_NEAR(o.J, best, 1e-14);
  // b0 = 1 pays 0.5 directly; then 1.2 + 0.25 > 0. The b0 = 0 branch is
  // unreached and keeps the lexicographic default.
  EXPECT_EQ(o.policy.init_bob, 1.0);
  EXPECT_EQ(o.policy.alice[0][1], 1.0);
  EXPECT_EQ(o.policy.alice[0][0], 0.0);
  EXPECT_NEAR(o.J, 3.15, 1e-14);
}

TEST(OptimalPair, NegativeActionEffect) {
  GameSpec g = negative_action_spec();
  OptimalPair o = exact_optimal_pair(g, PolicyClass::stationary(g));
  for (const auto& r : o.policy.alice)
    for (double x : r) EXPECT_EQ(x, 0.0);
}

TEST(OptimalPair, DominatesClassAndDpMatchesEnumeration) {
  GameSpec g = make_t2(2);
  PolicyClass st = PolicyClass::stationary(g);
  OptimalPair o = exact_optimal_pair(g, st);
  for (unsigned long long i = 0; i < static_cast<unsigned long long>(st.size()); ++i) {
    double j = brute::value(g, st.decode(i));
    EXPECT_LE(j, o.J + 1e-12);
  }
  GameSpec g1 = make_t2(1);
  PolicyClass full = PolicyClass::full(g1);
  OptimalPair e = exact_optimal_pair(g1, full);
  double best = -1e9;
  for (unsigned long long i = 0; i < static_cast<unsigned long long>(full.size()); ++i)
    best = std::max(best, brute::value(g1, full.decode(i)));
  EXPECT_NEAR(e.J, best, 1e-12);
}

TEST(OptimalPair, EmptyClass) {
  EXPECT_THROW(exact_optimal_pair(make_t1(), PolicyClass::of({})), EmptyClass);
}

TEST(Identification, T1RecoversTruth) {
  IdentSystem sys = identification_system(exact_joint_law(make_t1()), 0, 0);
  EXPECT_NEAR(sys.theta(0), 1.2, 1e-10);
  EXPECT_NEAR(sys.theta(1), 0.5, 1e-10);
  EXPECT_NEAR(sys.theta(2), 0.25, 1e-10);
  // diagnostic row is satisfied too
  EXPECT_NEAR(sys.cross_row.dot(sys.theta), sys.cross_rhs, 1e-12);
}

TEST(Identification, NoRelevanceIsSingular) {
  GameSpec g = make_t1();
  std::fill(g.points[0].act_iv.begin(), g.points[0].act_iv.end(), 0.0);
  EXPECT_THROW(identification_system(exact_joint_law(g), 0, 0), SingularSystem);
}

TEST(Identification, NoConfoundingEqualsSaturatedOls) {
  // rewards free of V: the cell means of y given (x, z) identify the triple directly
  GameSpec g = make_t1();
  for (auto* tab : {&g.points[0].rew_act, &g.points[0].rew_base}) std::fill(tab->begin(), tab->end(), 0.0);
  std::fill(g.points[0].rew_act.begin(), g.points[0].rew_act.end(), 0.9);
  JointLaw law = exact_joint_law(g);
  double m[2][2] = {}, w[2][2] = {};
  for (int v = 0; v < g.n_v(); ++v)
    for (int z = 0; z < 2; ++z)
      for (int x = 0; x < 2; ++x) {
        double p = law.mass(0, 0, 0, v, z, x);
        m[x][z] += p * g.reward_mean(0, 0, 0, v, x, z);
        w[x][z] += p;
      }
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) m[x][z] /= w[x][z];
  Eigen::Vector3d ols(m[1][0] - m[0][0], m[0][1] - m[0][0], m[1][1] - m[1][0] - m[0][1] + m[0][0]);
  IdentSystem sys = identification_system(law, 0, 0);
  EXPECT_LT((sys.theta - ols).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Identities, IdentitiesHoldOnRandomFixtures) {
  for (std::uint64_t f = 11; f < 16; ++f) {
    GameSpec g = make_random_fixture(f);
    ASSERT_TRUE(validate_spec(g).identification_ok());
    JointLaw law = exact_joint_law(g);
    auto tc = true_coefficients(g);
    for (int t = 0; t < g.n_points(); ++t)
      for (int s = 0; s < g.n_states; ++s)
        for (int u = 0; u < g.n_private; ++u) {
          if (cell_moments(law, t, s, u).mass <= 0) continue;
          IdentityResiduals r = identity_residuals(law, t, s, u, tc[t].reward.at(s, u));
          EXPECT_LT(std::abs(r.act_cov), 1e-10);
          EXPECT_LT(std::abs(r.iv_cov), 1e-10);
          EXPECT_LT(std::abs(r.cross_cov), 1e-10);
          EXPECT_LT(std::abs(r.a_residual), 1e-10);
        }
  }
}

TEST(Identities, ViolationShowsUp) {
  GameSpec g = make_t1_shared_v1();
  IdentityResiduals r = identity_residuals(exact_joint_law(g), 0, 0, 0, true_coefficients(g)[0].reward.at(0, 0));
  EXPECT_GT(std::abs(r.iv_cov), 1e-4);
}
