#include <gtest/gtest.h>

#include <algorithm>

#include "brute.hpp"
#include "confgame/confgame.hpp"

using namespace confgame;

namespace {

Engine engine_for(const GameSpec& g, std::size_t n, std::uint64_t seed) {
  Spaces sp = Spaces::of(g);
  GameData d = tabulate(simulate_dataset(g, n, seed).data, sp);
  return Engine(d, basis_for_data(d, BasisKind::Saturated));
}

GameSpec silent(GameSpec g) {
  for (auto& p : g.points)
    for (auto* tab : {&p.rew_act, &p.rew_iv, &p.rew_int, &p.rew_base}) std::fill(tab->begin(), tab->end(), 0.0);
  g.noise = 0;
  return g;
}

}  // namespace

TEST(Regions, ZeroEtaCollapsesToPlugIn) {
  Engine eng = engine_for(make_t2(2), 4000, 1);
  LearnOptions opt;
  opt.eta.zero = true;
  PolicyPair pi = PolicyPair::constant(2, 2, 1, 0.2, 0.7, 0.4);
  PessimisticValue v = pessimistic_value(eng, pi, opt);
  EXPECT_EQ(v.value, v.plug_in);
  EXPECT_EQ(v.plug_in, eng.evaluate(pi).total());
}

TEST(Regions, CentersAreMembers) {
  Engine eng = engine_for(make_t1(), 10000, 2);
  QRegions reg = build_q_regions(eng, PolicyPair::constant(1, 1, 1, 1, 0, 0.5));
  ASSERT_FALSE(reg.blocks.empty());
  for (const auto& b : reg.blocks) {
    EXPECT_TRUE(region_contains(b.region, b.region.center));
    EXPECT_GT(b.region.eta, 0.0);
  }
}

TEST(Regions, RecursionBlocksGetLargerThreshold) {
  Engine eng = engine_for(make_t2(3), 4000, 3);
  QRegions reg = build_q_regions(eng, PolicyPair::constant(3, 2, 1, 0.5, 0.5, 0.5));
  double reward_eta = 0, first_stage = 0;
  for (const auto& b : reg.blocks) {
    if (b.kind == BlockKind::Reward) reward_eta = b.region.eta;
    if (b.kind != BlockKind::Reward && b.t == 0) first_stage = b.region.eta;
  }
  EXPECT_NEAR(first_stage / reward_eta, 16.0, 1e-12);
}

TEST(Pessimism, MonotoneInEta) {
  Engine eng = engine_for(make_t2(2), 4000, 4);
  PolicyPair pi = PolicyPair::constant(2, 2, 1, 0.6, 0.1, 0.5);
  LearnOptions a, b;
  b.eta.c_eta = 2 * a.eta.c_eta;
  double va = pessimistic_value(eng, pi, a).value, vb = pessimistic_value(eng, pi, b).value;
  EXPECT_LE(vb, va);
  // supports scale with sqrt(eta)
  double pa = pessimistic_value(eng, pi, a).plug_in;
  EXPECT_NEAR(pa - vb, std::sqrt(2.0) * (pa - va), 1e-9 * std::abs(pa - va) + 1e-12);
}

TEST(Pessimism, NeverAbovePlugInForAnyCandidate) {
  GameSpec g = make_t1();
  Engine eng = engine_for(g, 3000, 5);
  PolicyClass cls = PolicyClass::full(g);
  for (unsigned long long i = 0; i < static_cast<unsigned long long>(cls.size()); ++i) {
    PessimisticValue v = pessimistic_value(eng, cls.decode(i));
    EXPECT_LE(v.value, v.plug_in) << i;
  }
}

TEST(Pessimism, OptimumValueBelowTruth) {
  GameSpec g = make_t1();
  OptimalPair best = exact_optimal_pair(g, PolicyClass::full(g));
  int below = 0;
  for (int r = 0; r < 20; ++r) below += pessimistic_value(engine_for(g, 10000, 100 + r), best.policy).value <= best.J;
  EXPECT_GE(below, 18);
}

TEST(Pessimism, SampledIsNoLowerThanExact) {
  Engine eng = engine_for(make_t2(2), 4000, 6);
  PolicyPair pi = PolicyPair::constant(2, 2, 1, 0.3, 0.3, 0.5);
  LearnOptions ex, sm;
  sm.method = PessimismMethod::Sampled;
  EXPECT_GE(pessimistic_value(eng, pi, sm).value, pessimistic_value(eng, pi, ex).value - 1e-12);
}

TEST(Pessimism, ValueIsPlugInPlusBlockSupports) {
  Engine eng = engine_for(make_t2(2), 4000, 7);
  PolicyPair pi = PolicyPair::constant(2, 2, 1, 0.4, 0.8, 0.3);
  QRegions reg = build_q_regions(eng, pi);
  for (const auto& b : reg.blocks) {
    LinearMin m = region_min_linear(b.region, b.grad);
    EXPECT_LE(m.value, b.grad.dot(b.region.center) + 1e-12);
  }
  double support = 0;
  for (const auto& b : pessimistic_value(reg, pi).blocks) support += b.support;
  EXPECT_NEAR(pessimistic_value(reg, pi).value, reg.qhat.total() + support, 1e-12);
}

TEST(Learn, SingletonClass) {
  Engine eng = engine_for(make_t1(), 1000, 8);
  PolicyPair only = PolicyPair::constant(1, 1, 1, 0, 1, 1);
  LearnResult r = learn_policy_pair(eng, PolicyClass::of({only}));
  EXPECT_EQ(format_policy(r.policy), format_policy(only));
  EXPECT_EQ(r.candidates, 1u);
}

TEST(Learn, EmptyClassAndCap) {
  Engine eng = engine_for(make_t1(), 500, 9);
  EXPECT_THROW(learn_policy_pair(eng, PolicyClass::of({})), EmptyClass);
  EXPECT_THROW(learn_policy_pair(engine_for(make_t2(2), 500, 9), PolicyClass::full(make_t2(2))), SpaceTooLarge);
  EXPECT_EQ(default_class(make_t2(2)).kind, PolicyClassKind::Stationary);
  EXPECT_EQ(default_class(make_t1()).kind, PolicyClassKind::Full);
}

TEST(Learn, ZeroRewardPicksFirst) {
  GameSpec g = silent(make_t1());
  LearnResult r = learn_policy_pair(engine_for(g, 1000, 10), PolicyClass::full(g));
  EXPECT_EQ(r.index, 0u);
  EXPECT_EQ(r.value.value, 0.0);
  EXPECT_EQ(compute_gap(g, r.policy), 0.0);
}

TEST(Learn, ScalingRewardsScalesValuesKeepsArgmax) {
  GameSpec g = make_t1();
  Engine base = engine_for(g, 4000, 11), big = engine_for(scale_rewards(g, 3.0), 4000, 11);
  PolicyClass cls = PolicyClass::full(g);
  for (unsigned long long i = 0; i < static_cast<unsigned long long>(cls.size()); ++i) {
    double a = pessimistic_value(base, cls.decode(i)).value, b = pessimistic_value(big, cls.decode(i)).value;
    EXPECT_NEAR(b, 3.0 * a, 1e-9 * std::max(1.0, std::abs(b))) << i;
  }
  EXPECT_EQ(learn_policy_pair(base, cls).index, learn_policy_pair(big, cls).index);
}

TEST(Learn, T1GapSmallAtLargeN) {
  GameSpec g = make_t1();
  PolicyClass cls = PolicyClass::full(g);
  double J = exact_optimal_pair(g, cls).J;
  int ok = 0;
  for (int r = 0; r < 10; ++r) ok += compute_gap(g, learn_policy_pair(engine_for(g, 64000, 200 + r), cls).policy, J) <= 0.1;
  EXPECT_GE(ok, 9);
}

TEST(Gap, OracleCases) {
  GameSpec g = make_t1();
  PolicyClass cls = PolicyClass::full(g);
  OptimalPair best = exact_optimal_pair(g, cls);
  EXPECT_EQ(compute_gap(g, best.policy), 0.0);
  PolicyPair lazy = best.policy;
  lazy.alice[0] = {0.0, 0.0};
  EXPECT_NEAR(compute_gap(g, lazy), best.J - brute::value(g, lazy), 1e-12);
  EXPECT_GT(compute_gap(g, lazy), 0.0);
  GameSpec z = silent(g);
  EXPECT_EQ(compute_gap(z, PolicyPair::constant(1, 1, 1, 0.3, 0.9, 0.2)), 0.0);
}
