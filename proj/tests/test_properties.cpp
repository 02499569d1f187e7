#include <gtest/gtest.h>

#include <random>
#include <set>

#include "brute.hpp"
#include "confgame/confgame.hpp"

using namespace confgame;

namespace {

PolicyPair random_policy(const GameSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u;
  PolicyPair p = PolicyPair::constant(g.horizon, g.n_states, g.n_private, 0, 0, u(rng));
  for (auto& h : p.alice)
    for (auto& x : h) x = u(rng);
  for (auto& h : p.bob)
    for (auto& x : h) x = u(rng);
  return p;
}

class RandomFixture : public ::testing::TestWithParam<int> {};

}  // namespace

TEST_P(RandomFixture, OracleAgreesWithBruteForce) {
  GameSpec g = make_random_fixture(GetParam());
  std::mt19937_64 rng(GetParam());
  for (int i = 0; i < 5; ++i) {
    PolicyPair pi = random_policy(g, rng);
    EXPECT_NEAR(exact_policy_value(g, pi).total(), brute::value(g, pi), 1e-10);
  }
}

TEST_P(RandomFixture, PopulationEngineReproducesValue) {
  GameSpec g = make_random_fixture(GetParam());
  if (!validate_spec(g).identification_ok()) GTEST_SKIP() << "fixture outside the identified class";
  Engine pop = population_engine(g);
  std::mt19937_64 rng(100 + GetParam());
  for (int i = 0; i < 5; ++i) {
    PolicyPair pi = random_policy(g, rng);
    EXPECT_NEAR(pop.evaluate(pi).total(), brute::value(g, pi), 1e-8);
  }
}

TEST_P(RandomFixture, PessimismBelowPlugIn) {
  GameSpec g = make_random_fixture(GetParam());
  Spaces sp = Spaces::of(g);
  GameData d = tabulate(simulate_dataset(g, 3000, GetParam()).data, sp);
  Engine eng(d, basis_for_data(d, BasisKind::Saturated));
  std::mt19937_64 rng(200 + GetParam());
  for (int i = 0; i < 10; ++i) {
    PessimisticValue v = pessimistic_value(eng, random_policy(g, rng));
    EXPECT_LE(v.value, v.plug_in);
  }
}

TEST_P(RandomFixture, TextRoundTrips) {
  GameSpec g = make_random_fixture(GetParam());
  EXPECT_EQ(parse_spec(format_spec(g)), g);
  Simulation sim = simulate_dataset(g, 50, GetParam());
  EXPECT_EQ(parse_dataset(format_dataset(sim.data)), sim.data);
  EXPECT_EQ(parse_hidden(format_hidden(sim.hidden)), sim.hidden);
  std::mt19937_64 rng(GetParam());
  PolicyPair pi = random_policy(g, rng);
  EXPECT_EQ(format_policy(parse_policy(format_policy(pi), g.horizon, g.n_states, g.n_private)), format_policy(pi));
}

TEST_P(RandomFixture, PlugInValueLinearInInitialRule) {
  GameSpec g = make_random_fixture(GetParam());
  Spaces sp = Spaces::of(g);
  GameData d = tabulate(simulate_dataset(g, 2000, GetParam()).data, sp);
  Engine eng(d, basis_for_data(d, BasisKind::Saturated));
  std::mt19937_64 rng(300 + GetParam());
  PolicyPair a = random_policy(g, rng), b = a, m = a;
  a.init_bob = 0, b.init_bob = 1, m.init_bob = 0.8;
  EXPECT_NEAR(eng.evaluate(m).total(), 0.2 * eng.evaluate(a).total() + 0.8 * eng.evaluate(b).total(), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Fixtures, RandomFixture, ::testing::Range(1, 9));

TEST(Regions, RandomEllipsoids) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + trial % 6;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
    Eigen::MatrixXd A = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd c(n), w(n);
    for (int i = 0; i < n; ++i) c(i) = nd(rng), w(i) = nd(rng);
    double eta = u(rng);
    ConfidenceRegion r = make_region(c, QuadSolver::from(A), eta, 1);
    LinearMin m = region_min_linear(r, w);
    EXPECT_LE(m.value, w.dot(c) + 1e-12);
    EXPECT_NEAR(r.delta_loss(m.argmin), eta, 1e-8 * std::max(1.0, eta));
    // no random member beats the closed form
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd dvec(n);
      for (int i = 0; i < n; ++i) dvec(i) = nd(rng);
      double q = r.delta_loss(c + dvec);
      Eigen::VectorXd x = c + dvec * std::sqrt(eta / q) * u(rng) / 2.0;
      ASSERT_TRUE(region_contains(r, x));
      EXPECT_GE(w.dot(x), m.value - 1e-9);
    }
  }
}

TEST(Seeds, StreamsDoNotCollide) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0ULL, 1ULL, 20240101ULL})
    for (auto p : {StreamPurpose::kTrajectory, StreamPurpose::kDataset, StreamPurpose::kFixture,
                   StreamPurpose::kReplication})
      for (std::uint64_t i = 0; i < 100; ++i) seen.insert(stream_seed(master, p, i));
  EXPECT_EQ(seen.size(), 3u * 4u * 100u);
}
