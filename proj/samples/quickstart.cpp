// Simulate T1, evaluate a policy pair off-policy, then learn one.
#include <cstdio>

#include "confgame/confgame.hpp"

using namespace confgame;

int main() {
  GameSpec g = make_t1();
  Simulation sim = simulate_dataset(g, 20000, 42);
  Spaces sp = Spaces::of(g);
  GameData d = tabulate(sim.data, sp);
  Engine eng(d, basis_for_data(d, BasisKind::Saturated));

  PolicyPair pi = PolicyPair::constant(g.horizon, g.n_states, g.n_private, 1.0, 1.0, 1.0);
  QHat q = eng.evaluate(pi);
  PolicyValue truth = exact_policy_value(g, pi);
  std::printf("J_hat = %.4f  (oracle %.4f)\n", q.total(), truth.total());

  LearnResult r = learn_policy_pair(eng, default_class(g));
  OptimalPair best = exact_optimal_pair(g, default_class(g));
  std::printf("pessimistic value %.4f, plug-in %.4f\n", r.value.value, r.value.plug_in);
  std::printf("gap to in-class optimum: %.4f\n", compute_gap(g, r.policy, best.J));
  return 0;
}
