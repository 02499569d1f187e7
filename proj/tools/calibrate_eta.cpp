// Calibrates the eta constant on T1: the smallest c_eta for which every
// block's true coefficients lie in their region in the target fraction of
// replications.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <vector>

#include "confgame/confgame.hpp"
#include "confgame/harness.hpp"

using namespace confgame;

int main(int argc, char** argv) {
  CLI::App app{"calibrate the confidence-region constant"};
  std::size_t n = 10000;
  int reps = 1000;
  double level = 0.9;
  std::uint64_t master = 20240101;
  std::string spec = "t1";
  app.add_option("--n", n, "sample size");
  app.add_option("--reps", reps, "replications");
  app.add_option("--level", level, "target coverage");
  app.add_option("--seed", master, "master seed");
  app.add_option("--spec", spec, "fixture name or spec file");
  CLI11_PARSE(app, argc, argv);

  GameSpec g = load_spec(spec);
  PolicyClass cls = default_class(g);
  OptimalPair best = exact_optimal_pair(g, cls);
  Engine pop = population_engine(g);
  LearnOptions unit;
  unit.eta.c_eta = 1.0;

  std::vector<double> ratio(reps);
  parallel_for(reps, [&](std::size_t r) {
    Simulation sim = simulate_dataset(g, n, stream_seed(master, StreamPurpose::kReplication, r));
    GameData d = tabulate(sim.data, Spaces::of(g));
    Engine eng(d, basis_for(BasisKind::Saturated, d.spaces, n));
    double worst = 0;
    for (const auto& b : coverage_event(pop, eng, best.policy, unit).blocks) worst = std::max(worst, b.delta_loss / b.eta);
    ratio[r] = worst;
  });
  double c = quantile(ratio, level);
  std::printf("n=%zu reps=%d level=%.3f\n", n, reps, level);
  std::printf("ratio quantiles: 0.5=%.6g 0.9=%.6g 0.95=%.6g max=%.6g\n", quantile(ratio, 0.5), quantile(ratio, 0.9),
              quantile(ratio, 0.95), quantile(ratio, 1.0));
  std::printf("c_eta=%.6g\n", c);
  return 0;
}
