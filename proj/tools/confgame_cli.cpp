#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "confgame/confgame.hpp"
#include "confgame/harness.hpp"

using namespace confgame;

namespace {

constexpr int kExitUsage = 64;

const char* kGrammar =
    "usage: confgame <command> [flags]\n"
    "  simulate  --spec S --n N --out FILE [--seeds LIST]\n"
    "  identify  --data FILE [--spec S] [--basis saturated|polynomial] [--mode oracle|joint]\n"
    "  evaluate  --data FILE --policy FILE [--spec S] [--basis B] [--mode M] [--out QHAT]\n"
    "  learn     --data FILE [--spec S] [--basis B] [--alpha A] [--varsigma V] [--c-eta C] [--out POLICY]\n"
    "  benchmark --spec S --n LIST --seeds LIST [--basis B] [--mode M] [--alpha A] [--varsigma V] [--c-eta C] --out DIR\n"
    "  validate  --spec S [--out CSV]\n"
    "LIST is comma separated; seeds also accept a range a-b.\n"
    "S is a builtin fixture (t1, t2, t2h1, t2h3) or a spec file. CONFGAME_THREADS caps the pool.\n";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw UsageError("not a non-negative integer: '" + s + "'");
  return v;
}

std::vector<std::uint64_t> parse_list(const std::string& text, bool ranges) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string tok = text.substr(start, end - start);
    std::size_t dash = tok.find('-');
    if (ranges && dash != std::string::npos && dash > 0) {
      std::uint64_t a = parse_u64(tok.substr(0, dash)), b = parse_u64(tok.substr(dash + 1));
      if (b < a) throw UsageError("empty range '" + tok + "'");
      for (std::uint64_t v = a; v <= b; ++v) out.push_back(v);
    } else {
      out.push_back(parse_u64(tok));
    }
    start = end + 1;
  }
  return out;
}

struct Common {
  std::string spec, data, policy, out, basis = "saturated", mode = "oracle", n = "", seeds = "1";
  double alpha = 2.0, varsigma = 0.0, c_eta = kDefaultCEta;
};

std::optional<GameSpec> maybe_spec(const Common& c) {
  if (c.spec.empty()) return std::nullopt;
  return load_spec(c.spec);
}

Spaces spaces_for(const std::optional<GameSpec>& g, const OfflineDataset& d) {
  return g ? Spaces::of(*g) : infer_spaces(d);
}

EtaConfig eta_of(const Common& c) {
  EtaConfig e;
  e.alpha = c.alpha;
  e.varsigma = c.varsigma;
  e.c_eta = c.c_eta;
  return e;
}

int cmd_simulate(const Common& c) {
  GameSpec g = load_spec(c.spec);
  std::size_t n = parse_u64(c.n);
  auto seeds = parse_list(c.seeds, true);
  for (std::uint64_t s : seeds) {
    Simulation sim = simulate_dataset(g, n, stream_seed(s, StreamPurpose::kDataset, n));
    std::string path = seeds.size() == 1 ? c.out : c.out + "." + std::to_string(s);
    write_simulation(path, sim);
    std::printf("wrote %s (%zu trajectories)\n", path.c_str(), n);
  }
  return 0;
}

int cmd_identify(const Common& c) {
  auto g = maybe_spec(c);
  OfflineDataset data = read_dataset(c.data);
  Spaces sp = spaces_for(g, data);
  GameData d = tabulate(data, sp);
  SieveBasis b = basis_for_data(d, parse_basis_kind(c.basis));
  NuisanceMode mode = parse_mode(c.mode);
  std::vector<PointTruth> truth;
  if (g) truth = true_coefficients(*g);
  std::printf("step,player,s,u,theta_a,theta_z,theta_az\n");
  std::vector<std::string> errors;
  for (int t = 0; t < 2 * d.horizon; ++t) {
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.points[t].ybar.data(), d.points[t].ybar.size());
    auto rows = coarse_rows(d.points[t], sp, y);
    Eigen::VectorXd coef = mode == NuisanceMode::Joint ? fit_joint(rows, b).coef : fit_rows(rows, b).coef;
    double linf = 0;
    for (int s = 0; s < sp.n_states; ++s)
      for (int u = 0; u < sp.n_private; ++u) {
        double w = 0;
        for (int zx = 0; zx < 4; ++zx) w += d.points[t].w[sp.cell(s, u) * 4 + zx];
        if (w <= 0) continue;
        Eigen::Vector3d th = theta_at(coef, b.eval(s, u));
        std::printf("%s,%s,%d,%d,%s,%s,%s\n", step_label(t).c_str(), t % 2 ? "B" : "A", s, u, fmt_double(th(0)).c_str(),
                    fmt_double(th(1)).c_str(), fmt_double(th(2)).c_str());
        if (g) {
          auto tr = truth[t].reward.at(s, u);
          for (int j = 0; j < 3; ++j) linf = std::max(linf, std::abs(th(j) - tr[j]));
        }
      }
    if (g) errors.push_back(step_label(t) + "," + (t % 2 ? "B" : "A") + "," + fmt_double(linf));
  }
  if (g) {
    std::printf("\nstep,player,linf_error\n");
    for (const auto& e : errors) std::printf("%s\n", e.c_str());
  }
  return 0;
}

int cmd_evaluate(const Common& c) {
  auto g = maybe_spec(c);
  OfflineDataset data = read_dataset(c.data);
  Spaces sp = spaces_for(g, data);
  PolicyPair pi = read_policy(c.policy, data.horizon, sp.n_states, sp.n_private);
  EvalOptions eo;
  eo.basis = parse_basis_kind(c.basis);
  eo.mode = parse_mode(c.mode);
  QHat q = evaluate_multistage(data, sp, pi, eo);
  assert_bilinear(q);
  if (!c.out.empty()) write_file(c.out, format_qhat(q));
  std::printf("J_A=%s\nJ_B=%s\nJ=%s\n", fmt_double(q.J[0]).c_str(), fmt_double(q.J[1]).c_str(),
              fmt_double(q.total()).c_str());
  if (g) {
    PolicyValue v = exact_policy_value(*g, pi);
    std::printf("oracle_J=%s\nabs_error=%s\n", fmt_double(v.total()).c_str(), fmt_double(std::abs(q.total() - v.total())).c_str());
  }
  return 0;
}

int cmd_learn(const Common& c) {
  auto g = maybe_spec(c);
  OfflineDataset data = read_dataset(c.data);
  Spaces sp = spaces_for(g, data);
  GameData d = tabulate(data, sp);
  Engine eng(d, basis_for_data(d, parse_basis_kind(c.basis)));
  PolicyClass cls{PolicyClassKind::Full, d.horizon, sp.n_states, sp.n_private, {}};
  if (cls.size() > kLearnerClassCap) cls.kind = PolicyClassKind::Stationary;
  LearnOptions lo;
  lo.eta = eta_of(c);
  LearnResult r = learn_policy_pair(eng, cls, lo);
  if (!c.out.empty()) write_policy(c.out, r.policy);
  std::printf("candidates=%zu\nindex=%llu\npessimistic_value=%s\nplug_in=%s\n", r.candidates, r.index,
              fmt_double(r.value.value).c_str(), fmt_double(r.value.plug_in).c_str());
  if (r.value.unbounded) std::printf("unbounded_block=%s\n", r.value.offending_block.c_str());
  if (!c.out.empty()) std::printf("policy written to %s\n", c.out.c_str());
  else std::printf("%s", format_policy(r.policy).c_str());
  if (g) {
    PolicyClass gc = cls.kind == PolicyClassKind::Full ? PolicyClass::full(*g) : PolicyClass::stationary(*g);
    std::printf("gap=%s\n", fmt_double(compute_gap(*g, r.policy, gc)).c_str());
  }
  return 0;
}

int cmd_benchmark(const Common& c) {
  ExperimentConfig cfg;
  cfg.spec = c.spec;
  cfg.id = "benchmark";
  cfg.n_grid.clear();
  for (auto v : parse_list(c.n, false)) cfg.n_grid.push_back(v);
  cfg.seeds = parse_list(c.seeds, true);
  cfg.basis = parse_basis_kind(c.basis);
  cfg.mode = parse_mode(c.mode);
  cfg.eta = eta_of(c);
  cfg.out_dir = c.out;
  ExperimentResult r = run_experiment(cfg);
  std::printf("%s", r.summary_csv.c_str());
  return 0;
}

int cmd_validate(const Common& c) {
  ValidationReport rep = validate_spec(load_spec(c.spec));
  if (!c.out.empty()) write_file(c.out, rep.to_csv());
  auto fails = rep.failures();
  std::printf("checks=%zu failures=%zu\n", rep.checks.size(), fails.size());
  for (const auto& f : fails)
    std::printf("FAIL %s point=%s s=%d u=%d block=%s value=%s\n", f.name.c_str(), step_label(f.t).c_str(), f.s, f.u,
                f.block.c_str(), fmt_double(f.value).c_str());
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline learning for turn-based games with private information"};
  app.require_subcommand(1);
  Common c;
  auto add = [&](CLI::App* s, std::initializer_list<const char*> flags) {
    for (std::string f : flags) {
      if (f == "spec") s->add_option("--spec", c.spec, "fixture name or spec file");
      else if (f == "data") s->add_option("--data", c.data, "dataset CSV");
      else if (f == "policy") s->add_option("--policy", c.policy, "policy CSV")->required();
      else if (f == "out") s->add_option("--out", c.out, "output path");
      else if (f == "n") s->add_option("--n", c.n, "sample size(s)");
      else if (f == "seeds") s->add_option("--seeds", c.seeds, "seed list or range");
      else if (f == "basis") s->add_option("--basis", c.basis, "saturated | polynomial");
      else if (f == "mode") s->add_option("--mode", c.mode, "oracle | joint");
      else if (f == "eta") {
        s->add_option("--alpha", c.alpha, "smoothness");
        s->add_option("--varsigma", c.varsigma, "ill-posedness exponent");
        s->add_option("--c-eta", c.c_eta, "region constant");
      }
    }
  };
  auto* sim = app.add_subcommand("simulate", "simulate a behavior dataset");
  add(sim, {"spec", "n", "seeds", "out"});
  auto* idf = app.add_subcommand("identify", "fit reward coefficients");
  add(idf, {"spec", "data", "basis", "mode"});
  auto* ev = app.add_subcommand("evaluate", "off-policy evaluation");
  add(ev, {"spec", "data", "policy", "basis", "mode", "out"});
  auto* ln = app.add_subcommand("learn", "pessimistic policy learning");
  add(ln, {"spec", "data", "basis", "eta", "out"});
  auto* bm = app.add_subcommand("benchmark", "replicated experiment");
  add(bm, {"spec", "n", "seeds", "basis", "mode", "eta", "out"});
  auto* va = app.add_subcommand("validate", "check identification assumptions");
  add(va, {"spec", "out"});

  try {
    app.parse(argc, argv);
    auto need = [](const std::string& v, const char* flag) {
      if (v.empty()) throw UsageError(std::string("missing ") + flag);
    };
    if (sim->parsed()) {
      need(c.spec, "--spec"), need(c.n, "--n"), need(c.out, "--out");
    } else if (idf->parsed() || ev->parsed() || ln->parsed()) {
      need(c.data, "--data");
    } else if (bm->parsed()) {
      need(c.spec, "--spec"), need(c.n, "--n"), need(c.out, "--out");
    } else if (va->parsed()) {
      need(c.spec, "--spec");
    }
    if (sim->parsed() || bm->parsed()) parse_list(c.n, false), parse_list(c.seeds, true);
  } catch (const CLI::CallForHelp&) {
    std::cout << kGrammar;
    return 0;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n" << kGrammar;
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << kGrammar;
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(c);
    if (idf->parsed()) return cmd_identify(c);
    if (ev->parsed()) return cmd_evaluate(c);
    if (ln->parsed()) return cmd_learn(c);
    if (bm->parsed()) return cmd_benchmark(c);
    return cmd_validate(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
