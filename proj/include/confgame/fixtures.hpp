#pragma once

#include <functional>
#include <string>

#include "confgame/game_model.hpp"
#include "confgame/rng.hpp"

namespace confgame {

/// Per-point structural functions used to fill a GameSpec. Arguments are
/// (s, u, v1, v2) for coefficient tables and (s, u, v1, v2, x, z) for the
/// probability that the next state is each s'.
struct PointFunctions {
  std::function<double(int, int, int, int)> act_iv, act_base;
  std::function<double(int, int, int, int)> rew_act, rew_iv, rew_int, rew_base;
  std::function<std::vector<double>(int, int, int, int, int, int)> next_state;
  std::function<std::vector<double>(int)> u_law, v1_law, v2_law;
};

inline GameSpec build_spec(int H, int nS, int nU, int nV1, int nV2, std::vector<double> init_state, double init_bob,
                           double noise, const std::function<PointFunctions(int)>& at_point) {
  GameSpec g;
  g.horizon = H;
  g.n_states = nS;
  g.n_private = nU;
  g.n_v1 = nV1;
  g.n_v2 = nV2;
  g.noise = noise;
  g.init_bob = init_bob;
  g.init_state = std::move(init_state);
  g.points.resize(2 * H);
  for (int t = 0; t < 2 * H; ++t) {
    PointFunctions f = at_point(t);
    auto& p = g.points[t];
    auto fill_law = [&](std::vector<double>& dst, const std::function<std::vector<double>(int)>& fn, int k) {
      dst.clear();
      for (int s = 0; s < nS; ++s) {
        std::vector<double> row = fn ? fn(s) : std::vector<double>(k, 1.0 / k);
        dst.insert(dst.end(), row.begin(), row.end());
      }
    };
    fill_law(p.u_law, f.u_law, nU);
    fill_law(p.v1_law, f.v1_law, nV1);
    fill_law(p.v2_law, f.v2_law, nV2);
    std::size_t suv = g.suv();
    for (auto* tab : {&p.act_iv, &p.act_base, &p.rew_act, &p.rew_iv, &p.rew_int, &p.rew_base}) tab->assign(suv, 0.0);
    p.kernel.assign(suv * 4 * nS, 0.0);
    for (int s = 0; s < nS; ++s)
      for (int u = 0; u < nU; ++u)
        for (int v1 = 0; v1 < nV1; ++v1)
          for (int v2 = 0; v2 < nV2; ++v2) {
            int v = v1 * nV2 + v2;
            std::size_t i = g.at_suv(s, u, v);
            auto call = [&](const std::function<double(int, int, int, int)>& fn) { return fn ? fn(s, u, v1, v2) : 0.0; };
            p.act_iv[i] = call(f.act_iv);
            p.act_base[i] = call(f.act_base);
            p.rew_act[i] = call(f.rew_act);
            p.rew_iv[i] = call(f.rew_iv);
            p.rew_int[i] = call(f.rew_int);
            p.rew_base[i] = call(f.rew_base);
            for (int x = 0; x < 2; ++x)
              for (int z = 0; z < 2; ++z) {
                std::vector<double> row = f.next_state ? f.next_state(s, u, v1, v2, x, z) : std::vector<double>{};
                if (row.empty()) {
                  row.assign(nS, 0.0);
                  row[s] = 1.0;
                }
                for (int sn = 0; sn < nS; ++sn) p.kernel[g.at_kernel(s, u, v, x, z, sn)] = row[sn];
              }
          }
  }
  check_spec(g);
  return g;
}

/// Canonical single-stage fixture.
inline GameSpec make_t1() {
  return build_spec(1, 1, 1, 2, 2, {1.0}, 0.5, 0.1, [](int t) {
    PointFunctions f;
    f.act_iv = [](int, int, int, int) { return 0.3; };
    f.act_base = [](int, int, int v1, int) { return 0.2 + 0.2 * v1; };
    f.rew_base = [](int, int, int, int v2) { return 0.6 * (v2 - 0.5); };
    if (t == 0) {
      f.rew_act = [](int, int, int, int v2) { return 1.0 + 0.4 * v2; };
      f.rew_iv = [](int, int, int, int) { return 0.5; };
      f.rew_int = [](int, int, int, int) { return 0.25; };
    } else {
      f.rew_act = [](int, int, int, int v2) { return 0.6 + 0.4 * v2; };
      f.rew_iv = [](int, int, int, int) { return 0.3; };
      f.rew_int = [](int, int, int, int) { return 0.1; };
    }
    return f;
  });
}

/// Two-state family with bilinear transitions. make_t2(2) is the fixture T2.
/// With `transition_effects = false` the next-state law ignores (x, z).
inline GameSpec make_t2(int H = 2, bool transition_effects = true) {
  return build_spec(H, 2, 1, 2, 2, {0.5, 0.5}, 0.5, 0.1, [transition_effects](int t) {
    PointFunctions f;
    const bool alice = t % 2 == 0;
    f.act_iv = [](int, int, int, int) { return 0.3; };
    f.act_base = [](int s, int, int v1, int) { return 0.25 + 0.1 * s + 0.2 * v1; };
    f.rew_base = [](int, int, int, int v2) { return 0.3 * (v2 - 0.5); };
    if (alice) {
      f.rew_act = [](int s, int, int, int v2) { return (s == 0 ? 0.6 : -0.5) + 0.4 * (v2 - 0.5); };
      f.rew_iv = [](int s, int, int, int) { return s == 0 ? 0.2 : 0.1; };
      f.rew_int = [](int s, int, int, int) { return s == 0 ? 0.3 : 0.4; };
      f.next_state = [transition_effects](int s, int, int, int v2, int x, int z) {
        double p = 0.3 + 0.1 * s + 0.2 * (v2 - 0.5);
        if (transition_effects) p += 0.3 * x - 0.1 * z + 0.1 * x * z;
        return std::vector<double>{1.0 - p, p};
      };
    } else {
      f.rew_act = [](int s, int, int, int v2) { return (s == 0 ? -0.3 : 0.5) + 0.4 * (v2 - 0.5); };
      f.rew_iv = [](int s, int, int, int) { return s == 0 ? 0.1 : 0.2; };
      f.rew_int = [](int s, int, int, int) { return s == 0 ? 0.2 : -0.2; };
      f.next_state = [transition_effects](int s, int, int, int v2, int x, int z) {
        double p = 0.4 + 0.1 * s + 0.2 * (v2 - 0.5);
        if (transition_effects) p += -0.2 * x + 0.2 * z;
        return std::vector<double>{1.0 - p, p};
      };
    }
    return f;
  });
}

/// Copy of `g` with every reward coefficient of the chosen players set to 0.
inline GameSpec without_rewards(GameSpec g, bool alice = true, bool bob = true) {
  for (int t = 0; t < g.n_points(); ++t) {
    if ((t % 2 == 0 && !alice) || (t % 2 == 1 && !bob)) continue;
    auto& p = g.points[t];
    for (auto* tab : {&p.rew_act, &p.rew_iv, &p.rew_int, &p.rew_base}) std::fill(tab->begin(), tab->end(), 0.0);
  }
  return g;
}

/// Multiplies every reward coefficient and the noise width by c.
inline GameSpec scale_rewards(GameSpec g, double c) {
  g.noise *= c;
  for (auto& p : g.points)
    for (auto* tab : {&p.rew_act, &p.rew_iv, &p.rew_int, &p.rew_base})
      for (auto& x : *tab) x *= c;
  return g;
}

/// T1 with the action effect and the instrument coefficient both driven by V1,
/// which breaks the orthogonality the estimator relies on.
inline GameSpec make_t1_shared_v1() {
  GameSpec g = make_t1();
  auto& p = g.points[0];
  for (int v1 = 0; v1 < 2; ++v1)
    for (int v2 = 0; v2 < 2; ++v2) {
      std::size_t i = g.at_suv(0, 0, v1 * 2 + v2);
      p.act_iv[i] = 0.1 + 0.4 * v1;
      p.act_base[i] = 0.2;
      p.rew_act[i] = 1.0 + 0.8 * v1;
    }
  check_spec(g);
  return g;
}

/// Random fixture with the disjoint-coordinate design: action probabilities
/// depend on V1, reward and transition coefficients on V2.
inline GameSpec make_random_fixture(std::uint64_t seed, int H = 2, int nS = 2, int nU = 2) {
  Stream rng(stream_seed(seed, StreamPurpose::kFixture, 0));
  auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  auto simplex = [&](int k) {
    std::vector<double> p(k);
    double sum = 0;
    for (auto& x : p) sum += (x = 0.2 + rng.uniform());
    for (auto& x : p) x /= sum;
    return p;
  };
  std::vector<double> init = simplex(nS);
  double init_bob = unif(0.3, 0.7);
  // Draw every table up front so the lambdas below are pure.
  struct Draw {
    std::vector<std::vector<double>> u_law, v1_law, v2_law;
    std::vector<double> aiv, abase, ract, riv, rint, rbase;  // [s][u][v1 or v2]
    std::vector<std::vector<double>> kern;                   // [s][u][v2][x][z] -> row
  };
  std::vector<Draw> draws(2 * H);
  for (auto& d : draws) {
    for (int s = 0; s < nS; ++s) {
      d.u_law.push_back(simplex(nU));
      d.v1_law.push_back(simplex(2));
      d.v2_law.push_back(simplex(2));
    }
    for (int s = 0; s < nS; ++s)
      for (int u = 0; u < nU; ++u)
        for (int v = 0; v < 2; ++v) {
          double iv = unif(0.15, 0.35);
          d.aiv.push_back(iv);
          d.abase.push_back(unif(0.1, 0.85 - iv));
          d.ract.push_back(unif(-1, 1));
          d.riv.push_back(unif(-0.5, 0.5));
          d.rint.push_back(unif(-0.5, 0.5));
          d.rbase.push_back(unif(-0.5, 0.5));
          for (int xz = 0; xz < 4; ++xz) d.kern.push_back(simplex(nS));
        }
  }
  return build_spec(H, nS, nU, 2, 2, init, init_bob, 0.1, [draws, nU](int t) {
    PointFunctions f;
    const Draw& d = draws[t];
    auto idx = [nU](int s, int u, int v) { return (s * nU + u) * 2 + v; };
    f.u_law = [&d](int s) { return d.u_law[s]; };
    f.v1_law = [&d](int s) { return d.v1_law[s]; };
    f.v2_law = [&d](int s) { return d.v2_law[s]; };
    f.act_iv = [&d, idx](int s, int u, int v1, int) { return d.aiv[idx(s, u, v1)]; };
    f.act_base = [&d, idx](int s, int u, int v1, int) { return d.abase[idx(s, u, v1)]; };
    f.rew_act = [&d, idx](int s, int u, int, int v2) { return d.ract[idx(s, u, v2)]; };
    f.rew_iv = [&d, idx](int s, int u, int, int v2) { return d.riv[idx(s, u, v2)]; };
    f.rew_int = [&d, idx](int s, int u, int, int v2) { return d.rint[idx(s, u, v2)]; };
    f.rew_base = [&d, idx](int s, int u, int, int v2) { return d.rbase[idx(s, u, v2)]; };
    f.next_state = [&d, idx](int s, int u, int, int v2, int x, int z) { return d.kern[idx(s, u, v2) * 4 + x * 2 + z]; };
    return f;
  });
}

/// Builtin fixtures addressable by name from the CLI.
inline bool builtin_fixture(const std::string& name, GameSpec& out) {
  if (name == "t1") out = make_t1();
  else if (name == "t2") out = make_t2(2);
  else if (name == "t2h1") out = make_t2(1);
  else if (name == "t2h3") out = make_t2(3);
  else return false;
  return true;
}

}  // namespace confgame
