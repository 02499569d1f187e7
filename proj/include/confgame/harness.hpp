#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/fixtures.hpp"
#include "confgame/io.hpp"
#include "confgame/learner.hpp"
#include "confgame/ope.hpp"
#include "confgame/oracle.hpp"

namespace confgame {

inline constexpr const char* kVersion = "confgame 0.1.0";

/// Builtin fixture name or spec file path.
inline GameSpec load_spec(const std::string& name_or_path) {
  GameSpec g;
  if (builtin_fixture(name_or_path, g)) return g;
  return read_spec(name_or_path);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Pool size: hardware threads, capped by CONFGAME_THREADS.
inline unsigned pool_size() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CONFGAME_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs job(i) for i in [0, count) on the pool. Jobs must write only their
/// own slot of any shared output.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job, unsigned threads = 0) {
  if (threads == 0) threads = pool_size();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) job(i);
    });
  for (auto& t : pool) t.join();
}

/// Type-7 sample quantile.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double h = (v.size() - 1) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ClassChoice { Default, Full, Stationary };

inline PolicyClass make_class(const GameSpec& g, ClassChoice c) {
  switch (c) {
    case ClassChoice::Full: return PolicyClass::full(g);
    case ClassChoice::Stationary: return PolicyClass::stationary(g);
    case ClassChoice::Default: break;
  }
  return default_class(g);
}

inline ClassChoice parse_class(const std::string& s) {
  if (s == "default") return ClassChoice::Default;
  if (s == "full") return ClassChoice::Full;
  if (s == "stationary") return ClassChoice::Stationary;
  throw ConfigError("unknown policy class '" + s + "'");
}

inline const char* class_name(ClassChoice c) {
  return c == ClassChoice::Full ? "full" : c == ClassChoice::Stationary ? "stationary" : "default";
}

struct ExperimentConfig {
  std::string id = "experiment";
  std::string spec = "t1";
  std::vector<std::size_t> n_grid{1000};
  std::vector<std::uint64_t> seeds{1};
  BasisKind basis = BasisKind::Saturated;
  NuisanceMode mode = NuisanceMode::Oracle;
  bool cross_fit = false;
  EtaConfig eta;
  ClassChoice policy_class = ClassChoice::Default;
  std::string out_dir = "out";
  unsigned threads = 0;

  /// Canonical text used for the manifest hash.
  std::string canonical() const {
    std::ostringstream os;
    os << "id=" << id << "\nspec=" << spec << "\nn=";
    for (std::size_t i = 0; i < n_grid.size(); ++i) os << (i ? "," : "") << n_grid[i];
    os << "\nseeds=";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
    os << "\nbasis=" << basis_name(basis) << "\nmode=" << mode_name(mode) << "\ncross_fit=" << cross_fit
       << "\nalpha=" << fmt_double(eta.alpha) << "\nvarsigma=" << fmt_double(eta.varsigma)
       << "\nd=" << fmt_double(eta.d) << "\nc_eta=" << fmt_double(eta.c_eta)
       << "\nclass=" << class_name(policy_class) << "\n";
    return os.str();
  }
};

inline void validate_config(const ExperimentConfig& c) {
  if (c.n_grid.empty()) throw ConfigError("n grid is empty");
  for (std::size_t i = 1; i < c.n_grid.size(); ++i)
    if (c.n_grid[i] <= c.n_grid[i - 1]) throw ConfigError("n grid must be strictly increasing");
  if (c.seeds.empty()) throw ConfigError("need at least one seed");
  GameSpec g;
  if (!builtin_fixture(c.spec, g) && !std::filesystem::exists(c.spec))
    throw ConfigError("spec '" + c.spec + "' is neither a builtin fixture nor a file");
}

// ---------------------------------------------------------------------------
// One (n, seed) cell
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> m{"rmse_theta", "coverage", "j_error", "gap", "pess_value"};
  return m;
}

struct ReportRow {
  std::string experiment;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  bool ok = true;
  std::string message;
};

struct CellTiming {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double ms = 0.0;
};

/// Everything derived from the spec alone, shared by all cells.
struct OracleContext {
  GameSpec spec;
  PolicyClass cls;
  OptimalPair best;
  Engine population;
  std::vector<PointTruth> truth;
};

inline OracleContext make_oracle_context(const ExperimentConfig& c) {
  OracleContext o;
  o.spec = load_spec(c.spec);
  o.cls = make_class(o.spec, c.policy_class);
  o.best = exact_optimal_pair(o.spec, o.cls);
  o.population = population_engine(o.spec, BasisKind::Saturated);
  o.truth = true_coefficients(o.spec);
  return o;
}

inline std::vector<ReportRow> run_cell(const ExperimentConfig& c, const OracleContext& o, std::size_t n,
                                       std::uint64_t seed) {
  std::vector<ReportRow> rows;
  auto row = [&](const std::string& m, double v) { rows.push_back({c.id, n, seed, m, v, true, ""}); };
  Simulation sim = simulate_dataset(o.spec, n, stream_seed(seed, StreamPurpose::kDataset, n));
  Spaces sp = Spaces::of(o.spec);
  GameData d = tabulate(sim.data, sp);
  SieveBasis b = basis_for(c.basis, sp, n);
  Engine eng(d, b);
  // reward-block recovery over every point and reachable cell
  double se = 0;
  int cnt = 0;
  for (int t = 0; t < o.spec.n_points(); ++t) {
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.points[t].ybar.data(), d.points[t].ybar.size());
    Eigen::VectorXd coef;
    if (c.mode == NuisanceMode::Joint) {
      coef = fit_joint(coarse_rows(d.points[t], sp, y), b).coef;
    } else {
      coef = eng.ops[t].fit(y).head(3 * b.k);
    }
    for (int s = 0; s < sp.n_states; ++s)
      for (int u = 0; u < sp.n_private; ++u) {
        if (eng.ops[t].Qc.row(sp.cell(s, u)).norm() == 0) continue;
        double cw = 0;
        for (int zx = 0; zx < 4; ++zx) cw += d.points[t].w[sp.cell(s, u) * 4 + zx];
        if (cw <= 0) continue;
        Eigen::Vector3d th = theta_at(coef, b.eval(s, u));
        auto tr = o.truth[t].reward.at(s, u);
        for (int j = 0; j < 3; ++j) {
          se += (th(j) - tr[j]) * (th(j) - tr[j]);
          ++cnt;
        }
      }
  }
  row("rmse_theta", cnt ? std::sqrt(se / cnt) : 0.0);
  LearnOptions lo;
  lo.eta = c.eta;
  row("coverage", coverage_event(o.population, eng, o.best.policy, lo).all() ? 1.0 : 0.0);
  EvalOptions eo;
  eo.basis = c.basis;
  eo.mode = c.mode;
  eo.cross_fit = c.cross_fit;
  double jhat = (c.mode == NuisanceMode::Oracle && !c.cross_fit) ? eng.evaluate(o.best.policy).total()
                                                                  : evaluate_multistage(sim.data, sp, o.best.policy, eo).total();
  row("j_error", std::abs(jhat - o.best.J));
  LearnResult lr = learn_policy_pair(eng, o.cls, lo);
  row("gap", compute_gap(o.spec, lr.policy, o.best.J));
  row("pess_value", lr.value.value);
  return rows;
}

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::vector<CellTiming> timing;
  std::string report_csv, summary_csv, timing_csv, manifest;
};

inline std::string format_report(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "experiment,n,seed,metric,value,status,message\n";
  for (const auto& r : rows) {
    std::string msg = r.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    os << r.experiment << ',' << r.n << ',' << r.seed << ',' << r.metric << ',' << (r.ok ? fmt_double(r.value) : "")
       << ',' << (r.ok ? "ok" : "failed") << ',' << msg << '\n';
  }
  return os.str();
}

inline std::string format_summary(const ExperimentConfig& c, const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "experiment,n,metric,median,q25,q75,iqr,ok,failed\n";
  for (std::size_t n : c.n_grid)
    for (const auto& m : metric_names()) {
      std::vector<double> v;
      int failed = 0;
      for (const auto& r : rows)
        if (r.n == n && r.metric == m) {
          if (r.ok) v.push_back(r.value);
          else ++failed;
        }
      os << c.id << ',' << n << ',' << m << ',';
      if (v.empty()) {
        os << ",,,," << 0 << ',' << failed << '\n';
        continue;
      }
      double q1 = quantile(v, 0.25), q3 = quantile(v, 0.75);
      os << fmt_double(median(v)) << ',' << fmt_double(q1) << ',' << fmt_double(q3) << ',' << fmt_double(q3 - q1) << ','
         << v.size() << ',' << failed << '\n';
    }
  return os.str();
}

/// Simulate, estimate, learn and score every (n, seed) cell. A failing cell
/// yields one failed row per metric; other cells are unaffected.
inline ExperimentResult run_experiment(const ExperimentConfig& c, bool write_files = true) {
  validate_config(c);
  OracleContext o = make_oracle_context(c);
  struct Cell {
    std::size_t n;
    std::uint64_t seed;
    std::vector<ReportRow> rows;
    double ms = 0;
  };
  std::vector<Cell> cells;
  for (std::size_t n : c.n_grid)
    for (std::uint64_t s : c.seeds) cells.push_back({n, s, {}, 0});
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        auto& cell = cells[i];
        auto t0 = std::chrono::steady_clock::now();
        try {
          cell.rows = run_cell(c, o, cell.n, cell.seed);
        } catch (const std::exception& e) {
          cell.rows.clear();
          for (const auto& m : metric_names()) cell.rows.push_back({c.id, cell.n, cell.seed, m, 0.0, false, e.what()});
        }
        cell.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      },
      c.threads);
  ExperimentResult res;
  for (auto& cell : cells) {
    res.rows.insert(res.rows.end(), cell.rows.begin(), cell.rows.end());
    res.timing.push_back({cell.n, cell.seed, cell.ms});
  }
  res.report_csv = format_report(res.rows);
  res.summary_csv = format_summary(c, res.rows);
  std::ostringstream tm;
  tm << "n,seed,runtime_ms\n";
  for (const auto& t : res.timing) tm << t.n << ',' << t.seed << ',' << fmt_double(std::round(t.ms * 1000) / 1000) << '\n';
  res.timing_csv = tm.str();
  std::ostringstream mf;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(c.canonical())));
  mf << "version=" << kVersion << "\nconfig_hash=" << hash << "\n" << c.canonical();
  res.manifest = mf.str();
  if (write_files) {
    std::filesystem::create_directories(c.out_dir);
    auto p = std::filesystem::path(c.out_dir);
    write_file((p / "report.csv").string(), res.report_csv);
    write_file((p / "summary.csv").string(), res.summary_csv);
    write_file((p / "timing.csv").string(), res.timing_csv);
    write_file((p / "manifest").string(), res.manifest);
  }
  return res;
}

}  // namespace confgame
