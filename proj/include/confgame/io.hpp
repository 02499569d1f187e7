#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "confgame/error.hpp"
#include "confgame/game_model.hpp"

namespace confgame {

namespace detail {

/// Shortest representation that parses back to the same double.
inline std::string fmt_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

/// Parses "#<tag> v1 H=<H> n=<n>".
inline void parse_header(std::string_view line, std::string_view tag, int& H, long long& n) {
  auto parts = split(trim(line), ' ');
  long long h = 0;
  if (parts.size() != 4 || parts[0] != tag || parts[1] != "v1" || parts[2].substr(0, 2) != "H=" ||
      parts[3].substr(0, 2) != "n=" || !parse_int(parts[2].substr(2), h) ||
      !parse_int(parts[3].substr(2), n) || h < 1 || n < 0)
    throw SchemaMismatch("bad header: " + std::string(line));
  H = static_cast<int>(h);
}

}  // namespace detail

using detail::fmt_double;
using detail::read_file;
using detail::write_file;

// ---------------------------------------------------------------------------
// Dataset text format
//
//   #confgame v1 H=<H> n=<n>
//   traj,init,,,,,,,<b_half>,
//   traj,<h>,s,u,a,r_a,s_half,u_half,b,r_b        h = 1..H
//   traj,term,<s_final>,,,,,,,
// ---------------------------------------------------------------------------

inline std::string format_dataset(const OfflineDataset& d) {
  using detail::fmt_double;
  std::string out = "#confgame v1 H=" + std::to_string(d.horizon) + " n=" + std::to_string(d.size()) + "\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& tr = d.traj[i];
    std::string id = std::to_string(i);
    out += id + ",init,,,,,,," + std::to_string(tr.b0) + ",\n";
    for (std::size_t h = 0; h < tr.steps.size(); ++h) {
      const auto& st = tr.steps[h];
      out += id + "," + std::to_string(h + 1) + "," + std::to_string(st.s) + "," + std::to_string(st.u) + "," +
             std::to_string(st.a) + "," + fmt_double(st.r_a) + "," + std::to_string(st.s_half) + "," +
             std::to_string(st.u_half) + "," + std::to_string(st.b) + "," + fmt_double(st.r_b) + "\n";
    }
    out += id + ",term," + std::to_string(tr.s_term) + ",,,,,,,\n";
  }
  return out;
}

inline OfflineDataset parse_dataset(const std::string& text) {
  using namespace detail;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw SchemaMismatch("missing header");
  OfflineDataset d;
  long long n = 0;
  parse_header(lines[0], "#confgame", d.horizon, n);
  const int H = d.horizon;
  const std::size_t per = static_cast<std::size_t>(H) + 2;
  if (lines.size() - 1 != per * static_cast<std::size_t>(n)) {
    // Row count disagrees with the header: tell a schema problem from a short file.
    throw SchemaMismatch("expected " + std::to_string(per * n) + " rows for H=" + std::to_string(H) +
                         " n=" + std::to_string(n) + ", found " + std::to_string(lines.size() - 1));
  }
  d.traj.resize(static_cast<std::size_t>(n));
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    auto f = split(trim(lines[li]), ',');
    auto corrupt = [&](const std::string& why) {
      return CorruptRow("line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 10) throw corrupt("expected 10 fields");
    const std::size_t i = (li - 1) / per;
    const std::size_t k = (li - 1) % per;
    long long id = -1;
    if (!parse_int(f[0], id)) throw corrupt("bad trajectory id");
    if (id != static_cast<long long>(i)) throw SchemaMismatch("line " + std::to_string(lineno) + ": trajectory id out of order");
    auto& tr = d.traj[i];
    auto get_int = [&](int col, int lo, int hi) {
      long long v = 0;
      if (!parse_int(f[col], v) || v < lo || v > hi) throw corrupt("bad integer in column " + std::to_string(col + 1));
      return static_cast<int>(v);
    };
    auto get_real = [&](int col) {
      double v = 0;
      if (!parse_double(f[col], v) || !std::isfinite(v)) throw corrupt("bad real in column " + std::to_string(col + 1));
      return v;
    };
    constexpr int kMax = 1 << 30;
    if (k == 0) {
      if (f[1] != "init") throw SchemaMismatch("line " + std::to_string(lineno) + ": expected init row");
      tr.b0 = get_int(8, 0, 1);
      tr.steps.resize(H);
    } else if (k == per - 1) {
      if (f[1] != "term") throw SchemaMismatch("line " + std::to_string(lineno) + ": expected term row (H mismatch?)");
      tr.s_term = get_int(2, 0, kMax);
    } else {
      long long h = 0;
      if (!parse_int(f[1], h)) {
        throw SchemaMismatch("line " + std::to_string(lineno) + ": step tag '" + std::string(f[1]) +
                             "' where step " + std::to_string(k) + " expected (H mismatch?)");
      }
      if (h != static_cast<long long>(k)) throw SchemaMismatch("line " + std::to_string(lineno) + ": step out of order");
      auto& st = tr.steps[k - 1];
      st.s = get_int(2, 0, kMax);
      st.u = get_int(3, 0, kMax);
      st.a = get_int(4, 0, 1);
      st.r_a = get_real(5);
      st.s_half = get_int(6, 0, kMax);
      st.u_half = get_int(7, 0, kMax);
      st.b = get_int(8, 0, 1);
      st.r_b = get_real(9);
    }
  }
  return d;
}

inline std::string format_hidden(const HiddenTraces& h) {
  std::string out = "#confgame-hidden v1 H=" + std::to_string(h.horizon) + " n=" + std::to_string(h.traj.size()) + "\n";
  for (std::size_t i = 0; i < h.traj.size(); ++i)
    for (std::size_t k = 0; k < h.traj[i].size(); ++k) {
      const auto& v = h.traj[i][k];
      out += std::to_string(i) + "," + std::to_string(k + 1) + "," + std::to_string(v.v1) + "," +
             std::to_string(v.v2) + "," + std::to_string(v.v1_half) + "," + std::to_string(v.v2_half) + "\n";
    }
  return out;
}

inline HiddenTraces parse_hidden(const std::string& text) {
  using namespace detail;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw SchemaMismatch("missing hidden header");
  HiddenTraces h;
  long long n = 0;
  parse_header(lines[0], "#confgame-hidden", h.horizon, n);
  if (lines.size() - 1 != static_cast<std::size_t>(n) * h.horizon)
    throw SchemaMismatch("hidden trace row count disagrees with header");
  h.traj.assign(static_cast<std::size_t>(n), std::vector<HiddenStep>(h.horizon));
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto f = split(trim(lines[li]), ',');
    long long v[6];
    if (f.size() != 6) throw CorruptRow("line " + std::to_string(li + 1) + ": expected 6 fields");
    for (int c = 0; c < 6; ++c)
      if (!parse_int(f[c], v[c]) || v[c] < 0) throw CorruptRow("line " + std::to_string(li + 1) + ": bad integer");
    std::size_t i = (li - 1) / h.horizon, k = (li - 1) % h.horizon;
    if (v[0] != static_cast<long long>(i) || v[1] != static_cast<long long>(k + 1))
      throw SchemaMismatch("line " + std::to_string(li + 1) + ": hidden row out of order");
    h.traj[i][k] = HiddenStep{int(v[2]), int(v[3]), int(v[4]), int(v[5])};
  }
  return h;
}

inline void write_dataset(const std::string& path, const OfflineDataset& d) {
  detail::write_file(path, format_dataset(d));
}
inline OfflineDataset read_dataset(const std::string& path) { return parse_dataset(detail::read_file(path)); }

/// Writes the observed table to `path` and private values to `path.hidden`.
inline void write_simulation(const std::string& path, const Simulation& sim) {
  write_dataset(path, sim.data);
  detail::write_file(path + ".hidden", format_hidden(sim.hidden));
}
inline HiddenTraces read_hidden(const std::string& path) { return parse_hidden(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Spec text format. One entry per line, '#' starts a comment:
//
//   confgame-spec 1
//   horizon = <H>            states = <|S|>        private = <|U|>
//   v1_levels = <k>          v2_levels = <k>       noise = <half-width>
//   init_bob = <p>           init_state = p_0 ... p_{|S|-1}
//   coords = x_00 x_01 ; x_10 x_11 ; ...        (optional, one group per state)
//   point <t> <table> = values...               (row-major, see PointTables)
//
// Tables: u_law v1_law v2_law act_iv act_base rew_act rew_iv rew_int rew_base kernel.
// ---------------------------------------------------------------------------

namespace detail {

inline const std::vector<std::pair<std::string, std::vector<double> PointTables::*>>& table_fields() {
  static const std::vector<std::pair<std::string, std::vector<double> PointTables::*>> f = {
      {"u_law", &PointTables::u_law},       {"v1_law", &PointTables::v1_law},
      {"v2_law", &PointTables::v2_law},     {"act_iv", &PointTables::act_iv},
      {"act_base", &PointTables::act_base}, {"rew_act", &PointTables::rew_act},
      {"rew_iv", &PointTables::rew_iv},     {"rew_int", &PointTables::rew_int},
      {"rew_base", &PointTables::rew_base}, {"kernel", &PointTables::kernel},
  };
  return f;
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt_double(v[i]);
  }
  return out;
}

inline std::vector<double> parse_values(std::string_view s, std::size_t lineno) {
  std::vector<double> out;
  for (auto tok : split(trim(s), ' ')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    double v = 0;
    if (!parse_double(tok, v)) throw MalformedSpec("line " + std::to_string(lineno) + ": bad number '" + std::string(tok) + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline std::string format_spec(const GameSpec& g) {
  using detail::fmt_double;
  std::string o = "confgame-spec 1\n";
  o += "horizon = " + std::to_string(g.horizon) + "\n";
  o += "states = " + std::to_string(g.n_states) + "\n";
  o += "private = " + std::to_string(g.n_private) + "\n";
  o += "v1_levels = " + std::to_string(g.n_v1) + "\n";
  o += "v2_levels = " + std::to_string(g.n_v2) + "\n";
  o += "noise = " + fmt_double(g.noise) + "\n";
  o += "init_bob = " + fmt_double(g.init_bob) + "\n";
  o += "init_state = " + detail::join(g.init_state) + "\n";
  if (!g.coords.empty()) {
    o += "coords =";
    for (std::size_t s = 0; s < g.coords.size(); ++s) {
      if (s) o += " ;";
      o += " " + detail::join(g.coords[s]);
    }
    o += "\n";
  }
  for (std::size_t t = 0; t < g.points.size(); ++t)
    for (const auto& [name, field] : detail::table_fields())
      o += "point " + std::to_string(t) + " " + name + " = " + detail::join(g.points[t].*field) + "\n";
  return o;
}

inline GameSpec parse_spec(const std::string& text) {
  using namespace detail;
  GameSpec g;
  g.init_state.clear();
  bool magic = false;
  std::map<std::string, bool> seen;
  std::size_t lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto hash = raw.find('#');
    auto line = trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (!magic) {
      if (line != "confgame-spec 1") throw MalformedSpec("line " + std::to_string(lineno) + ": expected 'confgame-spec 1'");
      magic = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw MalformedSpec("line " + std::to_string(lineno) + ": missing '='");
    auto key = trim(line.substr(0, eq));
    auto val = line.substr(eq + 1);
    auto as_int = [&](int& dst) {
      long long v = 0;
      if (!parse_int(trim(val), v) || v < 1 || v > 1'000'000)
        throw MalformedSpec("line " + std::to_string(lineno) + ": bad integer for " + std::string(key));
      dst = static_cast<int>(v);
    };
    auto as_real = [&](double& dst) {
      if (!parse_double(trim(val), dst)) throw MalformedSpec("line " + std::to_string(lineno) + ": bad number");
    };
    if (key.substr(0, 6) == "point ") {
      auto parts = split(trim(key.substr(6)), ' ');
      long long t = -1;
      if (parts.size() != 2 || !parse_int(parts[0], t) || t < 0 || t >= 2 * g.horizon)
        throw MalformedSpec("line " + std::to_string(lineno) + ": bad point key (declare horizon first)");
      if (g.points.size() != static_cast<std::size_t>(2 * g.horizon)) g.points.resize(2 * g.horizon);
      bool found = false;
      for (const auto& [name, field] : table_fields())
        if (parts[1] == name) {
          g.points[t].*field = parse_values(val, lineno);
          found = true;
        }
      if (!found) throw MalformedSpec("line " + std::to_string(lineno) + ": unknown table " + std::string(parts[1]));
      continue;
    }
    std::string k(key);
    if (k == "horizon") as_int(g.horizon);
    else if (k == "states") as_int(g.n_states);
    else if (k == "private") as_int(g.n_private);
    else if (k == "v1_levels") as_int(g.n_v1);
    else if (k == "v2_levels") as_int(g.n_v2);
    else if (k == "noise") as_real(g.noise);
    else if (k == "init_bob") as_real(g.init_bob);
    else if (k == "init_state") g.init_state = parse_values(val, lineno);
    else if (k == "coords") {
      g.coords.clear();
      for (auto grp : split(val, ';')) g.coords.push_back(parse_values(grp, lineno));
    } else {
      throw MalformedSpec("line " + std::to_string(lineno) + ": unknown key " + k);
    }
    seen[k] = true;
  }
  if (!magic) throw MalformedSpec("empty spec");
  check_spec(g);
  return g;
}

inline void write_spec(const std::string& path, const GameSpec& g) { detail::write_file(path, format_spec(g)); }
inline GameSpec read_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedSpec("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

// ---------------------------------------------------------------------------
// Policy CSV: step,player,s,u,prev,action
//   0.5,B,,,,p              initial Bob rule
//   h,A,s,u,b_prev,p        Alice at step h
//   h.5,B,s,,a_prev,p       Bob at step h+1/2
// `action` is P(action = 1).
// ---------------------------------------------------------------------------

inline std::string format_policy(const PolicyPair& p) {
  using detail::fmt_double;
  std::string o = "step,player,s,u,prev,action\n";
  o += "0.5,B,,,," + fmt_double(p.init_bob) + "\n";
  for (int h = 0; h < p.horizon; ++h) {
    for (int s = 0; s < p.n_states; ++s)
      for (int u = 0; u < p.n_private; ++u)
        for (int z = 0; z < 2; ++z)
          o += std::to_string(h + 1) + ",A," + std::to_string(s) + "," + std::to_string(u) + "," + std::to_string(z) +
               "," + fmt_double(p.alice[h][(s * p.n_private + u) * 2 + z]) + "\n";
    for (int s = 0; s < p.n_states; ++s)
      for (int z = 0; z < 2; ++z)
        o += std::to_string(h + 1) + ".5,B," + std::to_string(s) + ",," + std::to_string(z) + "," +
             fmt_double(p.bob[h][s * 2 + z]) + "\n";
  }
  return o;
}

inline PolicyPair parse_policy(const std::string& text, int H, int nS, int nU) {
  using namespace detail;
  PolicyPair p = PolicyPair::constant(H, nS, nU, -1.0, -1.0, -1.0);
  auto lines = split(text, '\n');
  std::size_t lineno = 0;
  for (auto raw : lines) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || lineno == 1) continue;
    auto f = split(line, ',');
    auto bad = [&](const std::string& why) { return CorruptRow("policy line " + std::to_string(lineno) + ": " + why); };
    if (f.size() != 6) throw bad("expected 6 fields");
    double prob = 0;
    if (!parse_double(f[5], prob) || prob < 0 || prob > 1) throw bad("action must be a probability");
    std::string step(f[0]);
    if (step == "0.5") {
      p.init_bob = prob;
      continue;
    }
    bool half = step.size() > 2 && step.substr(step.size() - 2) == ".5";
    long long h = 0, s = 0, u = 0, z = 0;
    if (!parse_int(half ? std::string_view(step).substr(0, step.size() - 2) : std::string_view(step), h) || h < 1 || h > H)
      throw bad("bad step");
    if (!parse_int(f[2], s) || s < 0 || s >= nS || !parse_int(f[4], z) || z < 0 || z > 1) throw bad("bad index");
    if (half) {
      if (f[1] != "B") throw bad("half steps belong to B");
      p.bob[h - 1][s * 2 + z] = prob;
    } else {
      if (f[1] != "A" || !parse_int(f[3], u) || u < 0 || u >= nU) throw bad("bad Alice row");
      p.alice[h - 1][(s * nU + u) * 2 + z] = prob;
    }
  }
  if (p.init_bob < 0) throw CorruptRow("policy file lacks the initial Bob rule");
  for (const auto& r : p.alice)
    for (double q : r)
      if (q < 0) throw CorruptRow("policy file lacks an Alice entry");
  for (const auto& r : p.bob)
    for (double q : r)
      if (q < 0) throw CorruptRow("policy file lacks a Bob entry");
  return p;
}

inline void write_policy(const std::string& path, const PolicyPair& p) { detail::write_file(path, format_policy(p)); }
inline PolicyPair read_policy(const std::string& path, int H, int nS, int nU) {
  return parse_policy(detail::read_file(path), H, nS, nU);
}

}  // namespace confgame
