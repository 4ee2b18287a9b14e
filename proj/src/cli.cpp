#include "wmflow/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "wmflow/diagnostics.hpp"
#include "wmflow/flows.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace wmflow::cli {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      config_error("unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) config_error("missing key '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{});
}

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double tag_ceiling(const json& mob) {
  const auto tag = require<std::string>(mob, "tag", "problem.mobility");
  if (tag == "quadratic" || tag == "power_product" || tag == "tabulated") return get_or(mob, "M", tag == "tabulated" ? kInf : 1.0);
  return kInf;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
  f << s;
}

void write_snapshot(const fs::path& p, const Density& u) {
  std::string s = "x,u\n";
  for (std::size_t j = 0; j < u.size(); ++j) s += fmt17(u.grid.center(j)) + "," + fmt17(u[j]) + "\n";
  write_text(p, s);
}

json report_json(const CheckReport& r) {
  json j = {{"name", r.name},   {"status", to_string(r.status)}, {"lhs", r.lhs},
            {"rhs", r.rhs},     {"slack", r.slack},              {"tolerance", r.tolerance}};
  if (!r.context.empty()) j["context"] = r.context;
  return j;
}

// Aggregate of a per-step or per-iterate family of reports.
json aggregate(const std::string& name, const std::vector<CheckReport>& rs, double max_inconclusive_fraction, bool& passed) {
  std::size_t fails = 0, inconclusive = 0, worst = 0;
  double worst_slack = kInf;
  std::vector<std::size_t> failing;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (rs[i].status == CheckStatus::Fail) {
      ++fails;
      if (failing.size() < 20) failing.push_back(i);
    }
    if (rs[i].status == CheckStatus::Inconclusive) ++inconclusive;
    const double s = rs[i].slack + rs[i].tolerance;
    if (s < worst_slack) {
      worst_slack = s;
      worst = i;
    }
  }
  const bool ok = fails == 0 && static_cast<double>(inconclusive) <= max_inconclusive_fraction * static_cast<double>(rs.size());
  passed = passed && ok;
  json j = {{"name", name}, {"status", ok ? "pass" : "fail"}, {"count", rs.size()}, {"failures", fails},
            {"inconclusive", inconclusive}};
  if (!rs.empty()) {
    j["worst_margin"] = worst_slack;
    j["worst"] = report_json(rs[worst]);
  }
  if (!failing.empty()) j["failing_indices"] = failing;
  return j;
}

json single(const CheckReport& r, bool& passed) {
  passed = passed && r.status != CheckStatus::Fail;
  return report_json(r);
}

struct RunResult {
  Trajectory tr;
  json checks;
  bool passed = true;
};

Trajectory run_trajectory(const RunConfig& cfg, const ProblemSpec& spec, const Density& u0) { return run(u0, cfg.scheme, spec); }

json step_table(const Trajectory& tr) {
  json steps = json::array();
  for (std::size_t n = 0; n < tr.records.size(); ++n) {
    const auto& r = tr.records[n];
    steps.push_back({{"n", n},
                     {"t", tr.time(n)},
                     {"W", r.W},
                     {"energy", r.energy.total},
                     {"dirichlet", r.energy.dirichlet},
                     {"potential", r.energy.potential},
                     {"entropy", r.entropy},
                     {"psi_gain", r.psi_gain},
                     {"certified", r.certified},
                     {"fallback", r.fallback},
                     {"newton", r.solver.newton_iterations},
                     {"quality", to_string(r.solver.quality)}});
  }
  return steps;
}

json solver_stats(const Trajectory& tr) {
  std::size_t total = 0, peak = 0, stalled = 0, fallbacks = 0, uncertified = 0;
  for (std::size_t n = 1; n < tr.records.size(); ++n) {
    const auto& r = tr.records[n];
    const auto it = static_cast<std::size_t>(r.solver.newton_iterations);
    total += it;
    peak = std::max(peak, it);
    stalled += r.solver.quality == SolveQuality::Stalled;
    fallbacks += r.fallback;
    uncertified += !r.certified;
  }
  return {{"steps", tr.steps()},      {"newton_total", total},  {"newton_max", peak},
          {"stalled_steps", stalled}, {"fallback_steps", fallbacks}, {"uncertified_steps", uncertified}};
}

// Snapshots, energy series and the trajectory index. Returns emitted files
// relative to `out`.
std::vector<std::string> write_trajectory(const Trajectory& tr, const RunConfig& cfg, const fs::path& out) {
  std::vector<std::string> files;
  json snaps = json::array();
  if (cfg.outputs.csv) {
    fs::create_directories(out / "snapshots");
    for (std::size_t n = 0; n <= tr.steps(); ++n) {
      if (n % cfg.outputs.snapshot_every != 0 && n != tr.steps()) continue;
      char name[32];
      std::snprintf(name, sizeof name, "snapshots/u_%05zu.csv", n);
      write_snapshot(out / name, tr.iterates[n]);
      files.emplace_back(name);
      snaps.push_back({{"n", n}, {"t", tr.time(n)}, {"file", name}});
    }
    std::string e = "t,E\n";
    for (std::size_t n = 0; n < tr.records.size(); ++n) e += fmt17(tr.time(n)) + "," + fmt17(tr.records[n].energy.total) + "\n";
    write_text(out / "energy.csv", e);
    files.emplace_back("energy.csv");
  }
  if (cfg.outputs.json) {
    json idx = {{"schema", kSummarySchema},
                {"tau", tr.tau},
                {"snapshots", snaps},
                {"series", json::array({{{"file", "energy.csv"}, {"columns", {"t", "E"}}}})},
                {"steps", step_table(tr)}};
    if (!cfg.outputs.csv) idx["series"] = json::array();
    write_text(out / "trajectory.json", idx.dump(1) + "\n");
    files.emplace_back("trajectory.json");
  }
  return files;
}

json manifest(const fs::path& out, std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  json m = json::array();
  for (const auto& f : files) m.push_back({{"file", f}, {"sha256", sha256_hex(out / f)}, {"bytes", fs::file_size(out / f)}});
  return m;
}

json effective_echo(const RunConfig& cfg) {
  return {{"tau", cfg.scheme.tau},
          {"T_final", cfg.scheme.T_final},
          {"backend", to_string(cfg.scheme.backend.kind)},
          {"K", cfg.scheme.backend.K},
          {"delta", cfg.scheme.delta},
          {"eps_V", cfg.scheme.eps_V},
          {"n_cells", cfg.n_cells},
          {"seed", cfg.seed},
          {"tol_profile", cfg.tol_profile}};
}

void write_summary(const fs::path& out, const std::string& command, const RunConfig& cfg, const ToleranceTable& tol,
                   json body, const std::vector<std::string>& files, double seconds) {
  json s = {{"schema", kSummarySchema},
            {"version", kVersion},
            {"command", command},
            {"config", cfg.raw},
            {"effective", effective_echo(cfg)},
            {"tolerances", tol.as_map()},
            {"tolerance_profile", tol.profile}};
  for (auto& [k, v] : body.items()) s[k] = v;
  s["manifest"] = manifest(out, files);
  write_text(out / "summary.json", s.dump(1) + "\n");
  write_text(out / "timing.json", json({{"wall_seconds", seconds}}).dump() + "\n");
}

struct Loaded {
  ProblemSpec spec;
  Density u0;
};

Loaded load_problem(const RunConfig& cfg) {
  auto u0 = make_initial(cfg);
  auto spec = make_spec(cfg, false);
  (void)effective_spec(spec, cfg.scheme);
  return {std::move(spec), std::move(u0)};
}

// Runs the scheme and the enabled checks, writes all artifacts to `out`.
// Throws on solver failure.
RunResult execute(const RunConfig& cfg, const Loaded& p, const fs::path& out, const std::string& command,
                  json extra = json::object()) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto tol = ToleranceTable::make(cfg.tol_profile);
  RunResult res;
  res.tr = run_trajectory(cfg, p.spec, p.u0);
  res.checks = run_checks(res.tr, effective_spec(p.spec, cfg.scheme), cfg, tol, res.passed);
  fs::create_directories(out);
  const auto files = write_trajectory(res.tr, cfg, out);
  extra["checks"] = res.checks;
  extra["checks_passed"] = res.passed;
  extra["solver"] = solver_stats(res.tr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_summary(out, command, cfg, tol, extra, files, secs);
  return res;
}

double restricted_l2(const Density& a, const Density& b) {
  const Density& fine = a.size() >= b.size() ? a : b;
  const Density& coarse = a.size() >= b.size() ? b : a;
  if (fine.size() % coarse.size() != 0) return std::nan("");
  const std::size_t r = fine.size() / coarse.size();
  CellField d(coarse.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += fine[j * r + i];
    d[j] = s / static_cast<double>(r) - coarse[j];
  }
  return norm_l2(coarse.grid, d);
}

}  // namespace

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {"structure",     "energy_lower_bound", "energy_estimate",
                                                 "laplace",       "lions_villani",      "flow_interchange",
                                                 "entropy_dissipation", "h2_budget",    "holder",
                                                 "weak_residual"};
  return names;
}

Mobility make_mobility(const json& j) {
  const auto tag = require<std::string>(j, "tag", "problem.mobility");
  if (tag == "wasserstein") {
    allow_keys(j, "problem.mobility", {"tag"});
    return mobility::wasserstein();
  }
  if (tag == "quadratic") {
    allow_keys(j, "problem.mobility", {"tag", "M"});
    return mobility::quadratic(get_or(j, "M", 1.0));
  }
  if (tag == "power") {
    allow_keys(j, "problem.mobility", {"tag", "alpha"});
    return mobility::power(require<double>(j, "alpha", "problem.mobility"));
  }
  if (tag == "power_product") {
    allow_keys(j, "problem.mobility", {"tag", "alpha0", "alpha1", "M"});
    return mobility::power_product(require<double>(j, "alpha0", "problem.mobility"),
                                   require<double>(j, "alpha1", "problem.mobility"), get_or(j, "M", 1.0));
  }
  if (tag == "constant") {
    allow_keys(j, "problem.mobility", {"tag", "c"});
    return mobility::constant(get_or(j, "c", 1.0));
  }
  if (tag == "tabulated") {
    allow_keys(j, "problem.mobility", {"tag", "samples", "s_start", "ds", "M"});
    return mobility::tabulated(require<std::vector<double>>(j, "samples", "problem.mobility"), get_or(j, "s_start", 0.0),
                               require<double>(j, "ds", "problem.mobility"), get_or(j, "M", kInf));
  }
  config_error("unknown mobility tag '" + tag + "'");
}

FreeEnergy make_energy(const json& j) {
  const auto tag = require<std::string>(j, "tag", "problem.energy");
  if (tag == "zero") {
    allow_keys(j, "problem.energy", {"tag"});
    return free_energy::zero();
  }
  if (tag == "double_well") {
    allow_keys(j, "problem.energy", {"tag", "theta"});
    return free_energy::double_well(get_or(j, "theta", 1.0));
  }
  if (tag == "logarithmic") {
    allow_keys(j, "problem.energy", {"tag", "theta"});
    return free_energy::logarithmic(get_or(j, "theta", 1.0));
  }
  if (tag == "thin_film") {
    allow_keys(j, "problem.energy", {"tag", "kappa", "beta", "alpha"});
    return free_energy::thin_film(get_or(j, "kappa", 0.0), get_or(j, "beta", 1.0),
                                  require<double>(j, "alpha", "problem.energy"));
  }
  if (tag == "quadratic") {
    allow_keys(j, "problem.energy", {"tag", "c"});
    return free_energy::quadratic(require<double>(j, "c", "problem.energy"));
  }
  if (tag == "tabulated") {
    allow_keys(j, "problem.energy", {"tag", "samples", "s_start", "ds"});
    return free_energy::tabulated(require<std::vector<double>>(j, "samples", "problem.energy"), get_or(j, "s_start", 0.0),
                                  require<double>(j, "ds", "problem.energy"));
  }
  config_error("unknown energy tag '" + tag + "'");
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  try {
    RunConfig c;
    c.raw = j;
    allow_keys(j, "config",
               {"schema", "domain", "grid", "problem", "scheme", "initial", "checks", "outputs", "compare", "sweep", "seed",
                "tol_profile"});
    if (get_or(j, "schema", kSummarySchema) != kSummarySchema) config_error("unsupported schema version");

    const json dom = get_or(j, "domain", json::object());
    allow_keys(dom, "domain", {"L"});
    c.L = get_or(dom, "L", 1.0);
    if (!(c.L > 0.0)) config_error("domain.L must be positive");

    const json grid = get_or(j, "grid", json::object());
    allow_keys(grid, "grid", {"n_cells"});
    c.n_cells = get_or<std::size_t>(grid, "n_cells", 64);
    if (c.n_cells < 2) config_error("grid.n_cells must be >= 2");

    const json prob = require<json>(j, "problem", "config");
    allow_keys(prob, "problem", {"mobility", "energy", "mass", "mode"});
    c.mobility = require<json>(prob, "mobility", "problem");
    c.energy = get_or(prob, "energy", json{{"tag", "zero"}});
    c.hypothesis_mode = get_or<std::string>(prob, "mode", "lsc");
    if (c.hypothesis_mode != "lsc" && c.hypothesis_mode != "general")
      config_error("problem.mode must be 'lsc' or 'general'");
    (void)make_mobility(c.mobility);
    (void)make_energy(c.energy);
    if (prob.contains("mass")) {
      const double mass = get_or(prob, "mass", 0.0);
      if (!(mass > 0.0)) config_error("problem.mass must be positive");
      const double cap = tag_ceiling(c.mobility) * c.L;
      if (mass > cap)
        throw Error(ErrorKind::InfeasibleConstraint, "mass " + fmt17(mass) + " exceeds M*L = " + fmt17(cap));
      c.mass = mass;
    }

    const json sch = require<json>(j, "scheme", "config");
    allow_keys(sch, "scheme", {"tau", "T_final", "backend", "K", "eps_V", "delta"});
    c.scheme.tau = require<double>(sch, "tau", "scheme");
    c.scheme.T_final = require<double>(sch, "T_final", "scheme");
    const auto backend = get_or<std::string>(sch, "backend", "dynamic");
    const auto K = get_or<std::size_t>(sch, "K", 8);
    if (backend == "dynamic") c.scheme.backend = MetricBackend::dynamic(K);
    else if (backend == "frozen") c.scheme.backend = MetricBackend::frozen();
    else config_error("scheme.backend must be 'dynamic' or 'frozen'");
    c.scheme.backend.K = K;
    c.scheme.eps_V = get_or(sch, "eps_V", 0.0);
    c.scheme.delta = get_or(sch, "delta", 0.0);
    if (c.scheme.delta < 0.0) config_error("scheme.delta must be >= 0");
    try {
      c.scheme.validate();
    } catch (const Error& e) {
      config_error(e.what());
    }

    const json ic = get_or(j, "initial", json::object());
    allow_keys(ic, "initial", {"tag", "value", "center", "width", "amplitude", "floor", "mode", "file"});
    c.initial.tag = get_or<std::string>(ic, "tag", "constant");
    c.initial.value = get_or(ic, "value", c.initial.value);
    c.initial.center = get_or(ic, "center", c.initial.center);
    c.initial.width = get_or(ic, "width", c.initial.width);
    c.initial.amplitude = get_or(ic, "amplitude", c.initial.amplitude);
    c.initial.floor = get_or(ic, "floor", c.initial.floor);
    c.initial.mode = get_or(ic, "mode", c.initial.mode);
    if (ic.contains("file")) c.initial.file = base_dir / get_or<std::string>(ic, "file", "");
    static const std::set<std::string> tags = {"constant", "bump", "tanh", "cosine", "file"};
    if (!tags.count(c.initial.tag)) config_error("unknown initial tag '" + c.initial.tag + "'");
    if (c.initial.tag == "file" && c.initial.file.empty()) config_error("initial.file is required for tag 'file'");
    if ((c.initial.tag == "bump" || c.initial.tag == "tanh") && !(c.initial.width > 0.0))
      config_error("initial.width must be positive");
    if (c.initial.tag == "constant" && !c.mass && !(c.initial.value > 0.0)) config_error("initial.value must be positive");

    c.checks = get_or(j, "checks", std::vector<std::string>{});
    for (const auto& name : c.checks)
      if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end())
        config_error("unknown check '" + name + "'");

    const json out = get_or(j, "outputs", json::object());
    allow_keys(out, "outputs", {"dir", "snapshot_every", "formats"});
    c.outputs.dir = base_dir / get_or<std::string>(out, "dir", "out");
    c.outputs.snapshot_every = get_or<std::size_t>(out, "snapshot_every", 1);
    if (c.outputs.snapshot_every < 1) config_error("outputs.snapshot_every must be >= 1");
    if (out.contains("formats")) {
      const auto f = get_or(out, "formats", std::vector<std::string>{});
      c.outputs.csv = std::find(f.begin(), f.end(), "csv") != f.end();
      c.outputs.json = std::find(f.begin(), f.end(), "json") != f.end();
      for (const auto& x : f)
        if (x != "csv" && x != "json") config_error("unknown output format '" + x + "'");
    }

    const json cmp = get_or(j, "compare", json::object());
    allow_keys(cmp, "compare", {"tau_pde", "tolerance"});
    c.compare.tau_pde = get_or(cmp, "tau_pde", 0.0);
    c.compare.tolerance = get_or(cmp, "tolerance", kInf);
    if (c.compare.tau_pde < 0.0) config_error("compare.tau_pde must be >= 0");

    const json sw = get_or(j, "sweep", json::object());
    allow_keys(sw, "sweep", {"tau", "n_cells", "K", "delta", "workers"});
    c.sweep.tau = get_or(sw, "tau", std::vector<double>{});
    c.sweep.n_cells = get_or(sw, "n_cells", std::vector<std::size_t>{});
    c.sweep.K = get_or(sw, "K", std::vector<std::size_t>{});
    c.sweep.delta = get_or(sw, "delta", std::vector<double>{});
    c.sweep.workers = get_or<std::size_t>(sw, "workers", 0);
    for (double t : c.sweep.tau)
      if (!(t > 0.0)) config_error("sweep.tau entries must be positive");
    for (auto n : c.sweep.n_cells)
      if (n < 2) config_error("sweep.n_cells entries must be >= 2");

    c.seed = get_or<unsigned>(j, "seed", 11);
    c.tol_profile = get_or<std::string>(j, "tol_profile", "default");
    (void)ToleranceTable::make(c.tol_profile);
    return c;
  } catch (const json::exception& e) {
    config_error(e.what());
  }
}

RunConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) config_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    config_error(std::string("parse error: ") + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.out) cfg.outputs.dir = *o.out;
  if (o.tol_profile) {
    (void)ToleranceTable::make(*o.tol_profile);
    cfg.tol_profile = *o.tol_profile;
  }
  if (o.backend) {
    if (*o.backend == "dynamic") cfg.scheme.backend = MetricBackend::dynamic(cfg.scheme.backend.K);
    else if (*o.backend == "frozen") cfg.scheme.backend.kind = MetricBackend::Kind::FrozenWeight;
    else config_error("backend must be 'dynamic' or 'frozen'");
  }
  if (o.seed) cfg.seed = *o.seed;
}

Density make_initial(const RunConfig& cfg) {
  const Grid g(cfg.n_cells, cfg.L);
  const auto& ic = cfg.initial;
  const double M = make_mobility(cfg.mobility).ceiling;
  CellField v(g.n_cells());
  if (ic.tag == "constant") {
    std::fill(v.begin(), v.end(), cfg.mass ? *cfg.mass / cfg.L : ic.value);
  } else if (ic.tag == "file") {
    std::ifstream f(ic.file);
    if (!f) config_error("cannot read initial data " + ic.file.string());
    std::string line;
    std::getline(f, line);
    if (line.rfind("x,u", 0) != 0) config_error("initial data must start with header 'x,u'");
    std::size_t j = 0;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos || j >= v.size()) config_error("initial data does not match grid.n_cells");
      try {
        v[j++] = std::stod(line.substr(comma + 1));
      } catch (const std::exception&) {
        config_error("bad number in initial data: " + line);
      }
    }
    if (j != v.size()) config_error("initial data does not match grid.n_cells");
  } else {
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double x = g.center(j) / cfg.L;
      if (ic.tag == "bump") {
        const double z = (x - ic.center) / ic.width;
        v[j] = ic.floor + (std::abs(z) < 1.0 ? ic.amplitude * std::pow(std::cos(0.5 * std::numbers::pi * z), 2) : 0.0);
      } else if (ic.tag == "tanh") {
        v[j] = ic.value + ic.amplitude * std::tanh((x - ic.center) / ic.width);
      } else {
        v[j] = ic.value + ic.amplitude * std::cos(ic.mode * std::numbers::pi * x);
      }
    }
  }
  Density u(g, v);
  if (cfg.mass && std::abs(u.mass() - *cfg.mass) > 1e-12 * *cfg.mass) u = project_admissible(g, v, M, *cfg.mass);
  if (!is_admissible(u, M, u.mass(), 1e-12)) config_error("initial data leaves [0, M]");
  if (!(u.mass() > 0.0)) config_error("initial data has zero mass");
  return u;
}

ProblemSpec make_spec(const RunConfig& cfg, bool validate) {
  const double mass = cfg.mass ? *cfg.mass : make_initial(cfg).mass();
  return ProblemSpec(make_mobility(cfg.mobility), make_energy(cfg.energy), mass, cfg.L, validate);
}

json run_checks(const Trajectory& tr, const ProblemSpec& spec, const RunConfig& cfg, const ToleranceTable& tol,
                bool& all_passed) {
  json out = json::array();
  const double M = spec.ceiling();
  for (const auto& name : cfg.checks) {
    if (name == "structure") {
      std::size_t box = 0;
      double mass_err = 0.0, energy_violation = 0.0;
      for (std::size_t n = 0; n < tr.iterates.size(); ++n) {
        const auto& u = tr.iterates[n];
        for (double x : u.values) box += (x < 0.0 || x > M);
        mass_err = std::max(mass_err, std::abs(u.mass() - spec.mass()));
        if (n > 0) energy_violation += std::max(0.0, tr.records[n].energy.total - tr.records[n - 1].energy.total);
      }
      const bool ok = box == 0 && mass_err <= tol.mass_rel * spec.mass() && energy_violation == 0.0;
      all_passed = all_passed && ok;
      out.push_back({{"name", name},
                     {"status", ok ? "pass" : "fail"},
                     {"box_violations", box},
                     {"mass_error", mass_err},
                     {"energy_violation", energy_violation},
                     {"min", std::min_element(tr.iterates.begin(), tr.iterates.end(),
                                              [](auto& a, auto& b) { return a.min() < b.min(); })->min()},
                     {"max", std::max_element(tr.iterates.begin(), tr.iterates.end(),
                                              [](auto& a, auto& b) { return a.max() < b.max(); })->max()}});
    } else if (name == "energy_lower_bound") {
      const auto k = estimate_constants(spec);
      std::vector<CheckReport> rs;
      for (const auto& u : tr.iterates) rs.push_back(energy_lower_bound_check(u, spec, k, tol.energy_lower_bound));
      out.push_back(aggregate(name, rs, 0.0, all_passed));
    } else if (name == "energy_estimate") {
      out.push_back(single(energy_estimate_check(tr, tol.energy_estimate_rel), all_passed));
    } else if (name == "laplace") {
      std::vector<CheckReport> rs;
      for (const auto& u : tr.iterates) rs.push_back(check_laplace_bounds(u, tol.laplace_rel));
      out.push_back(aggregate(name, rs, 0.0, all_passed));
    } else if (name == "lions_villani") {
      std::vector<CheckReport> rs;
      for (const auto& u : tr.iterates) rs.push_back(check_lions_villani(u, tol.lions_villani_rel));
      out.push_back(aggregate(name, rs, 0.0, all_passed));
    } else if (name == "flow_interchange") {
      out.push_back(aggregate(name, check_flow_interchange(tr, spec, tol.flow_interchange), 0.02, all_passed));
    } else if (name == "entropy_dissipation") {
      out.push_back(aggregate(name, check_entropy_dissipation(tr, spec, tol.entropy_dissipation), 0.0, all_passed));
    } else if (name == "h2_budget") {
      auto j = single(check_h2_budget(tr, spec), all_passed);
      j["budget"] = h2_budget(tr);
      out.push_back(j);
    } else if (name == "holder") {
      const std::size_t K = std::max<std::size_t>(cfg.scheme.backend.K, 1);
      out.push_back(aggregate(name, holder_certificate(tr, spec, 20, K, cfg.seed, tol.holder), 0.0, all_passed));
    } else if (name == "weak_residual") {
      const double T = tr.T_final();
      const auto r = check_weak_residual(tr, TimeTest::bump(0.25 * T, T), TestPotential::cosine(tr.iterates[0].grid, 1), spec);
      out.push_back(single(r, all_passed));
    }
  }
  return out;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (f) {
    f.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream s;
  for (unsigned i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return s.str();
}

int cmd_run(const RunConfig& cfg, std::ostream& log) {
  std::optional<Loaded> p;
  try {
    p.emplace(load_problem(cfg));
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    return ConfigFailure;
  }
  try {
    const auto r = execute(cfg, *p, cfg.outputs.dir, "run");
    log << "run: " << r.tr.steps() << " steps, E " << r.tr.records.front().energy.total << " -> "
        << r.tr.records.back().energy.total << ", checks " << (r.passed ? "passed" : "FAILED") << "\n";
    for (const auto& c : r.checks) log << "  " << c["name"].get<std::string>() << ": " << c["status"].get<std::string>() << "\n";
    return r.passed ? Ok : CheckFailed;
  } catch (const Error& e) {
    log << "solver failure: " << e.what() << "\n";
    return e.kind() == ErrorKind::ConfigError ? ConfigFailure : SolverFailure;
  }
}

int cmd_check(const RunConfig& cfg, std::ostream& log) {
  try {
    const auto spec = make_spec(cfg, true);
    const auto& f = spec.flags();
    for (const auto& r : spec.reports()) {
      log << r.name << ": " << (r.passes ? "pass" : "FAIL") << "\n";
      for (const auto& w : r.witnesses) log << "    " << w << "\n";
    }
    const bool lsc = f.M && f.LSC && f.G;
    const bool general = f.M && f.M_half && f.G;
    log << "lsc mode: " << (lsc ? "pass" : "fail") << "\n";
    log << "general mode: " << (general ? "pass" : "fail") << "\n";
    const bool ok = cfg.hypothesis_mode == "lsc" ? lsc : general;
    log << "selected mode " << cfg.hypothesis_mode << ": " << (ok ? "pass" : "fail") << "\n";
    return ok ? Ok : CheckFailed;
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    return ConfigFailure;
  }
}

int cmd_compare(const RunConfig& cfg, std::ostream& log) {
  std::optional<Loaded> p;
  std::size_t every = 1;
  double tau_pde = cfg.compare.tau_pde > 0.0 ? cfg.compare.tau_pde : cfg.scheme.tau;
  try {
    p.emplace(load_problem(cfg));
    const double ratio = cfg.scheme.tau / tau_pde;
    every = static_cast<std::size_t>(std::llround(ratio));
    if (every < 1 || std::abs(ratio - static_cast<double>(every)) > 1e-9 * ratio)
      config_error("scheme.tau must be an integer multiple of compare.tau_pde");
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    return ConfigFailure;
  }
  const auto spec = effective_spec(p->spec, cfg.scheme);

  json direct = {{"tau", tau_pde}};
  std::optional<Trajectory> dtr;
  try {
    dtr = direct_pde_solve(p->u0, spec, tau_pde, cfg.scheme.T_final, DirectSolveOptions{every});
    direct["status"] = "completed";
  } catch (const PositivityLossError& e) {
    direct["status"] = "PositivityLoss";
    direct["time"] = e.time();
    direct["step"] = e.step();
    direct["min_value"] = e.min_value();
  } catch (const Error& e) {
    direct["status"] = to_string(e.kind());
    direct["message"] = e.what();
  }

  try {
    json body = json::object();
    // the JKO run is executed first so that the summary holds both sides
    const auto t0 = std::chrono::steady_clock::now();
    const auto tol = ToleranceTable::make(cfg.tol_profile);
    RunResult r;
    r.tr = run_trajectory(cfg, p->spec, p->u0);
    r.checks = run_checks(r.tr, spec, cfg, tol, r.passed);
    std::size_t box = 0;
    double jmin = kInf;
    for (const auto& u : r.tr.iterates) {
      for (double x : u.values) box += (x < 0.0 || x > spec.ceiling());
      jmin = std::min(jmin, u.min());
    }
    json cmp = {{"jko", {{"status", "completed"}, {"steps", r.tr.steps()}, {"box_violations", box}, {"min", jmin}}},
                {"direct", direct}};
    bool ok = r.passed && box == 0;
    if (dtr) {
      json table = json::array();
      double worst = 0.0;
      const std::size_t N = std::min(r.tr.steps(), dtr->steps());
      for (std::size_t n = 0; n <= N; ++n) {
        double d = 0.0;
        for (std::size_t j = 0; j < p->u0.size(); ++j) d = std::max(d, std::abs(r.tr.iterates[n][j] - dtr->iterates[n][j]));
        worst = std::max(worst, d);
        if (n % cfg.outputs.snapshot_every == 0 || n == N) table.push_back({{"t", r.tr.time(n)}, {"linf", d}});
      }
      cmp["linf_table"] = table;
      cmp["linf_max"] = worst;
      cmp["linf_final"] = table.back()["linf"];
      if (worst > cfg.compare.tolerance) ok = false;
    }
    cmp["tolerance"] = std::isfinite(cfg.compare.tolerance) ? json(cfg.compare.tolerance) : json("none");
    fs::create_directories(cfg.outputs.dir);
    auto files = write_trajectory(r.tr, cfg, cfg.outputs.dir);
    write_text(cfg.outputs.dir / "compare.json", cmp.dump(1) + "\n");
    files.emplace_back("compare.json");
    body["compare"] = cmp;
    body["checks"] = r.checks;
    body["checks_passed"] = r.passed;
    body["solver"] = solver_stats(r.tr);
    write_summary(cfg.outputs.dir, "compare", cfg, tol, body, files,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    log << "compare: jko " << r.tr.steps() << " steps, " << box << " box violations; direct "
        << direct["status"].get<std::string>();
    if (direct.contains("time")) log << " at t=" << direct["time"].get<double>();
    if (dtr) log << ", max L-inf discrepancy " << cmp["linf_max"].get<double>();
    log << "\n";
    return ok ? Ok : CheckFailed;
  } catch (const Error& e) {
    log << "solver failure: " << e.what() << "\n";
    return SolverFailure;
  }
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.sweep.empty()) return cmd_run(cfg, log);

  struct Cell {
    RunConfig cfg;
    json params;
    std::string status = "pending";
    std::string message;
    json checks;
    std::optional<Density> final_state;
    double final_energy = std::nan("");
  };
  const auto taus = cfg.sweep.tau.empty() ? std::vector<double>{cfg.scheme.tau} : cfg.sweep.tau;
  const auto ns = cfg.sweep.n_cells.empty() ? std::vector<std::size_t>{cfg.n_cells} : cfg.sweep.n_cells;
  const auto Ks = cfg.sweep.K.empty() ? std::vector<std::size_t>{cfg.scheme.backend.K} : cfg.sweep.K;
  const auto deltas = cfg.sweep.delta.empty() ? std::vector<double>{cfg.scheme.delta} : cfg.sweep.delta;

  std::vector<Cell> cells;
  for (double tau : taus)
    for (auto n : ns)
      for (auto K : Ks)
        for (double d : deltas) {
          Cell c;
          c.cfg = cfg;
          c.cfg.scheme.tau = tau;
          c.cfg.n_cells = n;
          c.cfg.scheme.backend.K = K;
          c.cfg.scheme.delta = d;
          char dir[32];
          std::snprintf(dir, sizeof dir, "cell_%03zu", cells.size());
          c.cfg.outputs.dir = cfg.outputs.dir / dir;
          c.params = {{"index", cells.size()}, {"dir", dir}, {"tau", tau}, {"n_cells", n}, {"K", K}, {"delta", d}};
          cells.push_back(std::move(c));
        }

  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& c = cells[i];
      try {
        c.cfg.scheme.validate();
        const auto p = load_problem(c.cfg);
        const auto r = execute(c.cfg, p, c.cfg.outputs.dir, "sweep-cell", {{"cell", c.params}});
        c.status = r.passed ? "pass" : "check_failed";
        c.checks = r.checks;
        c.final_state = r.tr.iterates.back();
        c.final_energy = r.tr.records.back().energy.total;
      } catch (const Error& e) {
        c.status = e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::InvalidArgument ||
                           e.kind() == ErrorKind::InfeasibleConstraint || e.kind() == ErrorKind::DeltaTooLarge
                       ? "config_error"
                       : "solver_failure";
        c.message = e.what();
      }
    }
  };
  std::size_t workers = cfg.sweep.workers ? cfg.sweep.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // self-convergence along each swept axis with the other parameters fixed
  json conv = json::array();
  const std::vector<std::string> axes = {"tau", "n_cells", "K", "delta"};
  for (const auto& axis : axes) {
    for (std::size_t a = 0; a < cells.size(); ++a) {
      const Cell* prev = nullptr;
      if (cells[a].params[axis] == cells.front().params[axis]) {
        double prev_d = std::nan("");
        prev = &cells[a];
        for (std::size_t b = a + 1; b < cells.size(); ++b) {
          bool same = true;
          for (const auto& o : axes) same &= (o == axis) || cells[b].params[o] == prev->params[o];
          if (!same || cells[b].params[axis] == prev->params[axis]) continue;
          json row = {{"axis", axis}, {"from", prev->params["index"]}, {"to", cells[b].params["index"]}};
          if (prev->final_state && cells[b].final_state) {
            const double d = restricted_l2(*prev->final_state, *cells[b].final_state);
            row["l2"] = std::isfinite(d) ? json(d) : json(nullptr);
            if (std::isfinite(prev_d) && std::isfinite(d) && d > 0.0) row["ratio"] = prev_d / d;
            prev_d = d;
          }
          conv.push_back(row);
          prev = &cells[b];
        }
      }
    }
  }

  bool all_ok = true;
  json table = json::array();
  std::string csv = "index,tau,n_cells,K,delta,status,final_energy";
  std::vector<std::string> check_cols = cfg.checks;
  for (const auto& c : check_cols) csv += "," + c;
  const bool residual = std::find(check_cols.begin(), check_cols.end(), "weak_residual") != check_cols.end();
  if (residual) csv += ",residual";
  csv += "\n";
  for (const auto& c : cells) {
    all_ok &= c.status == "pass";
    json row = c.params;
    row["status"] = c.status;
    if (!c.message.empty()) row["message"] = c.message;
    row["final_energy"] = std::isfinite(c.final_energy) ? json(c.final_energy) : json(nullptr);
    json matrix = json::object();
    double res = std::nan("");
    for (const auto& ch : c.checks) {
      matrix[ch["name"].get<std::string>()] = ch["status"];
      if (ch["name"] == "weak_residual") res = ch["context"]["residual"].get<double>();
    }
    row["checks"] = matrix;
    table.push_back(row);
    csv += std::to_string(c.params["index"].get<std::size_t>()) + "," + fmt17(c.params["tau"].get<double>()) + "," +
           std::to_string(c.params["n_cells"].get<std::size_t>()) + "," + std::to_string(c.params["K"].get<std::size_t>()) +
           "," + fmt17(c.params["delta"].get<double>()) + "," + c.status + "," + fmt17(c.final_energy);
    for (const auto& name : check_cols) csv += "," + (matrix.contains(name) ? matrix[name].get<std::string>() : "-");
    if (residual) csv += "," + fmt17(res);
    csv += "\n";
  }

  try {
    fs::create_directories(cfg.outputs.dir);
    write_text(cfg.outputs.dir / "sweep.csv", csv);
    std::vector<std::string> files = {"sweep.csv"};
    for (const auto& c : cells) {
      const fs::path dir = c.params["dir"].get<std::string>();
      if (!fs::exists(cfg.outputs.dir / dir)) continue;
      std::vector<fs::path> inner;
      for (const auto& e : fs::recursive_directory_iterator(cfg.outputs.dir / dir))
        if (e.is_regular_file() && e.path().filename() != "timing.json")
          inner.push_back(fs::relative(e.path(), cfg.outputs.dir));
      std::sort(inner.begin(), inner.end());
      for (const auto& f : inner) files.push_back(f.generic_string());
    }
    write_summary(cfg.outputs.dir, "sweep", cfg, ToleranceTable::make(cfg.tol_profile),
                  {{"cells", table}, {"convergence", conv}, {"all_passed", all_ok}}, files,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  } catch (const Error& e) {
    log << "sweep: " << e.what() << "\n";
    return ConfigFailure;
  }
  for (const auto& row : table)
    log << "cell " << row["index"] << " tau=" << row["tau"] << " n=" << row["n_cells"] << " K=" << row["K"]
        << " delta=" << row["delta"] << ": " << row["status"].get<std::string>() << "\n";
  return all_ok ? Ok : CheckFailed;
}

}  // namespace wmflow::cli
