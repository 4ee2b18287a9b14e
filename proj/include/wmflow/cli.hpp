#pragma once

// Config ingestion, run orchestration and result persistence for the wmflow
// command line tool. The config schema is documented in configs/README.md.

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wmflow/jko.hpp"
#include "wmflow/report.hpp"

namespace wmflow::cli {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr int kSummarySchema = 1;

enum ExitCode : int { Ok = 0, CheckFailed = 1, ConfigFailure = 2, SolverFailure = 3 };

struct InitialCondition {
  std::string tag = "constant";  // constant | bump | tanh | cosine | file
  double value = 0.5;            // constant level / baseline of tanh and cosine
  double center = 0.5;           // bump center / interface position, relative to L
  double width = 0.2;            // bump half width / interface width, relative to L
  double amplitude = 0.4;
  double floor = 0.0;
  int mode = 1;                  // cosine mode
  std::filesystem::path file;    // CSV with header "x,u"
};

struct OutputOptions {
  std::filesystem::path dir = "out";
  std::size_t snapshot_every = 1;
  bool csv = true;
  bool json = true;
};

struct CompareOptions {
  double tau_pde = 0.0;  // 0 = use the JKO step
  double tolerance = kInf;
};

struct SweepSpec {
  std::vector<double> tau;
  std::vector<std::size_t> n_cells;
  std::vector<std::size_t> K;
  std::vector<double> delta;
  std::size_t workers = 0;  // 0 = hardware concurrency

  bool empty() const { return tau.empty() && n_cells.empty() && K.empty() && delta.empty(); }
};

struct RunConfig {
  nlohmann::json raw;  // echo of the parsed file
  double L = 1.0;
  std::size_t n_cells = 64;
  nlohmann::json mobility;
  nlohmann::json energy;
  std::optional<double> mass;
  std::string hypothesis_mode = "lsc";  // lsc | general
  JkoConfig scheme;
  InitialCondition initial;
  std::vector<std::string> checks;
  OutputOptions outputs;
  CompareOptions compare;
  SweepSpec sweep;
  unsigned seed = 11;
  std::string tol_profile = "default";
};

/// Command line values that take precedence over the file.
struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::string> tol_profile;
  std::optional<std::string> backend;
  std::optional<unsigned> seed;
};

/// Throws Error(ConfigError) or Error(InfeasibleConstraint) on bad input.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);
void apply_overrides(RunConfig& cfg, const Overrides& o);

Mobility make_mobility(const nlohmann::json& j);
FreeEnergy make_energy(const nlohmann::json& j);
ProblemSpec make_spec(const RunConfig& cfg, bool validate = false);
Density make_initial(const RunConfig& cfg);

const std::vector<std::string>& known_checks();

/// Runs the named checks on a trajectory. Per-step checks are aggregated.
nlohmann::json run_checks(const Trajectory& tr, const ProblemSpec& spec, const RunConfig& cfg,
                          const ToleranceTable& tol, bool& all_passed);

std::string sha256_hex(const std::filesystem::path& file);

int cmd_run(const RunConfig& cfg, std::ostream& log);
int cmd_check(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_compare(const RunConfig& cfg, std::ostream& log);

}  // namespace wmflow::cli
