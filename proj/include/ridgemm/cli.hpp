#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ridgemm/fractal.hpp"
#include "ridgemm/io.hpp"
#include "ridgemm/problems.hpp"
#include "ridgemm/ridge.hpp"

namespace ridgemm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNotCritical = 1;
inline constexpr int kExitError = 2;

struct RunConfig {
  std::string problem = "smooth_saddle";
  std::vector<double> x0;
  StepSchedule schedule;
  long iters = 500;
  AtomRule rule = AtomRule::kMinNormAtom;
  std::uint64_t seed = 0;
  double tol = kDefaultHullTol;
  double tau_y = PoSettings{}.tau_y;
  double delta_f = GridSettings{}.delta_f;
  OracleMode oracle = OracleMode::kAuto;
  std::string out = ".";

  void validate() const;
  /// Stable `key = value` rendering; also the input of config_hash.
  std::string canonical() const;
  std::string config_hash() const;
};

/// Applies `key = value` pairs on top of `base`. Unknown keys are errors.
RunConfig apply_config(RunConfig base, const std::map<std::string, std::string>& kv);

OracleConfig oracle_config(const RunConfig& cfg);

Json record_json(const IterateRecord& r);
Json certificate_json(const std::string& problem, const CriticalityCertificate& c);
Json report_json(const RunConfig& cfg, const RunReport& rep);

/// One JSON object per line, in iterate order.
std::string trajectory_jsonl(const std::vector<IterateRecord>& traj);

int cmd_run(const RunConfig& cfg);

struct CertifyConfig {
  std::string problem;
  std::vector<double> x;
  double tol = kDefaultHullTol;
  double tau_y = PoSettings{}.tau_y;
  OracleMode oracle = OracleMode::kAuto;
  std::string out = ".";
};

int cmd_certify(const CertifyConfig& cfg);

struct FractalConfig {
  int depth_min = 0;
  int depth_max = 8;
  int depth_step = 1;
  std::vector<std::string> diags = {"projections", "tv", "probe", "po"};
  double x = 0.5;
  double rho = kProbeRadius;
  int n_dirs = kProbeDirections;
  std::string out = ".";
};

int cmd_fractal(const FractalConfig& cfg);

int cmd_list_problems();

int cli_main(int argc, char** argv);

}  // namespace ridgemm
