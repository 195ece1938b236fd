#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ridgemm/expr.hpp"
#include "ridgemm/hull.hpp"
#include "ridgemm/oracles.hpp"
#include "ridgemm/problems.hpp"

namespace ridgemm {

struct StepSchedule {
  double alpha0 = 0.5;
  double gamma = 1.0;

  void validate() const;
};

/// alpha0 * (k+1)^(-gamma)
double schedule_alpha(const StepSchedule& s, long k);

enum class AtomRule { kFirst, kMinNormAtom, kRandom };

AtomRule parse_atom_rule(const std::string& s);
std::string to_string(AtomRule r);

struct IterateRecord {
  long k = 0;
  Vec x;
  Vec y;
  Vec u;
  double alpha = 0.0;
  double f = 0.0;  // F(x_k, y_k)
  bool boundary = false;
};

struct StepResult {
  Vec x_next;
  IterateRecord record;
  POSample sample;
};

/// One iteration: maximize in y, pick a PO atom u, step x against it.
/// `seed` only matters for AtomRule::kRandom.
StepResult ridge_step(const ExprProgram& prog, const Vec& x, const BoundOracle& oracle, const StepSchedule& s,
                      long k, AtomRule rule, std::uint64_t seed = 0);

struct WitnessTriple {
  Vec y;
  Vec u;
  double lambda = 0.0;
};

struct CriticalityCertificate {
  Vec x;
  double tol = 0.0;
  AtomSet atoms;
  std::vector<PoAtom> provenance;  // aligned with atoms
  MinNormCertificate cert;         // min-norm point over the full atom set
  MinNormCertificate reduced;      // same point on at most dim_x + 1 atoms
  bool critical = false;
  std::vector<WitnessTriple> witness;
  double vertex_min_norm = 0.0;  // what the vertex set alone would report
  bool boundary_warning = false;
  bool incomplete = false;
  std::vector<Vec> maximizers;
};

CriticalityCertificate certify_po_critical(const ExprProgram& prog, const Vec& x, const BoundOracle& oracle,
                                           double tol = kDefaultHullTol);

struct RunOptions {
  Vec x0;
  StepSchedule schedule;
  long iters = 500;
  AtomRule rule = AtomRule::kMinNormAtom;
  std::uint64_t seed = 0;
  double cert_tol = kDefaultHullTol;
  int stall_window = 50;
  double stall_floor = 1e-12;
  double escape_radius = 1e8;
  double tail_fraction = 0.1;
};

/// Hull of the atoms actually used over the last part of a run, with the
/// radius of the iterates it was collected from.
struct TailCertificate {
  long first_k = 0;
  long count = 0;
  AtomSet atoms;
  MinNormCertificate cert;
  bool critical = false;
  double radius = 0.0;  // max_k |x_k - x_final| over the window
};

struct RunReport {
  std::string status;  // completed | stalled | escaped | oracle_error
  std::string message;
  long iterations = 0;
  Vec x_final;
  double f_final = 0.0;
  double alpha_final = 0.0;
  double min_abs_x = 0.0;  // min over recorded iterates of |x_k|
  double tail_oscillation = 0.0;  // max - min of f over the tail window
  long tail_first_k = 0;
  bool boundary_warning = false;
  std::optional<CriticalityCertificate> terminal;
  std::optional<TailCertificate> tail;
};

struct RunResult {
  std::vector<IterateRecord> trajectory;
  RunReport report;
};

RunResult run(const ExprProgram& prog, const BoundOracle& oracle, const RunOptions& opts);

}  // namespace ridgemm
