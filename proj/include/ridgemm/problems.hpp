#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ridgemm/expr.hpp"
#include "ridgemm/oracles.hpp"

namespace ridgemm {

struct ProblemSpec {
  std::string id;
  std::string expr_text;
  ExprProgram prog;
  YBox box;
  bool closed_form = false;  // argmax_registry(id, ...) applies
  std::string known_value_text;
  std::optional<ExprProgram> known_value;  // program in x only (dim_y = 0)
  std::vector<Vec> known_critical_points;
  std::string notes;
  double x_lo = -1.0;  // range used for random validation draws
  double x_hi = 1.0;

  int dim_x() const { return prog.dim_x(); }
  int dim_y() const { return prog.dim_y(); }
  double known_f(const Vec& x) const;
};

struct ProblemInfo {
  std::string id;
  std::string notes;
};

std::vector<ProblemInfo> list_problems();

/// Registered id, or a path to a problem file of `key = value` lines with
/// keys id, dim_x, dim_y, expr, box_lower, box_upper and optionally
/// known_value_expr, x_range, notes.
ProblemSpec load_problem(const std::string& id_or_path, bool validate = true);

ProblemSpec problem_from_text(const std::string& text);

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationReport {
  int value_draws = 0;
  double max_value_error = 0.0;        // |grid value - known f|
  int closed_form_draws = 0;
  double max_closed_form_gap = 0.0;    // |grid value - closed-form value|
};

inline constexpr double kValueTol = 1e-6;

/// Registration checks; throws ValidationError on failure.
ValidationReport validate_problem(const ProblemSpec& spec, int value_draws = 200, int closed_form_draws = 100,
                                  std::uint64_t seed = 20240601);

enum class OracleMode { kAuto, kClosedForm, kGrid };

OracleMode parse_oracle_mode(const std::string& s);
std::string to_string(OracleMode m);

struct OracleConfig {
  OracleMode mode = OracleMode::kAuto;
  GridSettings grid;
  PoSettings po;
};

inline constexpr double kGridKinkBand = 1e-9;

using ArgmaxOracle = std::function<ArgmaxResult(const Vec&)>;

/// A maximization oracle bound to one problem plus the PO settings matched
/// to it (exact kinks for closed forms, a small kink band for the grid).
struct BoundOracle {
  ArgmaxOracle argmax;
  PoSettings po;
  bool closed_form = false;
};

BoundOracle make_oracle(const ProblemSpec& spec, const OracleConfig& cfg = {});

}  // namespace ridgemm
