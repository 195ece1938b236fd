#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ridgemm/expr.hpp"
#include "ridgemm/hull.hpp"

namespace ridgemm {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No candidate atom reached the y-residual threshold at any maximizer.
class EmptyPOSample : public OracleError {
 public:
  using OracleError::OracleError;
};

struct YBox {
  Vec lower;
  Vec upper;

  YBox() = default;
  YBox(Vec lo, Vec hi);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& y) const;
};

struct ArgmaxResult {
  std::vector<Vec> maximizers;  // sorted lexicographically
  double value = 0.0;
  bool boundary_flag = false;
  bool segment_flag = false;
  // Index pairs into `maximizers`: endpoints of a continuum of maximizers.
  std::vector<std::pair<int, int>> segments;
  double multiplicity_tol = 0.0;
};

struct GridSettings {
  int grid_n = 64;
  int n_starts = 8;
  double tol_y = 1e-12;
  double delta_f = 1e-8;
  double delta_y = 1e-6;
};

/// Grid search on the box followed by coordinate-wise golden-section ascent
/// from the best cells and a Newton polish on smooth pieces.
ArgmaxResult argmax_grid_refine(const ExprProgram& prog, const Vec& x, const YBox& box,
                                const GridSettings& settings = {});

bool has_closed_form(const std::string& problem_id);

/// Exact maximizer sets for the registered benchmark problems.
ArgmaxResult argmax_registry(const std::string& problem_id, const Vec& x, const YBox& box,
                             double delta_y = GridSettings{}.delta_y);

struct PoAtom {
  Vec u;
  Vec y;
  double residual = 0.0;  // |v| of the admitted (u, v)
};

struct POSample {
  std::vector<PoAtom> atoms;
  bool incomplete = false;

  AtomSet atom_set() const;
};

struct PoSettings {
  double tau_y = 1e-7;
  std::size_t max_branches = 64;
  double kink_eps = 0.0;
};

/// Points at which PO atoms are collected: every maximizer plus the 1/4, 1/2
/// and 3/4 points of each flagged segment.
std::vector<Vec> po_sample_points(const ArgmaxResult& am);

POSample po_sample(const ExprProgram& prog, const Vec& x, const ArgmaxResult& am,
                   const PoSettings& settings = {});

/// u-parts of every branch gradient at every maximizer, without requiring the
/// y-block to vanish. Used to contrast with the PO hull.
AtomSet envelope_sample(const ExprProgram& prog, const Vec& x, const ArgmaxResult& am,
                        const PoSettings& settings = {});

}  // namespace ridgemm
