#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace ridgemm {

using Vec = Eigen::VectorXd;

enum class NodeKind { kConst, kVarX, kVarY, kAdd, kSub, kMul, kNeg, kPow, kAbs, kMin, kMax };

/// One node of an expression tree. Children always precede their parent in
/// the owning program's node array, so a forward sweep over the array is a
/// valid evaluation order.
struct Node {
  NodeKind kind = NodeKind::kConst;
  double value = 0.0;  // kConst
  int index = 0;       // variable index for kVarX/kVarY, exponent for kPow
  int lhs = -1;
  int rhs = -1;
};

/// Thrown for malformed DSL text. `line` and `column` are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A piecewise-smooth objective F(x, y) built from constants, variables,
/// + - * and unary minus, integer powers, abs, min and max.
class ExprProgram {
 public:
  ExprProgram(std::vector<Node> nodes, int dim_x, int dim_y);

  int dim_x() const { return dim_x_; }
  int dim_y() const { return dim_y_; }
  std::span<const Node> nodes() const { return nodes_; }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }

  // abs, min and max nodes each carry one kink; kink ids follow node order.
  int kink_count() const { return kink_count_; }
  int kink_id(int node) const { return kink_ids_[static_cast<std::size_t>(node)]; }

  friend bool operator==(const ExprProgram& a, const ExprProgram& b);

 private:
  std::vector<Node> nodes_;
  std::vector<int> kink_ids_;
  int dim_x_;
  int dim_y_;
  int kink_count_ = 0;
};

ExprProgram parse(std::string_view text, int dim_x, int dim_y);

/// Renders DSL text that parses back to an identical tree.
std::string print(const ExprProgram& prog);

double eval(const ExprProgram& prog, const Vec& x, const Vec& y);

enum class TiePolicy { kLeft, kRight, kZero };

/// Gradient of one smooth selection. `branch_id` holds one character per
/// active kink, in kink order: '-' or '+' for the chosen side, '0' for the
/// averaged choice.
struct GradElement {
  Vec u;  // d/dx
  Vec v;  // d/dy
  std::string branch_id;
};

/// A kink is active when |kink argument| <= kink_eps.
GradElement grad_select(const ExprProgram& prog, const Vec& x, const Vec& y,
                        TiePolicy policy = TiePolicy::kZero, double kink_eps = 0.0);

struct SubdiffSample {
  std::vector<GradElement> elements;
  bool incomplete = false;  // more sign patterns than max_branches
  int active_kinks = 0;
};

/// Enumerates branch gradients by flipping every active kink. Pattern 0 (all
/// '-') is grad_select(kLeft) and the all-'+' pattern is grad_select(kRight);
/// both are always present. Exact duplicates are dropped, first kept.
SubdiffSample subdiff_sample(const ExprProgram& prog, const Vec& x, const Vec& y,
                             std::size_t max_branches, double kink_eps = 0.0);

/// Number of kinks whose argument is within kink_eps of zero.
int active_kink_count(const ExprProgram& prog, const Vec& x, const Vec& y, double kink_eps);

/// True when some kink argument changes sign (or vanishes) between the point
/// and any of its +-h coordinate neighbours.
bool crosses_kink(const ExprProgram& prog, const Vec& x, const Vec& y, double h);

/// max_i |g_i - fd_i| / max(1, |g|_inf) against central differences of step h.
double fd_check(const ExprProgram& prog, const Vec& x, const Vec& y, double h);

}  // namespace ridgemm
