#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ridgemm/hull.hpp"
#include "ridgemm/oracles.hpp"

namespace ridgemm {

using Point2 = Eigen::Vector2d;

class FractalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// y-quarter taken by the child in x-column j of its parent.
inline constexpr std::array<int, 4> kPlacement = {1, 3, 0, 2};

/// Axis-aligned square of side 4^-level with lower-left corner
/// (cx, cy) * 4^-level. Corners are exact dyadic doubles.
struct Square {
  int level = 0;
  std::int64_t cx = 0;
  std::int64_t cy = 0;

  double side() const;
  double x0() const { return static_cast<double>(cx) * side(); }
  double y0() const { return static_cast<double>(cy) * side(); }
  bool contains(const Square& child) const;
  friend bool operator==(const Square&, const Square&) = default;
};

/// Depth-i approximation C_i: 4^i squares of side 4^-i, one per x-column.
/// The quadtree is implicit; square (m, c) is computed from the base-4
/// digits of c.
class FractalSet {
 public:
  static constexpr int kMaxDepth = 12;

  explicit FractalSet(int depth);

  int depth() const { return depth_; }
  std::int64_t columns(int level) const { return std::int64_t{1} << (2 * level); }
  static std::int64_t column_y(int level, std::int64_t column);
  Square square(int level, std::int64_t column) const;
  std::vector<Square> squares(int level) const;
  std::vector<Square> children(const Square& s) const;

 private:
  int depth_;
};

struct DistBounds {
  double lo = 0.0;  // dist(z, C_i)
  double hi = 0.0;  // lo + sqrt(2) 4^-i
  Square nearest;   // lowest-column depth-i square attaining lo
  Point2 nearest_point;
};

DistBounds dist_bounds(const FractalSet& F, const Point2& z);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Bounds on g(x, y) = -2 dist((x, y), C) + x.
Interval g_eval_bounds(const FractalSet& F, double x, double y);

struct Chain {
  std::vector<Square> squares;  // levels 0..depth, nested
  double y_lo = 0.0;            // y-interval of the depth-level square
  double y_hi = 0.0;
  double y_limit = 0.0;         // point of C on this chain, digits extended to level 26
};

struct ColumnChain {
  double x = 0.0;
  std::vector<Chain> chains;  // 1, or 2 on a column boundary
};

ColumnChain column_chains(const FractalSet& F, double x);

enum class Axis { kX, kY };

/// Exact union length, as numerator over 4^depth.
struct DyadicLength {
  std::int64_t numerator = 0;
  int depth = 0;
  double value() const;
};

DyadicLength axis_projection_length(const FractalSet& F, Axis axis);

/// Direction (a, b) / sqrt(5) with (a, b) = (1, 2) or (2, 1).
double rotated_projection_length(const FractalSet& F, int a, int b);

DyadicLength min_total_variation(const FractalSet& F);

struct ProbeResult {
  std::vector<Point2> directions;  // unit (z' - proj z') / dist for exterior probes
  std::vector<double> angles;      // atan2 of directions, ascending
  double max_angular_gap = 0.0;
  int interior_count = 0;
  int n_dirs = 0;
};

inline constexpr double kProbeRadius = 0.1;
inline constexpr int kProbeDirections = 256;

ProbeResult subdiff_probe(const FractalSet& F, const Point2& z, double rho = kProbeRadius,
                          int n_dirs = kProbeDirections);

struct GPoSample {
  POSample sample;
  MinNormCertificate cert;
  double min_norm = 0.0;
  double hull_lo = 0.0;
  double hull_hi = 0.0;
  std::vector<Point2> chain_points;
};

/// Atoms 2d + 1 for g at abscissa x, d running over the x-components of the
/// sampled gradients of -dist at every chain point. Interior probes give d = 0.
GPoSample g_po_sample(const FractalSet& F, double x, double tau = 1e-9, double rho = kProbeRadius,
                      int n_dirs = kProbeDirections);

}  // namespace ridgemm
