#include "ridgemm/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <tuple>

namespace ridgemm {

namespace {

constexpr int kLimitLevel = 26;

double Pow4(int m) { return std::ldexp(1.0, -2 * m); }

double BoxDistance(const Point2& z, double x0, double y0, double s, Point2* nearest) {
  const double nx = std::clamp(z.x(), x0, x0 + s);
  const double ny = std::clamp(z.y(), y0, y0 + s);
  if (nearest != nullptr) *nearest = Point2(nx, ny);
  return std::hypot(z.x() - nx, z.y() - ny);
}

// Union length, in grid cells, of the integer intervals [t, t + w).
std::int64_t UnionCells(const std::vector<std::int64_t>& starts, std::int64_t w, std::int64_t span) {
  std::vector<bool> cover(static_cast<std::size_t>(span), false);
  for (const std::int64_t t : starts) {
    for (std::int64_t c = t; c < t + w; ++c) cover[static_cast<std::size_t>(c)] = true;
  }
  return std::count(cover.begin(), cover.end(), true);
}

}  // namespace

double Square::side() const { return Pow4(level); }

bool Square::contains(const Square& c) const {
  if (c.level < level) return false;
  const int shift = 2 * (c.level - level);
  const std::int64_t k = std::int64_t{1} << shift;
  return c.cx >= cx * k && c.cx + 1 <= (cx + 1) * k && c.cy >= cy * k && c.cy + 1 <= (cy + 1) * k;
}

FractalSet::FractalSet(int depth) : depth_(depth) {
  if (depth < 0 || depth > kMaxDepth)
    throw std::out_of_range("fractal depth must lie in [0, " + std::to_string(kMaxDepth) + "]");
}

std::int64_t FractalSet::column_y(int level, std::int64_t column) {
  std::int64_t y = 0;
  for (int m = 0; m < level; ++m) {
    const auto digit = static_cast<int>((column >> (2 * (level - 1 - m))) & 3);
    y = 4 * y + kPlacement[static_cast<std::size_t>(digit)];
  }
  return y;
}

Square FractalSet::square(int level, std::int64_t column) const {
  if (level < 0 || level > kLimitLevel) throw std::out_of_range("level out of range");
  if (column < 0 || column >= columns(level)) throw std::out_of_range("column out of range");
  return {level, column, column_y(level, column)};
}

std::vector<Square> FractalSet::squares(int level) const {
  std::vector<Square> out;
  out.reserve(static_cast<std::size_t>(columns(level)));
  for (std::int64_t c = 0; c < columns(level); ++c) out.push_back(square(level, c));
  return out;
}

std::vector<Square> FractalSet::children(const Square& s) const {
  std::vector<Square> out;
  for (int j = 0; j < 4; ++j) out.push_back({s.level + 1, 4 * s.cx + j, 4 * s.cy + kPlacement[static_cast<std::size_t>(j)]});
  return out;
}

DistBounds dist_bounds(const FractalSet& F, const Point2& z) {
  const int depth = F.depth();
  // Key: (distance, leftmost depth-level column, level descending).
  using Item = std::tuple<double, std::int64_t, int, std::int64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  auto push = [&](int level, std::int64_t column) {
    const Square s = F.square(level, column);
    const double d = BoxDistance(z, s.x0(), s.y0(), s.side(), nullptr);
    queue.emplace(d, column << (2 * (depth - level)), -level, column);
  };
  push(0, 0);
  for (;;) {
    const auto [d, leftmost, neg_level, column] = queue.top();
    queue.pop();
    const int level = -neg_level;
    if (level == depth) {
      DistBounds out;
      out.nearest = F.square(level, column);
      out.lo = BoxDistance(z, out.nearest.x0(), out.nearest.y0(), out.nearest.side(), &out.nearest_point);
      out.hi = out.lo + std::numbers::sqrt2 * Pow4(depth);
      return out;
    }
    for (int j = 0; j < 4; ++j) push(level + 1, 4 * column + j);
  }
}

Interval g_eval_bounds(const FractalSet& F, double x, double y) {
  const DistBounds b = dist_bounds(F, Point2(x, y));
  return {x - 2.0 * b.hi, x - 2.0 * b.lo};
}

ColumnChain column_chains(const FractalSet& F, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("column_chains needs 0 <= x <= 1");
  const int depth = F.depth();
  const std::int64_t n = F.columns(depth);
  const double t = std::ldexp(x, 2 * depth);
  const double ft = std::floor(t);
  const auto k = static_cast<std::int64_t>(ft);

  // Each chain: depth-level column plus the digit its column sequence
  // continues with (-1 means follow the digits of x).
  std::vector<std::pair<std::int64_t, int>> leaves;
  if (t == ft && k > 0 && k < n) {
    leaves = {{k - 1, 3}, {k, 0}};
  } else if (k >= n) {
    leaves = {{n - 1, 3}};
  } else {
    leaves = {{k, -1}};
  }

  ColumnChain out;
  out.x = x;
  for (const auto& [leaf, tail] : leaves) {
    Chain ch;
    for (int m = 0; m <= depth; ++m) ch.squares.push_back(F.square(m, leaf >> (2 * (depth - m))));
    const Square& last = ch.squares.back();
    ch.y_lo = last.y0();
    ch.y_hi = last.y0() + last.side();
    std::int64_t col = leaf;
    for (int m = depth + 1; m <= kLimitLevel; ++m) {
      int digit = tail;
      if (digit < 0) {
        const double tm = std::ldexp(x, 2 * m);
        digit = static_cast<int>(static_cast<std::int64_t>(std::floor(tm)) & 3);
      }
      col = 4 * col + digit;
    }
    const double s = Pow4(kLimitLevel);
    ch.y_limit = static_cast<double>(FractalSet::column_y(kLimitLevel, col)) * s + 0.5 * s;
    out.chains.push_back(std::move(ch));
  }
  return out;
}

double DyadicLength::value() const { return std::ldexp(static_cast<double>(numerator), -2 * depth); }

DyadicLength axis_projection_length(const FractalSet& F, Axis axis) {
  const int depth = F.depth();
  const std::int64_t n = F.columns(depth);
  std::vector<std::int64_t> starts;
  starts.reserve(static_cast<std::size_t>(n));
  for (std::int64_t c = 0; c < n; ++c) starts.push_back(axis == Axis::kX ? c : FractalSet::column_y(depth, c));
  return {UnionCells(starts, 1, n), depth};
}

double rotated_projection_length(const FractalSet& F, int a, int b) {
  if (!((a == 1 && b == 2) || (a == 2 && b == 1)))
    throw std::invalid_argument("direction must be (1,2) or (2,1)");
  const int depth = F.depth();
  const std::int64_t n = F.columns(depth);
  std::vector<std::int64_t> starts;
  starts.reserve(static_cast<std::size_t>(n));
  for (std::int64_t c = 0; c < n; ++c) starts.push_back(a * c + b * FractalSet::column_y(depth, c));
  // A unit square projects onto [a cx + b cy, a cx + b cy + a + b] / sqrt(5).
  const std::int64_t cells = UnionCells(starts, a + b, (a + b) * n);
  return std::ldexp(static_cast<double>(cells), -2 * depth) / std::sqrt(5.0);
}

DyadicLength min_total_variation(const FractalSet& F) {
  const int depth = F.depth();
  const std::int64_t n = F.columns(depth);
  std::int64_t sum = 0;
  std::int64_t prev = FractalSet::column_y(depth, 0);
  for (std::int64_t c = 1; c < n; ++c) {
    const std::int64_t y = FractalSet::column_y(depth, c);
    sum += std::max<std::int64_t>(0, std::abs(y - prev) - 1);
    prev = y;
  }
  return {sum, depth};
}

ProbeResult subdiff_probe(const FractalSet& F, const Point2& z, double rho, int n_dirs) {
  if (n_dirs < 8) throw std::invalid_argument("n_dirs must be >= 8");
  if (!(rho > 0.0)) throw std::invalid_argument("probe radius must be positive");
  ProbeResult out;
  out.n_dirs = n_dirs;
  for (int k = 0; k < n_dirs; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n_dirs;
    const Point2 p = z + rho * Point2(std::cos(th), std::sin(th));
    const DistBounds b = dist_bounds(F, p);
    if (b.lo == 0.0) {
      ++out.interior_count;
      continue;
    }
    out.directions.push_back((p - b.nearest_point) / b.lo);
  }
  if (out.directions.empty()) throw FractalError("all probe points are interior to C_i; increase the probe radius");
  for (const Point2& d : out.directions) out.angles.push_back(std::atan2(d.y(), d.x()));
  std::sort(out.angles.begin(), out.angles.end());
  double gap = out.angles.front() + 2.0 * std::numbers::pi - out.angles.back();
  for (std::size_t i = 1; i < out.angles.size(); ++i) gap = std::max(gap, out.angles[i] - out.angles[i - 1]);
  out.max_angular_gap = gap;
  return out;
}

GPoSample g_po_sample(const FractalSet& F, double x, double tau, double rho, int n_dirs) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("g_po_sample needs 0 <= x <= 1");
  GPoSample out;
  std::vector<PoAtom> raw;
  for (const Chain& ch : column_chains(F, x).chains) {
    const Point2 z(x, ch.y_limit);
    out.chain_points.push_back(z);
    const Vec yv = Vec::Constant(1, ch.y_limit);
    bool interior = false;
    try {
      const ProbeResult pr = subdiff_probe(F, z, rho, n_dirs);
      interior = pr.interior_count > 0;
      // grad f = -direction for f = -dist, so d = -direction.x().
      for (const Point2& d : pr.directions) raw.push_back({Vec::Constant(1, -2.0 * d.x() + 1.0), yv, 0.0});
    } catch (const FractalError&) {
      interior = true;
    }
    if (interior) raw.push_back({Vec::Constant(1, 1.0), yv, 0.0});
  }
  std::stable_sort(raw.begin(), raw.end(), [](const PoAtom& a, const PoAtom& b) { return a.u[0] < b.u[0]; });
  for (auto& a : raw) {
    if (out.sample.atoms.empty() || a.u[0] - out.sample.atoms.back().u[0] > tau) out.sample.atoms.push_back(std::move(a));
  }
  out.hull_lo = out.sample.atoms.front().u[0];
  out.hull_hi = out.sample.atoms.back().u[0];
  out.cert = min_norm_point(out.sample.atom_set());
  out.min_norm = out.cert.norm;
  return out;
}

}  // namespace ridgemm
