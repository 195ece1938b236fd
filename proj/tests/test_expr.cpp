#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "reference_oracles.hpp"
#include "ridgemm/expr.hpp"
#include "ridgemm/problems.hpp"
#include "ridgemm/rng.hpp"

using namespace ridgemm;

namespace {

Vec V(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

int CountKind(const ExprProgram& p, NodeKind k) {
  const auto n = p.nodes();
  return static_cast<int>(std::count_if(n.begin(), n.end(), [&](const Node& node) { return node.kind == k; }));
}

std::set<std::pair<double, double>> AsSet(const SubdiffSample& s) {
  std::set<std::pair<double, double>> out;
  for (const auto& e : s.elements) out.insert({e.u[0], e.v[0]});
  return out;
}

// Random expression text over x0..x(p-1), y0..y(r-1).
std::string RandomExpr(CounterRng& rng, int depth, int p, int r) {
  const auto pick = rng.below(depth <= 0 ? 3 : 11);
  auto sub = [&] { return RandomExpr(rng, depth - 1, p, r); };
  switch (pick) {
    case 0: {
      const double c = std::round(rng.uniform(-50, 50) * 8.0) / 8.0;
      return c < 0 ? "(" + std::to_string(c) + ")" : std::to_string(c);
    }
    case 1: return "x" + std::to_string(rng.below(static_cast<std::uint64_t>(p)));
    case 2: return "y" + std::to_string(rng.below(static_cast<std::uint64_t>(r)));
    case 3: return "(" + sub() + " + " + sub() + ")";
    case 4: return "(" + sub() + " - " + sub() + ")";
    case 5: return sub() + "*" + sub();
    case 6: return "-(" + sub() + ")";
    case 7: return "pow(" + sub() + ", " + std::to_string(1 + rng.below(3)) + ")";
    case 8: return "abs(" + sub() + ")";
    case 9: return "min(" + sub() + ", " + sub() + ")";
    default: return "max(" + sub() + "," + sub() + ")";
  }
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  const ExprProgram hull = parse("x0*y0 - 2*abs(abs(y0)-1)", 1, 1);
  CHECK(hull.nodes()[static_cast<std::size_t>(hull.root())].kind == NodeKind::kSub);
  CHECK(CountKind(hull, NodeKind::kMul) == 2);
  CHECK(CountKind(hull, NodeKind::kAbs) == 2);
  CHECK(hull.kink_count() == 2);
  // The outer abs takes a subtraction whose left operand is the inner abs.
  const auto nodes = hull.nodes();
  const auto outer = std::find_if(nodes.rbegin(), nodes.rend(), [](const Node& n) { return n.kind == NodeKind::kAbs; });
  const Node& inner_arg = nodes[static_cast<std::size_t>(outer->lhs)];
  CHECK(inner_arg.kind == NodeKind::kSub);
  CHECK(nodes[static_cast<std::size_t>(inner_arg.lhs)].kind == NodeKind::kAbs);

  const ExprProgram single = parse("x0", 1, 1);
  REQUIRE(single.nodes().size() == 1);
  CHECK(single.nodes()[0].kind == NodeKind::kVarX);

  const ExprProgram foot = parse("min(0, y0) - y0*min(abs(x0),1)", 1, 1);
  CHECK(CountKind(foot, NodeKind::kMin) == 2);
  CHECK(CountKind(foot, NodeKind::kAbs) == 1);
  CHECK(foot.kink_count() == 3);
}

TEST_CASE("parse reports position of syntax errors") {
  try {
    parse("x0 +\n  $", 1, 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
  }
  try {
    parse("abs(x0", 1, 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 7);
  }
  CHECK_THROWS_AS(parse("", 1, 1), ParseError);
  CHECK_THROWS_AS(parse("x0 y0", 1, 1), ParseError);
  CHECK_THROWS_AS(parse("sin(x0)", 1, 1), ParseError);
  CHECK_THROWS_AS(parse("x0 / y0", 1, 1), ParseError);
  CHECK_THROWS_AS(parse("--x0", 1, 1), ParseError);
}

TEST_CASE("parse rejects out-of-range indices and bad exponents") {
  try {
    parse("x0 + y3", 1, 2);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.column() == 6);
    CHECK(std::string(e.what()).find("out of range") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("x1", 1, 1), ParseError);
  CHECK_THROWS_WITH_AS(parse("pow(x0, 2.5)", 1, 1), doctest::Contains("non-integer"), ParseError);
  CHECK_THROWS_AS(parse("pow(x0, 0)", 1, 1), ParseError);
  CHECK_THROWS_AS(parse("pow(x0, -1)", 1, 1), ParseError);
  CHECK_THROWS_AS(parse("pow(x0, x0)", 1, 1), ParseError);
  CHECK_NOTHROW(parse("pow(x0, 3)", 1, 1));
}

TEST_CASE("program constructor enforces tree invariants") {
  CHECK_THROWS_AS(ExprProgram({{NodeKind::kVarX, 0, 2, -1, -1}}, 1, 1), DimensionError);
  CHECK_THROWS(ExprProgram({{NodeKind::kAdd, 0, 0, 0, 0}}, 1, 1));
  CHECK_THROWS(ExprProgram({{NodeKind::kVarX, 0, 0, -1, -1}, {NodeKind::kPow, 0, 0, 0, -1}}, 1, 1));
  // A node used twice is a DAG, not a tree.
  CHECK_THROWS(ExprProgram({{NodeKind::kVarX, 0, 0, -1, -1}, {NodeKind::kAdd, 0, 0, 0, 0}}, 1, 1));
}

TEST_CASE("print round-trips to an identical tree") {
  for (const char* text : {"x0*y0 - 2*abs(abs(y0)-1)", "x0", "min(0, y0) - y0*min(abs(x0),1)", "-abs(x0-y0)",
                           "-(x0 - y0)*2", "x0 - (y0 - x0)", "-(-x0)", "pow(-x0, 2)", "(-2)*x0", "1e-3*x0 + 2.5e10",
                           "-0.5*pow(y0, 2)", "max(-1, min(1, x0))*y0"}) {
    const ExprProgram p = parse(text, 1, 1);
    const std::string printed = print(p);
    CAPTURE(text);
    CAPTURE(printed);
    CHECK(parse(printed, 1, 1) == p);
    CHECK(print(parse(printed, 1, 1)) == printed);
  }
  CounterRng rng(7);
  for (int t = 0; t < 300; ++t) {
    const std::string text = RandomExpr(rng, 4, 2, 2);
    const ExprProgram p = parse(text, 2, 2);
    const std::string printed = print(p);
    CAPTURE(text);
    CAPTURE(printed);
    REQUIRE(parse(printed, 2, 2) == p);
    const Vec x = V({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const Vec y = V({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const double a = eval(p, x, y);
    const double b = eval(parse(printed, 2, 2), x, y);
    CHECK((a == b || (std::isnan(a) && std::isnan(b))));
  }
}

TEST_CASE("eval examples") {
  const ExprProgram hull = parse("max(-1, min(1, x0))*y0 - 2*abs(abs(y0) - 1)", 1, 1);
  CHECK(eval(hull, V({0}), V({1})) == 0.0);
  CHECK(eval(parse("-abs(x0-y0)", 1, 1), V({2}), V({2})) == 0.0);
  CHECK(eval(parse("min(0, y0) - y0*min(abs(x0),1)", 1, 1), V({0}), V({2})) == 0.0);
  CHECK(eval(parse("pow(x0, 3) - 2*x0*y0", 1, 1), V({2}), V({0.5})) == doctest::Approx(6.0));
  CHECK_THROWS_AS(eval(hull, V({0, 1}), V({1})), DimensionError);
  CHECK_THROWS_AS(eval(hull, V({0}), V({})), DimensionError);
}

TEST_CASE("grad_select examples") {
  CHECK(grad_select(parse("pow(x0,2)", 1, 1), V({3}), V({0})).u[0] == 6.0);
  const GradElement z = grad_select(parse("abs(x0)", 1, 1), V({0}), V({0}), TiePolicy::kZero);
  CHECK(z.u[0] == 0.0);
  CHECK(z.branch_id == "0");

  // F = xy - 2||y|-1| at (0.5, 1): (u, v) = (1, 0.5 - 2 sigma) with sigma the side of |y-1|.
  const ExprProgram f = parse("x0*y0 - 2*abs(abs(y0)-1)", 1, 1);
  const GradElement l = grad_select(f, V({0.5}), V({1}), TiePolicy::kLeft);
  const GradElement r = grad_select(f, V({0.5}), V({1}), TiePolicy::kRight);
  const GradElement m = grad_select(f, V({0.5}), V({1}), TiePolicy::kZero);
  CHECK(l.u[0] == 1.0);
  CHECK(l.v[0] == 0.5 + 2.0);
  CHECK(l.branch_id == "-");
  CHECK(r.u[0] == 1.0);
  CHECK(r.v[0] == 0.5 - 2.0);
  CHECK(r.branch_id == "+");
  CHECK(m.v[0] == 0.5);  // midpoint of the two branches
}

TEST_CASE("zero policy averages the branch pair at every kink primitive") {
  for (const char* text : {"abs(x0 - y0)", "min(x0, y0)", "max(x0, y0)"}) {
    const ExprProgram p = parse(text, 1, 1);
    const Vec x = V({0.25});
    const Vec y = V({0.25});
    const GradElement l = grad_select(p, x, y, TiePolicy::kLeft);
    const GradElement r = grad_select(p, x, y, TiePolicy::kRight);
    const GradElement m = grad_select(p, x, y, TiePolicy::kZero);
    CAPTURE(text);
    CHECK(m.u[0] == doctest::Approx(0.5 * (l.u[0] + r.u[0])));
    CHECK(m.v[0] == doctest::Approx(0.5 * (l.v[0] + r.v[0])));
  }
  // min/max follow the abs identities away from the kink too.
  const ExprProgram mn = parse("min(2*x0, y0)", 1, 1);
  CHECK(grad_select(mn, V({1}), V({5})).u[0] == 2.0);
  CHECK(grad_select(mn, V({1}), V({5})).v[0] == 0.0);
  CHECK(grad_select(mn, V({3}), V({5})).v[0] == 1.0);
  const ExprProgram mx = parse("max(2*x0, y0)", 1, 1);
  CHECK(grad_select(mx, V({3}), V({5})).u[0] == 2.0);
  CHECK(grad_select(mx, V({1}), V({5})).v[0] == 1.0);
}

TEST_CASE("subdiff_sample examples") {
  const SubdiffSample env = subdiff_sample(parse("-abs(x0-y0)", 1, 1), V({1}), V({1}), 16);
  CHECK(AsSet(env) == std::set<std::pair<double, double>>{{-1, 1}, {1, -1}});
  CHECK(env.active_kinks == 1);
  CHECK_FALSE(env.incomplete);

  const ExprProgram sm = parse("x0*y0 - 0.5*pow(y0,2)", 1, 1);
  const SubdiffSample one = subdiff_sample(sm, V({3}), V({1}), 16);
  REQUIRE(one.elements.size() == 1);
  CHECK(one.elements[0].u[0] == 1.0);
  CHECK(one.elements[0].v[0] == 2.0);

  const SubdiffSample hull = subdiff_sample(parse("x0*y0 - 2*abs(abs(y0)-1)", 1, 1), V({0}), V({1}), 16);
  CHECK(AsSet(hull) == std::set<std::pair<double, double>>{{1, -2}, {1, 2}});
}

TEST_CASE("subdiff_sample contains both pure policies and is deterministic") {
  const ExprProgram p = parse("abs(x0) + abs(y0) + abs(x0 - y0) + min(x0, 0) + max(y0, 0)", 1, 1);
  const Vec x = V({0});
  const Vec y = V({0});
  const SubdiffSample a = subdiff_sample(p, x, y, 64);
  const SubdiffSample b = subdiff_sample(p, x, y, 64);
  REQUIRE(a.elements.size() == b.elements.size());
  for (std::size_t i = 0; i < a.elements.size(); ++i) {
    CHECK(a.elements[i].u == b.elements[i].u);
    CHECK(a.elements[i].v == b.elements[i].v);
    CHECK(a.elements[i].branch_id == b.elements[i].branch_id);
  }
  CHECK(a.active_kinks == 5);
  const GradElement l = grad_select(p, x, y, TiePolicy::kLeft);
  const GradElement r = grad_select(p, x, y, TiePolicy::kRight);
  CHECK(a.elements.front().u == l.u);
  CHECK(a.elements.front().v == l.v);
  const bool has_right = std::any_of(a.elements.begin(), a.elements.end(),
                                     [&](const GradElement& e) { return e.u == r.u && e.v == r.v; });
  CHECK(has_right);

  const SubdiffSample small = subdiff_sample(p, x, y, 3);
  CHECK(small.incomplete);
  CHECK(small.elements.size() <= 3);
  const bool small_right = std::any_of(small.elements.begin(), small.elements.end(),
                                       [&](const GradElement& e) { return e.u == r.u && e.v == r.v; });
  CHECK(small_right);
  CHECK_THROWS(subdiff_sample(p, x, y, 0));
}

TEST_CASE("subdiff elements are limits of nearby gradients") {
  // Every branch gradient at a kink equals the classical gradient at some
  // nearby smooth point.
  const ExprProgram p = parse("x0*y0 - 2*abs(abs(y0)-1) + abs(x0 - y0)", 1, 1);
  const Vec x = V({1});
  const Vec y = V({1});
  const SubdiffSample s = subdiff_sample(p, x, y, 16);
  for (const auto& e : s.elements) {
    bool matched = false;
    for (int i = 0; i < 64 && !matched; ++i) {
      const double th = 2.0 * std::numbers::pi * (i + 0.5) / 64.0;
      const Vec xn = x + V({1e-7 * std::cos(th)});
      const Vec yn = y + V({1e-7 * std::sin(th)});
      const GradElement g = grad_select(p, xn, yn);
      matched = (g.u - e.u).norm() < 1e-6 && (g.v - e.v).norm() < 1e-6;
    }
    CAPTURE(e.branch_id);
    CHECK(matched);
  }
}

TEST_CASE("fd_check examples") {
  CHECK(fd_check(parse("pow(x0,2)", 1, 1), V({1}), V({0}), 1e-5) <= 1e-8);
  const ProblemSpec hull = load_problem("convex_hull_necessary", false);
  CHECK(fd_check(hull.prog, V({0.5}), V({0.3}), 1e-6) <= 1e-5);
  const ProblemSpec env = load_problem("envelope_gap", false);
  CHECK(fd_check(env.prog, V({2}), V({0.5}), 1e-6) <= 1e-5);
}

TEST_CASE("kink-free points: one element, classical gradient, finite differences agree") {
  CounterRng rng(99);
  for (const auto& info : list_problems()) {
    const ProblemSpec spec = load_problem(info.id, false);
    int checked = 0;
    for (int t = 0; t < 1000 && checked < 100; ++t) {
      Vec x(spec.dim_x());
      Vec y(spec.dim_y());
      for (int i = 0; i < spec.dim_x(); ++i) x[i] = rng.uniform(spec.x_lo, spec.x_hi);
      for (int i = 0; i < spec.dim_y(); ++i) y[i] = rng.uniform(spec.box.lower[i], spec.box.upper[i]);
      if (crosses_kink(spec.prog, x, y, 1e-5)) continue;
      ++checked;
      const SubdiffSample s = subdiff_sample(spec.prog, x, y, 16);
      REQUIRE(s.elements.size() == 1);
      const GradElement g = grad_select(spec.prog, x, y);
      CHECK(s.elements[0].u == g.u);
      CHECK(s.elements[0].v == g.v);
      CHECK(fd_check(spec.prog, x, y, 1e-6) <= 1e-5);

      Vec z(spec.dim_x() + spec.dim_y());
      z << x, y;
      const Vec fd = ref::central_difference(
          [&](const Vec& w) { return eval(spec.prog, w.head(spec.dim_x()), w.tail(spec.dim_y())); }, z, 1e-6);
      Vec full(z.size());
      full << g.u, g.v;
      CHECK((fd - full).lpNorm<Eigen::Infinity>() <= 1e-5 * std::max(1.0, full.lpNorm<Eigen::Infinity>()));
    }
    CAPTURE(info.id);
    CHECK(checked == 100);
  }
}

TEST_CASE("kink band widens activation") {
  const ExprProgram p = parse("abs(x0 - y0)", 1, 1);
  CHECK(active_kink_count(p, V({1}), V({1 + 1e-12}), 0.0) == 0);
  CHECK(active_kink_count(p, V({1}), V({1 + 1e-12}), 1e-9) == 1);
  CHECK(subdiff_sample(p, V({1}), V({1 + 1e-12}), 8, 1e-9).elements.size() == 2);
  CHECK(crosses_kink(p, V({1}), V({1 + 1e-9}), 1e-6));
  CHECK_FALSE(crosses_kink(p, V({1}), V({2}), 1e-6));
}
