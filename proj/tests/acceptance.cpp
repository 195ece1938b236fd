// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. All tolerances are fixed here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "reference_oracles.hpp"
#include "ridgemm/cli.hpp"
#include "ridgemm/rng.hpp"

using namespace ridgemm;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr double kC1MinAbsX = 0.05;
constexpr double kC1MinNorm = 1e-9;
constexpr double kC1Seconds = 5;
// Criterion 2
constexpr int kC2Draws = 50;
constexpr double kC2AtomTol = 1e-7;
constexpr double kC2Seconds = 2;
// Criterion 3
constexpr double kC3MinNorm = 1e-7;
constexpr double kC3BigAtom = 2.9;
constexpr double kC3FlatTol = 1e-9;
constexpr double kC3FlatRadius = 0.1;
constexpr double kC3Seconds = 2;
// Criterion 4
constexpr long kC4Iters = 2000;
constexpr double kC4OscFactor = 10;
constexpr double kC4CertTol = 1e-6;
constexpr double kC4Seconds = 10;
// Criterion 5
constexpr int kC5Sets = 500;
constexpr double kC5GridTol = 1e-4;
constexpr double kC5PointTol = 1e-10;
constexpr double kC5Seconds = 30;
// Criterion 6
constexpr int kC6Points = 100;
constexpr double kC6Step = 1e-6;
constexpr double kC6Tol = 1e-5;
constexpr double kC6Seconds = 5;
// Criterion 7
constexpr int kC7MaxDepth = 8;
constexpr double kC7Shrink = 0.2;
constexpr int kC7TvDepth = 6;
constexpr int kC7BoundaryLevel = 4;
constexpr int kC7RandomX = 100;
constexpr double kC7Seconds = 60;
// Criterion 8
constexpr double kC8X = 0.5;
constexpr double kC8Seconds = 120;
// Criterion 9
constexpr int kC9Runs = 3;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Silences the command functions' console output.
class Quiet {
 public:
  Quiet() : out_(std::cout.rdbuf(sink_.rdbuf())), err_(std::cerr.rdbuf(sink_.rdbuf())) {}
  ~Quiet() {
    std::cout.rdbuf(out_);
    std::cerr.rdbuf(err_);
  }

 private:
  std::ostringstream sink_;
  std::streambuf* out_;
  std::streambuf* err_;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ridgemm_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Vec S(double v) { return Vec::Constant(1, v); }

Outcome Criterion1() {
  Outcome o;
  const fs::path d = Scratch("c1");
  RunConfig rc;
  rc.problem = "convex_hull_necessary";
  rc.x0 = {0.7};
  rc.schedule = {0.5, 1.0};
  rc.iters = 500;
  rc.out = d.string();
  CertifyConfig cc;
  cc.problem = rc.problem;
  cc.x = {0.0};
  cc.out = d.string();
  int run_rc = 0, cert_rc = 0;
  {
    Quiet q;
    run_rc = cmd_run(rc);
    cert_rc = cmd_certify(cc);
  }
  o.require(run_rc == kExitOk, "run exit code");
  o.require(cert_rc == kExitOk, "certify exit code");
  const Json rep = Json::parse(Slurp(d / "report.json"));
  const double min_abs = rep["min_abs_x"].get<double>();
  o.require(min_abs <= kC1MinAbsX, "min |x_k| <= 0.05");
  const Json cert = Json::parse(Slurp(d / "certificate.json"));
  o.require(cert["critical"].get<bool>(), "critical at 0");
  const double mn = cert["min_norm"].get<double>();
  o.require(mn <= kC1MinNorm, "min-norm <= 1e-9");
  std::vector<double> us, ls;
  for (const auto& w : cert["witness"]) {
    us.push_back(w["u"][0].get<double>());
    ls.push_back(w["lambda"].get<double>());
  }
  o.require(us == std::vector<double>{-1.0, 1.0}, "witness atoms {1, -1}");
  o.require(ls.size() == 2 && std::fabs(ls[0] - 0.5) <= 1e-12 && std::fabs(ls[1] - 0.5) <= 1e-12,
            "lambda = (1/2, 1/2)");
  const double vmn = cert["vertex_min_norm"].get<double>();
  o.require(vmn == 1.0, "vertex-only min-norm 1");
  o.note("min|x_k| " + Fmt(min_abs) + ", hull min-norm " + Fmt(mn) + ", vertex min-norm " + Fmt(vmn));
  return o;
}

Outcome Criterion2() {
  Outcome o;
  const ProblemSpec spec = load_problem("envelope_gap");
  CounterRng rng(2024);
  int exact = 0;
  bool finer = true;
  for (const bool grid : {false, true}) {
    OracleConfig oc;
    oc.mode = grid ? OracleMode::kGrid : OracleMode::kClosedForm;
    const BoundOracle oracle = make_oracle(spec, oc);
    for (int t = 0; t < kC2Draws; ++t) {
      const Vec x = S(rng.uniform(spec.x_lo, spec.x_hi));
      const ArgmaxResult am = oracle.argmax(x);
      const POSample s = po_sample(spec.prog, x, am, oracle.po);
      if (s.atoms.size() == 1 && std::fabs(s.atoms[0].u[0]) <= kC2AtomTol) ++exact;
      const AtomSet env = envelope_sample(spec.prog, x, am, oracle.po);
      double lo = INFINITY, hi = -INFINITY;
      for (const Vec& u : env.atoms()) {
        lo = std::min(lo, u[0]);
        hi = std::max(hi, u[0]);
      }
      finer = finer && lo == -1.0 && hi == 1.0;
    }
  }
  o.require(exact == 2 * kC2Draws, "PO atoms exactly {0}");
  o.require(finer, "envelope set spans [-1, 1]");
  const BoundOracle oracle = make_oracle(spec, {});
  RunOptions ro;
  ro.x0 = S(3.0);
  ro.iters = 500;
  const RunResult r = run(spec.prog, oracle, ro);
  bool still = true;
  for (const auto& rec : r.trajectory) still = still && rec.x[0] == 3.0 && rec.u[0] == 0.0;
  still = still && r.report.x_final[0] == 3.0;
  o.require(still, "run exactly stationary");
  o.note(std::to_string(exact) + "/" + std::to_string(2 * kC2Draws) + " draws give {0}, run " + r.report.status +
         " after " + std::to_string(r.report.iterations) + " iterations at x = 3");
  return o;
}

Outcome Criterion3() {
  Outcome o;
  const ProblemSpec spec = load_problem("po_failure");
  double worst_norm = 0.0, smallest_big = INFINITY;
  bool warned = true;
  for (const bool grid : {false, true}) {
    OracleConfig oc;
    oc.mode = grid ? OracleMode::kGrid : OracleMode::kClosedForm;
    const BoundOracle oracle = make_oracle(spec, oc);
    const CriticalityCertificate c = certify_po_critical(spec.prog, S(0), oracle, kC3MinNorm);
    worst_norm = std::max(worst_norm, c.cert.norm);
    double big = 0.0;
    for (const Vec& u : c.atoms.atoms()) big = std::max(big, std::fabs(u[0]));
    smallest_big = std::min(smallest_big, big);
    warned = warned && c.boundary_warning;
  }
  o.require(worst_norm <= kC3MinNorm, "PO hull min-norm <= 1e-7");
  o.require(smallest_big >= kC3BigAtom, "atom of magnitude >= 2.9");
  o.require(warned, "boundary warning");
  // f == 0 near 0 from grid values, so the Clarke subdifferential at 0 is {0}.
  double flat = 0.0;
  for (int i = -20; i <= 20; ++i) {
    const double x = kC3FlatRadius * i / 20.0;
    flat = std::max(flat, std::fabs(argmax_grid_refine(spec.prog, S(x), spec.box).value));
  }
  o.require(flat <= kC3FlatTol, "grid values of f vanish near 0");
  o.note("min-norm " + Fmt(worst_norm) + ", largest atom " + Fmt(smallest_big) + ", max |f| on [-0.1, 0.1] " +
         Fmt(flat));
  return o;
}

void Criterion4One(const std::string& id, double x0, double gamma, Outcome& o) {
  const ProblemSpec spec = load_problem(id);
  const BoundOracle oracle = make_oracle(spec, {});
  RunOptions ro;
  ro.x0 = S(x0);
  ro.schedule = {0.5, gamma};
  ro.iters = kC4Iters;
  ro.cert_tol = kC4CertTol;
  const RunResult r = run(spec.prog, oracle, ro);
  const RunReport& rep = r.report;
  o.require(rep.iterations == kC4Iters, "full budget");
  o.require(rep.tail_oscillation <= kC4OscFactor * rep.alpha_final, "last-decile oscillation <= 10 alpha_final");
  const bool terminal = rep.terminal && rep.terminal->critical;
  const bool tail = rep.tail && rep.tail->critical;
  o.require(terminal || tail, "terminal point certified at tol 1e-6");
  o.note(id + ": oscillation " + Fmt(rep.tail_oscillation) + " vs " + Fmt(kC4OscFactor * rep.alpha_final) +
         ", x_final " + Fmt(rep.x_final[0]) + ", terminal hull min-norm " +
         (rep.terminal ? Fmt(rep.terminal->cert.norm) : std::string("n/a")) + ", tail hull min-norm " +
         (rep.tail ? Fmt(rep.tail->cert.norm) + " over radius " + Fmt(rep.tail->radius) : std::string("n/a")));
}

// Each run is timed separately against its own limit.
Outcome Criterion4() {
  Outcome o;
  for (const auto& [id, x0, gamma] : {std::tuple{"smooth_saddle", 4.0, 0.7}, std::tuple{"convex_hull_necessary", 0.7, 1.0}}) {
    const auto t0 = Clock::now();
    Criterion4One(id, x0, gamma, o);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (secs > kC4Seconds) o.require(false, std::string(id) + " runtime over 10 s");
  }
  return o;
}

Outcome Criterion5() {
  Outcome o;
  CounterRng rng(5005);
  double worst_grid = 0.0, worst_point = 0.0;
  int worst_support_excess = 0;
  for (int t = 0; t < kC5Sets; ++t) {
    const int p = 1 + static_cast<int>(rng.below(3));
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<Vec> atoms;
    for (int i = 0; i < n; ++i) {
      Vec a(p);
      for (int j = 0; j < p; ++j) a[j] = rng.uniform(-1, 1);
      atoms.push_back(a);
    }
    const AtomSet s(atoms);
    const MinNormCertificate c = min_norm_point(s);
    worst_grid = std::max(worst_grid, std::fabs(c.norm - ref::grid_min_norm(atoms)));
    // Reduce both the solver's certificate and a dense interior combination.
    MinNormCertificate dense;
    dense.weights = Vec(n);
    for (int i = 0; i < n; ++i) dense.weights[i] = rng.uniform(0.05, 1.0);
    dense.weights /= dense.weights.sum();
    dense.point = ref::combine(atoms, dense.weights);
    dense.norm = dense.point.norm();
    for (const MinNormCertificate* in : std::vector<const MinNormCertificate*>{&c, &dense}) {
      const MinNormCertificate r = caratheodory_reduce(s, *in);
      worst_point = std::max(worst_point, (r.point - ref::combine(atoms, r.weights)).norm());
      worst_point = std::max(worst_point, (r.point - in->point).norm());
      worst_support_excess = std::max(worst_support_excess, support_size(r) - (p + 1));
      if (r.weights.minCoeff() < 0.0 || std::fabs(r.weights.sum() - 1.0) > 1e-12) worst_support_excess = 99;
    }
  }
  o.require(worst_grid <= kC5GridTol, "Wolfe vs grid oracle within 1e-4");
  o.require(worst_point <= kC5PointTol, "reduction keeps the point within 1e-10");
  o.require(worst_support_excess <= 0, "reduction uses <= p+1 simplex weights");
  o.note("max |Wolfe - grid| " + Fmt(worst_grid) + ", max point shift " + Fmt(worst_point));
  return o;
}

Outcome Criterion6() {
  Outcome o;
  CounterRng rng(6006);
  double worst = 0.0;
  int problems = 0;
  for (const auto& info : list_problems()) {
    const ProblemSpec spec = load_problem(info.id, false);
    int got = 0;
    while (got < kC6Points) {
      Vec x(spec.dim_x()), y(spec.dim_y());
      for (int i = 0; i < spec.dim_x(); ++i) x[i] = rng.uniform(spec.x_lo, spec.x_hi);
      for (int i = 0; i < spec.dim_y(); ++i) y[i] = rng.uniform(spec.box.lower[i], spec.box.upper[i]);
      if (crosses_kink(spec.prog, x, y, kC6Step)) continue;
      worst = std::max(worst, fd_check(spec.prog, x, y, kC6Step));
      ++got;
    }
    ++problems;
  }
  o.require(worst <= kC6Tol, "fd_check <= 1e-5");
  o.note(std::to_string(problems) + " problems x " + std::to_string(kC6Points) + " points, worst " + Fmt(worst));
  return o;
}

Outcome Criterion7() {
  Outcome o;
  bool axis = true, strict = true, tv_ok = true;
  double prev12 = INFINITY, prev21 = INFINITY, first12 = 0.0, last12 = 0.0;
  std::string tvs;
  for (int d = 0; d <= kC7MaxDepth; ++d) {
    const FractalSet F(d);
    axis = axis && axis_projection_length(F, Axis::kX).numerator == F.columns(d) &&
           axis_projection_length(F, Axis::kY).numerator == F.columns(d);
    const double r12 = rotated_projection_length(F, 1, 2);
    const double r21 = rotated_projection_length(F, 2, 1);
    strict = strict && r12 < prev12 && r21 < prev21;
    prev12 = r12;
    prev21 = r21;
    if (d == 0) first12 = r12;
    last12 = r12;
    if (d <= kC7TvDepth) {
      const double tv = min_total_variation(F).value();
      tv_ok = tv_ok && tv >= d;
      tvs += (tvs.empty() ? "" : " ") + Fmt(tv);
    }
  }
  o.require(axis, "axis projections exactly 1");
  o.require(strict, "rotated projections strictly decreasing");
  o.require(last12 <= kC7Shrink * first12, "depth-8 (1,2) length <= 0.2 x depth 0");
  o.require(tv_ok, "TV bound >= depth");

  bool dichotomy = true;
  CounterRng rng(7007);
  for (int d = kC7BoundaryLevel; d <= kC7MaxDepth; d += kC7MaxDepth - kC7BoundaryLevel) {
    const FractalSet F(d);
    const std::int64_t n = std::int64_t{1} << (2 * kC7BoundaryLevel);
    for (std::int64_t k = 0; k <= n; ++k) {
      const double x = std::ldexp(static_cast<double>(k), -2 * kC7BoundaryLevel);
      const std::size_t want = (k == 0 || k == n) ? 1 : 2;
      const ColumnChain c = column_chains(F, x);
      dichotomy = dichotomy && c.chains.size() == want;
      if (want == 2 && c.chains.size() == 2) {
        dichotomy = dichotomy && (c.chains[0].y_hi <= c.chains[1].y_lo || c.chains[1].y_hi <= c.chains[0].y_lo);
      }
    }
    for (int t = 0; t < kC7RandomX; ++t) {
      const double x = rng.uniform();
      const double scaled = std::ldexp(x, 2 * d);
      if (scaled == std::floor(scaled)) continue;
      dichotomy = dichotomy && column_chains(F, x).chains.size() == 1;
    }
  }
  o.require(dichotomy, "pair/singleton dichotomy");
  o.note("(1,2) length " + Fmt(first12) + " -> " + Fmt(last12) + ", TV bounds " + tvs);
  return o;
}

Outcome Criterion8() {
  Outcome o;
  bool bracket = true;
  for (int d = 2; d <= 8; ++d) {
    const FractalSet F(d);
    double lo = -INFINITY, hi = -INFINITY;
    for (const Chain& c : column_chains(F, kC8X).chains) {
      const Interval g = g_eval_bounds(F, kC8X, c.y_limit);
      lo = std::max(lo, g.lo);
      hi = std::max(hi, g.hi);
    }
    const double w = 2.0 * std::numbers::sqrt2 * std::ldexp(1.0, -2 * d);
    bracket = bracket && lo <= kC8X && kC8X <= hi && hi - lo <= w * (1 + 1e-12);
  }
  o.require(bracket, "max of g over the chain brackets x");

  std::vector<double> norms;
  std::string ns;
  for (const int d : {2, 4, 6, 8}) {
    norms.push_back(g_po_sample(FractalSet(d), kC8X).min_norm);
    ns += (ns.empty() ? "" : " ") + Fmt(norms.back());
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < norms.size(); ++i) decreasing = decreasing && norms[i] < norms[i - 1];
  o.require(decreasing, "PO hull min-norm strictly decreasing over depths 2,4,6,8");

  const auto gap = [](int d) {
    const FractalSet F(d);
    const Point2 z(kC8X, column_chains(F, kC8X).chains.front().y_limit);
    return subdiff_probe(F, z).max_angular_gap;
  };
  const double g2 = gap(2), g6 = gap(6);
  o.require(g6 < g2, "probe angular gap decreases from depth 2 to 6");
  o.note("min-norms " + ns + ", angular gap " + Fmt(g2) + " -> " + Fmt(g6));
  return o;
}

Outcome Criterion9() {
  Outcome o;
  std::vector<std::string> traj;
  for (int i = 0; i < kC9Runs; ++i) {
    const fs::path d = Scratch("c9_" + std::to_string(i));
    RunConfig rc;
    rc.problem = "po_failure";
    rc.x0 = {0.4};
    rc.rule = AtomRule::kRandom;
    rc.seed = 9;
    rc.iters = 300;
    rc.out = d.string();
    int code = 0;
    {
      Quiet q;
      code = cmd_run(rc);
    }
    o.require(code == kExitOk, "run exit code");
    traj.push_back(Slurp(d / "trajectory.jsonl"));
  }
  bool same = !traj.front().empty();
  for (const auto& t : traj) same = same && t == traj.front();
  o.require(same, "byte-identical trajectory.jsonl");
  o.note(std::to_string(kC9Runs) + " runs, " + std::to_string(traj.front().size()) + " bytes each");
  return o;
}

}  // namespace

int main() {
  struct Item {
    int id;
    std::string name;
    double limit;
    std::function<Outcome()> body;
  };
  const std::vector<Item> items = {
      {1, "convex hull necessity", kC1Seconds, Criterion1},
      {2, "envelope gap", kC2Seconds, Criterion2},
      {3, "PO formula failure", kC3Seconds, Criterion3},
      {4, "convergence", 2 * kC4Seconds, Criterion4},
      {5, "min-norm oracle equivalence", kC5Seconds, Criterion5},
      {6, "gradient correctness", kC6Seconds, Criterion6},
      {7, "fractal set properties", kC7Seconds, Criterion7},
      {8, "counterexample trend", kC8Seconds, Criterion8},
      {9, "determinism", INFINITY, Criterion9},
  };
  bool all = true;
  for (const Item& it : items) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = it.body();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (secs > it.limit) o.require(false, "runtime over " + Fmt(it.limit) + " s");
    all = all && o.pass;
    std::printf("criterion %d %s: %s (%s) [%.2f s]\n", it.id, it.name.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
