#include "ridgemm/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ridgemm/rng.hpp"

namespace ridgemm {

void StepSchedule::validate() const {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
}

double schedule_alpha(const StepSchedule& s, long k) {
  if (k < 0) throw std::invalid_argument("k must be >= 0");
  return s.alpha0 * std::pow(static_cast<double>(k) + 1.0, -s.gamma);
}

AtomRule parse_atom_rule(const std::string& s) {
  if (s == "first") return AtomRule::kFirst;
  if (s == "min_norm_atom" || s == "min-norm-atom" || s == "min_norm") return AtomRule::kMinNormAtom;
  if (s == "random") return AtomRule::kRandom;
  throw std::invalid_argument("atom rule must be first, min_norm_atom or random, got '" + s + "'");
}

std::string to_string(AtomRule r) {
  switch (r) {
    case AtomRule::kFirst: return "first";
    case AtomRule::kMinNormAtom: return "min_norm_atom";
    case AtomRule::kRandom: return "random";
  }
  return "min_norm_atom";
}

StepResult ridge_step(const ExprProgram& prog, const Vec& x, const BoundOracle& oracle, const StepSchedule& s,
                      long k, AtomRule rule, std::uint64_t seed) {
  const ArgmaxResult am = oracle.argmax(x);
  if (am.maximizers.empty()) throw OracleError("argmax oracle returned no maximizer");
  StepResult out;
  out.sample = po_sample(prog, x, am, oracle.po);
  const auto& atoms = out.sample.atoms;
  std::size_t pick = 0;
  switch (rule) {
    case AtomRule::kFirst:
      break;
    case AtomRule::kMinNormAtom:
      for (std::size_t i = 1; i < atoms.size(); ++i) {
        if (atoms[i].u.norm() < atoms[pick].u.norm()) pick = i;
      }
      break;
    case AtomRule::kRandom:
      pick = static_cast<std::size_t>(CounterRng(seed).at(static_cast<std::uint64_t>(k)) % atoms.size());
      break;
  }
  const double alpha = schedule_alpha(s, k);
  IterateRecord& rec = out.record;
  rec.k = k;
  rec.x = x;
  rec.y = atoms[pick].y;
  rec.u = atoms[pick].u;
  rec.alpha = alpha;
  rec.f = eval(prog, x, rec.y);
  rec.boundary = am.boundary_flag;
  out.x_next = x - alpha * rec.u;
  return out;
}

CriticalityCertificate certify_po_critical(const ExprProgram& prog, const Vec& x, const BoundOracle& oracle,
                                           double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const ArgmaxResult am = oracle.argmax(x);
  const POSample sample = po_sample(prog, x, am, oracle.po);
  CriticalityCertificate c;
  c.x = x;
  c.tol = tol;
  c.atoms = sample.atom_set();
  c.provenance = sample.atoms;
  c.incomplete = sample.incomplete;
  c.boundary_warning = am.boundary_flag;
  c.maximizers = am.maximizers;
  const HullVerdict v = hull_contains_zero(c.atoms, tol);
  c.cert = v.cert;
  c.critical = v.contains_zero;
  c.reduced = caratheodory_reduce(c.atoms, c.cert);
  c.vertex_min_norm = vertex_min_norm(c.atoms);
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    const double w = c.reduced.weights[static_cast<Eigen::Index>(i)];
    if (w > 0.0) c.witness.push_back({sample.atoms[i].y, sample.atoms[i].u, w});
  }
  return c;
}

namespace {

TailCertificate CertifyTail(const std::vector<IterateRecord>& traj, long first, const Vec& x_final, double tol) {
  TailCertificate t;
  t.first_k = traj[static_cast<std::size_t>(first)].k;
  t.count = static_cast<long>(traj.size()) - first;
  std::vector<Vec> us;
  for (std::size_t i = static_cast<std::size_t>(first); i < traj.size(); ++i) {
    const Vec& u = traj[i].u;
    if (std::none_of(us.begin(), us.end(), [&](const Vec& a) { return a == u; })) us.push_back(u);
    t.radius = std::max(t.radius, (traj[i].x - x_final).norm());
  }
  t.atoms = AtomSet(std::move(us));
  const HullVerdict v = hull_contains_zero(t.atoms, tol);
  t.cert = v.cert;
  t.critical = v.contains_zero;
  return t;
}

}  // namespace

RunResult run(const ExprProgram& prog, const BoundOracle& oracle, const RunOptions& opts) {
  opts.schedule.validate();
  if (opts.iters < 1) throw std::invalid_argument("iteration budget must be >= 1");
  if (opts.x0.size() != prog.dim_x()) throw DimensionError("x0 has the wrong dimension");
  if (!(opts.cert_tol > 0.0)) throw std::invalid_argument("tol must be positive");

  RunResult res;
  RunReport& rep = res.report;
  auto& traj = res.trajectory;
  traj.reserve(static_cast<std::size_t>(opts.iters));
  Vec x = opts.x0;
  rep.status = "completed";
  int quiet = 0;  // consecutive steps with |dx| below the stall floor

  for (long k = 0; k < opts.iters; ++k) {
    StepResult st;
    try {
      st = ridge_step(prog, x, oracle, opts.schedule, k, opts.rule, opts.seed);
    } catch (const OracleError& e) {
      rep.status = "oracle_error";
      rep.message = e.what();
      break;
    }
    rep.boundary_warning = rep.boundary_warning || st.record.boundary;
    const double dx = (st.x_next - x).norm();
    traj.push_back(std::move(st.record));
    x = st.x_next;
    if (!x.allFinite() || x.norm() > opts.escape_radius) {
      rep.status = "escaped";
      rep.message = "iterate left the ball of radius " + std::to_string(opts.escape_radius);
      break;
    }
    quiet = dx < opts.stall_floor ? quiet + 1 : 0;
    if (quiet >= opts.stall_window) {
      rep.status = "stalled";
      rep.message = "max |x_{k+1} - x_k| below " + std::to_string(opts.stall_floor) + " over " +
                    std::to_string(opts.stall_window) + " iterations";
      break;
    }
  }

  rep.iterations = static_cast<long>(traj.size());
  rep.x_final = x;
  if (traj.empty()) return res;

  rep.alpha_final = traj.back().alpha;
  rep.min_abs_x = std::numeric_limits<double>::infinity();
  for (const auto& r : traj) rep.min_abs_x = std::min(rep.min_abs_x, r.x.norm());
  rep.min_abs_x = std::min(rep.min_abs_x, x.norm());

  const long n = static_cast<long>(traj.size());
  const long tail = std::max(1L, static_cast<long>(std::ceil(opts.tail_fraction * static_cast<double>(n))));
  const long first = n - tail;
  rep.tail_first_k = traj[static_cast<std::size_t>(first)].k;
  double fmin = std::numeric_limits<double>::infinity();
  double fmax = -fmin;
  for (long i = first; i < n; ++i) {
    fmin = std::min(fmin, traj[static_cast<std::size_t>(i)].f);
    fmax = std::max(fmax, traj[static_cast<std::size_t>(i)].f);
  }
  rep.tail_oscillation = fmax - fmin;
  rep.tail = CertifyTail(traj, first, x, opts.cert_tol);

  if (rep.status == "oracle_error" || rep.status == "escaped") {
    rep.f_final = traj.back().f;
    return res;
  }
  try {
    rep.terminal = certify_po_critical(prog, x, oracle, opts.cert_tol);
    rep.f_final = oracle.argmax(x).value;
    rep.boundary_warning = rep.boundary_warning || rep.terminal->boundary_warning;
  } catch (const OracleError& e) {
    rep.f_final = traj.back().f;
    rep.message = std::string("terminal certification failed: ") + e.what();
  }
  return res;
}

}  // namespace ridgemm
