#include "ridgemm/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

namespace ridgemm {

YBox::YBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() < 1)
    throw std::invalid_argument("box bounds must be nonempty and of equal length");
  if (!lower.allFinite() || !upper.allFinite()) throw std::invalid_argument("box bounds must be finite");
  if (!(lower.array() < upper.array()).all()) throw std::invalid_argument("box requires lower < upper");
}

bool YBox::contains(const Vec& y) const {
  return y.size() == lower.size() && (y.array() >= lower.array()).all() && (y.array() <= upper.array()).all();
}

namespace {

bool LexLess(const Vec& a, const Vec& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

double MaxAbsDiff(const Vec& a, const Vec& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

bool NearBoundary(const Vec& y, const YBox& box, double delta) {
  return ((y - box.lower).array() <= delta).any() || ((box.upper - y).array() <= delta).any();
}

void NormalizeZeros(Vec* v) {
  for (Eigen::Index i = 0; i < v->size(); ++i) {
    if ((*v)[i] == 0.0) (*v)[i] = 0.0;
  }
}

// Sorts maximizers and rebuilds segment index pairs from endpoint values.
void Finalize(ArgmaxResult* r, const std::vector<std::pair<Vec, Vec>>& segment_ends, const YBox& box,
              double delta_y) {
  for (Vec& y : r->maximizers) NormalizeZeros(&y);
  std::sort(r->maximizers.begin(), r->maximizers.end(), LexLess);
  r->segments.clear();
  auto index_of = [&](const Vec& y) {
    for (std::size_t i = 0; i < r->maximizers.size(); ++i) {
      if (MaxAbsDiff(r->maximizers[i], y) == 0.0) return static_cast<int>(i);
    }
    return -1;
  };
  for (const auto& [a, b] : segment_ends) {
    Vec an = a, bn = b;
    NormalizeZeros(&an);
    NormalizeZeros(&bn);
    const int ia = index_of(an);
    const int ib = index_of(bn);
    if (ia >= 0 && ib >= 0) r->segments.emplace_back(std::min(ia, ib), std::max(ia, ib));
  }
  r->segment_flag = !r->segments.empty();
  r->boundary_flag = std::any_of(r->maximizers.begin(), r->maximizers.end(),
                                 [&](const Vec& y) { return NearBoundary(y, box, delta_y); });
}

struct Candidate {
  Vec y;
  double f;
};

class GridMaximizer {
 public:
  GridMaximizer(const ExprProgram& prog, const Vec& x, const YBox& box, const GridSettings& s)
      : prog_(prog), x_(x), box_(box), s_(s), r_(prog.dim_y()) {}

  ArgmaxResult Run() {
    if (r_ > 3) throw std::invalid_argument("grid oracle supports dim_y <= 3, got " + std::to_string(r_));
    if (s_.grid_n < 2) throw std::invalid_argument("grid_n must be >= 2");
    if (s_.n_starts < 1) throw std::invalid_argument("n_starts must be >= 1");
    if (box_.dim() != r_) throw DimensionError("box dimension does not match dim_y");
    if (x_.size() != prog_.dim_x()) throw DimensionError("x dimension does not match dim_x");

    const int n = s_.grid_n;
    std::size_t total = 1;
    for (int i = 0; i < r_; ++i) total *= static_cast<std::size_t>(n);
    h_ = (box_.upper - box_.lower) / static_cast<double>(n - 1);

    std::vector<double> vals(total);
    for (std::size_t idx = 0; idx < total; ++idx) vals[idx] = F(Node(idx));

    // Discrete local maxima first, then the best remaining cells.
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    std::vector<std::size_t> starts;
    for (const std::size_t idx : order) {
      if (static_cast<int>(starts.size()) >= s_.n_starts) break;
      if (IsLocalMax(idx, vals)) starts.push_back(idx);
    }
    for (const std::size_t idx : order) {
      if (static_cast<int>(starts.size()) >= s_.n_starts) break;
      if (std::find(starts.begin(), starts.end(), idx) == starts.end()) starts.push_back(idx);
    }

    std::vector<Candidate> cands;
    for (const std::size_t idx : starts) cands.push_back(Ascend(Node(idx), vals[idx]));
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : cands) best = std::max(best, c.f);

    std::vector<std::pair<Vec, Vec>> segments;
    if (r_ == 1) segments = DetectSegments(vals, best);

    ArgmaxResult res;
    res.value = best;
    res.multiplicity_tol = s_.delta_f;
    std::vector<Candidate> kept;
    auto try_keep = [&](const Vec& y) {
      for (const auto& k : kept) {
        if ((k.y - y).norm() <= s_.delta_y) return;
      }
      kept.push_back({y, 0.0});
    };
    for (const auto& [a, b] : segments) {
      try_keep(a);
      try_keep(b);
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.f > b.f; });
    for (const auto& c : cands) {
      if (c.f < best - s_.delta_f) continue;
      const bool inside = std::any_of(segments.begin(), segments.end(), [&](const auto& seg) {
        return c.y[0] > seg.first[0] + s_.delta_y && c.y[0] < seg.second[0] - s_.delta_y;
      });
      if (!inside) try_keep(c.y);
    }
    for (const auto& k : kept) res.maximizers.push_back(k.y);
    Finalize(&res, segments, box_, s_.delta_y);
    return res;
  }

 private:
  double F(const Vec& y) const {
    const double v = eval(prog_, x_, y);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "nonfinite objective value at y = " << y.transpose();
      throw OracleError(os.str());
    }
    return v;
  }

  Vec Node(std::size_t idx) const {
    Vec y(r_);
    for (int i = 0; i < r_; ++i) {
      const auto k = static_cast<int>(idx % static_cast<std::size_t>(s_.grid_n));
      idx /= static_cast<std::size_t>(s_.grid_n);
      y[i] = k == s_.grid_n - 1 ? box_.upper[i] : box_.lower[i] + k * h_[i];
    }
    return y;
  }

  bool IsLocalMax(std::size_t idx, const std::vector<double>& vals) const {
    std::size_t stride = 1;
    std::size_t rest = idx;
    for (int i = 0; i < r_; ++i) {
      const auto k = rest % static_cast<std::size_t>(s_.grid_n);
      rest /= static_cast<std::size_t>(s_.grid_n);
      if (k > 0 && vals[idx - stride] > vals[idx]) return false;
      if (k + 1 < static_cast<std::size_t>(s_.grid_n) && vals[idx + stride] > vals[idx]) return false;
      stride *= static_cast<std::size_t>(s_.grid_n);
    }
    return true;
  }

  // Golden-section maximization of t -> F(y with y[i] = t) over [a, b].
  // Returns the best point seen, never worse than the start.
  void GoldenCoordinate(Vec* y, double* fy, int i, double a, double b) const {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    Vec probe = *y;
    auto f = [&](double t) {
      probe[i] = t;
      return F(probe);
    };
    double best_t = (*y)[i];
    double best_f = *fy;
    auto consider = [&](double t, double v) {
      if (v > best_f) {
        best_f = v;
        best_t = t;
      }
    };
    consider(a, f(a));
    consider(b, f(b));
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    consider(c, fc);
    consider(d, fd);
    for (int it = 0; it < 200 && b - a > s_.tol_y; ++it) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = f(c);
        consider(c, fc);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = f(d);
        consider(d, fd);
      }
    }
    consider(0.5 * (a + b), f(0.5 * (a + b)));
    (*y)[i] = best_t;
    *fy = best_f;
  }

  Vec GradY(const Vec& y) const { return grad_select(prog_, x_, y, TiePolicy::kZero).v; }

  // Newton iterations on grad_y F = 0 while the point stays on one smooth
  // piece, strictly inside the box, and the residual keeps shrinking.
  void Polish(Vec* y, double* fy) const {
    constexpr double kKinkBand = 1e-9;
    for (int it = 0; it < 8; ++it) {
      if (active_kink_count(prog_, x_, *y, kKinkBand) > 0) return;
      const Vec g = GradY(*y);
      const double gnorm = g.norm();
      if (gnorm == 0.0) return;
      Eigen::MatrixXd hess(r_, r_);
      const double step = 1e-6;
      for (int j = 0; j < r_; ++j) {
        Vec yp = *y, ym = *y;
        yp[j] += step;
        ym[j] -= step;
        hess.col(j) = (GradY(yp) - GradY(ym)) / (2.0 * step);
      }
      hess = (0.5 * (hess + hess.transpose())).eval();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() < 0.0).all()) return;
      const Vec cand = *y - ldlt.solve(g);
      if (!cand.allFinite() || !box_.contains(cand)) return;
      const double fc = F(cand);
      if (fc < *fy - 1e-12 * (1.0 + std::fabs(*fy))) return;
      if (GradY(cand).norm() >= gnorm) return;
      *y = cand;
      *fy = std::max(fc, *fy);
    }
  }

  Candidate Ascend(Vec y, double fy) const {
    Vec width = h_;
    for (int sweep = 0; sweep < 50; ++sweep) {
      const Vec before = y;
      for (int i = 0; i < r_; ++i) {
        const double a = std::max(box_.lower[i], y[i] - width[i]);
        const double b = std::min(box_.upper[i], y[i] + width[i]);
        GoldenCoordinate(&y, &fy, i, a, b);
      }
      const double moved = (y - before).lpNorm<Eigen::Infinity>();
      if (r_ == 1 || moved <= s_.tol_y) break;
      width = width.cwiseMin(Vec::Constant(r_, std::max(4.0 * moved, 1e3 * s_.tol_y)));
    }
    Polish(&y, &fy);
    return {y, fy};
  }

  // Runs of >= 3 grid nodes within delta_f of the best value, with ends
  // refined by bisection.
  std::vector<std::pair<Vec, Vec>> DetectSegments(const std::vector<double>& vals, double best) const {
    const double thresh = best - s_.delta_f;
    auto inside = [&](double t) { return F(Vec::Constant(1, t)) >= thresh; };
    auto refine = [&](double in, double out) {
      for (int it = 0; it < 200 && std::fabs(out - in) > s_.tol_y; ++it) {
        const double mid = 0.5 * (in + out);
        if (inside(mid)) {
          in = mid;
        } else {
          out = mid;
        }
      }
      return in;
    };
    std::vector<std::pair<Vec, Vec>> out;
    const int n = s_.grid_n;
    int i = 0;
    while (i < n) {
      if (vals[static_cast<std::size_t>(i)] < thresh) {
        ++i;
        continue;
      }
      int j = i;
      while (j + 1 < n && vals[static_cast<std::size_t>(j + 1)] >= thresh) ++j;
      if (j - i + 1 >= 3) {
        const double lo = i == 0 ? box_.lower[0] : refine(Node(static_cast<std::size_t>(i))[0], Node(static_cast<std::size_t>(i - 1))[0]);
        const double hi = j == n - 1 ? box_.upper[0] : refine(Node(static_cast<std::size_t>(j))[0], Node(static_cast<std::size_t>(j + 1))[0]);
        out.emplace_back(Vec::Constant(1, lo), Vec::Constant(1, hi));
      }
      i = j + 1;
    }
    return out;
  }

  const ExprProgram& prog_;
  const Vec& x_;
  const YBox& box_;
  GridSettings s_;
  int r_;
  Vec h_;
};

}  // namespace

ArgmaxResult argmax_grid_refine(const ExprProgram& prog, const Vec& x, const YBox& box,
                                const GridSettings& settings) {
  return GridMaximizer(prog, x, box, settings).Run();
}

namespace {

const std::vector<std::string>& ClosedFormIds() {
  static const std::vector<std::string> ids = {"smooth_saddle", "smooth_saddle_2d", "convex_hull_necessary",
                                               "po_failure", "envelope_gap"};
  return ids;
}

Vec Clamp(const Vec& x, const YBox& box) { return x.cwiseMax(box.lower).cwiseMin(box.upper); }

void RequireDims(const Vec& x, const YBox& box, int p, int r, const std::string& id) {
  if (x.size() != p || box.dim() != r) throw DimensionError("dimension mismatch for problem '" + id + "'");
}

void RequireInBox(double t, const YBox& box, const std::string& id) {
  if (t < box.lower[0] || t > box.upper[0])
    throw std::invalid_argument("closed form for '" + id + "' needs " + std::to_string(t) + " inside the y-box");
}

}  // namespace

bool has_closed_form(const std::string& problem_id) {
  const auto& ids = ClosedFormIds();
  return std::find(ids.begin(), ids.end(), problem_id) != ids.end();
}

ArgmaxResult argmax_registry(const std::string& id, const Vec& x, const YBox& box, double delta_y) {
  ArgmaxResult r;
  r.multiplicity_tol = GridSettings{}.delta_f;
  std::vector<std::pair<Vec, Vec>> segments;
  if (id == "smooth_saddle" || id == "smooth_saddle_2d") {
    const int d = id == "smooth_saddle" ? 1 : 2;
    RequireDims(x, box, d, d, id);
    const Vec y = Clamp(x, box);
    r.maximizers = {y};
    r.value = x.dot(y) - 0.5 * y.squaredNorm();
  } else if (id == "convex_hull_necessary") {
    RequireDims(x, box, 1, 1, id);
    RequireInBox(-1.0, box, id);
    RequireInBox(1.0, box, id);
    const double c = std::max(-1.0, std::min(1.0, x[0]));
    if (c > 0) {
      r.maximizers = {Vec::Constant(1, 1.0)};
    } else if (c < 0) {
      r.maximizers = {Vec::Constant(1, -1.0)};
    } else {
      r.maximizers = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
    }
    r.value = std::fabs(c);
  } else if (id == "po_failure") {
    RequireDims(x, box, 1, 1, id);
    RequireInBox(0.0, box, id);
    const double m = std::min(std::fabs(x[0]), 1.0);
    const double lo = box.lower[0];
    const double hi = box.upper[0];
    r.value = 0.0;
    if (m == 0.0 && hi > 0.0) {
      const Vec a = Vec::Constant(1, std::max(lo, 0.0));
      const Vec b = Vec::Constant(1, hi);
      r.maximizers = {a, b};
      segments.emplace_back(a, b);
    } else if (m == 1.0 && lo < 0.0) {
      const Vec a = Vec::Constant(1, lo);
      const Vec b = Vec::Constant(1, 0.0);
      r.maximizers = {a, b};
      segments.emplace_back(a, b);
    } else {
      r.maximizers = {Vec::Constant(1, 0.0)};
    }
  } else if (id == "envelope_gap") {
    RequireDims(x, box, 1, 1, id);
    const Vec y = Clamp(x, box);
    r.maximizers = {y};
    r.value = -std::fabs(x[0] - y[0]);
  } else {
    throw std::invalid_argument("no closed-form oracle registered for '" + id + "'");
  }
  Finalize(&r, segments, box, delta_y);
  return r;
}

AtomSet POSample::atom_set() const {
  std::vector<Vec> us;
  us.reserve(atoms.size());
  for (const auto& a : atoms) us.push_back(a.u);
  return AtomSet(std::move(us));
}

std::vector<Vec> po_sample_points(const ArgmaxResult& am) {
  std::vector<Vec> pts = am.maximizers;
  for (const auto& [i, j] : am.segments) {
    const Vec& a = am.maximizers[static_cast<std::size_t>(i)];
    const Vec& b = am.maximizers[static_cast<std::size_t>(j)];
    for (const double t : {0.25, 0.5, 0.75}) pts.push_back(a + t * (b - a));
  }
  return pts;
}

POSample po_sample(const ExprProgram& prog, const Vec& x, const ArgmaxResult& am, const PoSettings& s) {
  if (!(s.tau_y > 0.0)) throw std::invalid_argument("tau_y must be positive");
  if (am.maximizers.empty()) throw OracleError("argmax result has no maximizers");
  POSample out;
  std::vector<PoAtom> raw;
  for (const Vec& y : po_sample_points(am)) {
    const SubdiffSample ss = subdiff_sample(prog, x, y, s.max_branches, s.kink_eps);
    out.incomplete = out.incomplete || ss.incomplete;
    for (const auto& e : ss.elements) {
      const double res = e.v.norm();
      if (res <= s.tau_y) raw.push_back({e.u, y, res});
    }
    if (ss.elements.size() > 1) {
      std::vector<Vec> vs;
      for (const auto& e : ss.elements) vs.push_back(e.v);
      const MinNormCertificate c = min_norm_point(AtomSet(std::move(vs)), std::min(kDefaultHullTol, s.tau_y));
      if (c.norm <= s.tau_y) {
        Vec u = Vec::Zero(prog.dim_x());
        for (std::size_t j = 0; j < ss.elements.size(); ++j) {
          const double w = c.weights[static_cast<Eigen::Index>(j)];
          if (w != 0.0) u += w * ss.elements[j].u;
        }
        raw.push_back({u, y, c.norm});
      }
    }
  }
  if (raw.empty()) {
    std::ostringstream os;
    os << "no PO atom with |v| <= " << s.tau_y << " at x = " << x.transpose();
    throw EmptyPOSample(os.str());
  }
  for (auto& a : raw) {
    NormalizeZeros(&a.u);
    NormalizeZeros(&a.y);
  }
  std::stable_sort(raw.begin(), raw.end(), [](const PoAtom& a, const PoAtom& b) {
    if (LexLess(a.u, b.u)) return true;
    if (LexLess(b.u, a.u)) return false;
    return LexLess(a.y, b.y);
  });
  for (auto& a : raw) {
    const bool dup = std::any_of(out.atoms.begin(), out.atoms.end(),
                                 [&](const PoAtom& k) { return MaxAbsDiff(k.u, a.u) <= 1e-12; });
    if (!dup) out.atoms.push_back(std::move(a));
  }
  return out;
}

AtomSet envelope_sample(const ExprProgram& prog, const Vec& x, const ArgmaxResult& am, const PoSettings& s) {
  std::vector<Vec> us;
  for (const Vec& y : po_sample_points(am)) {
    const SubdiffSample ss = subdiff_sample(prog, x, y, s.max_branches, s.kink_eps);
    for (const auto& e : ss.elements) {
      Vec u = e.u;
      NormalizeZeros(&u);
      if (std::none_of(us.begin(), us.end(), [&](const Vec& k) { return k == u; })) us.push_back(u);
    }
  }
  std::sort(us.begin(), us.end(), LexLess);
  return AtomSet(std::move(us));
}

}  // namespace ridgemm
