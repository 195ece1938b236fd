#include "ridgemm/problems.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ridgemm/io.hpp"
#include "ridgemm/rng.hpp"

namespace ridgemm {

namespace {

struct Entry {
  const char* id;
  int dim_x;
  int dim_y;
  const char* expr;
  double box_lo;
  double box_hi;
  const char* known_value;
  double x_lo;
  double x_hi;
  std::vector<double> critical;  // scalar critical points, replicated over dim_x
  const char* notes;
};

const std::vector<Entry>& Registry() {
  static const std::vector<Entry> entries = {
      {"smooth_saddle", 1, 1, "x0*y0 - 0.5*pow(y0, 2)", -10, 10, "0.5*pow(x0, 2)", -5, 5, {0.0},
       "smooth baseline: F = xy - y^2/2, maximizer y = x, f(x) = x^2/2"},
      {"smooth_saddle_2d", 2, 2, "x0*y0 + x1*y1 - 0.5*pow(y0, 2) - 0.5*pow(y1, 2)", -10, 10,
       "0.5*pow(x0, 2) + 0.5*pow(x1, 2)", -5, 5, {0.0},
       "smooth baseline in two dimensions: maximizer y = x, f(x) = |x|^2/2"},
      {"convex_hull_necessary", 1, 1, "max(-1, min(1, x0))*y0 - 2*abs(abs(y0) - 1)", -2, 2,
       "abs(max(-1, min(1, x0)))", -3, 3, {0.0},
       "F = clamp(x)y - 2||y|-1|: f(x) = |x| on [-1,1] and 1 outside; at x = 0 the maximizers are "
       "y = -1 and y = 1 and only the hull of their atoms contains 0"},
      {"po_failure", 1, 1, "min(0, y0) - y0*min(abs(x0), 1)", 0, 3, "0", -2, 2, {0.0},
       "F = -y min(|x|,1) + min(0,y): f = 0 but at x = 0 the whole segment [0, 3] maximizes and the "
       "PO hull is far larger than the Clarke subdifferential {0}; maximizers touch the box"},
      {"envelope_gap", 1, 1, "-abs(x0 - y0)", -5, 5, "0", -4, 4, {0.0},
       "F = -|x - y|: f = 0, PO atoms {0} while the envelope set is [-1, 1]"},
  };
  return entries;
}

ProblemSpec Build(const std::string& id, int dim_x, int dim_y, const std::string& expr, const Vec& lo,
                  const Vec& hi) {
  return ProblemSpec{.id = id, .expr_text = expr, .prog = parse(expr, dim_x, dim_y), .box = YBox(lo, hi),
                     .known_value_text = {}, .known_value = std::nullopt, .known_critical_points = {}, .notes = {}};
}

ProblemSpec FromEntry(const Entry& e) {
  ProblemSpec s = Build(e.id, e.dim_x, e.dim_y, e.expr, Vec::Constant(e.dim_y, e.box_lo),
                        Vec::Constant(e.dim_y, e.box_hi));
  s.closed_form = has_closed_form(e.id);
  s.known_value_text = e.known_value;
  s.known_value = parse(e.known_value, e.dim_x, 0);
  for (const double c : e.critical) s.known_critical_points.push_back(Vec::Constant(e.dim_x, c));
  s.notes = e.notes;
  s.x_lo = e.x_lo;
  s.x_hi = e.x_hi;
  return s;
}

const Entry* FindEntry(const std::string& id) {
  for (const auto& e : Registry()) {
    if (id == e.id) return &e;
  }
  return nullptr;
}

int ParseInt(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("field '" + key + "' must be an integer");
  return out;
}

Vec Expand(const std::vector<double>& vals, int dim, const std::string& key) {
  if (static_cast<int>(vals.size()) == dim) return Eigen::Map<const Vec>(vals.data(), dim);
  if (vals.size() == 1) return Vec::Constant(dim, vals[0]);
  throw std::invalid_argument("field '" + key + "' needs 1 or " + std::to_string(dim) + " numbers");
}

}  // namespace

double ProblemSpec::known_f(const Vec& x) const {
  if (!known_value) throw std::logic_error("problem '" + id + "' has no known value function");
  return eval(*known_value, x, Vec(0));
}

std::vector<ProblemInfo> list_problems() {
  std::vector<ProblemInfo> out;
  for (const auto& e : Registry()) out.push_back({e.id, e.notes});
  return out;
}

ProblemSpec problem_from_text(const std::string& text) {
  const auto kv = parse_key_values(text);
  auto need = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw std::invalid_argument("problem file is missing field '" + k + "'");
    return it->second;
  };
  static const std::vector<std::string> known_keys = {"id",        "dim_x",     "dim_y",
                                                      "expr",      "box_lower", "box_upper",
                                                      "known_value_expr", "x_range", "notes"};
  for (const auto& [k, v] : kv) {
    if (std::find(known_keys.begin(), known_keys.end(), k) == known_keys.end())
      throw std::invalid_argument("problem file has unknown field '" + k + "'");
  }
  const std::string id = need("id");
  const int p = ParseInt("dim_x", need("dim_x"));
  const int r = ParseInt("dim_y", need("dim_y"));
  if (p < 1 || r < 1) throw std::invalid_argument("dim_x and dim_y must be >= 1");
  const Vec lo = Expand(parse_number_list(need("box_lower")), r, "box_lower");
  const Vec hi = Expand(parse_number_list(need("box_upper")), r, "box_upper");
  ProblemSpec s = Build(id, p, r, need("expr"), lo, hi);
  if (const auto it = kv.find("known_value_expr"); it != kv.end()) {
    s.known_value_text = it->second;
    s.known_value = parse(it->second, p, 0);
  }
  if (const auto it = kv.find("x_range"); it != kv.end()) {
    const auto xr = parse_number_list(it->second);
    if (xr.size() != 2 || !(xr[0] < xr[1])) throw std::invalid_argument("x_range needs two increasing numbers");
    s.x_lo = xr[0];
    s.x_hi = xr[1];
  } else {
    s.x_lo = lo.minCoeff();
    s.x_hi = hi.maxCoeff();
  }
  if (const auto it = kv.find("notes"); it != kv.end()) s.notes = it->second;
  // The closed form only applies when the file restates the registered objective.
  if (const Entry* e = FindEntry(id); e != nullptr && has_closed_form(id)) {
    const ProblemSpec reg = FromEntry(*e);
    s.closed_form = reg.prog == s.prog;
  }
  return s;
}

ProblemSpec load_problem(const std::string& id_or_path, bool validate) {
  ProblemSpec s = [&] {
    if (const Entry* e = FindEntry(id_or_path)) return FromEntry(*e);
    if (std::filesystem::is_regular_file(id_or_path)) return problem_from_text(read_file(id_or_path));
    throw std::invalid_argument("unknown problem '" + id_or_path + "' (not a registered id or a file)");
  }();
  if (validate) validate_problem(s);
  return s;
}

ValidationReport validate_problem(const ProblemSpec& spec, int value_draws, int closed_form_draws,
                                  std::uint64_t seed) {
  ValidationReport rep;
  const GridSettings grid;
  CounterRng rng(seed);
  auto draw = [&] {
    Vec x(spec.dim_x());
    for (int i = 0; i < spec.dim_x(); ++i) x[i] = rng.uniform(spec.x_lo, spec.x_hi);
    return x;
  };
  if (spec.known_value) {
    for (int t = 0; t < value_draws; ++t) {
      const Vec x = draw();
      const double g = argmax_grid_refine(spec.prog, x, spec.box, grid).value;
      rep.max_value_error = std::max(rep.max_value_error, std::fabs(g - spec.known_f(x)));
      ++rep.value_draws;
    }
    if (rep.max_value_error > kValueTol) {
      throw ValidationError("problem '" + spec.id + "': grid value differs from known value function by " +
                            std::to_string(rep.max_value_error));
    }
  }
  if (spec.closed_form) {
    for (int t = 0; t < closed_form_draws; ++t) {
      const Vec x = draw();
      const double g = argmax_grid_refine(spec.prog, x, spec.box, grid).value;
      const ArgmaxResult cf = argmax_registry(spec.id, x, spec.box, grid.delta_y);
      rep.max_closed_form_gap = std::max(rep.max_closed_form_gap, std::fabs(g - cf.value));
      for (const Vec& y : cf.maximizers) {
        rep.max_closed_form_gap = std::max(rep.max_closed_form_gap, std::fabs(eval(spec.prog, x, y) - cf.value));
      }
      ++rep.closed_form_draws;
    }
    if (rep.max_closed_form_gap > grid.delta_f) {
      throw ValidationError("problem '" + spec.id + "': closed-form oracle disagrees with grid oracle by " +
                            std::to_string(rep.max_closed_form_gap));
    }
  }
  return rep;
}

OracleMode parse_oracle_mode(const std::string& s) {
  if (s == "auto") return OracleMode::kAuto;
  if (s == "closed_form") return OracleMode::kClosedForm;
  if (s == "grid") return OracleMode::kGrid;
  throw std::invalid_argument("oracle must be auto, closed_form or grid, got '" + s + "'");
}

std::string to_string(OracleMode m) {
  switch (m) {
    case OracleMode::kAuto: return "auto";
    case OracleMode::kClosedForm: return "closed_form";
    case OracleMode::kGrid: return "grid";
  }
  return "auto";
}

BoundOracle make_oracle(const ProblemSpec& spec, const OracleConfig& cfg) {
  const bool closed = cfg.mode == OracleMode::kClosedForm || (cfg.mode == OracleMode::kAuto && spec.closed_form);
  if (closed && !spec.closed_form)
    throw std::invalid_argument("problem '" + spec.id + "' has no closed-form oracle");
  BoundOracle o;
  o.closed_form = closed;
  o.po = cfg.po;
  if (closed) {
    o.argmax = [id = spec.id, box = spec.box, dy = cfg.grid.delta_y](const Vec& x) {
      return argmax_registry(id, x, box, dy);
    };
  } else {
    o.po.kink_eps = std::max(o.po.kink_eps, kGridKinkBand);
    o.argmax = [prog = spec.prog, box = spec.box, g = cfg.grid](const Vec& x) {
      return argmax_grid_refine(prog, x, box, g);
    };
  }
  return o;
}

}  // namespace ridgemm
