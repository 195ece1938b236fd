#include "ridgemm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

namespace ridgemm {

namespace {

std::string Num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string NumList(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + Num(v[i]);
  return s;
}

double ParseDouble(const std::string& key, const std::string& v) {
  const auto xs = parse_number_list(v);
  if (xs.size() != 1) throw std::invalid_argument("'" + key + "' needs a single number");
  return xs[0];
}

long ParseLong(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("'" + key + "' needs an integer");
  return out;
}

Vec ToVec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::string Csv(double v) {
  if (std::isnan(v)) return "nan";
  return Num(v);
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

std::string Join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

void RunConfig::validate() const {
  schedule.validate();
  if (iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (!(tol > 0.0) || !(tau_y > 0.0) || !(delta_f > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (x0.empty()) throw std::invalid_argument("x0 is required");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "problem = " << problem << "\n"
     << "x0 = " << NumList(x0) << "\n"
     << "alpha0 = " << Num(schedule.alpha0) << "\n"
     << "gamma = " << Num(schedule.gamma) << "\n"
     << "iters = " << iters << "\n"
     << "atom_rule = " << to_string(rule) << "\n"
     << "seed = " << seed << "\n"
     << "tol = " << Num(tol) << "\n"
     << "tau_y = " << Num(tau_y) << "\n"
     << "delta_f = " << Num(delta_f) << "\n"
     << "oracle = " << to_string(oracle) << "\n";
  return os.str();
}

std::string RunConfig::config_hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig apply_config(RunConfig c, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "problem") {
      c.problem = v;
    } else if (k == "x0") {
      c.x0 = parse_number_list(v);
    } else if (k == "alpha0") {
      c.schedule.alpha0 = ParseDouble(k, v);
    } else if (k == "gamma") {
      c.schedule.gamma = ParseDouble(k, v);
    } else if (k == "iters") {
      c.iters = ParseLong(k, v);
    } else if (k == "atom_rule") {
      c.rule = parse_atom_rule(v);
    } else if (k == "seed") {
      const long s = ParseLong(k, v);
      if (s < 0) throw std::invalid_argument("seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (k == "tol") {
      c.tol = ParseDouble(k, v);
    } else if (k == "tau_y") {
      c.tau_y = ParseDouble(k, v);
    } else if (k == "delta_f") {
      c.delta_f = ParseDouble(k, v);
    } else if (k == "oracle") {
      c.oracle = parse_oracle_mode(v);
    } else if (k == "out") {
      c.out = v;
    } else {
      throw std::invalid_argument("unknown config key '" + k + "'");
    }
  }
  return c;
}

OracleConfig oracle_config(const RunConfig& cfg) {
  OracleConfig oc;
  oc.mode = cfg.oracle;
  oc.grid.delta_f = cfg.delta_f;
  oc.po.tau_y = cfg.tau_y;
  return oc;
}

Json record_json(const IterateRecord& r) {
  Json j;
  j["k"] = r.k;
  j["x"] = to_json(r.x);
  j["y"] = to_json(r.y);
  j["u"] = to_json(r.u);
  j["alpha"] = r.alpha;
  j["f"] = r.f;
  return j;
}

std::string trajectory_jsonl(const std::vector<IterateRecord>& traj) {
  std::string s;
  for (const auto& r : traj) {
    s += record_json(r).dump();
    s += '\n';
  }
  return s;
}

Json certificate_json(const std::string& problem, const CriticalityCertificate& c) {
  Json j;
  j["problem"] = problem;
  j["x"] = to_json(c.x);
  j["tol"] = c.tol;
  j["critical"] = c.critical;
  j["min_norm"] = c.cert.norm;
  j["hull"] = to_json(c.atoms, c.cert);
  j["reduced"] = to_json(c.atoms, c.reduced);
  Json w = Json::array();
  for (const auto& t : c.witness) w.push_back({{"y", to_json(t.y)}, {"u", to_json(t.u)}, {"lambda", t.lambda}});
  j["witness"] = std::move(w);
  j["vertex_min_norm"] = c.vertex_min_norm;
  Json ms = Json::array();
  for (const Vec& y : c.maximizers) ms.push_back(to_json(y));
  j["maximizers"] = std::move(ms);
  Json prov = Json::array();
  for (const auto& a : c.provenance) prov.push_back({{"u", to_json(a.u)}, {"y", to_json(a.y)}, {"residual", a.residual}});
  j["provenance"] = std::move(prov);
  j["boundary_warning"] = c.boundary_warning;
  j["incomplete"] = c.incomplete;
  return j;
}

Json report_json(const RunConfig& cfg, const RunReport& rep) {
  Json j;
  j["problem"] = cfg.problem;
  j["seed"] = cfg.seed;
  j["config_hash"] = cfg.config_hash();
  j["config"] = {{"x0", cfg.x0},
                 {"alpha0", cfg.schedule.alpha0},
                 {"gamma", cfg.schedule.gamma},
                 {"iters", cfg.iters},
                 {"atom_rule", to_string(cfg.rule)},
                 {"tol", cfg.tol},
                 {"tau_y", cfg.tau_y},
                 {"delta_f", cfg.delta_f},
                 {"oracle", to_string(cfg.oracle)}};
  j["status"] = rep.status;
  j["message"] = rep.message;
  j["iterations"] = rep.iterations;
  j["x_final"] = to_json(rep.x_final);
  j["f_final"] = rep.f_final;
  j["alpha_final"] = rep.alpha_final;
  j["min_abs_x"] = rep.min_abs_x;
  j["tail_first_k"] = rep.tail_first_k;
  j["tail_oscillation"] = rep.tail_oscillation;
  j["boundary_warning"] = rep.boundary_warning;
  if (rep.terminal) {
    j["terminal_certificate"] = certificate_json(cfg.problem, *rep.terminal);
  } else {
    j["terminal_certificate"] = nullptr;
  }
  if (rep.tail) {
    const TailCertificate& t = *rep.tail;
    Json tj;
    tj["first_k"] = t.first_k;
    tj["count"] = t.count;
    tj["radius"] = t.radius;
    tj["critical"] = t.critical;
    tj["min_norm"] = t.cert.norm;
    tj["hull"] = to_json(t.atoms, t.cert);
    j["tail_certificate"] = std::move(tj);
  } else {
    j["tail_certificate"] = nullptr;
  }
  const bool certified = (rep.terminal && rep.terminal->critical) || (rep.tail && rep.tail->critical);
  j["certified_critical"] = certified;
  return j;
}

int cmd_run(const RunConfig& cfg) {
  try {
    cfg.validate();
    const ProblemSpec spec = load_problem(cfg.problem);
    const BoundOracle oracle = make_oracle(spec, oracle_config(cfg));
    RunOptions opts;
    opts.x0 = ToVec(cfg.x0);
    opts.schedule = cfg.schedule;
    opts.iters = cfg.iters;
    opts.rule = cfg.rule;
    opts.seed = cfg.seed;
    opts.cert_tol = cfg.tol;
    const RunResult res = run(spec.prog, oracle, opts);
    EnsureDir(cfg.out);
    write_file(Join(cfg.out, "trajectory.jsonl"), trajectory_jsonl(res.trajectory));
    write_file(Join(cfg.out, "report.json"), report_json(cfg, res.report).dump(2) + "\n");
    if (res.report.boundary_warning) {
      std::cerr << "warning: maximizers touch the y-box boundary; the local-boundedness assumption may fail\n";
    }
    std::cout << "status " << res.report.status << ", " << res.report.iterations << " iterations, x_final "
              << res.report.x_final.transpose() << "\n";
    if (res.report.status == "oracle_error") {
      std::cerr << "oracle failure: " << res.report.message << "\n";
      return kExitError;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_certify(const CertifyConfig& cfg) {
  try {
    if (cfg.x.empty()) throw std::invalid_argument("--x is required");
    const ProblemSpec spec = load_problem(cfg.problem);
    OracleConfig oc;
    oc.mode = cfg.oracle;
    oc.po.tau_y = cfg.tau_y;
    const BoundOracle oracle = make_oracle(spec, oc);
    const CriticalityCertificate c = certify_po_critical(spec.prog, ToVec(cfg.x), oracle, cfg.tol);
    EnsureDir(cfg.out);
    write_file(Join(cfg.out, "certificate.json"), certificate_json(spec.id, c).dump(2) + "\n");
    if (c.boundary_warning) {
      std::cerr << "warning: maximizers touch the y-box boundary; the local-boundedness assumption may fail\n";
    }
    std::cout << (c.critical ? "critical" : "not critical") << ", min-norm " << c.cert.norm << "\n";
    return c.critical ? kExitOk : kExitNotCritical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_fractal(const FractalConfig& cfg) {
  try {
    if (cfg.depth_min < 0 || cfg.depth_max > FractalSet::kMaxDepth || cfg.depth_min > cfg.depth_max)
      throw std::invalid_argument("depths must satisfy 0 <= depth-min <= depth-max <= 12");
    if (cfg.depth_step < 1) throw std::invalid_argument("depth-step must be >= 1");
    static const std::vector<std::string> known = {"projections", "tv", "probe", "po"};
    for (const auto& d : cfg.diags) {
      if (std::find(known.begin(), known.end(), d) == known.end())
        throw std::invalid_argument("unknown diagnostic '" + d + "'");
    }
    EnsureDir(cfg.out);
    std::vector<int> depths;
    for (int d = cfg.depth_min; d <= cfg.depth_max; d += cfg.depth_step) depths.push_back(d);

    for (const auto& diag : cfg.diags) {
      std::ostringstream csv;
      if (diag == "projections") {
        csv << "depth,axis_x,axis_y,rotated_12,rotated_21\n";
        for (const int d : depths) {
          const FractalSet F(d);
          csv << d << ',' << Csv(axis_projection_length(F, Axis::kX).value()) << ','
              << Csv(axis_projection_length(F, Axis::kY).value()) << ',' << Csv(rotated_projection_length(F, 1, 2))
              << ',' << Csv(rotated_projection_length(F, 2, 1)) << '\n';
        }
      } else if (diag == "tv") {
        csv << "depth,tv_bound\n";
        for (const int d : depths) csv << d << ',' << Csv(min_total_variation(FractalSet(d)).value()) << '\n';
      } else if (diag == "probe") {
        csv << "depth,chain,z_x,z_y,max_angular_gap,exterior,interior\n";
        for (const int d : depths) {
          const FractalSet F(d);
          const ColumnChain cc = column_chains(F, cfg.x);
          for (std::size_t i = 0; i < cc.chains.size(); ++i) {
            const Point2 z(cfg.x, cc.chains[i].y_limit);
            csv << d << ',' << i << ',' << Csv(z.x()) << ',' << Csv(z.y()) << ',';
            try {
              const ProbeResult pr = subdiff_probe(F, z, cfg.rho, cfg.n_dirs);
              csv << Csv(pr.max_angular_gap) << ',' << pr.directions.size() << ',' << pr.interior_count << '\n';
            } catch (const FractalError&) {
              csv << "nan,0," << cfg.n_dirs << '\n';
            }
          }
        }
      } else if (diag == "po") {
        csv << "depth,x,min_norm,hull_lo,hull_hi,n_atoms\n";
        for (const int d : depths) {
          const GPoSample s = g_po_sample(FractalSet(d), cfg.x, 1e-9, cfg.rho, cfg.n_dirs);
          csv << d << ',' << Csv(cfg.x) << ',' << Csv(s.min_norm) << ',' << Csv(s.hull_lo) << ','
              << Csv(s.hull_hi) << ',' << s.sample.atoms.size() << '\n';
        }
      }
      write_file(Join(cfg.out, diag + ".csv"), csv.str());
      std::cout << "wrote " << Join(cfg.out, diag + ".csv") << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_list_problems() {
  for (const auto& p : list_problems()) std::cout << p.id << "\t" << p.notes << "\n";
  return kExitOk;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Ridge method toolkit for nonsmooth min-max problems"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path, x0_text, rule_text, oracle_text;
  auto* run_cmd = app.add_subcommand("run", "run the ridge iteration and write trajectory.jsonl + report.json");
  run_cmd->add_option("--config", config_path, "key = value config file; flags override it");
  auto* o_problem = run_cmd->add_option("--problem", rc.problem, "registered id or problem file");
  auto* o_x0 = run_cmd->add_option("--x0", x0_text, "starting point, comma separated");
  auto* o_alpha0 = run_cmd->add_option("--alpha0", rc.schedule.alpha0, "step size scale");
  auto* o_gamma = run_cmd->add_option("--gamma", rc.schedule.gamma, "step size decay exponent in (0, 1]");
  auto* o_iters = run_cmd->add_option("--iters", rc.iters, "iteration budget");
  auto* o_rule = run_cmd->add_option("--atom-rule", rule_text, "first | min_norm_atom | random");
  auto* o_seed = run_cmd->add_option("--seed", rc.seed, "seed for the random atom rule");
  auto* o_tol = run_cmd->add_option("--tol", rc.tol, "certification tolerance");
  auto* o_tau = run_cmd->add_option("--tau-y", rc.tau_y, "y-residual threshold for PO atoms");
  auto* o_df = run_cmd->add_option("--delta-f", rc.delta_f, "near-tie threshold for maximizers");
  auto* o_oracle = run_cmd->add_option("--oracle", oracle_text, "auto | closed_form | grid");
  auto* o_out = run_cmd->add_option("--out", rc.out, "output directory");

  CertifyConfig cc;
  std::string cx_text, c_oracle_text;
  auto* cert_cmd = app.add_subcommand("certify", "certify PO-criticality at a point and write certificate.json");
  cert_cmd->add_option("--problem", cc.problem, "registered id or problem file")->required();
  cert_cmd->add_option("--x,--x0", cx_text, "point, comma separated")->required();
  cert_cmd->add_option("--tol", cc.tol, "certification tolerance");
  cert_cmd->add_option("--tau-y", cc.tau_y, "y-residual threshold for PO atoms");
  cert_cmd->add_option("--oracle", c_oracle_text, "auto | closed_form | grid");
  cert_cmd->add_option("--out", cc.out, "output directory");

  FractalConfig fc;
  std::string diag_text;
  auto* frac_cmd = app.add_subcommand("fractal", "fractal diagnostics, one CSV per diagnostic");
  frac_cmd->add_option("--depth-min", fc.depth_min, "first depth");
  frac_cmd->add_option("--depth-max", fc.depth_max, "last depth (<= 12)");
  frac_cmd->add_option("--depth-step", fc.depth_step, "depth increment");
  frac_cmd->add_option("--diag", diag_text, "comma list of projections, tv, probe, po");
  frac_cmd->add_option("--x", fc.x, "abscissa for probe and po diagnostics");
  frac_cmd->add_option("--rho", fc.rho, "probe radius");
  frac_cmd->add_option("--n-dirs", fc.n_dirs, "probe directions");
  frac_cmd->add_option("--out", fc.out, "output directory");

  auto* list_cmd = app.add_subcommand("list-problems", "list registered problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_exit = app.exit(e);
    return rc_exit == 0 ? kExitOk : kExitError;
  }

  try {
    if (run_cmd->parsed()) {
      RunConfig cfg;
      if (!config_path.empty()) cfg = apply_config(cfg, parse_key_values(read_file(config_path)));
      if (o_problem->count()) cfg.problem = rc.problem;
      if (o_x0->count()) cfg.x0 = parse_number_list(x0_text);
      if (o_alpha0->count()) cfg.schedule.alpha0 = rc.schedule.alpha0;
      if (o_gamma->count()) cfg.schedule.gamma = rc.schedule.gamma;
      if (o_iters->count()) cfg.iters = rc.iters;
      if (o_rule->count()) cfg.rule = parse_atom_rule(rule_text);
      if (o_seed->count()) cfg.seed = rc.seed;
      if (o_tol->count()) cfg.tol = rc.tol;
      if (o_tau->count()) cfg.tau_y = rc.tau_y;
      if (o_df->count()) cfg.delta_f = rc.delta_f;
      if (o_oracle->count()) cfg.oracle = parse_oracle_mode(oracle_text);
      if (o_out->count()) cfg.out = rc.out;
      return cmd_run(cfg);
    }
    if (cert_cmd->parsed()) {
      cc.x = parse_number_list(cx_text);
      if (!c_oracle_text.empty()) cc.oracle = parse_oracle_mode(c_oracle_text);
      return cmd_certify(cc);
    }
    if (frac_cmd->parsed()) {
      if (!diag_text.empty()) {
        fc.diags.clear();
        std::stringstream ss(diag_text);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) fc.diags.push_back(item);
        }
      }
      return cmd_fractal(fc);
    }
    if (list_cmd->parsed()) return cmd_list_problems();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace ridgemm
