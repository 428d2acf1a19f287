#include "mmc/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "mmc/suite.hpp"

namespace mmc {

namespace {

struct Flags {
  std::string space;
  double kappa = 0.0;
  unsigned long long seed = 42;
  int refine = 2;
  double tol_scale = 1.0;
  std::string csv;
  std::string report;
  double time = 0.1;
  // bb
  std::vector<double> mu0, mu1;
  int steps = 8;
  int iters = 3000;
};

using Columns = std::vector<std::pair<std::string, Vec>>;

struct Output {
  json fields = json::object();
  std::vector<Verdict> verdicts;
  Columns columns;
};

// Which checks each subcommand runs.
const std::map<std::string, std::vector<std::string>>& command_checks() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"gamma2", {"gamma2_mass", "hessian_bochner_gap", "key_inequality"}},
      {"heat", {"heat_mass", "heat_continuity"}},
      {"be-check", {"bakry_emery", "bakry_emery_first_power"}},
      {"hessian",
       {"hessian_symmetry", "hessian_leibniz", "hessian_chain", "gradient_product", "hessian_locality",
        "hessian_duality"}},
      {"covariant",
       {"covariant_leibniz", "metric_compatibility", "torsion_free", "covariant_locality",
        "connection_laplacian_adjointness", "sym_asym_pythagoras", "connection_duality"}},
      {"bracket", {"bracket_of_gradients", "torsion_free"}},
      {"cflow", {"connection_flow_kato", "connection_laplacian_adjointness"}},
      {"betti", {"betti_numbers", "first_betti_bound"}},
      {"hodge",
       {"hodge_reconstruction", "codifferential_adjointness", "dd_zero", "codifferential_product",
        "hodge_laplacian_product", "exterior_leibniz", "codifferential_wedge"}},
      {"hflow", {"hodge_flow_commutation", "form_contraction"}},
      {"ricci",
       {"ricci_bilinear", "ricci_symmetric", "ricci_total_mass", "ricci_tv_bound", "bochner_laplacian_mass",
        "vector_bochner", "ricci_lower_bound", "ricci_representation", "ricci_tensor_property",
        "ricci_gradient_oracle", "cone_apex"}},
  };
  return m;
}

void write_csv(const std::string& path, const DiscreteSpace& s, const Columns& cols) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << std::setprecision(17) << "vertex,x,y,z,mass";
  for (const auto& c : cols) out << "," << c.first;
  out << "\n";
  for (int v = 0; v < s.nv; ++v) {
    out << v << "," << s.pos[v][0] << "," << s.pos[v][1] << "," << s.pos[v][2] << "," << s.mv[v];
    for (const auto& c : cols) out << "," << c.second[v];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

json space_summary(const DiscreteSpace& s) {
  json j;
  j["descriptor"] = s.descriptor;
  j["vertices"] = s.nv;
  j["cells"] = s.nc;
  j["components"] = s.ncomp;
  j["max_dim"] = s.max_dim();
  j["h"] = s.h;
  j["kappa"] = s.kappa;
  j["total_mass"] = s.total_mass();
  j["hash"] = s.hash_hex();
  json dims = json::array();
  for (const auto& d : local_dimension(s))
    dims.push_back(json{{"dim", d.dim}, {"cells", d.cells.size()}, {"mass", d.mass}});
  j["local_dimension"] = dims;
  return j;
}

Output space_command(SuiteContext& ctx, const TolPolicy& pol) {
  const DiscreteSpace& s = ctx.coarse().space();
  Output o;
  o.fields["space_info"] = space_summary(s);
  Measurement mass;
  mass.lhs = s.mc.sum();
  mass.rhs = s.mv.sum();
  mass.gap = std::abs(mass.lhs - mass.rhs) / mass.rhs;
  mass.h = s.h;
  o.verdicts.push_back(exact_verdict("mass_consistency", "cell and vertex masses agree", mass, 1e-12, pol));
  double min_eig = std::numeric_limits<double>::infinity();
  for (const auto& g : s.gram) min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(g).eigenvalues()[0]);
  Measurement spd;
  spd.lhs = min_eig;
  spd.gap = min_eig > 0.0 ? 0.0 : 1.0;
  spd.h = s.h;
  o.verdicts.push_back(exact_verdict("metric_positive", "every cell metric is positive definite", spd, 0.0, pol));
  return o;
}

Columns command_columns(const std::string& cmd, Level& L, double K, double t) {
  const DiscreteSpace& s = L.space();
  const Dirichlet& dir = L.dirichlet();
  const ScalarField& f = L.bank().f[0];
  const VectorField& x = L.bank().fields[0];
  Columns cols;
  if (cmd == "gamma2") {
    const Tensor2Field H = weak_hessian(dir, f, L.bank()).H;
    cols.emplace_back("gamma2", dir.gamma2_density(f, f));
    cols.emplace_back("hessian_hs2", s.cell_to_vertex(cell_hs_inner(s, H, H)));
    cols.emplace_back("carre_du_champ", dir.carre_du_champ(f, f));
  } else if (cmd == "heat" || cmd == "be-check") {
    cols.emplace_back("f", f);
    cols.emplace_back("heat_f", dir.heat_flow(f, t));
  } else if (cmd == "cflow") {
    const VectorField xt = L.connection().heat_flow(x, t);
    cols.emplace_back("flowed_norm2", s.cell_to_vertex(cell_inner(s, xt, xt)));
    cols.emplace_back("heat_of_norm2", dir.heat_flow(s.cell_to_vertex(cell_inner(s, x, x)), t));
  } else if (cmd == "hflow") {
    const Complex& cx = L.complex();
    const Vec w = cx.flat(x);
    cols.emplace_back("flowed_norm2", s.cell_to_vertex(cx.pointwise_norm2(1, cx.hodge_heat_flow(1, w, t))));
    cols.emplace_back("heat_of_norm2", dir.heat_flow(s.cell_to_vertex(cx.pointwise_norm2(1, w)), t));
  } else if (cmd == "ricci") {
    const RicciMeasure r = ricci_measure(L.complex(), L.connection(), x, x);
    cols.emplace_back("ricci_density", r.density);
    cols.emplace_back("k_norm2", K * s.cell_to_vertex(cell_inner(s, x, x)));
    cols.emplace_back("laplacian_part", r.laplacian_part.cwiseQuotient(s.mv));
    cols.emplace_back("hodge_part", r.hodge_part.cwiseQuotient(s.mv));
    cols.emplace_back("hs_part", r.hs_part.cwiseQuotient(s.mv));
  } else if (cmd == "hessian" || cmd == "bracket") {
    const Tensor2Field H = weak_hessian(dir, f, L.bank()).H;
    cols.emplace_back("f", f);
    cols.emplace_back("hessian_hs2", s.cell_to_vertex(cell_hs_inner(s, H, H)));
  } else if (cmd == "covariant") {
    const Tensor2Field T = L.connection().apply(x);
    cols.emplace_back("norm2", s.cell_to_vertex(cell_inner(s, x, x)));
    cols.emplace_back("covariant_hs2", s.cell_to_vertex(cell_hs_inner(s, T, T)));
  } else if (cmd == "hodge" || cmd == "betti") {
    const Complex& cx = L.complex();
    const HarmonicBasis hb = harmonic_forms(cx, 1);
    for (Eigen::Index k = 0; k < hb.basis.cols(); ++k)
      cols.emplace_back("harmonic" + std::to_string(k) + "_norm2",
                        s.cell_to_vertex(cx.pointwise_norm2(1, hb.basis.col(k))));
  }
  return cols;
}

Output bb_command(SuiteContext& ctx, const Flags& fl, const TolPolicy& pol) {
  Level& L = ctx.coarse();
  const DiscreteSpace& s = L.space();
  if (s.chart.kind != ChartKind::torus) throw std::invalid_argument("bb needs a flat torus");
  const double side = s.chart.side;
  auto blob = [&](const std::vector<double>& p, double cx) {
    if (p.empty()) return torus_blob(s, cx, side / 2, 0.5);
    if (p.size() != 3) throw std::invalid_argument("blob takes x,y,width");
    return torus_blob(s, p[0], p[1], p[2]);
  };
  const Vec mu0 = blob(fl.mu0, side / 4), mu1 = blob(fl.mu1, side / 2);
  const double lp = transport_lp(s, mu0, mu1);
  BBOptions opt;
  opt.steps = fl.steps;
  opt.max_iter = fl.iters;
  const BBResult bb = benamou_brenier(L.dirichlet(), mu0, mu1, opt);
  Output o;
  o.fields["bb"] = json{{"value", bb.value},
                        {"lp", lp},
                        {"iterations", bb.iterations},
                        {"primal_residual", bb.primal_residual},
                        {"dual_residual", bb.dual_residual},
                        {"continuity_defect", bb.continuity_defect},
                        {"converged", bb.converged}};
  Measurement m;
  m.lhs = bb.value;
  m.rhs = lp;
  m.gap = std::abs(bb.value / lp - 1.0);
  m.h = s.h;
  m.dt = 1.0 / opt.steps;
  o.verdicts.push_back(exact_verdict("benamou_brenier_vs_lp", "dynamic transport cost matches the static oracle", m,
                                     0.05, pol));
  for (std::size_t k = 0; k < bb.curve.mu.size(); ++k)
    o.columns.emplace_back("rho_t" + std::to_string(k), bb.curve.mu[k].cwiseQuotient(s.mv));
  return o;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Second-order calculus checks on discrete metric measure spaces"};
  app.require_subcommand(1, 1);
  Flags fl;
  bool kappa_set = false;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"space", "build a space and report its size, mass and local dimension"},
      {"gamma2", "Gamma2 measure, pointwise Hessian bound and key inequality"},
      {"heat", "heat flow mass conservation and continuity equation"},
      {"be-check", "Bakry-Emery gradient contraction, squared and first power"},
      {"hessian", "Hessian symmetry, calculus rules, locality and duality"},
      {"covariant", "covariant derivative rules, connection Laplacian and duality"},
      {"bracket", "Lie bracket of gradients and torsion"},
      {"cflow", "connection heat flow against the scalar heat flow"},
      {"betti", "Betti numbers by eigensolver and rank-nullity"},
      {"hodge", "cochain complex identities and Hodge decomposition"},
      {"hflow", "Hodge heat flow commutation and contraction"},
      {"ricci", "Ricci measure identities, bounds and oracles"},
      {"bb", "dynamic transport cost against the static oracle (torus)"},
      {"suite", "all acceptance criteria on one model and its refinement"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [n, help] : commands) {
    CLI::App* sub = app.add_subcommand(n, help);
    sub->add_option("--space", fl.space, "generator:key=value,...")->required();
    sub->add_option_function<double>(
        "--kappa", [&](double k) { fl.kappa = k, kappa_set = true; }, "curvature lower bound K");
    sub->add_option("--seed", fl.seed)->capture_default_str();
    sub->add_option("--refine", fl.refine)->check(CLI::IsMember({1, 2}))->capture_default_str();
    sub->add_option("--tol-scale", fl.tol_scale)->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--csv", fl.csv, "per-vertex densities");
    sub->add_option("--report", fl.report, "also write the JSON report here");
    if (n == "heat" || n == "cflow" || n == "hflow" || n == "be-check")
      sub->add_option("--time", fl.time, "flow time for CSV output")->check(CLI::NonNegativeNumber);
    if (n == "bb") {
      sub->add_option("--mu0", fl.mu0, "x y width")->expected(3)->delimiter(',');
      sub->add_option("--mu1", fl.mu1, "x y width")->expected(3)->delimiter(',');
      sub->add_option("--steps", fl.steps)->check(CLI::Range(2, 256))->capture_default_str();
      sub->add_option("--iters", fl.iters)->check(CLI::Range(1, 1000000))->capture_default_str();
    }
    subs[n] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_usage;
  }
  std::string cmd;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) cmd = n;

  TolPolicy pol;
  pol.scale = fl.tol_scale;
  pol.refine = fl.refine;
  pol.seed = fl.seed;
  std::unique_ptr<SuiteContext> ctx;
  try {
    ctx = std::make_unique<SuiteContext>(fl.space, kappa_set ? std::optional<double>(fl.kappa) : std::nullopt, pol);
    ctx->coarse().space();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }

  try {
    std::string text;
    bool pass = true;
    if (cmd == "suite") {
      const std::vector<CriterionReport> reports = run_suite(*ctx);
      text = emit_suite_report(reports);
      pass = suite_pass(reports);
    } else {
      Output o;
      if (cmd == "space") {
        o = space_command(*ctx, pol);
      } else if (cmd == "bb") {
        o = bb_command(*ctx, fl, pol);
      } else {
        o.verdicts = run_checks(command_checks().at(cmd), *ctx);
        if (!fl.csv.empty()) o.columns = command_columns(cmd, ctx->coarse(), ctx->kappa(), fl.time);
      }
      if (cmd == "betti") o.fields["betti"] = betti(ctx->coarse().complex()).eigen;
      json j = o.fields;
      j["command"] = cmd;
      j["space"] = fl.space;
      j["kappa"] = ctx->kappa();
      j["seed"] = fl.seed;
      pass = all_pass(o.verdicts);
      j["pass"] = pass;
      json vs = json::array();
      for (const auto& v : o.verdicts) vs.push_back(to_json(v));
      j["verdicts"] = vs;
      text = j.dump(2);
      if (!fl.csv.empty()) write_csv(fl.csv, ctx->coarse().space(), o.columns);
    }
    out << text << "\n";
    if (!fl.report.empty()) {
      std::ofstream rep(fl.report);
      if (!rep) throw std::invalid_argument("cannot write " + fl.report);
      rep << text << "\n";
    }
    return pass ? exit_ok : exit_failed;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    return exit_solver;
  }
}

}  // namespace mmc
