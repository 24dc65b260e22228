#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mxip/asymptotics.hpp"
#include "mxip/cgo.hpp"
#include "mxip/forward.hpp"
#include "mxip/io.hpp"
#include "mxip/kelvin.hpp"
#include "mxip/recovery.hpp"

using namespace mxip;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTolerance = 3;

struct Common {
  bool strict = false;
  std::uint64_t seed = 7;
  std::string out = "out";
  int resolution = 0;
  std::string scenario;
};

std::string f(double v) { return fmt_double(v); }

// Output directory, manifest and tolerance bookkeeping of one subcommand.
class Run {
 public:
  Run(const std::string& sub, const Common& c, json options)
      : sub_(sub), strict_(c.strict), dir_(c.out), manifest_(sub, effective(sub, c, options)) {
    fs::create_directories(dir_);
  }

  void tolerance(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void csv(const std::string& name, const CsvWriter& w) {
    fs::path p = dir_ / (name + ".csv");
    w.write(p);
    manifest_.add(p);
  }
  void field(const std::string& name, const FieldHeader& h, const std::vector<cplx>& v) {
    for (const auto& p : write_field_dump(dir_ / name, h, v)) manifest_.add(p);
  }
  void matrix(const std::string& name, const Eigen::MatrixXcd& M) {
    for (const auto& p : write_matrix(dir_ / name, M)) manifest_.add(p);
  }
  void text(const std::string& name, const std::string& body) {
    fs::path p = dir_ / name;
    write_bytes(p, body);
    manifest_.add(p);
  }

  int finish() {
    manifest_.write(dir_ / "manifest.json");
    for (const auto& w : failures_) std::cerr << sub_ << ": tolerance not met: " << w << "\n";
    std::cout << sub_ << ": " << (failures_.empty() ? "all tolerances met" : "tolerance failures") << ", outputs in "
              << dir_.string() << "\n";
    return strict_ && !failures_.empty() ? kExitTolerance : 0;
  }

 private:
  static json effective(const std::string& sub, const Common& c, json options) {
    json j;
    j["subcommand"] = sub;
    j["seed"] = c.seed;
    j["resolution"] = c.resolution;
    j["options"] = std::move(options);
    j["scenario"] = c.scenario.empty() ? json() : load_json(c.scenario);
    return j;
  }

  std::string sub_;
  bool strict_;
  fs::path dir_;
  Manifest manifest_;
  std::vector<std::string> failures_;
};

ScenarioConfig load_scenario(const Common& c) { return scenario_from_json(load_json(c.scenario)); }

int resolution(const Common& c, int fallback) {
  int r = c.resolution > 0 ? c.resolution : fallback;
  if (r < 2) throw ConfigError("resolution", "resolution must be at least 2 cells per unit length");
  return r;
}

// the CGO box is the domain together with its mirror image across the accessible plane x3 = 0
std::pair<RVec3, RVec3> reflected_box(const ScenarioConfig& s) {
  if (s.hi(2) != 0.0) throw ConfigError("box.hi", "the top face of the box must lie on x3 = 0");
  return {s.lo, RVec3(s.hi(0), s.hi(1), -s.lo(2))};
}

YeeGrid yee_grid(const ScenarioConfig& s, int res) {
  YeeGrid g;
  g.h = 1.0 / res;
  g.origin = s.lo;
  for (int a = 0; a < 3; ++a) {
    double cells = (s.hi(a) - s.lo(a)) * res;
    g.n[a] = int(std::lround(cells));
    if (g.n[a] < 2 || std::abs(cells - g.n[a]) > 1e-9)
      throw ConfigError("box", "box extents must be multiples of 1/resolution with at least 2 cells");
  }
  return g;
}

// Yee unknowns averaged to cell centres: H from the four edges, E from the two faces along each axis.
std::pair<FieldHeader, std::vector<cplx>> cell_centred(const MaxwellSolution& s) {
  const YeeGrid& g = s.grid;
  FieldHeader h;
  h.extents = g.n;
  h.spacing = RVec3::Constant(g.h);
  h.origin = g.origin + RVec3::Constant(0.5 * g.h);
  h.components = 6;
  std::vector<cplx> v;
  v.reserve(std::size_t(g.n[0]) * g.n[1] * g.n[2] * 6);
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        std::array<int, 3> c{i, j, k};
        for (int d = 0; d < 3; ++d) {
          int a = (d + 1) % 3, b = (d + 2) % 3;
          cplx sum = 0.0;
          for (int u = 0; u < 2; ++u)
            for (int w = 0; w < 2; ++w) {
              std::array<int, 3> p = c;
              p[a] += u;
              p[b] += w;
              sum += s.H[g.edge(d, p)];
            }
          v.push_back(0.25 * sum);
        }
        for (int d = 0; d < 3; ++d) {
          std::array<int, 3> p = c;
          cplx e0 = s.E[g.face(d, p)];
          p[d] += 1;
          v.push_back(0.5 * (e0 + s.E[g.face(d, p)]));
        }
      }
  return {h, v};
}

PlaneWave incident(const ScenarioConfig& s, const RVec3& dir, const RVec3& pol) {
  return PlaneWave::make(s.omega, s.eps0, s.mu0, dir, pol);
}

// ---- subcommands ----

int verify_algebra(const Common& c, int n) {
  Run run("verify-algebra", c, {{"n", n}});
  IdentityGaps g = identity_gaps(n, c.seed);
  CsvWriter w({"identity", "max_gap", "tolerance", "pass"});
  std::pair<const char*, double> rows[] = {{"anticommutator", g.anticommutator},
                                           {"anticommutator_alt", g.anticommutator_alt},
                                           {"swapped_product", g.swapped_product},
                                           {"commutation", g.commutation},
                                           {"transposition", g.transposition},
                                           {"plus_minus", g.plus_minus},
                                           {"hermitian_symbol", g.hermitian}};
  for (auto [name, v] : rows) {
    w.row({name, f(v), f(1e-12), v <= 1e-12 ? "1" : "0"});
    run.tolerance(v <= 1e-12, std::string(name) + " gap " + f(v));
  }
  run.csv("algebra", w);
  return run.finish();
}

int build_cgo_cmd(const Common& c, double tau, const std::vector<double>& xi) {
  ScenarioConfig s = load_scenario(c);
  int res = resolution(c, 16);
  Run run("build-cgo", c, {{"tau", tau}, {"xi", xi}});
  auto [olo, ohi] = reflected_box(s);
  SpectralBox box = SpectralBox::around(olo, ohi, 1.0 / res);
  MediumOnBox m = MediumOnBox::build(box, s.media.c1);
  PhaseGeometry g = make_phase_pair(RVec3(xi[0], xi[1], xi[2]), tau, s.media.c1.k());
  FourierInverse inv(box, g.zhat);
  std::mt19937_64 rng(c.seed);
  CVec3 a = random_c3(rng), b = random_c3(rng);
  CgoSolution sol = build_cgo(m, inv, g.zeta1, tau, a, b);
  CgoNorms n = cgo_norms(sol, m);
  Vec8 M = make_Mhat(g.zhat, a, b);
  double tr = transport_residual(m, inv, M, transport_Rhat(m, inv, M));
  CsvWriter w({"quantity", "value"});
  w.row({"tau", f(tau)}).row({"support_nodes", std::to_string(m.support.size())});
  w.row({"norm_zm1", f(n.zm1)}).row({"norm_y1", f(n.y1)}).row({"norm_y0", f(n.y0)});
  w.row({"residual_rel", f(n.residual_rel)}).row({"scalar_rel", f(n.scalar_rel)});
  w.row({"transport_residual", f(tr)});
  run.csv("cgo", w);
  Field8 F = amplitude_Y(sol, m);
  std::vector<cplx> v;
  v.reserve(F.size() * 8);
  for (const auto& x : F) v.insert(v.end(), x.data(), x.data() + 8);
  run.field("amplitude", header_of(box.grid, 8), v);
  run.tolerance(tr <= 1e-8, "transport residual " + f(tr));
  if (m.support.empty()) run.tolerance(n.residual_rel <= 1e-10, "constant-medium residual " + f(n.residual_rel));
  return run.finish();
}

int forward_solve(const Common& c, int medium, const std::vector<double>& dir, const std::vector<double>& pol) {
  ScenarioConfig s = load_scenario(c);
  int res = resolution(c, 8);
  Run run("forward-solve", c, {{"medium", medium}, {"dir", dir}, {"pol", pol}});
  YeeGrid g = yee_grid(s, res);
  const CoefficientSet& cs = medium == 1 ? s.media.c1 : s.media.c2;
  PlaneWave w = incident(s, RVec3(dir[0], dir[1], dir[2]), RVec3(pol[0], pol[1], pol[2]));
  MaxwellOperator op(cs, g);
  MaxwellSolution sol = op.solve(boundary_from_field(g, [&](const RVec3& x) { return w.H(x); }));
  DivergenceResidual dv = divergence_residual(op, sol);
  double dev = relative_h_error(sol, [&](const RVec3& x) { return w.H(x); });
  CsvWriter t({"quantity", "value"});
  t.row({"cells", std::to_string(g.n[0]) + "x" + std::to_string(g.n[1]) + "x" + std::to_string(g.n[2])});
  t.row({"h", f(g.h)}).row({"unknowns", std::to_string(op.unknowns())}).row({"rcond", f(sol.rcond)});
  t.row({"linear_residual", f(sol.residual)}).row({"curl_e_residual", f(op.curl_e_residual(sol))});
  t.row({"div_mu_h", f(dv.div_mu_h)}).row({"div_gamma_e", f(dv.div_gamma_e)});
  t.row({"incident_h_deviation", f(dev)});
  run.csv("forward", t);
  auto [h, v] = cell_centred(sol);
  run.field("fields", h, v);
  run.tolerance(sol.residual <= 1e-8, "linear residual " + f(sol.residual));
  run.tolerance(dv.div_mu_h < g.h * g.h, "div(mu H) " + f(dv.div_mu_h) + " above h^2");
  run.tolerance(dv.div_gamma_e < g.h * g.h, "div(gamma E) " + f(dv.div_gamma_e) + " above h^2");
  return run.finish();
}

int impedance_cmd(const Common& c) {
  ScenarioConfig s = load_scenario(c);
  int res = resolution(c, 4);
  Run run("impedance", c, json::object());
  YeeGrid g = yee_grid(s, res);
  CsvWriter w({"medium", "rows", "cols", "gamma_rows", "gamma_cols", "frobenius"});
  ImpedanceMap L[2] = {assemble_impedance(MaxwellOperator(s.media.c1, g)),
                       assemble_impedance(MaxwellOperator(s.media.c2, g))};
  for (int m = 0; m < 2; ++m) {
    std::string name = "c" + std::to_string(m + 1);
    w.row({name, std::to_string(L[m].M.rows()), std::to_string(L[m].M.cols()),
           std::to_string(L[m].gamma_rows().size()), std::to_string(L[m].gamma_cols().size()), f(L[m].M.norm())});
    run.matrix("impedance_" + name, L[m].M);
  }
  Eigen::MatrixXcd d = L[1].restricted() - L[0].restricted();
  w.row({"difference_on_gamma", std::to_string(d.rows()), std::to_string(d.cols()), std::to_string(d.rows()),
         std::to_string(d.cols()), f(d.norm())});
  run.csv("impedance", w);
  return run.finish();
}

int check_identity(const Common& c) {
  ScenarioConfig s = load_scenario(c);
  int res = resolution(c, 24);
  if (res % 2) throw ConfigError("resolution", "check-identity needs an even resolution");
  Run run("check-identity", c, json::object());
  PlaneWave w1 = incident(s, RVec3(0.3, 0.5, 0.8), RVec3(1, 0, 0));
  PlaneWave w2 = incident(s, RVec3(-0.6, 0.2, 0.4), RVec3(0, 1, 0));
  CsvWriter w({"resolution", "volume_re", "volume_im", "boundary_re", "boundary_im", "relative_gap"});
  std::vector<double> gaps;
  for (int r : {res / 2, res}) {
    YeeGrid g = yee_grid(s, r);
    MaxwellOperator op1(s.media.c1, g), op2(s.media.c2, g), op2c(s.media.c2.conjugated(), g);
    auto data = [&](const PlaneWave& pw) { return boundary_from_field(g, [&](const RVec3& x) { return pw.H(x); }); };
    OrthogonalityGap o = orthogonality_check(op1, op2, op1.solve(data(w1)), op2c.solve(data(w2)));
    w.row({std::to_string(r), f(o.volume_side.real()), f(o.volume_side.imag()), f(o.boundary_side.real()),
           f(o.boundary_side.imag()), f(o.relative())});
    gaps.push_back(o.relative());
  }
  run.csv("identity", w);
  run.tolerance(gaps[1] <= 0.05, "relative gap " + f(gaps[1]) + " above 0.05");
  run.tolerance(gaps[1] <= 0.6 * gaps[0], "gap reduction " + f(gaps[1] / gaps[0]) + " above 0.6");
  return run.finish();
}

int limits_cmd(const Common& c, const std::string& term, const std::vector<double>& taus) {
  ScenarioConfig s = load_scenario(c);
  int res = resolution(c, 32);
  if (taus.size() < 3) throw ConfigError("taus", "at least three tau values are needed");
  std::vector<TermKind> kinds = {TermKind::L41, TermKind::L42, TermKind::L43, TermKind::L44};
  if (term != "all") {
    try {
      kinds = {parse_term(term)};
    } catch (const std::invalid_argument&) {
      throw ConfigError("term", "unknown term '" + term + "'");
    }
  }
  Run run("limits", c, {{"term", term}, {"taus", taus}});
  auto [olo, ohi] = reflected_box(s);
  SpectralBox box = SpectralBox::around(olo, ohi, 1.0 / res);
  LimitStudy st(box, s.media.c1, s.media.c2);
  CsvWriter rep({"probe", "xi1", "xi2", "xi3", "term", "closed_re", "closed_im", "extrap_re", "extrap_im", "gap2",
                 "gap3", "slope", "tail_ratio", "agreement"});
  CsvWriter fin({"probe", "term", "tau", "finite_re", "finite_im"});
  std::mt19937_64 rng(c.seed);
  auto probes = default_probes();
  for (std::size_t p = 0; p < probes.size(); ++p) {
    Amplitudes am{random_c3(rng), random_c3(rng), random_c3(rng), random_c3(rng)};
    auto pr = st.make_probe(probes[p]);
    auto reps = st.convergence_study(pr, am, taus);
    for (const auto& r : reps) {
      if (std::find(kinds.begin(), kinds.end(), r.kind) == kinds.end()) continue;
      std::string name = term_name(r.kind), ps = std::to_string(p);
      double peak = 0.0;
      for (cplx v : r.finite) peak = std::max(peak, std::abs(v));
      double tail = peak > 0.0 ? std::abs(r.finite.back()) / peak : 0.0;
      bool ok = r.kind == TermKind::L44 ? (r.slope <= -0.9 && tail <= 0.05) : r.gap3() <= 0.01;
      rep.row({ps, f(r.xi(0)), f(r.xi(1)), f(r.xi(2)), name, f(r.closed_form.real()), f(r.closed_form.imag()),
               f(r.extrap3.real()), f(r.extrap3.imag()), f(r.gap2()), f(r.gap3()), f(r.slope), f(tail),
               ok ? "1" : "0"});
      for (std::size_t i = 0; i < r.taus.size(); ++i)
        fin.row({ps, name, f(r.taus[i]), f(r.finite[i].real()), f(r.finite[i].imag())});
      run.tolerance(ok, "probe " + ps + " " + name);
    }
  }
  run.csv("limits", rep);
  run.csv("limits_finite", fin);
  return run.finish();
}

int recover_cmd(const Common& c) {
  ScenarioConfig s = load_scenario(c);
  int res = resolution(c, 32);
  Run run("recover", c, json::object());
  RecoveryGrid rg = RecoveryGrid::around(s.lo, s.hi, 1.0 / res);
  LogFields truth = sample_logs(rg, s.media.c1), ref = sample_logs(rg, s.media.c2);
  BracketNewton nw(rg, ref, s.omega);
  NewtonResult r = nw.solve(discrete_brackets(rg, truth, ref, s.omega), {}, &truth);
  NewtonResult z = nw.solve(discrete_brackets(rg, ref, ref, s.omega));
  double err = nw.relative_error(r.logs, truth), contrast = nw.relative_error(ref, truth);
  CsvWriter log({"iteration", "residual", "step", "length", "error"});
  for (std::size_t i = 0; i < r.log.size(); ++i)
    log.row({std::to_string(i + 1), f(r.log[i].residual), f(r.log[i].step), f(r.log[i].length), f(r.log[i].error)});
  run.csv("newton", log);
  CsvWriter sum({"quantity", "value"});
  sum.row({"unknowns", std::to_string(nw.unknowns())}).row({"contrast", f(contrast)});
  sum.row({"iterations", std::to_string(r.iterations)}).row({"error", f(err)});
  sum.row({"final_residual", f(r.final_residual)}).row({"zero_data_iterations", std::to_string(z.iterations)});
  run.csv("recovery", sum);
  std::vector<cplx> v;
  v.reserve(2 * r.gamma1.size());
  for (std::size_t i = 0; i < r.gamma1.size(); ++i) {
    v.push_back(r.gamma1[i]);
    v.push_back(r.mu1[i]);
  }
  run.field("recovered", header_of(rg.grid, 2), v);
  run.tolerance(contrast <= 0.15, "contrast " + f(contrast) + " above 0.15");
  run.tolerance(r.iterations <= 8, "iterations " + std::to_string(r.iterations) + " above 8");
  run.tolerance(err <= 1e-6, "error " + f(err) + " above 1e-6");
  run.tolerance(z.iterations == 1, "zero data took " + std::to_string(z.iterations) + " iterations");
  return run.finish();
}

int kelvin_check(const Common& c, int n) {
  Run run("kelvin-check", c, {{"n", n}});
  std::mt19937_64 rng(c.seed);
  std::vector<RVec3> pts;
  while (int(pts.size()) < n) {
    RVec3 x = 3.0 * RVec3(unit_draw(rng), unit_draw(rng), unit_draw(rng));
    if (x.norm() > 0.05) pts.push_back(x);
  }
  const cplx gam(1.0, 0.3), gh(0.8, 0.2);
  MaxwellForms fw = plane_wave_forms(PlaneWave::make(2.0, gam, 1.0, RVec3(1, 2, 0.5), RVec3(0, 0, 1)), gam);
  MaxwellForms sw = plane_wave_forms(PlaneWave::make(1.5, gh, 1.3, RVec3(-1, 0.5, 2), RVec3(1, 0, 0)), gh);
  TransformStudy fst =
      transformed_residual_study(fw, RVec3(0.2, -0.6, 1.2), RVec3(0.6, -0.2, 1.6), {0.1, 0.05, 0.025});
  TransformStudy rs =
      transformed_residual_study(sw, RVec3(0.1, -0.4, 0.3), RVec3(0.4, -0.1, 0.6), {0.025, 0.0125, 0.00625});
  struct Row {
    const char* name;
    double value, lo, hi;
  };
  std::vector<Row> rows = {{"conformality", conformality_gap(pts), 0.0, 1e-12},
                           {"involution", involution_gap(pts), 0.0, 1e-12},
                           {"sphere_to_plane", sphere_plane_gap(sphere_samples(n, c.seed)), 0.0, 1e-12},
                           {"forward_pointwise", fst.pointwise, 0.0, 1e-12},
                           {"forward_order", fst.order(), 1.7, 2.3},
                           {"reverse_pointwise", rs.pointwise, 0.0, 1e-12},
                           {"reverse_order", rs.order(), 1.7, 2.3}};
  CsvWriter w({"quantity", "value", "lower", "upper", "pass"});
  for (const auto& r : rows) {
    bool ok = r.value >= r.lo && r.value <= r.hi;
    w.row({r.name, f(r.value), f(r.lo), f(r.hi), ok ? "1" : "0"});
    run.tolerance(ok, std::string(r.name) + " " + f(r.value));
  }
  run.csv("kelvin", w);
  return run.finish();
}

int reduce_sphere(const Common& c) {
  ScenarioConfig s = load_scenario(c);
  if (s.geometry != "sphere") throw ConfigError("geometry", "reduce-sphere needs geometry 'sphere'");
  Run run("reduce-sphere", c, json::object());
  PlanarReduction r = sphere_scenario_reduce(spherical_from_planar(s.media, s.lo, s.hi), 2000, c.seed);
  std::mt19937_64 rng(c.seed);
  double gap = 0.0;
  for (int t = 0; t < 2000; ++t) {
    RVec3 u(0.5 * (unit_draw(rng) + 1.0), 0.5 * (unit_draw(rng) + 1.0), 0.5 * (unit_draw(rng) + 1.0));
    RVec3 y = s.lo + u.cwiseProduct(s.hi - s.lo);
    for (int m = 0; m < 2; ++m) {
      const CoefficientSet& a = m ? r.media.c2 : r.media.c1;
      const CoefficientSet& b = m ? s.media.c2 : s.media.c1;
      gap = std::max({gap, std::abs(a.gamma_value(y) - b.gamma_value(y)) / std::abs(b.gamma_value(y)),
                      std::abs(a.mu_value(y) - b.mu_value(y)) / std::abs(b.mu_value(y))});
    }
  }
  CsvWriter w({"quantity", "value"});
  w.row({"plane_gap", f(r.plane_gap)}).row({"evenness_gap", f(r.evenness_gap)});
  w.row({"boundary_samples", std::to_string(r.boundary_samples)}).row({"media_gap", f(gap)});
  run.csv("reduction", w);
  run.text("planar.json", scenario_json(s.media, r.olo, r.ohi, "planar").dump(2) + "\n");
  run.tolerance(r.plane_gap <= 1e-12, "plane gap " + f(r.plane_gap));
  run.tolerance(gap <= 1e-12, "reduced media differ by " + f(gap));
  return run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-data Maxwell inverse problem toolkit"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App* s, bool scenario) {
    s->add_flag("--strict", c.strict, "exit nonzero when a tolerance is not met");
    s->add_option("--seed", c.seed, "seed of the pseudo-random draws")->capture_default_str();
    s->add_option("--out", c.out, "output directory")->capture_default_str();
    s->add_option("--resolution", c.resolution, "grid cells per unit length");
    if (scenario) s->add_option("--scenario", c.scenario, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  };

  int n = 1000;
  auto* va = app.add_subcommand("verify-algebra", "symbol identities over random complex triples");
  common(va, false);
  va->add_option("--n", n, "number of triples")->capture_default_str();

  double tau = 16.0;
  std::vector<double> xi = {1.3, std::sqrt(2.0), -0.7 * M_PI / 3.0};
  auto* bc = app.add_subcommand("build-cgo", "CGO solution for medium c1");
  common(bc, true);
  bc->add_option("--tau", tau, "phase size")->capture_default_str();
  bc->add_option("--xi", xi, "frequency direction")->expected(3);

  int medium = 1;
  std::vector<double> dir = {0.3, 0.5, 0.8}, pol = {1, 0, 0};
  auto* fwd = app.add_subcommand("forward-solve", "boundary value problem with plane-wave data");
  common(fwd, true);
  fwd->add_option("--medium", medium, "1 or 2")->check(CLI::Range(1, 2))->capture_default_str();
  fwd->add_option("--dir", dir, "incident direction")->expected(3);
  fwd->add_option("--pol", pol, "incident polarization")->expected(3);

  auto* imp = app.add_subcommand("impedance", "impedance matrices of both media");
  common(imp, true);

  auto* ci = app.add_subcommand("check-identity", "orthogonality identity at two resolutions");
  common(ci, true);

  std::string term = "all";
  std::vector<double> taus = {8, 16, 32, 64};
  auto* li = app.add_subcommand("limits", "finite-tau terms against their closed-form limits");
  common(li, true);
  li->add_option("--term", term, "L41, L42, L43, L44 or all")->capture_default_str();
  li->add_option("--taus", taus, "tau schedule");

  auto* re = app.add_subcommand("recover", "Newton recovery of medium c1 from bracket data");
  common(re, true);

  int kn = 10000;
  auto* kc = app.add_subcommand("kelvin-check", "Kelvin transform identity gaps");
  common(kc, false);
  kc->add_option("--n", kn, "number of sample points")->capture_default_str();

  auto* rs = app.add_subcommand("reduce-sphere", "reduce a spherical scenario to the planar one");
  common(rs, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*va) return verify_algebra(c, n);
    if (*bc) return build_cgo_cmd(c, tau, xi);
    if (*fwd) return forward_solve(c, medium, dir, pol);
    if (*imp) return impedance_cmd(c);
    if (*ci) return check_identity(c);
    if (*li) return limits_cmd(c, term, taus);
    if (*re) return recover_cmd(c);
    if (*kc) return kelvin_check(c, kn);
    if (*rs) return reduce_sphere(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.field << "]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
