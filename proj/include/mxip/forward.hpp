#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "media.hpp"
#include "sparse_lu.hpp"

namespace mxip {

struct NearResonance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Staggered box grid: H on primal edges, E on primal faces.
// An edge of direction d has a cell index along d and node indices elsewhere; a face of normal d the reverse.
struct YeeGrid {
  std::array<int, 3> n{8, 8, 8};
  double h = 0.125;
  RVec3 origin = RVec3(0, 0, -1);

  // Omega = [0,1]^2 x [-1,0]
  static YeeGrid unit_box(int cells) {
    if (cells < 2) throw std::invalid_argument("YeeGrid: need at least 2 cells per axis");
    YeeGrid g;
    g.n = {cells, cells, cells};
    g.h = 1.0 / cells;
    g.origin = RVec3(0, 0, -1);
    return g;
  }

  int edge_extent(int d, int a) const { return a == d ? n[a] : n[a] + 1; }
  int face_extent(int d, int a) const { return a == d ? n[a] + 1 : n[a]; }
  std::size_t edge_count(int d) const {
    return std::size_t(edge_extent(d, 0)) * edge_extent(d, 1) * edge_extent(d, 2);
  }
  std::size_t face_count(int d) const {
    return std::size_t(face_extent(d, 0)) * face_extent(d, 1) * face_extent(d, 2);
  }
  std::size_t edge_offset(int d) const {
    std::size_t o = 0;
    for (int b = 0; b < d; ++b) o += edge_count(b);
    return o;
  }
  std::size_t face_offset(int d) const {
    std::size_t o = 0;
    for (int b = 0; b < d; ++b) o += face_count(b);
    return o;
  }
  std::size_t num_edges() const { return edge_offset(3); }
  std::size_t num_faces() const { return face_offset(3); }

  std::size_t edge(int d, const std::array<int, 3>& p) const {
    return edge_offset(d) + (std::size_t(p[0]) * edge_extent(d, 1) + p[1]) * edge_extent(d, 2) + p[2];
  }
  std::size_t face(int d, const std::array<int, 3>& p) const {
    return face_offset(d) + (std::size_t(p[0]) * face_extent(d, 1) + p[1]) * face_extent(d, 2) + p[2];
  }

  // (direction, index triple) of an edge id
  std::pair<int, std::array<int, 3>> edge_index(std::size_t id) const {
    int d = 0;
    while (id >= edge_offset(d + 1)) ++d;
    id -= edge_offset(d);
    std::array<int, 3> p;
    p[2] = int(id % edge_extent(d, 2));
    id /= edge_extent(d, 2);
    p[1] = int(id % edge_extent(d, 1));
    p[0] = int(id / edge_extent(d, 1));
    return {d, p};
  }
  std::pair<int, std::array<int, 3>> face_index(std::size_t id) const {
    int d = 0;
    while (id >= face_offset(d + 1)) ++d;
    id -= face_offset(d);
    std::array<int, 3> p;
    p[2] = int(id % face_extent(d, 2));
    id /= face_extent(d, 2);
    p[1] = int(id % face_extent(d, 1));
    p[0] = int(id / face_extent(d, 1));
    return {d, p};
  }

  RVec3 edge_point(int d, const std::array<int, 3>& p) const {
    RVec3 x = origin + h * RVec3(p[0], p[1], p[2]);
    x(d) += 0.5 * h;
    return x;
  }
  RVec3 face_point(int d, const std::array<int, 3>& p) const {
    RVec3 x = origin + h * RVec3(p[0] + 0.5, p[1] + 0.5, p[2] + 0.5);
    x(d) -= 0.5 * h;
    return x;
  }
  RVec3 edge_point(std::size_t id) const {
    auto [d, p] = edge_index(id);
    return edge_point(d, p);
  }
  RVec3 face_point(std::size_t id) const {
    auto [d, p] = face_index(id);
    return face_point(d, p);
  }

  bool on_plane(int d, const std::array<int, 3>& p, int plane) const {
    int a = plane / 2;
    return a != d && p[a] == (plane % 2 ? n[a] : 0);
  }
  bool boundary_edge(int d, const std::array<int, 3>& p) const {
    for (int pl = 0; pl < 6; ++pl)
      if (on_plane(d, p, pl)) return true;
    return false;
  }

  // trapezoid-in-node-directions volume weights
  double edge_weight(int d, const std::array<int, 3>& p) const {
    double w = h * h * h;
    for (int a = 0; a < 3; ++a)
      if (a != d && (p[a] == 0 || p[a] == n[a])) w *= 0.5;
    return w;
  }
  double face_weight(int d, const std::array<int, 3>& p) const {
    double w = h * h * h;
    if (p[d] == 0 || p[d] == n[d]) w *= 0.5;
    return w;
  }
};

// Outward unit normal of boundary plane 2*axis+side.
inline RVec3 plane_normal(int plane) { return (plane % 2 ? 1.0 : -1.0) * RVec3::Unit(plane / 2); }

inline constexpr int kTopPlane = 5;

// Discrete curl, faces x edges.
inline Eigen::SparseMatrix<double, Eigen::ColMajor, int> curl_matrix(const YeeGrid& g) {
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(4 * g.num_faces());
  const double ih = 1.0 / g.h;
  for (int d = 0; d < 3; ++d) {
    int d1 = (d + 1) % 3, d2 = (d + 2) % 3;
    std::array<int, 3> p;
    for (p[0] = 0; p[0] < g.face_extent(d, 0); ++p[0])
      for (p[1] = 0; p[1] < g.face_extent(d, 1); ++p[1])
        for (p[2] = 0; p[2] < g.face_extent(d, 2); ++p[2]) {
          int row = int(g.face(d, p));
          auto q = p;
          t.emplace_back(row, int(g.edge(d2, p)), -ih);
          q[d1] += 1;
          t.emplace_back(row, int(g.edge(d2, q)), ih);
          q = p;
          t.emplace_back(row, int(g.edge(d1, p)), ih);
          q[d2] += 1;
          t.emplace_back(row, int(g.edge(d1, q)), -ih);
        }
  }
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> C(int(g.num_faces()), int(g.num_edges()));
  C.setFromTriplets(t.begin(), t.end());
  return C;
}

// Tangential boundary data as H.t on boundary edges (entries on interior edges are ignored).
using EdgeData = std::vector<cplx>;

// H.t = (a ^ nu).t from nu ^ H = a; edges shared by two planes take the first plane.
inline EdgeData boundary_from_tangential(const YeeGrid& g,
                                         const std::function<CVec3(const RVec3&, const RVec3&)>& a,
                                         double tol = 1e-12) {
  EdgeData hb(g.num_edges(), cplx(0.0));
  for (std::size_t id = 0; id < g.num_edges(); ++id) {
    auto [d, p] = g.edge_index(id);
    for (int pl = 0; pl < 6; ++pl) {
      if (!g.on_plane(d, p, pl)) continue;
      RVec3 nu = plane_normal(pl);
      RVec3 x = g.edge_point(d, p);
      CVec3 av = a(x, nu);
      if (std::abs(dot(to_c(nu), av)) > tol * std::max(1.0, av.norm()))
        throw ContractViolation("boundary data is not tangential");
      hb[id] = cross(av, to_c(nu))(d);
      break;
    }
  }
  return hb;
}

// Tangential data of a given magnetic field.
inline EdgeData boundary_from_field(const YeeGrid& g, const std::function<CVec3(const RVec3&)>& H) {
  EdgeData hb(g.num_edges(), cplx(0.0));
  for (std::size_t id = 0; id < g.num_edges(); ++id) {
    auto [d, p] = g.edge_index(id);
    if (g.boundary_edge(d, p)) hb[id] = H(g.edge_point(d, p))(d);
  }
  return hb;
}

struct MaxwellSolution {
  YeeGrid grid;
  std::vector<cplx> H;  // per edge, component along the edge
  std::vector<cplx> E;  // per face, component along the normal
  double residual = 0.0;
  double rcond = 0.0;
};

struct SolverOptions {
  double tol = 1e-8;
  double rcond_floor = 1e-13;
  int max_refine = 3;
};

struct MaxwellBvp {
  CoefficientSet coeffs;
  YeeGrid grid;
  EdgeData a;
  SolverOptions opts;
};

// curl(gamma^-1 curl H) = omega^2 mu H on interior edges, factored once per medium and grid.
class MaxwellOperator {
 public:
  MaxwellOperator(const CoefficientSet& c, const YeeGrid& g, SolverOptions opts = {}) : g_(g), opts_(opts) {
    omega_ = c.omega;
    C_ = curl_matrix(g).cast<cplx>();
    inv_gamma_.resize(g.num_faces());
    gamma_.resize(g.num_faces());
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
      gamma_[f] = c.gamma_value(g.face_point(f));
      inv_gamma_[f] = 1.0 / gamma_[f];
    }
    mu_.resize(g.num_edges());
    slot_.assign(g.num_edges(), -1);
    int ni = 0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      auto [d, p] = g_.edge_index(e);
      mu_[e] = c.mu_value(g.edge_point(d, p));
      if (!g.boundary_edge(d, p)) slot_[e] = ni++;
    }
    Eigen::Map<const CVecX> ig(inv_gamma_.data(), Eigen::Index(inv_gamma_.size()));
    SpMat K = SpMat(C_.transpose()) * ig.asDiagonal() * C_;
    for (std::size_t e = 0; e < g.num_edges(); ++e) K.coeffRef(int(e), int(e)) -= omega_ * omega_ * mu_[e];
    std::vector<Eigen::Triplet<cplx, int>> ti, tb;
    for (int col = 0; col < K.outerSize(); ++col)
      for (SpMat::InnerIterator it(K, col); it; ++it) {
        int r = slot_[it.row()];
        if (r < 0) continue;
        if (slot_[col] >= 0)
          ti.emplace_back(r, slot_[col], it.value());
        else
          tb.emplace_back(r, col, it.value());
      }
    SpMat A(ni, ni);
    A.setFromTriplets(ti.begin(), ti.end());
    Ab_ = SpMat(ni, int(g.num_edges()));
    Ab_.setFromTriplets(tb.begin(), tb.end());
    lu_ = std::make_unique<SparseLU>(std::move(A), true);
    if (lu_->singular() || lu_->rcond() < opts_.rcond_floor)
      throw NearResonance("Maxwell operator is near-singular (rcond " + std::to_string(lu_->rcond()) + ")");
  }

  const YeeGrid& grid() const { return g_; }
  double rcond() const { return lu_->rcond(); }
  int unknowns() const { return int(lu_->matrix().rows()); }
  const std::vector<cplx>& gamma() const { return gamma_; }
  const std::vector<double>& mu() const { return mu_; }
  double omega() const { return omega_; }

  MaxwellSolution solve(const EdgeData& a) const {
    if (a.size() != g_.num_edges()) throw std::invalid_argument("boundary data size mismatch");
    CVecX hb = CVecX::Zero(Eigen::Index(g_.num_edges()));
    for (std::size_t e = 0; e < g_.num_edges(); ++e)
      if (slot_[e] < 0) hb(Eigen::Index(e)) = a[e];
    CVecX b = -(Ab_ * hb);
    CVecX x = lu_->solve(b);
    double res = residual_of(b, x);
    for (int it = 0; it < opts_.max_refine && res > 0.01 * opts_.tol; ++it) res = lu_->refine(b, x);
    if (!std::isfinite(res)) throw NonConvergence("Maxwell solve produced non-finite values");
    if (res > opts_.tol)
      throw NearResonance("Maxwell solve residual " + std::to_string(res) + " above tolerance");
    MaxwellSolution s;
    s.grid = g_;
    s.H.assign(g_.num_edges(), cplx(0.0));
    for (std::size_t e = 0; e < g_.num_edges(); ++e) s.H[e] = slot_[e] >= 0 ? x(slot_[e]) : a[e];
    s.E = electric_field(s.H);
    s.residual = res;
    s.rcond = lu_->rcond();
    return s;
  }

  // E = i curl H / (omega gamma)
  std::vector<cplx> electric_field(const std::vector<cplx>& H) const {
    Eigen::Map<const CVecX> h(H.data(), Eigen::Index(H.size()));
    CVecX ch = C_ * h;
    std::vector<cplx> E(g_.num_faces());
    for (std::size_t f = 0; f < E.size(); ++f) E[f] = I * ch(Eigen::Index(f)) * inv_gamma_[f] / omega_;
    return E;
  }

  // relative residual of curl E - i omega mu H on interior edges
  double curl_e_residual(const MaxwellSolution& s) const {
    Eigen::Map<const CVecX> e(s.E.data(), Eigen::Index(s.E.size()));
    CVecX ce = SpMat(C_.transpose()) * e;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < g_.num_edges(); ++k) {
      if (slot_[k] < 0) continue;
      cplx r = ce(Eigen::Index(k)) - I * omega_ * mu_[k] * s.H[k];
      num += std::norm(r);
      den += std::norm(omega_ * mu_[k] * s.H[k]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  }

  // sqrt of the generalized eigenvalue of curl gamma^-1 curl x = lambda mu x nearest omega^2 (shifted inverse iteration)
  double nearest_resonance(int iters = 40, std::uint64_t seed = 1) const {
    const int n = unknowns();
    CVecX m(n);
    for (std::size_t e = 0; e < g_.num_edges(); ++e)
      if (slot_[e] >= 0) m(slot_[e]) = mu_[e];
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    CVecX x(n);
    for (int i = 0; i < n; ++i) x(i) = nd(rng);
    x.normalize();
    double lambda = omega_ * omega_;
    for (int it = 0; it < iters; ++it) {
      x = lu_->solve(m.cwiseProduct(x));
      x.normalize();
      cplx num = x.dot(lu_->matrix() * x), den = x.dot(m.cwiseProduct(x));
      lambda = omega_ * omega_ + (num / den).real();
    }
    return std::sqrt(lambda);
  }

 private:
  double residual_of(const CVecX& b, const CVecX& x) const {
    double nb = b.norm();
    CVecX r = b - lu_->matrix() * x;
    return nb > 0.0 ? r.norm() / nb : r.norm();
  }

  YeeGrid g_;
  SolverOptions opts_;
  double omega_ = 1.0;
  SpMat C_, Ab_;
  std::vector<cplx> gamma_, inv_gamma_;
  std::vector<double> mu_;
  std::vector<int> slot_;
  std::unique_ptr<SparseLU> lu_;
};

inline MaxwellSolution solve_bvp(const MaxwellBvp& bvp) {
  MaxwellOperator op(bvp.coeffs, bvp.grid, bvp.opts);
  return op.solve(bvp.a);
}

// Discrete D.(mu H) at interior nodes and D.(gamma E) per cell, relative to the field scale.
struct DivergenceResidual {
  double div_mu_h = 0.0, div_gamma_e = 0.0;
};

inline DivergenceResidual divergence_residual(const MaxwellOperator& op, const MaxwellSolution& s) {
  const YeeGrid& g = s.grid;
  const auto& mu = op.mu();
  const auto& gm = op.gamma();
  double hs = 0.0, es = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) hs = std::max(hs, std::abs(mu[e] * s.H[e]));
  for (std::size_t f = 0; f < g.num_faces(); ++f) es = std::max(es, std::abs(gm[f] * s.E[f]));
  DivergenceResidual r;
  std::array<int, 3> p;
  for (p[0] = 1; p[0] < g.n[0]; ++p[0])
    for (p[1] = 1; p[1] < g.n[1]; ++p[1])
      for (p[2] = 1; p[2] < g.n[2]; ++p[2]) {
        cplx dv = 0.0;
        for (int d = 0; d < 3; ++d) {
          auto q = p;
          q[d] -= 1;
          std::size_t e1 = g.edge(d, p), e0 = g.edge(d, q);
          dv += (mu[e1] * s.H[e1] - mu[e0] * s.H[e0]) / g.h;
        }
        r.div_mu_h = std::max(r.div_mu_h, std::abs(dv));
      }
  for (p[0] = 0; p[0] < g.n[0]; ++p[0])
    for (p[1] = 0; p[1] < g.n[1]; ++p[1])
      for (p[2] = 0; p[2] < g.n[2]; ++p[2]) {
        cplx dv = 0.0;
        for (int d = 0; d < 3; ++d) {
          auto q = p;
          q[d] += 1;
          std::size_t f1 = g.face(d, q), f0 = g.face(d, p);
          dv += (gm[f1] * s.E[f1] - gm[f0] * s.E[f0]) / g.h;
        }
        r.div_gamma_e = std::max(r.div_gamma_e, std::abs(dv));
      }
  if (hs > 0.0) r.div_mu_h /= hs;
  if (es > 0.0) r.div_gamma_e /= es;
  return r;
}

// A boundary sample of the tangential electric trace: edge e lying in a boundary plane.
struct TraceSite {
  std::size_t edge;
  int plane;
  double weight;  // surface quadrature weight
  bool in_gamma;  // edge off the closed top face
};

inline std::vector<TraceSite> trace_sites(const YeeGrid& g) {
  std::vector<TraceSite> s;
  for (std::size_t id = 0; id < g.num_edges(); ++id) {
    auto [d, p] = g.edge_index(id);
    for (int pl = 0; pl < 6; ++pl) {
      if (!g.on_plane(d, p, pl)) continue;
      int a = pl / 2, c = 3 - a - d;
      double w = g.h * g.h;
      if (p[c] == 0 || p[c] == g.n[c]) w *= 0.5;
      s.push_back({id, pl, w, !g.on_plane(d, p, kTopPlane)});
    }
  }
  return s;
}

// (nu ^ E).t at a trace site, extrapolating the face values from inside to second order.
inline cplx tangential_e(const YeeGrid& g, const std::vector<cplx>& E, const TraceSite& s) {
  auto [d, p] = g.edge_index(s.edge);
  int a = s.plane / 2, c = 3 - a - d;
  double sg = s.plane % 2 ? 1.0 : -1.0;
  // e_a ^ e_d = eps e_c
  double eps = ((d - a + 3) % 3 == 1) ? 1.0 : -1.0;
  auto q0 = p, q1 = p;
  q0[a] = s.plane % 2 ? g.n[a] - 1 : 0;
  q1[a] = s.plane % 2 ? g.n[a] - 2 : 1;
  cplx ec = 1.5 * E[g.face(c, q0)] - 0.5 * E[g.face(c, q1)];
  return -sg * eps * ec;
}

inline std::vector<cplx> tangential_trace(const MaxwellSolution& s, const std::vector<TraceSite>& sites) {
  std::vector<cplx> t(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) t[i] = tangential_e(s.grid, s.E, sites[i]);
  return t;
}

// Columns are unit H.t data on boundary edges; rows are (nu ^ E).t at trace sites.
struct ImpedanceMap {
  Eigen::MatrixXcd M;
  std::vector<std::size_t> col_edges;
  std::vector<bool> col_in_gamma;
  std::vector<TraceSite> rows;

  std::vector<int> gamma_cols() const {
    std::vector<int> c;
    for (std::size_t j = 0; j < col_in_gamma.size(); ++j)
      if (col_in_gamma[j]) c.push_back(int(j));
    return c;
  }
  std::vector<int> gamma_rows() const {
    std::vector<int> r;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].in_gamma) r.push_back(int(i));
    return r;
  }
  Eigen::MatrixXcd restricted() const { return M(gamma_rows(), gamma_cols()); }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& c) const { return M * c; }
};

inline std::vector<std::size_t> boundary_edges(const YeeGrid& g) {
  std::vector<std::size_t> b;
  for (std::size_t id = 0; id < g.num_edges(); ++id) {
    auto [d, p] = g.edge_index(id);
    if (g.boundary_edge(d, p)) b.push_back(id);
  }
  return b;
}

inline ImpedanceMap assemble_impedance(const MaxwellOperator& op) {
  const YeeGrid& g = op.grid();
  ImpedanceMap L;
  L.col_edges = boundary_edges(g);
  L.rows = trace_sites(g);
  L.M.resize(Eigen::Index(L.rows.size()), Eigen::Index(L.col_edges.size()));
  for (std::size_t j = 0; j < L.col_edges.size(); ++j) {
    auto [d, p] = g.edge_index(L.col_edges[j]);
    L.col_in_gamma.push_back(!g.on_plane(d, p, kTopPlane));
    EdgeData a(g.num_edges(), cplx(0.0));
    a[L.col_edges[j]] = 1.0;
    auto t = tangential_trace(op.solve(a), L.rows);
    for (std::size_t i = 0; i < t.size(); ++i) L.M(Eigen::Index(i), Eigen::Index(j)) = t[i];
  }
  return L;
}

// Coefficients of boundary data in the impedance-map column basis.
inline Eigen::VectorXcd edge_coefficients(const ImpedanceMap& L, const EdgeData& a) {
  Eigen::VectorXcd c(Eigen::Index(L.col_edges.size()));
  for (std::size_t j = 0; j < L.col_edges.size(); ++j) c(Eigen::Index(j)) = a[L.col_edges[j]];
  return c;
}

// Weighted L2 norms and differences over edges (H) and faces (E).
inline double relative_h_error(const MaxwellSolution& s, const std::function<CVec3(const RVec3&)>& H) {
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < s.grid.num_edges(); ++e) {
    auto [d, p] = s.grid.edge_index(e);
    double w = s.grid.edge_weight(d, p);
    cplx x = H(s.grid.edge_point(d, p))(d);
    num += w * std::norm(s.H[e] - x);
    den += w * std::norm(x);
  }
  return std::sqrt(num / den);
}

inline double relative_e_error(const MaxwellSolution& s, const std::function<CVec3(const RVec3&)>& E) {
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < s.grid.num_faces(); ++f) {
    auto [d, p] = s.grid.face_index(f);
    double w = s.grid.face_weight(d, p);
    cplx x = E(s.grid.face_point(d, p))(d);
    num += w * std::norm(s.E[f] - x);
    den += w * std::norm(x);
  }
  return std::sqrt(num / den);
}

// Constant-medium plane wave (E, H) = (p, (q ^ p)/(omega mu)) e^{i q.x}, q.q = omega^2 gamma mu.
struct PlaneWave {
  CVec3 q, p;
  double omega, mu;

  static PlaneWave make(double omega, cplx gamma, double mu, const RVec3& dir, const RVec3& pol) {
    RVec3 u = dir.normalized();
    RVec3 v = (pol - pol.dot(u) * u).normalized();
    PlaneWave w;
    w.q = std::sqrt(omega * omega * gamma * mu) * to_c(u);
    w.p = to_c(v);
    w.omega = omega;
    w.mu = mu;
    return w;
  }
  cplx phase(const RVec3& x) const { return std::exp(I * dot(q, to_c(x))); }
  CVec3 E(const RVec3& x) const { return p * phase(x); }
  CVec3 H(const RVec3& x) const { return cross(q, p) / (omega * mu) * phase(x); }
};

// Integration-by-parts identity (P(D)X|X') = -i(P(nu)X|X')_bd + (X|P(D)X') on a node grid.
struct IdentityGap {
  cplx lhs, rhs;
  double gap = 0.0;
  double relative() const { return gap / std::max({std::abs(lhs), std::abs(rhs), 1e-300}); }
};

using VecField = std::function<Vec8(const RVec3&)>;

namespace detail {

// d/dx along axis a at node index i of m+1 nodes: 4th-order central inside, one-sided near the ends
inline int fd_weight_row(int i, int m, double* w) {
  static const double c4[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  static const double l0[5] = {-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12, -3.0 / 12};
  static const double l1[5] = {-3.0 / 12, -10.0 / 12, 18.0 / 12, -6.0 / 12, 1.0 / 12};
  if (i >= 2 && i <= m - 2) {
    for (int k = 0; k < 5; ++k) w[k] = c4[k];
    return i - 2;
  }
  if (i == 0 || i == 1) {
    for (int k = 0; k < 5; ++k) w[k] = i == 0 ? l0[k] : l1[k];
    return 0;
  }
  for (int k = 0; k < 5; ++k) w[k] = -(i == m ? l0[4 - k] : l1[4 - k]);
  return m - 4;
}

}  // namespace detail

inline IdentityGap ibp_identity_check(const VecField& X, const VecField& Xp, const RVec3& lo, const RVec3& hi,
                                      int cells) {
  Grid3 g = Grid3::box(lo, hi, (hi(0) - lo(0)) / cells);
  std::vector<Vec8> x(g.size()), xp(g.size());
  for (std::size_t id = 0; id < g.size(); ++id) {
    x[id] = X(g.point(id));
    xp[id] = Xp(g.point(id));
  }
  Mat8 P[3];
  for (int a = 0; a < 3; ++a) P[a] = p_mix(to_c(RVec3::Unit(a)));
  auto pd = [&](const std::vector<Vec8>& f, int i, int j, int k) {
    Vec8 r = Vec8::Zero();
    const int idx[3] = {i, j, k};
    for (int a = 0; a < 3; ++a) {
      double w[5];
      int s = detail::fd_weight_row(idx[a], g.n[a] - 1, w);
      Vec8 d = Vec8::Zero();
      for (int o = 0; o < 5; ++o) {
        int q[3] = {i, j, k};
        q[a] = s + o;
        d += w[o] * f[g.index(q[0], q[1], q[2])];
      }
      r += -I * (P[a] * d) / g.h;
    }
    return r;
  };
  IndexBox b{{0, 0, 0}, {g.n[0] - 1, g.n[1] - 1, g.n[2] - 1}};
  cplx lhs = 0.0, vol = 0.0, surf = 0.0;
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        double w = trapezoid_weight(g, b, i, j, k);
        std::size_t id = g.index(i, j, k);
        lhs += w * xp[id].dot(pd(x, i, j, k));
        vol += w * pd(xp, i, j, k).dot(x[id]);
        const int idx[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          if (idx[a] != 0 && idx[a] != g.n[a] - 1) continue;
          double sw = g.h * g.h;
          for (int c = 0; c < 3; ++c)
            if (c != a && (idx[c] == 0 || idx[c] == g.n[c] - 1)) sw *= 0.5;
          double sg = idx[a] == 0 ? -1.0 : 1.0;
          surf += sw * xp[id].dot(sg * (P[a] * x[id]));
        }
      }
  IdentityGap r;
  r.lhs = lhs;
  r.rhs = -I * surf + vol;
  r.gap = std::abs(r.lhs - r.rhs);
  return r;
}

// Both sides of the orthogonality identity
//   int X2^*(V1 - V2)X1 = i int (Lambda2 - Lambda1)(nu ^ H1) . conj(H2)
// X1 solves medium 1, X2 solves medium 2 with conjugated gamma; op2 is the operator of medium 2 itself.
struct OrthogonalityGap {
  cplx volume_side, boundary_side;
  double gap = 0.0;
  double relative() const {
    return gap / std::max({std::abs(volume_side), std::abs(boundary_side), 1e-300});
  }
};

inline OrthogonalityGap orthogonality_check(const MaxwellOperator& op1, const MaxwellOperator& op2,
                                            const MaxwellSolution& X1, const MaxwellSolution& X2) {
  const YeeGrid& g = X1.grid;
  const double w = op1.omega();
  cplx vol = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    auto [d, p] = g.edge_index(e);
    vol += g.edge_weight(d, p) * w * (op1.mu()[e] - op2.mu()[e]) * X1.H[e] * std::conj(X2.H[e]);
  }
  for (std::size_t f = 0; f < g.num_faces(); ++f) {
    auto [d, p] = g.face_index(f);
    vol += g.face_weight(d, p) * w * (op1.gamma()[f] - op2.gamma()[f]) * X1.E[f] * std::conj(X2.E[f]);
  }
  MaxwellSolution X2t = op2.solve(X1.H);
  auto sites = trace_sites(g);
  cplx bd = 0.0;
  for (const auto& s : sites) {
    cplx diff = tangential_e(g, X2t.E, s) - tangential_e(g, X1.E, s);
    bd += s.weight * diff * std::conj(X2.H[s.edge]);
  }
  OrthogonalityGap r;
  r.volume_side = vol;
  r.boundary_side = I * bd;
  r.gap = std::abs(r.volume_side - r.boundary_side);
  return r;
}

// Solver fields averaged to the nodes of the closed box as Phi = Psi = 0 8-fields.
inline std::vector<Vec8> node_fields(const MaxwellSolution& s) {
  const YeeGrid& g = s.grid;
  Grid3 ng;
  ng.n = {g.n[0] + 1, g.n[1] + 1, g.n[2] + 1};
  ng.h = g.h;
  ng.origin = g.origin;
  std::vector<Vec8> out(ng.size(), Vec8::Zero());
  std::array<int, 3> p;
  for (p[0] = 0; p[0] <= g.n[0]; ++p[0])
    for (p[1] = 0; p[1] <= g.n[1]; ++p[1])
      for (p[2] = 0; p[2] <= g.n[2]; ++p[2]) {
        Vec8 v = Vec8::Zero();
        for (int d = 0; d < 3; ++d) {
          cplx hs = 0.0;
          int cnt = 0;
          for (int o : {-1, 0}) {
            auto q = p;
            q[d] += o;
            if (q[d] < 0 || q[d] >= g.n[d]) continue;
            hs += s.H[g.edge(d, q)];
            ++cnt;
          }
          v(1 + d) = hs / double(cnt);
          int d1 = (d + 1) % 3, d2 = (d + 2) % 3;
          cplx es = 0.0;
          cnt = 0;
          for (int o1 : {-1, 0})
            for (int o2 : {-1, 0}) {
              auto q = p;
              q[d1] += o1;
              q[d2] += o2;
              if (q[d1] < 0 || q[d1] >= g.n[d1] || q[d2] < 0 || q[d2] >= g.n[d2]) continue;
              es += s.E[g.face(d, q)];
              ++cnt;
            }
          v(5 + d) = es / double(cnt);
        }
        out[ng.index(p[0], p[1], p[2])] = v;
      }
  return out;
}

}  // namespace mxip
