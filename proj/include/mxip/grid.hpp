#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "algebra8.hpp"

namespace mxip {

// Uniform rectilinear node grid, C-order (k fastest).
// periodic grids wrap at the upper end (FFT boxes); closed grids include both end nodes.
struct Grid3 {
  std::array<int, 3> n{0, 0, 0};
  double h = 1.0;
  RVec3 origin = RVec3::Zero();
  bool periodic = false;

  std::size_t size() const { return std::size_t(n[0]) * n[1] * n[2]; }
  std::size_t index(int i, int j, int k) const { return (std::size_t(i) * n[1] + j) * n[2] + k; }
  std::array<int, 3> unindex(std::size_t id) const {
    int k = int(id % n[2]);
    id /= n[2];
    int j = int(id % n[1]);
    return {int(id / n[1]), j, k};
  }
  RVec3 point(int i, int j, int k) const { return origin + h * RVec3(i, j, k); }
  RVec3 point(std::size_t id) const {
    auto [i, j, k] = unindex(id);
    return point(i, j, k);
  }
  RVec3 upper() const {
    return origin + h * RVec3(n[0] - (periodic ? 0 : 1), n[1] - (periodic ? 0 : 1), n[2] - (periodic ? 0 : 1));
  }

  // node index of x3 -> -x3
  int mirror_k(int k) const {
    if (periodic) return (n[2] - k) % n[2];
    return n[2] - 1 - k;
  }
  bool reflection_symmetric() const {
    if (periodic) return std::abs(origin(2) + 0.5 * n[2] * h) < 1e-12 * std::max(1.0, h * n[2]);
    return std::abs(origin(2) + 0.5 * (n[2] - 1) * h) < 1e-12 * std::max(1.0, h * n[2]);
  }

  // nearest node index along axis, -1 if x is not on a node
  int node_of(int axis, double x) const {
    double t = (x - origin(axis)) / h;
    long r = std::lround(t);
    if (std::abs(t - double(r)) > 1e-7 || r < 0 || r >= n[axis]) return -1;
    return int(r);
  }

  static Grid3 box(const RVec3& lo, const RVec3& hi, double h, bool periodic = false) {
    Grid3 g;
    g.h = h;
    g.origin = lo;
    g.periodic = periodic;
    for (int a = 0; a < 3; ++a) {
      long cells = std::lround((hi(a) - lo(a)) / h);
      if (cells <= 0 || std::abs(cells * h - (hi(a) - lo(a))) > 1e-9)
        throw std::invalid_argument("Grid3::box: extent not a multiple of h");
      g.n[a] = int(periodic ? cells : cells + 1);
    }
    return g;
  }
};

// Sub-box of a grid given by inclusive node ranges.
struct IndexBox {
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  bool contains(int i, int j, int k) const {
    return i >= lo[0] && i <= hi[0] && j >= lo[1] && j <= hi[1] && k >= lo[2] && k <= hi[2];
  }
};

inline IndexBox index_box(const Grid3& g, const RVec3& lo, const RVec3& hi) {
  IndexBox b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = g.node_of(a, lo(a));
    b.hi[a] = g.node_of(a, hi(a));
    if (b.lo[a] < 0 || b.hi[a] < 0) throw std::invalid_argument("index_box: bounds not on grid nodes");
  }
  return b;
}

// Trapezoidal weight of node (i,j,k) for integration over box b.
inline double trapezoid_weight(const Grid3& g, const IndexBox& b, int i, int j, int k) {
  if (!b.contains(i, j, k)) return 0.0;
  double w = g.h * g.h * g.h;
  const int idx[3] = {i, j, k};
  for (int a = 0; a < 3; ++a)
    if (idx[a] == b.lo[a] || idx[a] == b.hi[a]) w *= 0.5;
  return w;
}

inline std::vector<double> trapezoid_weights(const Grid3& g, const IndexBox& b) {
  std::vector<double> w(g.size(), 0.0);
  for (int i = b.lo[0]; i <= b.hi[0]; ++i)
    for (int j = b.lo[1]; j <= b.hi[1]; ++j)
      for (int k = b.lo[2]; k <= b.hi[2]; ++k) w[g.index(i, j, k)] = trapezoid_weight(g, b, i, j, k);
  return w;
}

// Central difference weights for d/dx on offsets -2..2 (4th order) and -1..1 (2nd order).
inline constexpr double kD1o4[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
inline constexpr double kD2o4[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
inline constexpr double kD1o2[3] = {-0.5, 0.0, 0.5};
inline constexpr double kD2o2[3] = {1.0, -2.0, 1.0};

// Finite-difference gradient/Hessian/Laplacian of a sampled scalar at an interior node.
template <class T>
struct Stencil {
  const Grid3& g;
  const std::vector<T>& f;
  int order = 4;

  int reach() const { return order == 4 ? 2 : 1; }
  T at(int i, int j, int k) const {
    if (g.periodic) {
      i = (i % g.n[0] + g.n[0]) % g.n[0];
      j = (j % g.n[1] + g.n[1]) % g.n[1];
      k = (k % g.n[2] + g.n[2]) % g.n[2];
    }
    return f[g.index(i, j, k)];
  }
  T shifted(int i, int j, int k, int a, int s) const {
    int id[3] = {i, j, k};
    id[a] += s;
    return at(id[0], id[1], id[2]);
  }
  T d1(int i, int j, int k, int a) const {
    T s{};
    if (order == 4)
      for (int o = -2; o <= 2; ++o) s += kD1o4[o + 2] * shifted(i, j, k, a, o);
    else
      for (int o = -1; o <= 1; ++o) s += kD1o2[o + 1] * shifted(i, j, k, a, o);
    return s / g.h;
  }
  T d2(int i, int j, int k, int a) const {
    T s{};
    if (order == 4)
      for (int o = -2; o <= 2; ++o) s += kD2o4[o + 2] * shifted(i, j, k, a, o);
    else
      for (int o = -1; o <= 1; ++o) s += kD2o2[o + 1] * shifted(i, j, k, a, o);
    return s / (g.h * g.h);
  }
  T dmix(int i, int j, int k, int a, int b) const {
    T s{};
    int r = reach();
    for (int p = -r; p <= r; ++p) {
      double wp = order == 4 ? kD1o4[p + 2] : kD1o2[p + 1];
      if (wp == 0.0) continue;
      for (int q = -r; q <= r; ++q) {
        double wq = order == 4 ? kD1o4[q + 2] : kD1o2[q + 1];
        if (wq == 0.0) continue;
        int id[3] = {i, j, k};
        id[a] += p;
        id[b] += q;
        s += wp * wq * at(id[0], id[1], id[2]);
      }
    }
    return s / (g.h * g.h);
  }
  T laplacian(int i, int j, int k) const { return d2(i, j, k, 0) + d2(i, j, k, 1) + d2(i, j, k, 2); }
  bool interior(int i, int j, int k) const {
    if (g.periodic) return true;
    int r = reach();
    return i >= r && j >= r && k >= r && i < g.n[0] - r && j < g.n[1] - r && k < g.n[2] - r;
  }
};

}  // namespace mxip
