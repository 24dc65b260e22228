#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace mxip {

using cplx = std::complex<double>;
using CVec3 = Eigen::Matrix<cplx, 3, 1>;
using RVec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix<cplx, 3, 3, Eigen::RowMajor>;
using Mat4 = Eigen::Matrix<cplx, 4, 4, Eigen::RowMajor>;
using Mat8 = Eigen::Matrix<cplx, 8, 8, Eigen::RowMajor>;
using Vec8 = Eigen::Matrix<cplx, 8, 1>;

inline constexpr cplx I{0.0, 1.0};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Vec8 layout: (Phi, H1, H2, H3, Psi, E1, E2, E3)
inline cplx& phi(Vec8& v) { return v(0); }
inline cplx& psi(Vec8& v) { return v(4); }
inline auto hpart(Vec8& v) { return v.segment<3>(1); }
inline auto epart(Vec8& v) { return v.segment<3>(5); }
inline cplx phi(const Vec8& v) { return v(0); }
inline cplx psi(const Vec8& v) { return v(4); }
inline CVec3 hpart(const Vec8& v) { return v.segment<3>(1); }
inline CVec3 epart(const Vec8& v) { return v.segment<3>(5); }

inline Vec8 make_vec8(cplx ph, const CVec3& h, cplx ps, const CVec3& e) {
  Vec8 v;
  v << ph, h, ps, e;
  return v;
}

inline CVec3 to_c(const RVec3& a) { return a.cast<cplx>(); }

// bilinear, no conjugation
template <class A, class B>
inline cplx dot(const A& a, const B& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

inline CVec3 cross(const CVec3& a, const CVec3& b) {
  return CVec3(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

// conjugating pairing v*u used for L2 inner products
template <class U, class V>
inline cplx inner(const U& u, const V& v) {
  return v.conjugate().transpose() * u;
}

inline Mat3 cross_matrix(const CVec3& a) {
  Mat3 m;
  m << 0.0, -a(2), a(1), a(2), 0.0, -a(0), -a(1), a(0), 0.0;
  return m;
}

inline Mat4 p_sign(const CVec3& a, double s) {
  Mat4 m = Mat4::Zero();
  m.block<1, 3>(0, 1) = a.transpose();
  m.block<3, 1>(1, 0) = a;
  m.block<3, 3>(1, 1) = s * cross_matrix(a);
  return m;
}

inline Mat4 p_plus(const CVec3& a) { return p_sign(a, 1.0); }
inline Mat4 p_minus(const CVec3& a) { return p_sign(a, -1.0); }

inline Mat8 blocks(const Mat4& tl, const Mat4& tr, const Mat4& bl, const Mat4& br) {
  Mat8 m;
  m.block<4, 4>(0, 0) = tl;
  m.block<4, 4>(0, 4) = tr;
  m.block<4, 4>(4, 0) = bl;
  m.block<4, 4>(4, 4) = br;
  return m;
}

// P(a,b) = [[0, P-(b)], [P+(a), 0]]
inline Mat8 p_mix(const CVec3& a, const CVec3& b) {
  return blocks(Mat4::Zero(), p_minus(b), p_plus(a), Mat4::Zero());
}
inline Mat8 p_mix(const CVec3& a) { return p_mix(a, a); }

// P'(a,b) = [[0, P+(b)], [P-(a), 0]]
inline Mat8 p_mix_alt(const CVec3& a, const CVec3& b) {
  return blocks(Mat4::Zero(), p_plus(b), p_minus(a), Mat4::Zero());
}
inline Mat8 p_mix_alt(const CVec3& a) { return p_mix_alt(a, a); }

inline bool is_diagonal(const Mat4& m, double tol = 0.0) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && std::abs(m(i, j)) > tol) return false;
  return true;
}

inline Mat8 diag8(const Mat4& a, const Mat4& b) {
  if (!is_diagonal(a) || !is_diagonal(b)) throw ContractViolation("diag8: non-diagonal block");
  return blocks(a, Mat4::Zero(), Mat4::Zero(), b);
}

inline Mat8 diag8(cplx a, cplx b) {
  Mat8 m = Mat8::Zero();
  for (int i = 0; i < 4; ++i) {
    m(i, i) = a;
    m(i + 4, i + 4) = b;
  }
  return m;
}

template <class M>
inline double max_abs(const M& m) {
  return m.cwiseAbs().maxCoeff();
}

// uniform in [-1, 1) from the top 53 bits of a 64-bit Mersenne twister draw
inline double unit_draw(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-52 - 1.0; }

inline CVec3 random_c3(std::mt19937_64& g) {
  CVec3 v;
  for (int i = 0; i < 3; ++i) v(i) = cplx(unit_draw(g), unit_draw(g));
  return v;
}

// maximal gaps of the symbol identities over random complex triples, each relative to its natural scale
struct IdentityGaps {
  double anticommutator = 0.0, anticommutator_alt = 0.0, swapped_product = 0.0, commutation = 0.0;
  double transposition = 0.0, plus_minus = 0.0, hermitian = 0.0;
  double max() const {
    return std::max({anticommutator, anticommutator_alt, swapped_product, commutation, transposition, plus_minus,
                     hermitian});
  }
};

inline IdentityGaps identity_gaps(int n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  IdentityGaps r;
  auto up = [](double& m, double v) { m = std::max(m, v); };
  for (int t = 0; t < n; ++t) {
    CVec3 a = random_c3(g), b = random_c3(g), c = random_c3(g);
    double s2 = std::max(1.0, a.norm() * b.norm()), s3 = std::max(1.0, a.norm() * b.norm() * c.norm());
    Mat8 id2 = 2.0 * dot(a, b) * Mat8::Identity();
    up(r.anticommutator, max_abs(p_mix(a) * p_mix(b) + p_mix(b) * p_mix(a) - id2) / s2);
    up(r.anticommutator_alt, max_abs(p_mix_alt(a) * p_mix_alt(b) + p_mix_alt(b) * p_mix_alt(a) - id2) / s2);
    up(r.swapped_product, max_abs(p_mix(a, b) * p_mix(b, a) - diag8(dot(b, b), dot(a, a))) / s2);
    up(r.commutation, max_abs(p_mix_alt(a, b) * p_mix(c) - p_mix(c) * p_mix_alt(b, a)) / s3);
    up(r.transposition, max_abs(p_plus(a).transpose() - p_minus(a)));
    up(r.plus_minus, max_abs(p_plus(a) * p_minus(a) - dot(a, a) * Mat4::Identity()) / std::max(1.0, a.squaredNorm()));
    RVec3 xi(unit_draw(g), unit_draw(g), unit_draw(g));
    Mat8 p = p_mix(to_c(xi));
    up(r.hermitian, max_abs(p - p.adjoint()));
  }
  return r;
}

}  // namespace mxip
