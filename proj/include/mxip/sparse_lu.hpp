#pragma once

#include <umfpack.h>

#include <Eigen/Sparse>
#include <stdexcept>
#include <string>
#include <vector>

#include "algebra8.hpp"

namespace mxip {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;
using CVecX = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

struct FactorizationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// UMFPACK LU of a complex sparse matrix (packed complex storage), keeping the reciprocal condition estimate.
class SparseLU {
 public:
  explicit SparseLU(SpMat A, bool symmetric_pattern = false) : A_(std::move(A)) {
    A_.makeCompressed();
    umfpack_zi_defaults(control_);
    if (symmetric_pattern) {
      control_[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
      control_[UMFPACK_ORDERING] = UMFPACK_ORDERING_METIS;
    }
    const double* ax = reinterpret_cast<const double*>(A_.valuePtr());
    int st = umfpack_zi_symbolic(int(A_.rows()), int(A_.cols()), A_.outerIndexPtr(), A_.innerIndexPtr(), ax, nullptr,
                                 &symbolic_, control_, info_);
    if (st != UMFPACK_OK) throw FactorizationFailed("umfpack symbolic status " + std::to_string(st));
    st = umfpack_zi_numeric(A_.outerIndexPtr(), A_.innerIndexPtr(), ax, nullptr, symbolic_, &numeric_, control_,
                            info_);
    singular_ = st == UMFPACK_WARNING_singular_matrix;
    if (st != UMFPACK_OK && !singular_) throw FactorizationFailed("umfpack numeric status " + std::to_string(st));
    rcond_ = info_[UMFPACK_RCOND];
  }
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;
  ~SparseLU() {
    if (numeric_) umfpack_zi_free_numeric(&numeric_);
    if (symbolic_) umfpack_zi_free_symbolic(&symbolic_);
  }

  double rcond() const { return rcond_; }
  bool singular() const { return singular_; }
  const SpMat& matrix() const { return A_; }

  CVecX solve(const CVecX& b) const {
    CVecX x(b.size());
    double info[UMFPACK_INFO];
    int st = umfpack_zi_solve(UMFPACK_A, A_.outerIndexPtr(), A_.innerIndexPtr(),
                              reinterpret_cast<const double*>(A_.valuePtr()), nullptr,
                              reinterpret_cast<double*>(x.data()), nullptr, reinterpret_cast<const double*>(b.data()),
                              nullptr, numeric_, control_, info);
    if (st != UMFPACK_OK && st != UMFPACK_WARNING_singular_matrix)
      throw FactorizationFailed("umfpack solve status " + std::to_string(st));
    return x;
  }

  // one step of iterative refinement; returns the relative residual after it
  double refine(const CVecX& b, CVecX& x) const {
    CVecX r = b - A_ * x;
    x += solve(r);
    double nb = b.norm();
    return nb > 0.0 ? (b - A_ * x).norm() / nb : (A_ * x).norm();
  }

 private:
  SpMat A_;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  double control_[UMFPACK_CONTROL];
  double info_[UMFPACK_INFO];
  double rcond_ = 0.0;
  bool singular_ = false;
};

}  // namespace mxip
