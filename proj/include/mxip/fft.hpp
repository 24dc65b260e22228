#pragma once

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <vector>

#include "grid.hpp"

namespace mxip {

// In-place 3-D complex FFT on a periodic grid (unnormalized forward, normalized inverse).
class Fft3 {
 public:
  explicit Fft3(const Grid3& g) : n_(g.size()) {
    buf_ = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_));
    fwd_ = fftw_plan_dft_3d(g.n[0], g.n[1], g.n[2], buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_3d(g.n[0], g.n[1], g.n[2], buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Fft3(const Fft3&) = delete;
  Fft3& operator=(const Fft3&) = delete;
  ~Fft3() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  void forward(std::vector<cplx>& f) const { run(fwd_, f, 1.0); }
  void inverse(std::vector<cplx>& f) const { run(bwd_, f, 1.0 / double(n_)); }

 private:
  void run(fftw_plan p, std::vector<cplx>& f, double scale) const {
    std::memcpy(buf_, f.data(), sizeof(fftw_complex) * n_);
    fftw_execute(p);
    const cplx* b = reinterpret_cast<const cplx*>(buf_);
    for (std::size_t i = 0; i < n_; ++i) f[i] = b[i] * scale;
  }
  std::size_t n_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
};

// Angular wavenumber of FFT index i on an axis with n points and spacing h.
inline double wavenumber(int i, int n, double h) {
  int m = i < (n + 1) / 2 ? i : i - n;
  return 2.0 * M_PI * m / (n * h);
}

}  // namespace mxip
