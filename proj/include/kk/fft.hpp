#pragma once

#include <fftw3.h>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace kk {

using cplx = std::complex<double>;

/// In-place multidimensional complex FFT (unnormalized, FFTW sign conventions).
class Fft {
 public:
  explicit Fft(std::vector<int> dims) : dims_(std::move(dims)) {
    size_ = 1;
    for (int n : dims_) size_ *= static_cast<std::size_t>(n);
    std::vector<cplx> tmp(size_);
    auto* p = reinterpret_cast<fftw_complex*>(tmp.data());
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), p, p, FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), p, p, FFTW_BACKWARD, flags);
    if (!fwd_ || !bwd_) throw std::runtime_error("FFTW plan creation failed");
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  std::size_t size() const { return size_; }
  const std::vector<int>& dims() const { return dims_; }

  void forward(cplx* a) const {
    auto* p = reinterpret_cast<fftw_complex*>(a);
    fftw_execute_dft(fwd_, p, p);
  }
  /// Inverse transform including the 1/N factor.
  void backward(cplx* a) const {
    auto* p = reinterpret_cast<fftw_complex*>(a);
    fftw_execute_dft(bwd_, p, p);
    double s = 1.0 / static_cast<double>(size_);
    for (std::size_t i = 0; i < size_; ++i) a[i] *= s;
  }

 private:
  std::vector<int> dims_;
  std::size_t size_ = 1;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Angular frequency of DFT index j for n samples of period L.
inline double fft_freq(int j, int n, double L) {
  int m = j < (n + 1) / 2 ? j : j - n;
  return 2.0 * std::numbers::pi * m / L;
}

}  // namespace kk
