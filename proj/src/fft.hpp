#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include <fftw3.h>

namespace stosim::detail {

/// Owns an FFTW real-to-complex plan and its buffers for one transform length.
/// Planning is serialized internally; execution on distinct instances may run
/// concurrently.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::span<double> input() { return {in_, n_}; }
  /// n/2 + 1 bins, valid after execute().
  std::span<const std::complex<double>> output() const {
    return {reinterpret_cast<const std::complex<double>*>(out_), n_ / 2 + 1};
  }
  void execute();

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace stosim::detail
