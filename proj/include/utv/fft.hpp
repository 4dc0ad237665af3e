#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <new>
#include <span>

namespace utv {

namespace detail {
// FFTW's planner is not re-entrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place complex 2-D DFT of a fixed height x width, owning its buffer.
///
/// Plans use FFTW_ESTIMATE so the same sizes always produce the same plan and
/// bit-identical results. The inverse is unnormalised, matching FFTW.
class Dft2d {
 public:
  Dft2d(std::size_t height, std::size_t width)
      : height_(height), width_(width) {
    buffer_ = static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * height * width));
    if (!buffer_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int h = static_cast<int>(height);
    const int w = static_cast<int>(width);
    forward_ = fftw_plan_dft_2d(h, w, buffer_, buffer_, FFTW_FORWARD,
                                FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_2d(h, w, buffer_, buffer_, FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
  }

  Dft2d(const Dft2d&) = delete;
  Dft2d& operator=(const Dft2d&) = delete;

  ~Dft2d() {
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(backward_);
    }
    fftw_free(buffer_);
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  std::span<std::complex<double>> data() {
    // fftw_complex is layout-compatible with std::complex<double>.
    return {reinterpret_cast<std::complex<double>*>(buffer_),
            height_ * width_};
  }

  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

 private:
  std::size_t height_;
  std::size_t width_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace utv
