#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "utv/image.hpp"

namespace utv {

/// PSNR in dB on a unit peak; identical inputs yield the infinite value.
class Psnr {
 public:
  static Psnr infinite() { return Psnr(true, 0.0); }
  static Psnr finite(double db) { return Psnr(false, db); }

  bool is_infinite() const { return infinite_; }
  /// Only meaningful when !is_infinite().
  double db() const { return db_; }

  friend bool operator==(const Psnr&, const Psnr&) = default;

 private:
  Psnr(bool inf, double db) : infinite_(inf), db_(db) {}
  bool infinite_;
  double db_;
};

inline double mean_squared_error(const PlanarImage& a, const PlanarImage& b) {
  require_same_extent(b.extent(), a.extent(), "mse");
  const auto av = a.values();
  const auto bv = b.values();
  double s = 0.0;
  for (std::size_t n = 0; n < av.size(); ++n) {
    const double d = av[n] - bv[n];
    s += d * d;
  }
  return s / static_cast<double>(av.size());
}

inline Psnr psnr(const PlanarImage& a, const PlanarImage& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return Psnr::infinite();
  return Psnr::finite(10.0 * std::log10(1.0 / mse));
}

struct SsimParams {
  static constexpr int kWindow = 11;
  static constexpr double kSigma = 1.5;
  static constexpr double kK1 = 0.01;
  static constexpr double kK2 = 0.03;
  static constexpr double kRange = 1.0;
};

namespace detail {

inline std::array<double, SsimParams::kWindow * SsimParams::kWindow> ssim_window() {
  constexpr int n = SsimParams::kWindow;
  constexpr int half = n / 2;
  std::array<double, n * n> w{};
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double di = i - half;
      const double dj = j - half;
      w[i * n + j] = std::exp(-(di * di + dj * dj) /
                              (2.0 * SsimParams::kSigma * SsimParams::kSigma));
      total += w[i * n + j];
    }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace detail

/// Mean SSIM over all valid 11x11 Gaussian-window positions (sigma 1.5,
/// K1 0.01, K2 0.03, L 1), averaged over channels.
///
/// The expression is written symmetrically in a and b so that ssim(a, b) and
/// ssim(b, a) agree bit-for-bit, and ssim(a, a) evaluates to exactly 1.
inline double ssim(const PlanarImage& a, const PlanarImage& b) {
  require_same_extent(b.extent(), a.extent(), "ssim");
  constexpr int n = SsimParams::kWindow;
  if (a.height() < static_cast<std::size_t>(n) || a.width() < static_cast<std::size_t>(n))
    throw InvalidArgument("ssim needs images of at least 11x11 pixels, got " +
                          std::to_string(a.width()) + "x" + std::to_string(a.height()));
  const auto win = detail::ssim_window();
  constexpr double c1 = (SsimParams::kK1 * SsimParams::kRange) * (SsimParams::kK1 * SsimParams::kRange);
  constexpr double c2 = (SsimParams::kK2 * SsimParams::kRange) * (SsimParams::kK2 * SsimParams::kRange);
  const std::size_t out_h = a.height() - n + 1;
  const std::size_t out_w = a.width() - n + 1;

  double channel_sum = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    double map_sum = 0.0;
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        double ma = 0.0, mb = 0.0, eaa = 0.0, ebb = 0.0, eab = 0.0;
        for (int di = 0; di < n; ++di)
          for (int dj = 0; dj < n; ++dj) {
            const double wt = win[di * n + dj];
            const double va = a.at(c, i + di, j + dj);
            const double vb = b.at(c, i + di, j + dj);
            ma += wt * va;
            mb += wt * vb;
            eaa += wt * (va * va);
            ebb += wt * (vb * vb);
            eab += wt * (va * vb);
          }
        const double saa = eaa - ma * ma;
        const double sbb = ebb - mb * mb;
        const double sab = eab - ma * mb;
        const double num = (2.0 * (ma * mb) + c1) * (2.0 * sab + c2);
        const double den = ((ma * ma + mb * mb) + c1) * ((saa + sbb) + c2);
        map_sum += num / den;
      }
    channel_sum += map_sum / static_cast<double>(out_h * out_w);
  }
  return channel_sum / static_cast<double>(a.channels());
}

struct MetricReport {
  Psnr psnr;
  double ssim;
};

inline MetricReport compare(const PlanarImage& a, const PlanarImage& b) {
  return {psnr(a, b), ssim(a, b)};
}

}  // namespace utv
