#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "utv/image.hpp"

namespace utv {

/// Difference-of-Laplacians stencil; its entries sum to zero and it is
/// symmetric under both flips, so correlation and convolution agree.
inline constexpr std::array<std::array<int, 3>, 3> kNoiseKernel{{
    {1, -2, 1},
    {-2, 4, -2},
    {1, -2, 1},
}};

/// Per-channel Gaussian noise sigma estimate from the mean absolute
/// response of kNoiseKernel over the (h-2)(w-2) interior positions:
///
///   eps_c = sqrt(pi/2) / (6 (w-2)(h-2)) * sum |(y_c * N)(i,j)|
inline GlobalNoiseVariation estimate_global_noise(const PlanarImage& img) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  if (h < 3 || w < 3)
    throw InvalidArgument("noise estimation needs at least 3x3 pixels, got " +
                          std::to_string(w) + "x" + std::to_string(h));
  const double scale = std::sqrt(std::numbers::pi / 2.0) /
                       (6.0 * static_cast<double>(w - 2) * static_cast<double>(h - 2));
  GlobalNoiseVariation eps;
  eps.per_channel.resize(img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < h; ++i)
      for (std::size_t j = 1; j + 1 < w; ++j) {
        double r = 0.0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            r += kNoiseKernel[di + 1][dj + 1] * img.at(c, i + di, j + dj);
        sum += std::abs(r);
      }
    eps.per_channel[c] = scale * sum;
  }
  return eps;
}

namespace detail {

inline void check_lambda_scale(double lambda_scale) {
  if (!std::isfinite(lambda_scale) || lambda_scale < 0.0)
    throw InvalidArgument("lambda scale must be a non-negative number");
}

inline void check_iterations(std::size_t iterations) {
  if (iterations == 0) throw InvalidArgument("iteration count must be >= 1");
}

}  // namespace detail

/// M_k = lambda_scale * A(R'_k + eps), where A keeps positive entries and
/// replaces the rest with eps_c. Single-slice residuals are broadcast.
inline NoiseMapStack assemble_maps(const GlobalNoiseVariation& eps,
                                   const NoiseMapStack& residual,
                                   std::size_t iterations, double lambda_scale) {
  detail::check_iterations(iterations);
  detail::check_lambda_scale(lambda_scale);
  const Extent& e = residual.extent();
  if (eps.channels() != e.channels)
    throw ShapeError("residual has " + std::to_string(e.channels) +
                     " channels but the noise estimate has " +
                     std::to_string(eps.channels()));
  residual.check_broadcastable(iterations);

  NoiseMapStack out(iterations, e, MapKind::Activated);
  for (std::size_t k = 0; k < iterations; ++k) {
    const std::size_t src_k = residual.iterations() == 1 ? 0 : k;
    for (std::size_t c = 0; c < e.channels; ++c) {
      const double ec = eps[c];
      const auto r = residual.plane(src_k, c);
      auto m = out.plane(k, c);
      for (std::size_t n = 0; n < r.size(); ++n) {
        const double shifted = static_cast<double>(r[n]) + ec;
        const double activated = shifted > 0.0 ? shifted : ec;
        m[n] = static_cast<float>(lambda_scale * activated);
      }
    }
  }
  return out;
}

/// Residual-free case: every pixel of channel c holds lambda_scale * eps_c.
inline NoiseMapStack assemble_maps(const GlobalNoiseVariation& eps,
                                   std::size_t height, std::size_t width,
                                   std::size_t iterations, double lambda_scale) {
  const NoiseMapStack zero(1, {eps.channels(), height, width}, MapKind::Residual);
  return assemble_maps(eps, zero, iterations, lambda_scale);
}

/// Maps for solving `img`: estimated eps, optionally corrected by an external
/// residual stack, or an external activated stack used as-is (scaled).
inline NoiseMapStack build_maps(const PlanarImage& img,
                                const NoiseMapStack* external,
                                std::size_t iterations, double lambda_scale) {
  detail::check_iterations(iterations);
  detail::check_lambda_scale(lambda_scale);
  if (external) {
    if (external->extent() != img.extent())
      throw ShapeError("map stack shape " + external->extent().str() +
                       " does not match image shape " + img.extent().str());
    external->check_broadcastable(iterations);
  }
  if (external && external->kind() == MapKind::Activated) {
    NoiseMapStack out(iterations, external->extent(), MapKind::Activated);
    for (std::size_t k = 0; k < iterations; ++k) {
      const MapSlice src = external->slice_for_iteration(k);
      for (std::size_t c = 0; c < src.extent.channels; ++c) {
        const auto s = src.plane(c);
        auto d = out.plane(k, c);
        for (std::size_t n = 0; n < s.size(); ++n)
          d[n] = lambda_scale == 1.0
                     ? s[n]
                     : static_cast<float>(lambda_scale * static_cast<double>(s[n]));
      }
    }
    return out;
  }
  const GlobalNoiseVariation eps = estimate_global_noise(img);
  if (external) return assemble_maps(eps, *external, iterations, lambda_scale);
  return assemble_maps(eps, img.height(), img.width(), iterations, lambda_scale);
}

}  // namespace utv
