#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "utv/fft.hpp"
#include "utv/image.hpp"

// Adaptive anisotropic TV minimisation by unrolled ADMM:
//
//   minimise_x  1/2 ||x - y||^2 + ||M o (D x)||_1,   D = [Dx; Dy]
//
// with circular forward differences, so that (I + rho D^T D) is diagonal in
// the DFT basis and every x-step is an exact closed-form solve.

namespace utv {

inline constexpr double kRhoFloor = 1e-6;

enum class RhoMode { Constant, Geometric };

inline RhoMode parse_rho_mode(std::string_view name) {
  if (name == "constant") return RhoMode::Constant;
  if (name == "geometric") return RhoMode::Geometric;
  throw InvalidArgument("invalid rho mode '" + std::string(name) +
                        "' (expected constant or geometric)");
}

/// Per-iteration penalty list: rho0 for every k, or rho0 * factor^(k-1).
/// Entries are floored at kRhoFloor.
inline std::vector<double> rho_schedule(double rho0, std::size_t iterations,
                                        RhoMode mode = RhoMode::Constant,
                                        double factor = 1.0) {
  if (!(rho0 > 0.0) || !std::isfinite(rho0))
    throw InvalidArgument("rho0 must be a positive finite number");
  if (iterations == 0) throw InvalidArgument("iteration count must be >= 1");
  if (mode == RhoMode::Geometric && (!(factor > 0.0) || !std::isfinite(factor)))
    throw InvalidArgument("geometric rho factor must be positive");
  std::vector<double> rho(iterations);
  double r = rho0;
  for (std::size_t k = 0; k < iterations; ++k) {
    rho[k] = std::max(r, kRhoFloor);
    if (mode == RhoMode::Geometric) r *= factor;
  }
  return rho;
}

struct SolverConfig {
  std::size_t iterations = 8;
  std::vector<double> rho = rho_schedule(2.0, 8);
  /// Global multiplier on the balancing maps; applied when maps are built.
  double lambda_scale = 1.0;
  /// Keep x_k for every iteration in the solution.
  bool keep_iterates = false;

  static SolverConfig make(std::size_t iterations, double rho0,
                           RhoMode mode = RhoMode::Constant,
                           double factor = 1.0, double lambda_scale = 1.0) {
    SolverConfig cfg;
    cfg.iterations = iterations;
    cfg.rho = rho_schedule(rho0, iterations, mode, factor);
    cfg.lambda_scale = lambda_scale;
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (iterations == 0) throw InvalidArgument("iteration count must be >= 1");
    if (rho.size() != iterations)
      throw InvalidArgument("rho schedule has " + std::to_string(rho.size()) +
                            " entries for " + std::to_string(iterations) +
                            " iterations");
    for (double r : rho)
      if (!std::isfinite(r) || r < kRhoFloor)
        throw InvalidArgument("every rho must be finite and >= 1e-6");
    if (!std::isfinite(lambda_scale) || lambda_scale < 0.0)
      throw InvalidArgument("lambda scale must be a non-negative number");
  }
};

/// Circular forward differences.
inline GradientField grad(const PlanarImage& img) {
  GradientField g(img.extent());
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t i = 0; i < h; ++i) {
      const std::size_t i1 = i + 1 == h ? 0 : i + 1;
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t j1 = j + 1 == w ? 0 : j + 1;
        const double x = img.at(c, i, j);
        g.horizontal.at(c, i, j) = img.at(c, i, j1) - x;
        g.vertical.at(c, i, j) = img.at(c, i1, j) - x;
      }
    }
  return g;
}

/// D^T, the exact adjoint of grad() under the circular boundary.
inline PlanarImage div_adjoint(const GradientField& field) {
  const Extent& e = field.extent();
  require_same_extent(field.vertical.extent(), e, "div_adjoint");
  PlanarImage out(e);
  const std::size_t h = e.height;
  const std::size_t w = e.width;
  for (std::size_t c = 0; c < e.channels; ++c)
    for (std::size_t i = 0; i < h; ++i) {
      const std::size_t im = i == 0 ? h - 1 : i - 1;
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t jm = j == 0 ? w - 1 : j - 1;
        const double dxt = field.horizontal.at(c, i, jm) - field.horizontal.at(c, i, j);
        const double dyt = field.vertical.at(c, im, j) - field.vertical.at(c, i, j);
        out.at(c, i, j) = dxt + dyt;
      }
    }
  return out;
}

/// Eigenvalues of D^T D: |F[Dx]|^2 + |F[Dy]|^2 on the DFT grid.
class TransferSpectrum {
 public:
  TransferSpectrum(std::size_t height, std::size_t width)
      : height_(height), width_(width), values_(height * width) {
    if (height == 0 || width == 0)
      throw InvalidArgument("spectrum dimensions must be positive");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> row_term(height);
    std::vector<double> col_term(width);
    for (std::size_t i = 0; i < height; ++i)
      row_term[i] = 2.0 - 2.0 * std::cos(two_pi * static_cast<double>(i) / height);
    for (std::size_t j = 0; j < width; ++j)
      col_term[j] = 2.0 - 2.0 * std::cos(two_pi * static_cast<double>(j) / width);
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j)
        values_[i * width + j] = col_term[j] + row_term[i];
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double at(std::size_t wi, std::size_t wj) const { return values_[wi * width_ + wj]; }
  std::span<const double> values() const& { return values_; }
  std::span<const double> values() && = delete;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> values_;
};

inline TransferSpectrum transfer_spectrum(std::size_t height, std::size_t width) {
  return TransferSpectrum(height, width);
}

namespace detail {

inline void require_finite(const PlanarImage& img, const char* what) {
  if (!img.all_finite())
    throw NumericError(std::string(what) + " contains non-finite values");
}

inline void require_rho(double rho) {
  if (!std::isfinite(rho) || !(rho > 0.0))
    throw InvalidArgument("rho must be a positive finite number");
}

}  // namespace detail

/// Solves (I + rho D^T D) x = rhs per channel with one forward and one
/// inverse DFT. Holds the plans so repeated solves at one size reuse them.
class FourierSolver {
 public:
  explicit FourierSolver(const TransferSpectrum& spectrum)
      : spectrum_(spectrum), dft_(spectrum.height(), spectrum.width()) {}

  PlanarImage solve(const PlanarImage& rhs, double rho) {
    detail::require_rho(rho);
    if (rhs.height() != spectrum_.height() || rhs.width() != spectrum_.width())
      throw ShapeError("x-update: image " + rhs.extent().str() +
                       " does not match spectrum " +
                       std::to_string(spectrum_.height()) + "x" +
                       std::to_string(spectrum_.width()));
    PlanarImage x(rhs.extent());
    auto buf = dft_.data();
    const auto lambda = spectrum_.values();
    const double norm = 1.0 / static_cast<double>(rhs.plane_size());
    for (std::size_t c = 0; c < rhs.channels(); ++c) {
      const auto src = rhs.plane(c);
      double rhs_max = 0.0;
      for (std::size_t n = 0; n < src.size(); ++n) {
        buf[n] = {src[n], 0.0};
        rhs_max = std::max(rhs_max, std::abs(src[n]));
      }
      dft_.forward();
      for (std::size_t n = 0; n < buf.size(); ++n) buf[n] /= 1.0 + rho * lambda[n];
      dft_.backward();
      auto dst = x.plane(c);
      double imag_max = 0.0;
      for (std::size_t n = 0; n < buf.size(); ++n) {
        dst[n] = buf[n].real() * norm;
        imag_max = std::max(imag_max, std::abs(buf[n].imag() * norm));
      }
      if (imag_max > 1e-9 * rhs_max)
        throw NumericError("x-update left an imaginary residue of " +
                           std::to_string(imag_max));
    }
    return x;
  }

  /// x_{k} = F^-1[ F[y + rho D^T u - D^T z] / (1 + rho Lambda) ].
  PlanarImage update(const PlanarImage& y, const GradientField& u,
                     const GradientField& z, double rho) {
    require_same_extent(u.extent(), y.extent(), "x-update (u)");
    require_same_extent(z.extent(), y.extent(), "x-update (z)");
    detail::require_finite(y, "y");
    detail::require_finite(u.horizontal, "u");
    detail::require_finite(u.vertical, "u");
    detail::require_finite(z.horizontal, "z");
    detail::require_finite(z.vertical, "z");
    detail::require_rho(rho);
    PlanarImage rhs = y;
    const PlanarImage dtu = div_adjoint(u);
    const PlanarImage dtz = div_adjoint(z);
    auto r = rhs.values();
    const auto a = dtu.values();
    const auto b = dtz.values();
    for (std::size_t n = 0; n < r.size(); ++n) r[n] += rho * a[n] - b[n];
    return solve(rhs, rho);
  }

 private:
  TransferSpectrum spectrum_;
  Dft2d dft_;
};

inline PlanarImage x_update(const PlanarImage& y, const GradientField& u,
                            const GradientField& z, double rho,
                            const TransferSpectrum& spectrum) {
  FourierSolver solver(spectrum);
  return solver.update(y, u, z, rho);
}

inline double soft_threshold(double v, double t) {
  const double mag = std::abs(v) - t;
  if (!(mag > 0.0)) return 0.0;
  return v < 0.0 ? -mag : mag;
}

/// Component-wise sign(v) * max(|v| - M/rho, 0); one map for both components.
inline GradientField shrink(const GradientField& v, const MapSlice& threshold,
                            double rho) {
  detail::require_rho(rho);
  require_same_extent(threshold.extent, v.extent(), "shrink");
  GradientField u(v.extent());
  const double inv_rho = 1.0 / rho;
  const auto& e = v.extent();
  for (std::size_t c = 0; c < e.channels; ++c) {
    const auto m = threshold.plane(c);
    const auto vh = v.horizontal.plane(c);
    const auto vv = v.vertical.plane(c);
    auto uh = u.horizontal.plane(c);
    auto uv = u.vertical.plane(c);
    for (std::size_t n = 0; n < m.size(); ++n) {
      if (!(m[n] >= 0.0f))
        throw InvalidArgument("shrink threshold must be non-negative");
      const double t = static_cast<double>(m[n]) * inv_rho;
      uh[n] = soft_threshold(vh[n], t);
      uv[n] = soft_threshold(vv[n], t);
    }
  }
  return u;
}

/// z - rho (u - Dx).
inline GradientField z_update(const GradientField& z, const GradientField& u,
                              const GradientField& gx, double rho) {
  require_same_extent(u.extent(), z.extent(), "z-update (u)");
  require_same_extent(gx.extent(), z.extent(), "z-update (Dx)");
  GradientField out = z;
  auto update = [rho](std::span<double> dst, std::span<const double> uu,
                      std::span<const double> g) {
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] -= rho * (uu[n] - g[n]);
  };
  update(out.horizontal.values(), u.horizontal.values(), gx.horizontal.values());
  update(out.vertical.values(), u.vertical.values(), gx.vertical.values());
  return out;
}

/// 1/2 ||x - y||^2 + sum M (|Dx_h| + |Dx_v|), summed over channels.
inline double tv_objective(const PlanarImage& x, const PlanarImage& y,
                           const MapSlice& map) {
  require_same_extent(y.extent(), x.extent(), "objective");
  require_same_extent(map.extent, x.extent(), "objective (map)");
  const GradientField g = grad(x);
  double fidelity = 0.0;
  const auto xv = x.values();
  const auto yv = y.values();
  for (std::size_t n = 0; n < xv.size(); ++n) {
    const double d = xv[n] - yv[n];
    fidelity += d * d;
  }
  double tv = 0.0;
  const auto gh = g.horizontal.values();
  const auto gv = g.vertical.values();
  for (std::size_t n = 0; n < gh.size(); ++n)
    tv += static_cast<double>(map.data[n]) * (std::abs(gh[n]) + std::abs(gv[n]));
  return 0.5 * fidelity + tv;
}

/// ||u - gx||_2 over both components and all channels.
inline double primal_residual(const GradientField& u, const GradientField& gx) {
  require_same_extent(gx.extent(), u.extent(), "primal residual");
  double s = 0.0;
  auto acc = [&s](std::span<const double> a, std::span<const double> b) {
    for (std::size_t n = 0; n < a.size(); ++n) {
      const double d = a[n] - b[n];
      s += d * d;
    }
  };
  acc(u.horizontal.values(), gx.horizontal.values());
  acc(u.vertical.values(), gx.vertical.values());
  return std::sqrt(s);
}

struct AdmmState {
  PlanarImage x;
  GradientField u;
  GradientField z;
  std::size_t k = 0;
};

/// x0 = y, u0 = D x0, z0 = 0.
inline AdmmState initial_state(const PlanarImage& y) {
  return {y, grad(y), GradientField(y.extent(), 0.0), 0};
}

struct IterationRecord {
  std::size_t k;
  double objective;
  double primal_residual;
};

struct TvSolution {
  PlanarImage smooth;
  std::vector<IterationRecord> trace;
  std::vector<PlanarImage> iterates;  ///< x_1..x_K when keep_iterates is set
};

/// Runs cfg.iterations unrolled ADMM steps; iteration k uses maps slice k
/// (or the single slice) and rho_k. Returns y_s = x_K with diagnostics.
inline TvSolution solve_tv(const PlanarImage& y, const NoiseMapStack& maps,
                           const SolverConfig& cfg) {
  cfg.validate();
  require_same_extent(maps.extent(), y.extent(), "solve_tv maps");
  maps.check_broadcastable(cfg.iterations);
  detail::require_finite(y, "input image");

  FourierSolver solver(transfer_spectrum(y.height(), y.width()));
  AdmmState s = initial_state(y);
  TvSolution out;
  out.trace.reserve(cfg.iterations);

  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const double rho = cfg.rho[k];
    const MapSlice m = maps.slice_for_iteration(k);

    s.x = solver.update(y, s.u, s.z, rho);
    const GradientField gx = grad(s.x);

    // v = D x_k + z_{k-1} / rho_k
    GradientField v = gx;
    const double inv_rho = 1.0 / rho;
    auto add_scaled = [inv_rho](std::span<double> dst, std::span<const double> src) {
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += inv_rho * src[n];
    };
    add_scaled(v.horizontal.values(), s.z.horizontal.values());
    add_scaled(v.vertical.values(), s.z.vertical.values());

    s.u = shrink(v, m, rho);
    s.z = z_update(s.z, s.u, gx, rho);
    s.k = k + 1;

    out.trace.push_back({s.k, tv_objective(s.x, y, m), primal_residual(s.u, gx)});
    if (cfg.keep_iterates) out.iterates.push_back(s.x);
  }
  out.smooth = std::move(s.x);
  return out;
}

}  // namespace utv
