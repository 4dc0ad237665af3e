#pragma once

// Test-only reference computations. Nothing here calls the solver's FFT,
// shrinkage or difference routines; operators are rebuilt from their index
// definitions.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "utv/image.hpp"

namespace utv::oracle {

inline PlanarImage random_image(std::mt19937_64& rng, std::size_t channels, std::size_t h,
                                std::size_t w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  PlanarImage img(channels, h, w);
  for (double& v : img.values()) v = dist(rng);
  return img;
}

inline GradientField random_field(std::mt19937_64& rng, Extent e, double lo = -1.0,
                                  double hi = 1.0) {
  GradientField f(e);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : f.horizontal.values()) v = dist(rng);
  for (double& v : f.vertical.values()) v = dist(rng);
  return f;
}

inline NoiseMapStack constant_maps(Extent e, float m, std::size_t iterations = 1) {
  return NoiseMapStack(iterations, e, MapKind::Activated, m);
}

/// Dense 2N x N circular forward-difference matrix of one h x w plane,
/// rows [horizontal; vertical].
inline Eigen::MatrixXd dense_difference_matrix(std::size_t h, std::size_t w) {
  const std::size_t n = h * w;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2 * n, n);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t p = i * w + j;
      d(p, i * w + (j + 1) % w) += 1.0;
      d(p, p) -= 1.0;
      d(n + p, ((i + 1) % h) * w + j) += 1.0;
      d(n + p, p) -= 1.0;
    }
  return d;
}

/// Solves (I + rho D^T D) x = rhs per channel by dense Cholesky.
inline PlanarImage dense_x_solve(const PlanarImage& rhs, double rho) {
  const std::size_t n = rhs.plane_size();
  const Eigen::MatrixXd d = dense_difference_matrix(rhs.height(), rhs.width());
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + rho * d.transpose() * d;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  PlanarImage out(rhs.extent());
  for (std::size_t c = 0; c < rhs.channels(); ++c) {
    Eigen::VectorXd b(n);
    for (std::size_t k = 0; k < n; ++k) b[k] = rhs.plane(c)[k];
    const Eigen::VectorXd x = llt.solve(b);
    for (std::size_t k = 0; k < n; ++k) out.plane(c)[k] = x[k];
  }
  return out;
}

/// Dense D^T z for one channel, z stacked [horizontal; vertical].
inline PlanarImage dense_adjoint(const GradientField& z) {
  const Extent& e = z.extent();
  const std::size_t n = e.plane_size();
  const Eigen::MatrixXd d = dense_difference_matrix(e.height, e.width);
  PlanarImage out(e);
  for (std::size_t c = 0; c < e.channels; ++c) {
    Eigen::VectorXd v(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = z.horizontal.plane(c)[k];
      v[n + k] = z.vertical.plane(c)[k];
    }
    const Eigen::VectorXd r = d.transpose() * v;
    for (std::size_t k = 0; k < n; ++k) out.plane(c)[k] = r[k];
  }
  return out;
}

/// Minimiser of (rho/2)(x - v)^2 + m|x| over a uniform grid on [lo, hi].
inline double prox_grid_search(double v, double m, double rho, double lo = -2.0,
                               double hi = 2.0, double step = 1e-4) {
  const auto count = static_cast<std::int64_t>(std::llround((hi - lo) / step));
  double best_x = lo;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k <= count; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    const double f = 0.5 * rho * (x - v) * (x - v) + m * std::abs(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  return best_x;
}

/// 1/2||x-y||^2 + m sum_j |x_{(j+1) mod n} - x_j| for a single circular row;
/// the vertical differences of a one-row image are identically zero.
inline double row_objective(const std::vector<double>& x, const std::vector<double>& y,
                            double m) {
  const std::size_t n = x.size();
  double f = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    f += 0.5 * (x[j] - y[j]) * (x[j] - y[j]);
    f += m * std::abs(x[(j + 1) % n] - x[j]);
  }
  return f;
}

/// Best objective reached by diminishing-step subgradient descent on
/// row_objective, started at y. The objective is 1-strongly convex, so the
/// step 1/(k+1) is used; the best iterate is tracked since the method is not
/// monotone.
inline double subgradient_reference(const std::vector<double>& y, double m,
                                    std::size_t steps = 5000) {
  const std::size_t n = y.size();
  std::vector<double> x = y;
  std::vector<double> g(n);
  double best = row_objective(x, y, m);
  auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t j = 0; j < n; ++j) g[j] = x[j] - y[j];
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t j1 = (j + 1) % n;
      const double s = m * sgn(x[j1] - x[j]);
      g[j1] += s;
      g[j] -= s;
    }
    const double step = 1.0 / static_cast<double>(k + 1);
    for (std::size_t j = 0; j < n; ++j) x[j] -= step * g[j];
    best = std::min(best, row_objective(x, y, m));
  }
  return best;
}

/// Direct evaluation of the 3x3 estimator at one interior pixel.
inline double estimator_response(const PlanarImage& img, std::size_t c, std::size_t i,
                                 std::size_t j) {
  static const int k[3][3] = {{1, -2, 1}, {-2, 4, -2}, {1, -2, 1}};
  double r = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r += k[a][b] * img.at(c, i + a - 1, j + b - 1);
  return r;
}

inline double estimator_oracle(const PlanarImage& img, std::size_t c) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) s += std::abs(estimator_response(img, c, i, j));
  return std::sqrt(M_PI / 2.0) * s / (6.0 * (w - 2) * (h - 2));
}

inline PlanarImage checkerboard(std::size_t h, std::size_t w, double lo, double hi) {
  PlanarImage img(1, h, w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) img.at(0, i, j) = ((i + j) % 2 == 0) ? hi : lo;
  return img;
}

inline PlanarImage noisy_constant(std::mt19937_64& rng, std::size_t channels, std::size_t h,
                                  std::size_t w, double base, double sigma) {
  std::normal_distribution<double> noise(0.0, sigma);
  PlanarImage img(channels, h, w, base);
  for (double& v : img.values()) v += noise(rng);
  return img;
}

inline double channel_mean(const PlanarImage& img, std::size_t c) {
  double s = 0.0;
  for (double v : img.plane(c)) s += v;
  return s / static_cast<double>(img.plane_size());
}

inline double max_abs_diff(const PlanarImage& a, const PlanarImage& b) {
  double m = 0.0;
  for (std::size_t n = 0; n < a.values().size(); ++n)
    m = std::max(m, std::abs(a.values()[n] - b.values()[n]));
  return m;
}

}  // namespace utv::oracle
