#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "utv/image.hpp"
#include "utv/noise_estimate.hpp"
#include "utv/tv_admm.hpp"

// Classical restoration stage: brighten the TV-smoothed layer with a single
// scalar gain, soft-threshold the detail layer against the mean balancing map,
// and recombine.

namespace utv {

enum class GainMode { Auto, Fixed };

struct EnhanceConfig {
  GainMode gain_mode = GainMode::Auto;
  double fixed_gain = 1.0;
  double target_luma = 0.4;
  double gain_cap = 32.0;
  double detail_alpha = 1.0;

  void validate() const {
    if (!std::isfinite(fixed_gain) || !(fixed_gain > 0.0))
      throw InvalidArgument("gain must be a positive number");
    if (!(target_luma > 0.0 && target_luma <= 1.0))
      throw InvalidArgument("target luma must lie in (0, 1]");
    if (!std::isfinite(gain_cap) || !(gain_cap >= 1.0))
      throw InvalidArgument("gain cap must be >= 1");
    if (!std::isfinite(detail_alpha) || !(detail_alpha >= 0.0))
      throw InvalidArgument("detail alpha must be non-negative");
  }
};

/// y_d = y - y_s.
inline PlanarImage decompose(const PlanarImage& y, const PlanarImage& smooth) {
  require_same_extent(smooth.extent(), y.extent(), "decompose");
  PlanarImage detail = y;
  auto d = detail.values();
  const auto s = smooth.values();
  for (std::size_t n = 0; n < d.size(); ++n) d[n] -= s[n];
  return detail;
}

/// Rec. 709 luma mean for RGB, plain mean otherwise.
inline double mean_luminance(const PlanarImage& img) {
  const std::size_t n = img.plane_size();
  double sum = 0.0;
  if (img.channels() == 3) {
    const auto r = img.plane(0);
    const auto g = img.plane(1);
    const auto b = img.plane(2);
    for (std::size_t p = 0; p < n; ++p)
      sum += 0.2126 * r[p] + 0.7152 * g[p] + 0.0722 * b[p];
    return sum / static_cast<double>(n);
  }
  for (double v : img.values()) sum += v;
  return sum / static_cast<double>(img.values().size());
}

struct GainResult {
  PlanarImage gained;
  double gain;
};

/// Auto mode: gain = clamp(target / mean_luminance, 1, cap); cap when the
/// mean luminance is not positive. Output is unclamped.
inline GainResult luminance_gain(const PlanarImage& smooth, const EnhanceConfig& cfg) {
  cfg.validate();
  double gain = cfg.fixed_gain;
  if (cfg.gain_mode == GainMode::Auto) {
    const double luma = mean_luminance(smooth);
    gain = luma > 0.0 ? std::clamp(cfg.target_luma / luma, 1.0, cfg.gain_cap)
                      : cfg.gain_cap;
  }
  PlanarImage out = smooth;
  for (double& v : out.values()) v *= gain;
  return {std::move(out), gain};
}

/// Per-pixel, per-channel mean over the stack's iterations.
inline PlanarImage average_map(const NoiseMapStack& maps) {
  PlanarImage avg(maps.extent());
  for (std::size_t k = 0; k < maps.iterations(); ++k)
    for (std::size_t c = 0; c < avg.channels(); ++c) {
      const auto src = maps.plane(k, c);
      auto dst = avg.plane(c);
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += src[n];
    }
  const double inv = 1.0 / static_cast<double>(maps.iterations());
  for (double& v : avg.values()) v *= inv;
  return avg;
}

inline PlanarImage suppress_detail(const PlanarImage& detail, const NoiseMapStack& maps,
                                   double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw InvalidArgument("detail alpha must be non-negative");
  require_same_extent(maps.extent(), detail.extent(), "suppress_detail");
  const PlanarImage avg = average_map(maps);
  PlanarImage out = detail;
  auto o = out.values();
  const auto m = avg.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = soft_threshold(o[n], alpha * m[n]);
  return out;
}

struct EnhanceResult {
  PlanarImage output;
  PlanarImage smooth;
  PlanarImage detail;
  NoiseMapStack maps;
  std::vector<IterationRecord> trace;
  double gain = 1.0;
};

/// estimate -> assemble -> solve_tv -> decompose -> gain -> suppress ->
/// clamp(gain * y_s + suppressed detail, 0, 1).
inline EnhanceResult enhance_detailed(const PlanarImage& y, const EnhanceConfig& cfg,
                                      const SolverConfig& solver_cfg,
                                      const NoiseMapStack* external_maps = nullptr) {
  cfg.validate();
  solver_cfg.validate();
  EnhanceResult r;
  r.maps = build_maps(y, external_maps, solver_cfg.iterations, solver_cfg.lambda_scale);
  TvSolution tv = solve_tv(y, r.maps, solver_cfg);
  r.smooth = std::move(tv.smooth);
  r.trace = std::move(tv.trace);
  r.detail = decompose(y, r.smooth);
  GainResult g = luminance_gain(r.smooth, cfg);
  r.gain = g.gain;
  const PlanarImage kept = suppress_detail(r.detail, r.maps, cfg.detail_alpha);
  r.output = std::move(g.gained);
  auto o = r.output.values();
  const auto d = kept.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = std::clamp(o[n] + d[n], 0.0, 1.0);
  return r;
}

inline PlanarImage enhance(const PlanarImage& y, const EnhanceConfig& cfg,
                           const SolverConfig& solver_cfg) {
  return enhance_detailed(y, cfg, solver_cfg).output;
}

}  // namespace utv
