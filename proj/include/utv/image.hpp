#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace utv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched channel/height/width/iteration counts between paired inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied parameter violates its documented range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a numerically failed solve.
class NumericError : public Error {
 public:
  using Error::Error;
};

struct Extent {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const Extent&, const Extent&) = default;

  std::size_t plane_size() const { return height * width; }

  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
  }
};

/// Multi-channel 2-D image, one row-major plane of doubles per channel.
///
/// Values read from disk are in [0, 1]. Solver intermediates may leave that
/// range; clamping happens only when encoding to an integer format.
class PlanarImage {
 public:
  PlanarImage() = default;

  PlanarImage(std::size_t channels, std::size_t height, std::size_t width,
              double fill = 0.0)
      : extent_{channels, height, width},
        data_(channels * height * width, fill) {
    if (channels == 0 || height == 0 || width == 0)
      throw InvalidArgument("image dimensions must be positive, got " +
                            extent_.str());
  }

  explicit PlanarImage(Extent e, double fill = 0.0)
      : PlanarImage(e.channels, e.height, e.width, fill) {}

  const Extent& extent() const { return extent_; }
  std::size_t channels() const { return extent_.channels; }
  std::size_t height() const { return extent_.height; }
  std::size_t width() const { return extent_.width; }
  std::size_t plane_size() const { return extent_.plane_size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> plane(std::size_t c) & {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<const double> plane(std::size_t c) const& {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * extent_.height + i) * extent_.width + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * extent_.height + i) * extent_.width + j];
  }

  std::span<double> values() & { return data_; }
  std::span<const double> values() const& { return data_; }
  std::span<const double> values() && = delete;
  std::span<const double> plane(std::size_t) && = delete;

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const PlanarImage&, const PlanarImage&) = default;

 private:
  Extent extent_;
  std::vector<double> data_;
};

/// Horizontal and vertical forward-difference planes for every channel.
struct GradientField {
  PlanarImage horizontal;
  PlanarImage vertical;

  GradientField() = default;
  explicit GradientField(Extent e, double fill = 0.0)
      : horizontal(e, fill), vertical(e, fill) {}

  const Extent& extent() const { return horizontal.extent(); }

  friend bool operator==(const GradientField&, const GradientField&) = default;
};

/// Per-channel global noise variation.
struct GlobalNoiseVariation {
  std::vector<double> per_channel;

  std::size_t channels() const { return per_channel.size(); }
  double operator[](std::size_t c) const { return per_channel[c]; }
};

enum class MapKind {
  Residual,   ///< raw residual R', may be negative
  Activated,  ///< balancing map M, every entry >= 0
};

/// Non-owning view of one iteration of a NoiseMapStack.
struct MapSlice {
  Extent extent;
  std::span<const float> data;

  std::span<const float> plane(std::size_t c) const {
    return data.subspan(c * extent.plane_size(), extent.plane_size());
  }
};

/// K per-iteration balancing (or residual) maps, stored as 32-bit floats in
/// [iteration][channel][row][column] order.
class NoiseMapStack {
 public:
  NoiseMapStack() = default;

  NoiseMapStack(std::size_t iterations, Extent extent, MapKind kind,
                float fill = 0.0f)
      : iterations_(iterations),
        extent_(extent),
        kind_(kind),
        data_(iterations * extent.channels * extent.plane_size(), fill) {
    if (iterations == 0 || extent.channels == 0 || extent.height == 0 ||
        extent.width == 0)
      throw InvalidArgument("map stack dimensions must be positive, got " +
                            std::to_string(iterations) + "x" + extent.str());
  }

  std::size_t iterations() const { return iterations_; }
  const Extent& extent() const { return extent_; }
  MapKind kind() const { return kind_; }
  std::size_t slice_size() const {
    return extent_.channels * extent_.plane_size();
  }

  std::span<float> values() & { return data_; }
  std::span<const float> values() const& { return data_; }
  std::span<const float> values() && = delete;
  std::span<const float> plane(std::size_t, std::size_t) && = delete;
  MapSlice slice(std::size_t) && = delete;
  MapSlice slice_for_iteration(std::size_t) && = delete;

  std::span<float> plane(std::size_t k, std::size_t c) & {
    return {data_.data() + k * slice_size() + c * extent_.plane_size(),
            extent_.plane_size()};
  }
  std::span<const float> plane(std::size_t k, std::size_t c) const& {
    return {data_.data() + k * slice_size() + c * extent_.plane_size(),
            extent_.plane_size()};
  }

  MapSlice slice(std::size_t k) const& {
    return {extent_, std::span<const float>(data_).subspan(k * slice_size(),
                                                           slice_size())};
  }

  /// Slice used at solver iteration k (0-based); single-slice stacks broadcast.
  MapSlice slice_for_iteration(std::size_t k) const& {
    return slice(iterations_ == 1 ? 0 : k);
  }

  /// Throws ShapeError unless iterations is 1 or `solver_iterations`.
  void check_broadcastable(std::size_t solver_iterations) const {
    if (iterations_ != 1 && iterations_ != solver_iterations)
      throw ShapeError("map stack has " + std::to_string(iterations_) +
                       " iterations; expected 1 or " +
                       std::to_string(solver_iterations));
  }

  friend bool operator==(const NoiseMapStack&, const NoiseMapStack&) = default;

 private:
  std::size_t iterations_ = 0;
  Extent extent_;
  MapKind kind_ = MapKind::Activated;
  std::vector<float> data_;
};

inline void require_same_extent(const Extent& a, const Extent& b,
                                const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": shape " + a.str() +
                     " does not match " + b.str());
}

}  // namespace utv
