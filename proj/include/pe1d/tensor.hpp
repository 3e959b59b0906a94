#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pe1d {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PackingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Layer shape
// ---------------------------------------------------------------------------

enum class Precision { fp32, int8x4 };

inline std::string_view to_string(Precision p) {
  return p == Precision::fp32 ? "fp32" : "int8x4";
}

inline Precision parse_precision(std::string_view s) {
  if (s == "fp32") return Precision::fp32;
  if (s == "int8x4" || s == "int8") return Precision::int8x4;
  throw std::invalid_argument("unknown precision '" + std::string(s) + "'");
}

/// Number of input channels carried by one streamed word.
constexpr std::size_t lanes_of(Precision p) { return p == Precision::fp32 ? 1 : 4; }

struct ConvLayerSpec {
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t h_in = 1;
  std::size_t w_in = 1;
  std::size_t k_y = 1;
  std::size_t k_x = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  Precision precision = Precision::fp32;

  std::size_t padded_h() const { return h_in + 2 * pad; }
  std::size_t padded_w() const { return w_in + 2 * pad; }
  std::size_t h_out() const { return (padded_h() - k_y) / stride + 1; }
  std::size_t w_out() const { return (padded_w() - k_x) / stride + 1; }

  /// Input channels after zero-padding to the 4-lane vector width (int8x4 only).
  std::size_t c_in_padded() const {
    const auto l = lanes_of(precision);
    return (c_in + l - 1) / l * l;
  }
  /// Channel steps streamed through the core: c_in for fp32, c_in/4 groups for int8x4.
  std::size_t channel_steps() const { return c_in_padded() / lanes_of(precision); }

  /// Scalar multiply-accumulates of the layer (unpadded channels).
  std::uint64_t macs() const {
    return std::uint64_t{c_in} * c_out * h_out() * w_out() * k_y * k_x;
  }

  void validate() const {
    if (c_in == 0 || c_out == 0 || h_in == 0 || w_in == 0 || k_y == 0 || k_x == 0)
      throw ShapeError("layer extents must be >= 1");
    if (stride != 1 && stride != 2) throw ShapeError("stride must be 1 or 2");
    if (padded_h() < k_y || padded_w() < k_x)
      throw ShapeError("kernel larger than padded input");
    if ((padded_h() - k_y) % stride != 0 || (padded_w() - k_x) % stride != 0)
      throw ShapeError("output extent is not an integer for this stride");
  }

  bool operator==(const ConvLayerSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Dense containers
// ---------------------------------------------------------------------------

enum class FeatureLayout { CHW, WHC };
enum class WeightLayout { KyKxCiCo, CiKyKxCo };

inline std::string_view to_string(FeatureLayout l) { return l == FeatureLayout::CHW ? "CHW" : "WHC"; }
inline std::string_view to_string(WeightLayout l) {
  return l == WeightLayout::KyKxCiCo ? "KyKxCiCo" : "CiKyKxCo";
}

namespace detail {
template <std::size_t N>
std::size_t volume(const std::array<std::size_t, N>& d) {
  return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>{});
}
}  // namespace detail

/// Three-dimensional feature map. `dims` are listed in storage order of the
/// layout: (c, h, w) for CHW and (w, h, c) for WHC.
template <class T>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  Tensor3(FeatureLayout layout, std::array<std::size_t, 3> dims, T fill = T{})
      : layout_(layout), dims_(dims), data_(detail::volume(dims), fill) {}
  Tensor3(FeatureLayout layout, std::array<std::size_t, 3> dims, std::vector<T> data)
      : layout_(layout), dims_(dims), data_(std::move(data)) {
    if (data_.size() != detail::volume(dims_))
      throw ShapeError("tensor data length does not match extents");
  }

  FeatureLayout layout() const { return layout_; }
  const std::array<std::size_t, 3>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return (i0 * dims_[1] + i1) * dims_[2] + i2;
  }
  T& operator()(std::size_t i0, std::size_t i1, std::size_t i2) { return data_[index(i0, i1, i2)]; }
  const T& operator()(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return data_[index(i0, i1, i2)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  FeatureLayout layout_ = FeatureLayout::CHW;
  std::array<std::size_t, 3> dims_{0, 0, 0};
  std::vector<T> data_;
};

/// Four-dimensional weight tensor; `dims` in storage order of the layout.
template <class T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  Tensor4(WeightLayout layout, std::array<std::size_t, 4> dims, T fill = T{})
      : layout_(layout), dims_(dims), data_(detail::volume(dims), fill) {}
  Tensor4(WeightLayout layout, std::array<std::size_t, 4> dims, std::vector<T> data)
      : layout_(layout), dims_(dims), data_(std::move(data)) {
    if (data_.size() != detail::volume(dims_))
      throw ShapeError("tensor data length does not match extents");
  }

  WeightLayout layout() const { return layout_; }
  const std::array<std::size_t, 4>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
    return ((i0 * dims_[1] + i1) * dims_[2] + i2) * dims_[3] + i3;
  }
  T& operator()(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
    return data_[index(i0, i1, i2, i3)];
  }
  const T& operator()(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
    return data_[index(i0, i1, i2, i3)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  WeightLayout layout_ = WeightLayout::CiKyKxCo;
  std::array<std::size_t, 4> dims_{0, 0, 0, 0};
  std::vector<T> data_;
};

/// Four int8 lanes travelling as one 32-bit word.
using Int8Vec = std::array<std::int8_t, 4>;

/// Input feature map with groups of four channels packed into one vector per pixel.
/// Lane l of group g at (y, x) holds channel 4g+l.
struct PackedInput {
  std::size_t groups = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Int8Vec> data;

  std::size_t index(std::size_t g, std::size_t y, std::size_t x) const {
    return (g * height + y) * width + x;
  }
  const Int8Vec& operator()(std::size_t g, std::size_t y, std::size_t x) const {
    return data[index(g, y, x)];
  }
  Int8Vec& operator()(std::size_t g, std::size_t y, std::size_t x) { return data[index(g, y, x)]; }
};

}  // namespace pe1d
