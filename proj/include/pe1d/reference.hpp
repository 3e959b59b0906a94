#pragma once

// Layout transforms, padding, int8 channel packing and the reference
// convolution used to check every simulated result.

#include <algorithm>
#include <cstdint>
#include <string>
#include <type_traits>

#include "pe1d/tensor.hpp"

namespace pe1d {

/// KyKxCiCo -> CiKyKxCo.
template <class T>
Tensor4<T> transform_weights(const Tensor4<T>& w) {
  if (w.layout() != WeightLayout::KyKxCiCo) throw ShapeError("transform_weights expects KyKxCiCo");
  const auto [ky, kx, ci, co] = w.dims();
  Tensor4<T> out(WeightLayout::CiKyKxCo, {ci, ky, kx, co});
  for (std::size_t a = 0; a < ky; ++a)
    for (std::size_t b = 0; b < kx; ++b)
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t o = 0; o < co; ++o) out(c, a, b, o) = w(a, b, c, o);
  return out;
}

/// CiKyKxCo -> KyKxCiCo.
template <class T>
Tensor4<T> inverse_transform_weights(const Tensor4<T>& w) {
  if (w.layout() != WeightLayout::CiKyKxCo)
    throw ShapeError("inverse_transform_weights expects CiKyKxCo");
  const auto [ci, ky, kx, co] = w.dims();
  Tensor4<T> out(WeightLayout::KyKxCiCo, {ky, kx, ci, co});
  for (std::size_t c = 0; c < ci; ++c)
    for (std::size_t a = 0; a < ky; ++a)
      for (std::size_t b = 0; b < kx; ++b)
        for (std::size_t o = 0; o < co; ++o) out(a, b, c, o) = w(c, a, b, o);
  return out;
}

/// WHC -> CHW.
template <class T>
Tensor3<T> transform_features(const Tensor3<T>& t) {
  if (t.layout() != FeatureLayout::WHC) throw ShapeError("transform_features expects WHC");
  const auto [w, h, c] = t.dims();
  Tensor3<T> out(FeatureLayout::CHW, {c, h, w});
  for (std::size_t x = 0; x < w; ++x)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t ch = 0; ch < c; ++ch) out(ch, y, x) = t(x, y, ch);
  return out;
}

/// CHW -> WHC.
template <class T>
Tensor3<T> inverse_transform_features(const Tensor3<T>& t) {
  if (t.layout() != FeatureLayout::CHW) throw ShapeError("inverse_transform_features expects CHW");
  const auto [c, h, w] = t.dims();
  Tensor3<T> out(FeatureLayout::WHC, {w, h, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out(x, y, ch) = t(ch, y, x);
  return out;
}

/// Zero border of `pad` pixels on every side of each channel.
template <class T>
Tensor3<T> pad_input(const Tensor3<T>& t, std::size_t pad) {
  if (t.layout() != FeatureLayout::CHW) throw ShapeError("pad_input expects CHW");
  if (pad == 0) return t;
  const auto [c, h, w] = t.dims();
  Tensor3<T> out(FeatureLayout::CHW, {c, h + 2 * pad, w + 2 * pad}, T{});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out(ch, y + pad, x + pad) = t(ch, y, x);
  return out;
}

/// Appends zero channels so the channel count is a multiple of four.
inline Tensor3<std::int8_t> pad_channels(const Tensor3<std::int8_t>& t) {
  if (t.layout() != FeatureLayout::CHW) throw ShapeError("pad_channels expects CHW");
  const auto [c, h, w] = t.dims();
  const std::size_t cp = (c + 3) / 4 * 4;
  if (cp == c) return t;
  Tensor3<std::int8_t> out(FeatureLayout::CHW, {cp, h, w}, std::int8_t{0});
  std::copy(t.data().begin(), t.data().end(), out.data().begin());
  return out;
}

/// Zero input-channel rows for CiKyKxCo weights up to a multiple of four.
inline Tensor4<std::int8_t> pad_weight_channels(const Tensor4<std::int8_t>& w) {
  if (w.layout() != WeightLayout::CiKyKxCo) throw ShapeError("pad_weight_channels expects CiKyKxCo");
  const auto [ci, ky, kx, co] = w.dims();
  const std::size_t cp = (ci + 3) / 4 * 4;
  if (cp == ci) return w;
  Tensor4<std::int8_t> out(WeightLayout::CiKyKxCo, {cp, ky, kx, co}, std::int8_t{0});
  std::copy(w.data().begin(), w.data().end(), out.data().begin());
  return out;
}

inline PackedInput pack_int8(const Tensor3<std::int8_t>& t) {
  if (t.layout() != FeatureLayout::CHW) throw ShapeError("pack_int8 expects CHW");
  const auto [c, h, w] = t.dims();
  if (c % 4 != 0)
    throw PackingError("pack_int8: channel count " + std::to_string(c) + " is not a multiple of 4");
  PackedInput p{c / 4, h, w, std::vector<Int8Vec>(c / 4 * h * w)};
  for (std::size_t g = 0; g < p.groups; ++g)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t l = 0; l < 4; ++l) p(g, y, x)[l] = t(4 * g + l, y, x);
  return p;
}

inline Tensor3<std::int8_t> unpack_int8(const PackedInput& p) {
  Tensor3<std::int8_t> t(FeatureLayout::CHW, {p.groups * 4, p.height, p.width});
  for (std::size_t g = 0; g < p.groups; ++g)
    for (std::size_t y = 0; y < p.height; ++y)
      for (std::size_t x = 0; x < p.width; ++x)
        for (std::size_t l = 0; l < 4; ++l) t(4 * g + l, y, x) = p(g, y, x)[l];
  return t;
}

namespace detail {

template <class In, class W>
void check_conv_shapes(const Tensor3<In>& input, const Tensor4<W>& weights,
                       const ConvLayerSpec& spec) {
  spec.validate();
  if (input.layout() != FeatureLayout::CHW) throw ShapeError("conv input must be CHW");
  if (weights.layout() != WeightLayout::CiKyKxCo) throw ShapeError("conv weights must be CiKyKxCo");
  const auto& d = input.dims();
  if (d[0] != spec.c_in || d[1] != spec.h_in || d[2] != spec.w_in)
    throw ShapeError("input extents do not match layer");
  const auto& wd = weights.dims();
  if (wd[0] != spec.c_in || wd[1] != spec.k_y || wd[2] != spec.k_x || wd[3] != spec.c_out)
    throw ShapeError("weight extents do not match layer");
}

}  // namespace detail

/// fp32 reference. One running accumulator per output, updated in
/// (c_i, k_y, k_x) order, so results match the core bit for bit.
inline Tensor3<float> conv2d_reference(const Tensor3<float>& input, const Tensor4<float>& weights,
                                       const ConvLayerSpec& spec) {
  detail::check_conv_shapes(input, weights, spec);
  if (spec.precision != Precision::fp32) throw ShapeError("fp32 tensors with int8x4 layer");
  const auto ho = spec.h_out(), wo = spec.w_out();
  const auto s = spec.stride;
  const auto p = static_cast<std::ptrdiff_t>(spec.pad);
  Tensor3<float> out(FeatureLayout::CHW, {spec.c_out, ho, wo});
  for (std::size_t co = 0; co < spec.c_out; ++co)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x) {
        float acc = 0.0f;
        for (std::size_t ci = 0; ci < spec.c_in; ++ci)
          for (std::size_t ky = 0; ky < spec.k_y; ++ky)
            for (std::size_t kx = 0; kx < spec.k_x; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * s + ky) - p;
              const auto ix = static_cast<std::ptrdiff_t>(x * s + kx) - p;
              float v = 0.0f;
              if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(spec.h_in) &&
                  ix < static_cast<std::ptrdiff_t>(spec.w_in))
                v = input(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              const float prod = v * weights(ci, ky, kx, co);
              acc = acc + prod;
            }
        out(co, y, x) = acc;
      }
  return out;
}

/// int8x4 reference: groups of four channels reduced as ((p0+p1)+(p2+p3)) and
/// added to a 32-bit accumulator. c_in must already be a multiple of four.
inline Tensor3<std::int32_t> conv2d_reference(const Tensor3<std::int8_t>& input,
                                              const Tensor4<std::int8_t>& weights,
                                              const ConvLayerSpec& spec) {
  detail::check_conv_shapes(input, weights, spec);
  if (spec.precision != Precision::int8x4) throw ShapeError("int8 tensors with fp32 layer");
  if (spec.c_in % 4 != 0)
    throw PackingError("int8x4 convolution needs c_in divisible by 4; pad channels first");
  const auto ho = spec.h_out(), wo = spec.w_out();
  const auto s = spec.stride;
  const auto p = static_cast<std::ptrdiff_t>(spec.pad);
  Tensor3<std::int32_t> out(FeatureLayout::CHW, {spec.c_out, ho, wo});
  for (std::size_t co = 0; co < spec.c_out; ++co)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x) {
        std::int32_t acc = 0;
        for (std::size_t g = 0; g < spec.c_in / 4; ++g)
          for (std::size_t ky = 0; ky < spec.k_y; ++ky)
            for (std::size_t kx = 0; kx < spec.k_x; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * s + ky) - p;
              const auto ix = static_cast<std::ptrdiff_t>(x * s + kx) - p;
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(spec.h_in) &&
                                  ix < static_cast<std::ptrdiff_t>(spec.w_in);
              std::int32_t lane[4];
              for (std::size_t l = 0; l < 4; ++l) {
                const std::int32_t v =
                    inside ? input(4 * g + l, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : 0;
                lane[l] = v * std::int32_t{weights(4 * g + l, ky, kx, co)};
              }
              acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + acc;
            }
        out(co, y, x) = acc;
      }
  return out;
}

}  // namespace pe1d
