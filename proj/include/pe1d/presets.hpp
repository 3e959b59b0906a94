#pragma once

#include <string>
#include <vector>

#include "pe1d/tensor.hpp"

namespace pe1d {

struct NamedLayer {
  std::string name;
  ConvLayerSpec spec;
};

struct WorkloadPreset {
  std::string name;
  std::vector<NamedLayer> layers;
};

/// The 13 convolution layers of VGG-16, all 3x3, stride 1, pad 1.
inline WorkloadPreset vgg16(Precision precision = Precision::fp32) {
  struct Row {
    const char* name;
    std::size_t hw, c_in, c_out;
  };
  static constexpr Row rows[] = {
      {"conv1_1", 224, 3, 64},    {"conv1_2", 224, 64, 64},   {"conv2_1", 112, 64, 128},
      {"conv2_2", 112, 128, 128}, {"conv3_1", 56, 128, 256},  {"conv3_2", 56, 256, 256},
      {"conv3_3", 56, 256, 256},  {"conv4_1", 28, 256, 512},  {"conv4_2", 28, 512, 512},
      {"conv4_3", 28, 512, 512},  {"conv5_1", 14, 512, 512},  {"conv5_2", 14, 512, 512},
      {"conv5_3", 14, 512, 512},
  };
  WorkloadPreset p{"vgg16", {}};
  for (const auto& r : rows) {
    ConvLayerSpec s;
    s.c_in = r.c_in;
    s.c_out = r.c_out;
    s.h_in = s.w_in = r.hw;
    s.k_y = s.k_x = 3;
    s.stride = 1;
    s.pad = 1;
    s.precision = precision;
    p.layers.push_back({r.name, s});
  }
  return p;
}

/// Divides channel counts by `factor` (rounding up) to make simulation cheap.
inline ConvLayerSpec scale_channels(ConvLayerSpec s, std::size_t factor) {
  if (factor <= 1) return s;
  s.c_in = (s.c_in + factor - 1) / factor;
  s.c_out = (s.c_out + factor - 1) / factor;
  return s;
}

}  // namespace pe1d
