#include <gtest/gtest.h>

#include <cmath>

#include "pe1d/analytics.hpp"
#include "pe1d/presets.hpp"

using namespace pe1d;

namespace {

CoreConfig core_of(std::size_t pes, Precision p = Precision::fp32) {
  CoreConfig c;
  c.num_pes = pes;
  c.precision = p;
  return c;
}

ConvLayerSpec square(std::size_t hw, std::size_t ci, std::size_t co, Precision p = Precision::fp32) {
  ConvLayerSpec s;
  s.c_in = ci;
  s.c_out = co;
  s.h_in = s.w_in = hw;
  s.k_y = s.k_x = 3;
  s.pad = 1;
  s.precision = p;
  return s;
}

}  // namespace

TEST(Analytics, SpatialUtilization) {
  EXPECT_DOUBLE_EQ(spatial_utilization(64, 64), 1.0);
  EXPECT_DOUBLE_EQ(spatial_utilization(1 * 64, 64), 1.0);
  EXPECT_DOUBLE_EQ(spatial_utilization(36, 64), 0.5625);
  EXPECT_THROW(spatial_utilization(65, 64), std::invalid_argument);
}

TEST(Analytics, TilingLossFor56On625) {
  const auto r = total_utilization(square(56, 256, 256, Precision::int8x4), core_of(625, Precision::int8x4));
  EXPECT_EQ(r.tiles, 6u);
  EXPECT_NEAR(r.u_spatial, 3136.0 / 3750.0, 1e-12);
  EXPECT_NEAR(r.u_spatial, 0.836, 0.001);
}

TEST(Analytics, TemporalUtilizationExamples) {
  // 25x25 tile, 27x27 window, 256 -> 256: 589824 / max(186624, 160000) capped at 1.
  ConvLayerSpec t = square(25, 256, 256);
  t.pad = 0;
  t.h_in = t.w_in = 27;
  EXPECT_DOUBLE_EQ(temporal_utilization(t), 1.0);

  // Three input channels: output writeback dominates.
  const auto c11 = square(224, 3, 64);
  const double expect = 3.0 * 9 * 64 / (224.0 * 224 * 64);
  EXPECT_NEAR(temporal_utilization(c11), expect, 1e-15);
  EXPECT_LT(temporal_utilization(c11), 0.001);

  ConvLayerSpec one;
  EXPECT_DOUBLE_EQ(temporal_utilization(one), 1.0);
}

TEST(Analytics, WidthSquaredDiffersOnlyForNonSquareWindows) {
  auto s = square(20, 4, 2);
  EXPECT_DOUBLE_EQ(temporal_utilization(s, {true}), temporal_utilization(s, {false}));
  s.h_in = 10;
  EXPECT_NE(temporal_utilization(s, {true}), temporal_utilization(s, {false}));
}

TEST(Analytics, MonotoneInInputChannelsWhenOutputBound) {
  double prev = 0.0;
  for (std::size_t ci = 1; ci <= 64; ci *= 2) {
    const auto r = total_utilization(square(32, ci, 16), core_of(64));
    EXPECT_GE(r.u_temporal, prev);
    prev = r.u_temporal;
  }
}

TEST(Analytics, TotalIsProductAndBounded) {
  for (const auto& l : vgg16().layers)
    for (std::size_t pes : {16u, 64u, 256u, 324u}) {
      const auto r = total_utilization(l.spec, core_of(pes));
      EXPECT_NEAR(r.u_total, r.u_spatial * r.u_temporal, 1e-15);
      EXPECT_LE(r.u_total, std::min(r.u_spatial, r.u_temporal) + 1e-15);
      EXPECT_GT(r.u_total, 0.0);
      EXPECT_LE(r.u_spatial, 1.0);
      EXPECT_LE(r.u_temporal, 1.0);
    }
}

TEST(Analytics, BindingConstraint) {
  EXPECT_EQ(total_utilization(square(224, 3, 64), core_of(64)).binding_constraint, BindingConstraint::output_bw);
  EXPECT_EQ(total_utilization(square(28, 512, 512), core_of(16)).binding_constraint, BindingConstraint::compute);
  EXPECT_EQ(total_utilization(square(14, 512, 512), core_of(324)).binding_constraint, BindingConstraint::spatial);
  EXPECT_EQ(to_string(BindingConstraint::input_bw), "input_bw");
}

TEST(Analytics, PredictCyclesSingleTileForms) {
  // One tile, compute bound: first window load + C_i * K^2 * C_o + drain + latency.
  ConvLayerSpec s = square(4, 8, 16);
  const auto core = core_of(16);
  const double e = 6 * 6, k = 9 * 16, drain = 16 * 16;
  EXPECT_EQ(predict_cycles(s, core), std::uint64_t(e + 8 * k + drain + 16));

  // One tile, input bound.
  s.c_out = 2;
  EXPECT_EQ(predict_cycles(s, core), std::uint64_t(e + 8 * e + 16 * 2 + 16));
}

TEST(Analytics, PeakRows) {
  EXPECT_DOUBLE_EQ(peak_performance(core_of(16)), 8.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(64)), 32.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(256)), 128.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(324)), 162.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(256, Precision::int8x4)), 512.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(324, Precision::int8x4)), 648.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(400, Precision::int8x4)), 800.0);
  EXPECT_DOUBLE_EQ(peak_performance(core_of(625, Precision::int8x4)), 1250.0);
}

TEST(Analytics, WeightBandwidthFor14On625) {
  const auto b = bandwidth_requirement(square(14, 512, 512), core_of(625));
  EXPECT_DOUBLE_EQ(b.weight_gbps, 0.250 * 625 / (14 * 14) * 4);
  EXPECT_EQ(std::lround(b.weight_gbps), 3);
  EXPECT_DOUBLE_EQ(b.cap_gbps, 1.0);
  EXPECT_TRUE(b.weight_bound());
}

TEST(Analytics, WeightDemandWithinCapWhenPlaneFillsCore) {
  const auto b = bandwidth_requirement(square(56, 256, 256), core_of(625));
  EXPECT_LE(b.weight_gbps, b.cap_gbps);
}

TEST(Analytics, FirstLayerOutputDemandExceedsCap) {
  const auto b = bandwidth_requirement(square(224, 3, 64), core_of(256));
  EXPECT_DOUBLE_EQ(b.output_gbps, 0.25 * 256 / 27 * 4);
  EXPECT_TRUE(b.output_bound());
  EXPECT_FALSE(b.input_bound());
}

TEST(Analytics, LayerOpsInBinaryGiga) {
  const auto v = vgg16();
  EXPECT_NEAR(layer_gops_binary(v.layers[0].spec), 0.16, 0.005);
  EXPECT_NEAR(layer_gops_binary(v.layers[1].spec), 3.45, 0.005);
  EXPECT_NEAR(layer_gops_binary(v.layers[2].spec), 1.72, 0.005);
  EXPECT_NEAR(layer_gops_binary(v.layers[12].spec), 0.86, 0.005);
  EXPECT_EQ(v.layers[1].spec.macs(), 1849688064u);
}
