#include <gtest/gtest.h>

#include "pe1d/analytics.hpp"
#include "pe1d/core_sim.hpp"
#include "pe1d/report.hpp"

using namespace pe1d;

namespace {

ConvLayerSpec layer(std::size_t ci, std::size_t co, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
                    std::size_t pad, Precision p = Precision::fp32) {
  ConvLayerSpec s;
  s.c_in = ci;
  s.c_out = co;
  s.h_in = h;
  s.w_in = w;
  s.k_y = s.k_x = k;
  s.stride = stride;
  s.pad = pad;
  s.precision = p;
  return s;
}

CoreConfig core_of(std::size_t pes, Precision p = Precision::fp32) {
  CoreConfig c;
  c.num_pes = pes;
  c.precision = p;
  return c;
}

template <class T>
struct Data {
  Tensor3<T> in;
  Tensor4<T> w;
  Data(const ConvLayerSpec& s, std::uint64_t seed)
      : in(FeatureLayout::CHW, {s.c_in, s.h_in, s.w_in}), w(WeightLayout::CiKyKxCo, {s.c_in, s.k_y, s.k_x, s.c_out}) {
    fill_random(in, seed);
    fill_random(w, seed + 1);
  }
};

}  // namespace

TEST(CoreSim, SingleMacOnOnePe) {
  const auto s = layer(1, 1, 1, 1, 1, 1, 0);
  Tensor3<float> in(FeatureLayout::CHW, {1, 1, 1}, 3.0f);
  Tensor4<float> w(WeightLayout::CiKyKxCo, {1, 1, 1, 1}, 0.5f);
  const auto r = simulate_layer(core_of(1), s, in, w);
  EXPECT_EQ(r.output(0, 0, 0), 1.5f);
  // load the word, one MAC, the commit, one read request, its response
  EXPECT_EQ(r.stats.total_cycles, 5u);
  EXPECT_EQ(r.stats.compute_cycles, 1u);
  EXPECT_EQ(r.stats.macs_executed, 1u);
  EXPECT_TRUE(r.stats.accounting_holds());
}

TEST(CoreSim, RandomLayersBitExactFp32) {
  SplitMix64 rng(101);
  for (int i = 0; i < 40; ++i) {
    const auto c = random_case(rng, Precision::fp32);
    ASSERT_TRUE(check_case(c)) << describe(c);
  }
}

TEST(CoreSim, RandomLayersBitExactInt8) {
  SplitMix64 rng(202);
  for (int i = 0; i < 40; ++i) {
    const auto c = random_case(rng, Precision::int8x4);
    ASSERT_TRUE(check_case(c)) << describe(c);
  }
}

TEST(CoreSim, SingleColumnTilesAndNonSquareKernels) {
  // 9 wide outputs on 4 PEs: P = 2 leaves a one-column right strip.
  auto s = layer(3, 2, 9, 9, 3, 1, 1);
  s.k_x = 2;
  s.pad = 0;
  s.w_in = 10;
  const Data<float> d(s, 9);
  const auto r = simulate_layer(core_of(4), s, d.in, d.w);
  EXPECT_EQ(r.output, conv2d_reference(d.in, d.w, s));
  bool saw_column = false;
  for (const auto& j : r.schedule.jobs) saw_column |= j.tile.width == 1 && j.tile.height > 1;
  EXPECT_TRUE(saw_column);
}

TEST(CoreSim, SimulateTileMatchesLayerSlice) {
  const auto s = layer(2, 3, 8, 8, 3, 1, 1);
  const Data<float> d(s, 4);
  const auto core = core_of(16);
  const auto sch = build_schedule(s, core);
  const auto full = conv2d_reference(d.in, d.w, s);
  const auto padded = pad_input(d.in, s.pad);
  for (const auto& job : sch.jobs) {
    const auto t = simulate_tile(core, job, padded, d.w);
    EXPECT_TRUE(t.stats.accounting_holds());
    EXPECT_EQ(t.stats.active_pes, job.active_pes());
    for (std::size_t co = 0; co < job.co_count; ++co)
      for (std::size_t y = 0; y < job.tile.height; ++y)
        for (std::size_t x = 0; x < job.tile.width; ++x)
          EXPECT_EQ(t.outputs(co, y, x), full(job.co_begin + co, job.tile.origin_y + y, job.tile.origin_x + x));
  }
}

TEST(CoreSim, Int8TileWithPaddedChannels) {
  auto s = layer(4, 2, 6, 6, 3, 1, 1, Precision::int8x4);
  const Data<std::int8_t> d(s, 6);
  const auto core = core_of(9, Precision::int8x4);
  const auto sch = build_schedule(s, core);
  const auto t = simulate_tile(core, sch.jobs[0], pad_input(d.in, 1), d.w);
  const auto full = conv2d_reference(d.in, d.w, s);
  EXPECT_EQ(t.outputs(1, 2, 2), full(1, 2, 2));
  EXPECT_EQ(t.stats.lanes, 4u);
  EXPECT_EQ(t.stats.lane_macs(), 4 * t.stats.macs_executed);
}

TEST(CoreSim, ChannelChunksShareTheCore) {
  auto core = core_of(16);
  core.psum_buffer_entries = 3;
  const auto s = layer(2, 7, 6, 6, 3, 1, 1);
  const Data<float> d(s, 17);
  const auto r = simulate_layer(core, s, d.in, d.w);
  EXPECT_EQ(r.output, conv2d_reference(d.in, d.w, s));
  EXPECT_EQ(r.schedule.jobs.size(), 3u * r.schedule.tile_count);
}

TEST(CoreSim, FiveByFiveRunsSingleBuffered) {
  const auto s = layer(3, 2, 7, 7, 5, 1, 2);
  const Data<float> d(s, 3);
  const auto r = simulate_layer(core_of(16), s, d.in, d.w);
  EXPECT_TRUE(r.stats.single_buffered);
  EXPECT_EQ(r.output, conv2d_reference(d.in, d.w, s));
  EXPECT_GT(r.stats.input_stall_cycles, 0u);
}

TEST(CoreSim, Deterministic) {
  const auto s = layer(3, 4, 10, 10, 3, 1, 1);
  const Data<float> d(s, 5);
  const auto a = simulate_layer(core_of(16), s, d.in, d.w);
  const auto b = simulate_layer(core_of(16), s, d.in, d.w);
  EXPECT_EQ(a.stats, b.stats);
  EXPECT_EQ(a.per_job, b.per_job);
  EXPECT_EQ(a.output, b.output);
}

TEST(CoreSim, ThroughputCeilingAndAccounting) {
  SplitMix64 rng(77);
  for (int i = 0; i < 20; ++i) {
    const auto c = random_case(rng, i % 2 ? Precision::int8x4 : Precision::fp32);
    LayerReport r;
    r.spec = c.spec;
    if (c.spec.precision == Precision::fp32) detail::simulate_one<float, float>(r, c.core, c.seed, false);
    else detail::simulate_one<std::int8_t, std::int32_t>(r, c.core, c.seed, false);
    const auto& st = *r.sim;
    EXPECT_TRUE(st.accounting_holds());
    EXPECT_LE(st.macs_executed, st.active_pes * st.total_cycles);
    EXPECT_LE(st.macs_executed, st.active_pes * st.compute_cycles);
    EXPECT_EQ(st.macs_executed * st.lanes,
              std::uint64_t{c.spec.c_in_padded()} * c.spec.c_out * c.spec.h_out() * c.spec.w_out() * c.spec.k_y *
                  c.spec.k_x);
  }
}

// A 25x25 tile of the 56x56x256 -> 256 layer: 9 * 256 weights per channel
// against a 27 * 27 window, so the input never stalls. Four channels keep it quick.
TEST(CoreSim, LargeTileHasNoInputStalls) {
  const auto s = layer(4, 256, 56, 56, 3, 1, 1);
  const auto core = core_of(625);
  const auto sch = build_schedule(s, core);
  const auto& job = sch.jobs[0];
  ASSERT_EQ(job.tile.height, 25u);
  ASSERT_EQ(job.window_size(), 729u);
  ASSERT_EQ(job.weights_per_step(), 2304u);
  Tensor3<float> in(FeatureLayout::CHW, {4, 58, 58});
  Tensor4<float> w(WeightLayout::CiKyKxCo, {4, 3, 3, 256});
  fill_random(in, 1);
  fill_random(w, 2);
  const auto t = simulate_tile(core, job, in, w);
  EXPECT_EQ(t.stats.input_stall_cycles, 0u);
  EXPECT_EQ(t.stats.compute_cycles, 4u * 2304u);
  const auto terms = job_terms(job);
  EXPECT_GE(terms.compute, terms.input);
}

// The first VGG layer (three channels) spends most of its time draining outputs.
TEST(CoreSim, FirstVggLayerIsOutputBound) {
  auto s = layer(3, 16, 64, 64, 3, 1, 1);
  const Data<float> d(s, 8);
  const auto r = simulate_layer(core_of(256), s, d.in, d.w);
  EXPECT_GT(r.stats.output_stall_cycles, r.stats.compute_cycles);
  EXPECT_GT(r.stats.output_stall_cycles, r.stats.input_stall_cycles);
}

TEST(CoreSim, StatsJsonHasEveryField) {
  CycleStats s;
  s.total_cycles = 10;
  s.macs_executed = 5;
  const auto j = stats_to_json(s, 250.0);
  for (const char* k : {"total_cycles", "compute_cycles", "input_stall_cycles", "output_stall_cycles",
                        "pipeline_fill_cycles", "active_pes", "macs_executed", "gops"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_DOUBLE_EQ(j["gops"].get<double>(), 2.0 * 5 * 250e6 / 10 / 1e9);
}

TEST(CoreSim, RejectsMismatchedPrecision) {
  const auto s = layer(1, 1, 2, 2, 1, 1, 0);
  Tensor3<float> in(FeatureLayout::CHW, {1, 2, 2});
  Tensor4<float> w(WeightLayout::CiKyKxCo, {1, 1, 1, 1});
  EXPECT_THROW(simulate_layer(core_of(4, Precision::int8x4), s, in, w), std::invalid_argument);
}
