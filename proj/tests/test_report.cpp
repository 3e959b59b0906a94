#include <gtest/gtest.h>

#include <sstream>

#include "pe1d/report.hpp"

using namespace pe1d;

TEST(Preset, Vgg16Shapes) {
  const auto v = vgg16();
  ASSERT_EQ(v.layers.size(), 13u);
  const std::size_t hw[] = {224, 224, 112, 112, 56, 56, 56, 28, 28, 28, 14, 14, 14};
  const std::size_t ci[] = {3, 64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512};
  const std::size_t co[] = {64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
  for (std::size_t i = 0; i < 13; ++i) {
    const auto& s = v.layers[i].spec;
    EXPECT_EQ(s.h_in, hw[i]);
    EXPECT_EQ(s.w_in, hw[i]);
    EXPECT_EQ(s.c_in, ci[i]);
    EXPECT_EQ(s.c_out, co[i]);
    EXPECT_EQ(s.k_y, 3u);
    EXPECT_EQ(s.stride, 1u);
    EXPECT_EQ(s.pad, 1u);
    EXPECT_EQ(s.h_out(), hw[i]);
  }
  EXPECT_EQ(v.layers[0].name, "conv1_1");
  EXPECT_EQ(v.layers[12].name, "conv5_3");
}

TEST(Preset, ChannelScaling) {
  const auto s = scale_channels(vgg16().layers[0].spec, 8);
  EXPECT_EQ(s.c_in, 1u);
  EXPECT_EQ(s.c_out, 8u);
}

TEST(Report, AnalyzeCsvIsDeterministic) {
  CoreConfig core;
  core.num_pes = 64;
  RunOptions opt;
  std::ostringstream a, b;
  write_analyze_csv(a, run_workload(vgg16(), core, opt));
  write_analyze_csv(b, run_workload(vgg16(), core, opt));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), kAnalyzeColumns);
}

TEST(Report, PeakAndTilingInVggAnalysis) {
  CoreConfig core;
  core.num_pes = 625;
  core.precision = Precision::int8x4;
  const auto rep = run_workload(vgg16(Precision::int8x4), core, {});
  EXPECT_DOUBLE_EQ(rep.peak_gops, 1250.0);
  EXPECT_NEAR(rep.layers[5].util.u_spatial, 0.836, 0.001);
  EXPECT_EQ(rep.layers[5].tiles, 6u);
  EXPECT_TRUE(rep.ok());
  EXPECT_LE(rep.max_fraction_of_peak, 1.0);
}

TEST(Report, SimulatedRunWithVerify) {
  CoreConfig core;
  core.num_pes = 16;
  RunOptions opt;
  opt.mode = RunMode::both;
  opt.verify = true;
  opt.channel_scale = 64;
  WorkloadPreset p = vgg16();
  p.layers.resize(1);
  p.layers[0].spec.h_in = p.layers[0].spec.w_in = 12;
  const auto rep = run_workload(p, core, opt);
  ASSERT_TRUE(rep.layers[0].sim.has_value());
  EXPECT_EQ(rep.layers[0].verified, std::optional<bool>(true));
  std::ostringstream csv;
  write_report_csv(csv, rep);
  EXPECT_NE(csv.str().find(",pass,"), std::string::npos);
  const auto j = report_to_json(rep);
  EXPECT_EQ(j["layers"][0]["stats"]["total_cycles"].get<std::uint64_t>(), rep.layers[0].sim->total_cycles);
  // overall = total ops / total core time
  const double secs = double(rep.layers[0].sim->total_cycles) / 250e6;
  EXPECT_NEAR(rep.overall_gops, layer_gops(rep.layers[0].spec) / secs, 1e-9);
}

TEST(Report, UnschedulableLayerIsReported) {
  WorkloadPreset p{"bad", {{"k7", {}}}};
  p.layers[0].spec.h_in = p.layers[0].spec.w_in = 9;
  p.layers[0].spec.k_y = p.layers[0].spec.k_x = 7;
  const auto rep = run_workload(p, CoreConfig{}, {});
  EXPECT_FALSE(rep.ok());
  EXPECT_NE(rep.layers[0].error.find("input buffer"), std::string::npos);
}

TEST(Verify, CannedSeeds) {
  for (std::uint64_t seed : {1u, 7u, 2024u}) {
    const auto s = verify_sweep(seed, 12);
    EXPECT_TRUE(s.ok()) << seed << ": " << (s.minimal_failure ? describe(*s.minimal_failure) : "");
    EXPECT_EQ(s.passed, 12u);
  }
}

TEST(Verify, RandomCasesStayInRange) {
  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_case(rng, i % 2 ? Precision::int8x4 : Precision::fp32);
    EXPECT_NO_THROW(c.spec.validate());
    EXPECT_LE(c.spec.h_in, 16u);
    EXPECT_LE(c.spec.w_in, 16u);
    EXPECT_LE(c.spec.k_y, 5u);
    EXPECT_LE(c.spec.c_in, 16u);
  }
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}
