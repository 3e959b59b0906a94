#include <gtest/gtest.h>

#include <vector>

#include "pe1d/tiler.hpp"

using namespace pe1d;

namespace {

std::size_t count_kind(const std::vector<Tile>& tiles, TileKind k) {
  std::size_t n = 0;
  for (const auto& t : tiles) n += t.kind == k;
  return n;
}

ConvLayerSpec layer(std::size_t c_in, std::size_t c_out, std::size_t hw, std::size_t k, std::size_t pad) {
  ConvLayerSpec s;
  s.c_in = c_in;
  s.c_out = c_out;
  s.h_in = s.w_in = hw;
  s.k_y = s.k_x = k;
  s.pad = pad;
  return s;
}

}  // namespace

TEST(Tiling, SixTilesFor56On625) {
  const auto tiles = tile_output_plane(56, 56, 625);
  ASSERT_EQ(tiles.size(), 6u);
  EXPECT_EQ(count_kind(tiles, TileKind::RR), 4u);
  EXPECT_EQ(tiles[4], (Tile{0, 50, 56, 6, TileKind::RS}));
  EXPECT_EQ(tiles[5], (Tile{50, 0, 6, 50, TileKind::SR}));
  std::size_t pixels = 0;
  for (const auto& t : tiles) pixels += t.pixels();
  EXPECT_EQ(pixels, 3136u);
  EXPECT_EQ(tiles.size(), (56u * 56u + 624u) / 625u);  // meets the lower bound
}

TEST(Tiling, SkewedBottomStripIsOneTile) {
  for (auto policy : {SubTilePolicy::fill_core, SubTilePolicy::cap_at_p}) {
    const auto tiles = tile_output_plane(65, 65, 64, policy);
    EXPECT_EQ(count_kind(tiles, TileKind::RR), 64u);
    ASSERT_EQ(count_kind(tiles, TileKind::SR), 1u);
    for (const auto& t : tiles)
      if (t.kind == TileKind::SR) EXPECT_EQ(t, (Tile{64, 0, 1, 64, TileKind::SR}));
  }
}

TEST(Tiling, CapPolicyCutsRightStripIntoPHighPieces) {
  const auto tiles = tile_output_plane(65, 65, 64, SubTilePolicy::cap_at_p);
  std::vector<Tile> subs;
  for (const auto& t : tiles)
    if (t.kind == TileKind::SUB) subs.push_back(t);
  ASSERT_EQ(subs.size(), 9u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(subs[i], (Tile{8 * i, 64, 8, 1, TileKind::SUB}));
  EXPECT_EQ(subs[8], (Tile{64, 64, 1, 1, TileKind::SUB}));
}

TEST(Tiling, FillPolicyCutsRightStripToCoreSize) {
  const auto tiles = tile_output_plane(65, 65, 64, SubTilePolicy::fill_core);
  std::vector<Tile> subs;
  for (const auto& t : tiles)
    if (t.kind == TileKind::SUB) subs.push_back(t);
  ASSERT_EQ(subs.size(), 2u);
  EXPECT_EQ(subs[0], (Tile{0, 64, 64, 1, TileKind::SUB}));
  EXPECT_EQ(subs[1], (Tile{64, 64, 1, 1, TileKind::SUB}));
}

TEST(Tiling, ExactPlaneIsOneTile) {
  const auto tiles = tile_output_plane(8, 8, 70);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0].kind, TileKind::RR);
}

TEST(Tiling, NonSquareCoreUsesFloorSqrt) {
  EXPECT_EQ(regular_tile_side(1), 1u);
  EXPECT_EQ(regular_tile_side(24), 4u);
  EXPECT_EQ(regular_tile_side(25), 5u);
  EXPECT_EQ(regular_tile_side(625), 25u);
}

TEST(Tiling, OneRowTileOfWholeCore) {
  const auto tiles = tile_output_plane(1, 64, 64);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], (Tile{0, 0, 1, 64, TileKind::SR}));
}

// Exact cover and fit over a grid of planes and core sizes.
TEST(Tiling, ExactCoverSweep) {
  for (auto policy : {SubTilePolicy::fill_core, SubTilePolicy::cap_at_p})
    for (std::size_t pes : {16u, 64u, 256u, 324u, 625u, 20u})
      for (std::size_t h = 1; h <= 70; h += (h < 10 ? 1 : 7))
        for (std::size_t w = 1; w <= 70; w += (w < 10 ? 1 : 5)) {
          std::vector<int> hits(h * w, 0);
          const auto tiles = tile_output_plane(h, w, pes, policy);
          for (const auto& t : tiles) {
            ASSERT_LE(t.pixels(), pes);
            ASSERT_GT(t.pixels(), 0u);
            for (std::size_t y = t.origin_y; y < t.origin_y + t.height; ++y)
              for (std::size_t x = t.origin_x; x < t.origin_x + t.width; ++x) ++hits[y * w + x];
          }
          for (int v : hits) ASSERT_EQ(v, 1) << h << "x" << w << " on " << pes;
          EXPECT_GE(tiles.size(), (h * w + pes - 1) / pes);
        }
}

TEST(Schedule, ChannelChunksAndShapes) {
  CoreConfig core;
  core.num_pes = 625;
  auto s = build_schedule(layer(4, 256, 56, 3, 1), core);
  EXPECT_EQ(s.jobs.size(), 6u);
  EXPECT_EQ(s.tile_count, 6u);
  EXPECT_EQ(s.active_pe_sum, 3136u);

  auto big = build_schedule(layer(4, 1024, 56, 3, 1), core);
  EXPECT_EQ(big.jobs.size(), 12u);
  EXPECT_EQ(big.jobs[0].co_begin, 0u);
  EXPECT_EQ(big.jobs[1].co_begin, 512u);
  EXPECT_EQ(big.jobs[1].co_count, 512u);
  EXPECT_EQ(big.jobs[0].commands, big.jobs[1].commands);  // shared stream
}

TEST(Schedule, JobWindowAndPeMap) {
  CoreConfig core;
  core.num_pes = 16;
  ConvLayerSpec s = layer(1, 2, 11, 3, 0);
  s.stride = 2;
  const auto sch = build_schedule(s, core);  // 5x5 outputs, P = 4
  const auto& j = sch.jobs.back();
  EXPECT_EQ(j.window_h(), (j.tile.height - 1) * 2 + 3);
  EXPECT_EQ(j.window_w(), (j.tile.width - 1) * 2 + 3);
  EXPECT_EQ(j.window_y, j.tile.origin_y * 2);
  for (const auto& job : sch.jobs) {
    std::vector<bool> used(core.num_pes, false);
    for (std::size_t y = job.tile.origin_y; y < job.tile.origin_y + job.tile.height; ++y)
      for (std::size_t x = job.tile.origin_x; x < job.tile.origin_x + job.tile.width; ++x) {
        const auto pe = pe_index(job.tile, y, x);
        ASSERT_LT(pe, core.num_pes);
        ASSERT_FALSE(used[pe]);
        used[pe] = true;
      }
  }
  // Padded coordinates of the last tile's window.
  const auto r = oracle_receivers(j, j.window_y, j.window_x);
  EXPECT_EQ(r, std::vector<std::size_t>{0});
}

TEST(Schedule, RejectsKernelLargerThanInputBuffer) {
  CoreConfig core;
  EXPECT_THROW(build_schedule(layer(1, 1, 9, 7, 0), core), UnschedulableError);
  EXPECT_NO_THROW(build_schedule(layer(1, 1, 9, 5, 0), core));
  EXPECT_FALSE(double_buffered(layer(1, 1, 9, 5, 0), core));
  EXPECT_TRUE(double_buffered(layer(1, 1, 9, 4, 0), core));
}
