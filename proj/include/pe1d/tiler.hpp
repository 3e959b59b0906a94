#pragma once

// Output-plane tiling and per-layer schedules.
//
// With P = floor(sqrt(num_pes)), P x P tiles (RR) are placed from the top-left
// corner. The right strip RS (width w_out mod P) spans the full height and owns
// the bottom-right corner; the bottom strip SR (height h_out mod P) covers the
// remaining width. A strip that fits the core is scheduled whole, otherwise it
// is cut along its length into SUB tiles.

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pe1d/config.hpp"
#include "pe1d/interconnect.hpp"
#include "pe1d/tensor.hpp"

namespace pe1d {

struct UnschedulableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TileKind { RR, RS, SR, SUB };

inline std::string_view to_string(TileKind k) {
  switch (k) {
    case TileKind::RR: return "RR";
    case TileKind::RS: return "RS";
    case TileKind::SR: return "SR";
    case TileKind::SUB: return "SUB";
  }
  return "?";
}

struct Tile {
  std::size_t origin_y = 0;
  std::size_t origin_x = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  TileKind kind = TileKind::RR;

  std::size_t pixels() const { return height * width; }
  bool operator==(const Tile&) const = default;
};

inline std::size_t regular_tile_side(std::size_t num_pes) {
  auto p = static_cast<std::size_t>(std::sqrt(static_cast<double>(num_pes)));
  while (p * p > num_pes) --p;
  while ((p + 1) * (p + 1) <= num_pes) ++p;
  return p;
}

inline std::vector<Tile> tile_output_plane(std::size_t h_out, std::size_t w_out, std::size_t num_pes,
                                           SubTilePolicy policy = SubTilePolicy::fill_core) {
  if (num_pes == 0) throw std::invalid_argument("num_pes must be >= 1");
  const std::size_t p = regular_tile_side(num_pes);
  const std::size_t rows = h_out / p, cols = w_out / p;
  std::vector<Tile> tiles;

  for (std::size_t ty = 0; ty < rows; ++ty)
    for (std::size_t tx = 0; tx < cols; ++tx) tiles.push_back({ty * p, tx * p, p, p, TileKind::RR});

  // Right strip: full height, owns the corner.
  if (const std::size_t rs_w = w_out - cols * p; rs_w > 0 && h_out > 0) {
    const std::size_t x0 = cols * p;
    if (rs_w * h_out <= num_pes) {
      tiles.push_back({0, x0, h_out, rs_w, TileKind::RS});
    } else {
      const std::size_t len = policy == SubTilePolicy::cap_at_p ? p : num_pes / rs_w;
      for (std::size_t y = 0; y < h_out; y += len)
        tiles.push_back({y, x0, std::min(len, h_out - y), rs_w, TileKind::SUB});
    }
  }

  // Bottom strip: width of the RR block only.
  if (const std::size_t sr_h = h_out - rows * p, sr_w = cols * p; sr_h > 0 && sr_w > 0) {
    const std::size_t y0 = rows * p;
    if (sr_h * sr_w <= num_pes) {
      tiles.push_back({y0, 0, sr_h, sr_w, TileKind::SR});
    } else {
      const std::size_t len = policy == SubTilePolicy::cap_at_p ? p : num_pes / sr_h;
      for (std::size_t x = 0; x < sr_w; x += len)
        tiles.push_back({y0, x, sr_h, std::min(len, sr_w - x), TileKind::SUB});
    }
  }
  return tiles;
}

/// Output pixel (y, x) of the tile -> PE index, row-major over the tile.
inline std::size_t pe_index(const Tile& t, std::size_t y, std::size_t x) {
  return (y - t.origin_y) * t.width + (x - t.origin_x);
}

struct TileJob {
  Tile tile;
  ConvLayerSpec layer;
  std::size_t co_begin = 0;  ///< first output channel of this job's chunk
  std::size_t co_count = 0;
  std::size_t window_y = 0;  ///< input window origin, padded input coordinates
  std::size_t window_x = 0;
  WindowGeometry geometry;
  /// One entry per input word of the window, replayed for every channel step.
  std::shared_ptr<const std::vector<StreamEntry>> commands;

  std::size_t active_pes() const { return tile.pixels(); }
  std::size_t window_h() const { return geometry.window_h(); }
  std::size_t window_w() const { return geometry.window_w(); }
  std::size_t window_size() const { return geometry.window_size(); }
  /// Weight words broadcast per channel step: (c_out chunk) x k_y x k_x.
  std::size_t weights_per_step() const { return co_count * layer.k_y * layer.k_x; }
};

struct Schedule {
  std::vector<TileJob> jobs;
  std::size_t tile_count = 0;
  std::size_t active_pe_sum = 0;  ///< sum of tile pixels over spatial tiles
};

/// Whether the input FIFO holds two windows (double buffering) for this kernel.
inline bool double_buffered(const ConvLayerSpec& spec, const CoreConfig& core) {
  return 2 * spec.k_y * spec.k_x <= core.input_buffer_entries;
}

inline TileJob make_job(const ConvLayerSpec& spec, const Tile& t, std::size_t co_begin, std::size_t co_count,
                        std::shared_ptr<const std::vector<StreamEntry>> commands = nullptr) {
  TileJob j;
  j.tile = t;
  j.layer = spec;
  j.co_begin = co_begin;
  j.co_count = co_count;
  j.window_y = t.origin_y * spec.stride;
  j.window_x = t.origin_x * spec.stride;
  j.geometry = {t.height, t.width, spec.k_y, spec.k_x, spec.stride};
  j.commands = commands ? std::move(commands)
                        : std::make_shared<const std::vector<StreamEntry>>(generate_command_stream(j.geometry));
  return j;
}

inline Schedule build_schedule(const ConvLayerSpec& spec, const CoreConfig& core) {
  spec.validate();
  core.validate();
  if (spec.k_y * spec.k_x > core.input_buffer_entries)
    throw UnschedulableError("kernel " + std::to_string(spec.k_y) + "x" + std::to_string(spec.k_x) +
                             " needs " + std::to_string(spec.k_y * spec.k_x) +
                             " input buffer entries, core has " +
                             std::to_string(core.input_buffer_entries));
  const auto tiles = tile_output_plane(spec.h_out(), spec.w_out(), core.num_pes, core.subtile);
  const std::size_t chunk = core.channel_chunk();

  // Tiles of equal shape share one command stream.
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const std::vector<StreamEntry>>> streams;
  Schedule s;
  for (const auto& t : tiles) {
    auto& cmds = streams[{t.height, t.width}];
    for (std::size_t co = 0; co < spec.c_out; co += chunk) {
      s.jobs.push_back(make_job(spec, t, co, std::min(chunk, spec.c_out - co), cmds));
      cmds = s.jobs.back().commands;
    }
    ++s.tile_count;
    s.active_pe_sum += t.pixels();
  }
  return s;
}

/// Receivers of padded-input pixel (iy, ix) for a scheduled job.
inline std::vector<std::size_t> oracle_receivers(const TileJob& job, std::size_t iy, std::size_t ix) {
  if (iy < job.window_y || ix < job.window_x)
    throw std::out_of_range("input pixel outside the tile's input window");
  return oracle_receivers(job.geometry, iy - job.window_y, ix - job.window_x);
}

}  // namespace pe1d
