#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "pe1d/tensor.hpp"

namespace pe1d {

/// How remainder strips that do not fit the core are cut into sub-tiles.
enum class SubTilePolicy {
  fill_core,  ///< sub-tiles as long as the core allows: floor(num_pes / strip thickness)
  cap_at_p,   ///< sub-tiles no longer than the regular tile side P
};

inline std::string_view to_string(SubTilePolicy p) {
  return p == SubTilePolicy::fill_core ? "fill" : "cap";
}

inline SubTilePolicy parse_subtile_policy(std::string_view s) {
  if (s == "fill") return SubTilePolicy::fill_core;
  if (s == "cap") return SubTilePolicy::cap_at_p;
  throw std::invalid_argument("unknown sub-tile policy '" + std::string(s) + "'");
}

struct CoreConfig {
  std::size_t num_pes = 16;
  std::size_t input_buffer_entries = 32;
  std::size_t psum_buffer_entries = 512;
  std::size_t output_buffer_entries = 512;
  Precision precision = Precision::fp32;
  double clock_mhz = 250.0;
  SubTilePolicy subtile = SubTilePolicy::fill_core;

  void validate() const {
    if (num_pes == 0 || input_buffer_entries == 0 || psum_buffer_entries == 0 ||
        output_buffer_entries == 0)
      throw std::invalid_argument("core buffer and PE counts must be >= 1");
    if (!(clock_mhz > 0.0)) throw std::invalid_argument("clock must be positive");
  }

  /// Output channels one tile job can hold (psums and outputs are both per channel).
  std::size_t channel_chunk() const { return std::min(psum_buffer_entries, output_buffer_entries); }
};

inline CoreConfig core_from_json(const nlohmann::json& j, CoreConfig c = {}) {
  c.num_pes = j.value("num_pes", c.num_pes);
  c.input_buffer_entries = j.value("input_buffer_entries", c.input_buffer_entries);
  c.psum_buffer_entries = j.value("psum_buffer_entries", c.psum_buffer_entries);
  c.output_buffer_entries = j.value("output_buffer_entries", c.output_buffer_entries);
  if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
  c.clock_mhz = j.value("clock_mhz", c.clock_mhz);
  if (j.contains("subtile")) c.subtile = parse_subtile_policy(j.at("subtile").get<std::string>());
  c.validate();
  return c;
}

inline nlohmann::json core_to_json(const CoreConfig& c) {
  return {{"num_pes", c.num_pes},
          {"input_buffer_entries", c.input_buffer_entries},
          {"psum_buffer_entries", c.psum_buffer_entries},
          {"output_buffer_entries", c.output_buffer_entries},
          {"precision", std::string(to_string(c.precision))},
          {"clock_mhz", c.clock_mhz},
          {"subtile", std::string(to_string(c.subtile))}};
}

}  // namespace pe1d
