#pragma once

// Closed-form performance model of one core.
//
// Per scheduled job, with G channel steps (C_i, or C_i/4 packed int8 words),
// K = C_o * k_y * k_x weights per step and E input words per step window:
//   compute = G * K      input = G * E      output = pixels * C_o
// Temporal utilization is sum(compute) / sum(max(compute, input, output));
// spatial utilization is the compute-weighted mean of pixels / num_pes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pe1d/config.hpp"
#include "pe1d/tensor.hpp"
#include "pe1d/tiler.hpp"

namespace pe1d {

enum class BindingConstraint { compute, input_bw, output_bw, spatial };

inline std::string_view to_string(BindingConstraint b) {
  switch (b) {
    case BindingConstraint::compute: return "compute";
    case BindingConstraint::input_bw: return "input_bw";
    case BindingConstraint::output_bw: return "output_bw";
    case BindingConstraint::spatial: return "spatial";
  }
  return "?";
}

struct AnalyticsOptions {
  /// Use W_i * W_i (input width squared) for the per-channel input read time
  /// instead of W_i * H_i. Identical for square windows.
  bool width_squared = false;
};

struct UtilizationReport {
  double u_spatial = 0.0;
  double u_temporal = 0.0;
  double u_total = 0.0;
  BindingConstraint binding_constraint = BindingConstraint::compute;
  std::size_t tiles = 0;
};

struct BandwidthReport {
  double input_gbps = 0.0;
  double weight_gbps = 0.0;
  double output_gbps = 0.0;
  double cap_gbps = 0.0;  ///< per stream: one 4-byte word per cycle

  bool input_bound() const { return input_gbps > cap_gbps; }
  bool weight_bound() const { return weight_gbps > cap_gbps; }
  bool output_bound() const { return output_gbps > cap_gbps; }
};

/// Bytes per streamed word: an fp32 value or four packed int8 values.
inline constexpr double kWordBytes = 4.0;

inline double spatial_utilization(std::size_t pixels, std::size_t num_pes) {
  if (num_pes == 0) throw std::invalid_argument("num_pes must be >= 1");
  if (pixels > num_pes) throw std::invalid_argument("tile larger than the core");
  return static_cast<double>(pixels) / static_cast<double>(num_pes);
}

struct JobTerms {
  double compute = 0.0;
  double input = 0.0;
  double output = 0.0;
  double pixels = 0.0;

  double bound() const { return std::max({compute, input, output}); }
};

inline double input_words_per_step(const WindowGeometry& g, const AnalyticsOptions& opt) {
  if (opt.width_squared) {
    const auto w = static_cast<double>(g.window_w());
    return w * w;
  }
  return static_cast<double>(g.window_size());
}

inline JobTerms job_terms(const TileJob& job, const AnalyticsOptions& opt = {}) {
  const auto groups = static_cast<double>(job.layer.channel_steps());
  JobTerms t;
  t.compute = groups * static_cast<double>(job.weights_per_step());
  t.input = groups * input_words_per_step(job.geometry, opt);
  t.output = static_cast<double>(job.active_pes() * job.co_count);
  t.pixels = static_cast<double>(job.active_pes());
  return t;
}

/// Whole-plane form: the layer as one operation with its full padded input.
inline double temporal_utilization(const ConvLayerSpec& spec, const AnalyticsOptions& opt = {}) {
  spec.validate();
  const auto g = static_cast<double>(spec.channel_steps());
  const double compute = g * static_cast<double>(spec.k_y * spec.k_x * spec.c_out);
  const double wi = static_cast<double>(spec.padded_w());
  const double hi = opt.width_squared ? wi : static_cast<double>(spec.padded_h());
  const double input = wi * hi * g;
  const double output = static_cast<double>(spec.h_out() * spec.w_out() * spec.c_out);
  return std::min(1.0, compute / std::max(input, output));
}

inline double temporal_utilization(const TileJob& job, const AnalyticsOptions& opt = {}) {
  const auto t = job_terms(job, opt);
  return std::min(1.0, t.compute / t.bound());
}

inline UtilizationReport total_utilization(const Schedule& s, const CoreConfig& core,
                                           const AnalyticsOptions& opt = {}) {
  double compute = 0, bound = 0, busy = 0, in_excess = 0, out_excess = 0;
  for (const auto& job : s.jobs) {
    const auto t = job_terms(job, opt);
    compute += t.compute;
    bound += t.bound();
    busy += t.pixels * t.compute;
    if (t.input >= t.output) in_excess += std::max(0.0, t.input - t.compute);
    else out_excess += std::max(0.0, t.output - t.compute);
  }
  UtilizationReport r;
  r.tiles = s.tile_count;
  if (compute <= 0) return r;
  r.u_spatial = busy / (static_cast<double>(core.num_pes) * compute);
  r.u_temporal = compute / bound;
  r.u_total = r.u_spatial * r.u_temporal;
  if (r.u_temporal < 1.0 && r.u_temporal <= r.u_spatial)
    r.binding_constraint = in_excess >= out_excess ? BindingConstraint::input_bw : BindingConstraint::output_bw;
  else if (r.u_spatial < 1.0)
    r.binding_constraint = BindingConstraint::spatial;
  else
    r.binding_constraint = BindingConstraint::compute;
  return r;
}

inline UtilizationReport total_utilization(const ConvLayerSpec& spec, const CoreConfig& core,
                                           const AnalyticsOptions& opt = {}) {
  return total_utilization(build_schedule(spec, core), core, opt);
}

/// Cycle estimate for running the schedule back to back on one core.
/// Each job streams its G windows: max(K, E) cycles per step when double
/// buffered, K + E when not, plus one exposed window load at the very start.
/// A job's output drain (pixels * C_o reads) hides behind the next job's
/// steps; whatever does not fit is exposed, and the last drain is exposed in
/// full together with the num_pes-cycle response latency.
inline std::uint64_t predict_cycles(const Schedule& s, const CoreConfig& core, const AnalyticsOptions& opt = {}) {
  if (s.jobs.empty()) return 0;
  const bool dbuf = double_buffered(s.jobs.front().layer, core);
  std::vector<double> body, drain;
  for (const auto& job : s.jobs) {
    const auto groups = static_cast<double>(job.layer.channel_steps());
    const auto k = static_cast<double>(job.weights_per_step());
    const double e = input_words_per_step(job.geometry, opt);
    body.push_back(groups * (dbuf ? std::max(k, e) : k + e));
    drain.push_back(static_cast<double>(job.active_pes() * job.co_count));
  }
  double total = input_words_per_step(s.jobs.front().geometry, opt);
  for (std::size_t j = 0; j < body.size(); ++j) {
    total += body[j];
    total += j + 1 < body.size() ? std::max(0.0, drain[j] - body[j + 1]) : drain[j];
  }
  total += static_cast<double>(core.num_pes);
  return static_cast<std::uint64_t>(std::llround(total));
}

inline std::uint64_t predict_cycles(const ConvLayerSpec& spec, const CoreConfig& core,
                                    const AnalyticsOptions& opt = {}) {
  return predict_cycles(build_schedule(spec, core), core, opt);
}

/// Peak add+mul rate in GOPS (GFLOPS for fp32).
inline double peak_performance(const CoreConfig& core) {
  return 2.0 * static_cast<double>(lanes_of(core.precision)) * static_cast<double>(core.num_pes) * core.clock_mhz /
         1000.0;
}

/// Operations of a layer (one multiply and one add per MAC), in units of 1e9.
inline double layer_gops(const ConvLayerSpec& spec) { return 2.0 * static_cast<double>(spec.macs()) / 1e9; }

/// Same count in units of 2^30, the convention of the published per-layer tables.
inline double layer_gops_binary(const ConvLayerSpec& spec) {
  return 2.0 * static_cast<double>(spec.macs()) / 1073741824.0;
}

inline double predicted_gops(const ConvLayerSpec& spec, const CoreConfig& core, std::uint64_t cycles) {
  if (cycles == 0) return 0.0;
  return layer_gops(spec) * core.clock_mhz * 1e6 / static_cast<double>(cycles);
}

/// Stream demands when every PE does one MAC per cycle. A weight word feeds
/// every active PE once; an input word is used k_y*k_x*C_o times by a PE and
/// an output word gathers k_y*k_x*G MACs.
inline BandwidthReport bandwidth_requirement(const ConvLayerSpec& spec, const CoreConfig& core) {
  spec.validate();
  const double ghz = core.clock_mhz / 1000.0;
  const auto pes = static_cast<double>(core.num_pes);
  const auto plane = static_cast<double>(std::min(spec.h_out() * spec.w_out(), core.num_pes));
  const auto taps = static_cast<double>(spec.k_y * spec.k_x);
  BandwidthReport r;
  r.cap_gbps = ghz * kWordBytes;
  r.weight_gbps = ghz * pes / plane * kWordBytes;
  r.input_gbps = ghz * pes / (taps * static_cast<double>(spec.c_out)) * kWordBytes;
  r.output_gbps = ghz * pes / (taps * static_cast<double>(spec.channel_steps())) * kWordBytes;
  return r;
}

}  // namespace pe1d
