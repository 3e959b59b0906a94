#pragma once

// Workload runs and randomized verification.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pe1d/analytics.hpp"
#include "pe1d/core_sim.hpp"
#include "pe1d/fixture.hpp"
#include "pe1d/presets.hpp"
#include "pe1d/reference.hpp"

namespace pe1d {

enum class RunMode { analyze, simulate, both };

struct RunOptions {
  RunMode mode = RunMode::analyze;
  bool verify = false;
  std::size_t channel_scale = 1;
  AnalyticsOptions analytics;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  ///< 0: PE1D_THREADS or 1
};

struct LayerReport {
  std::string name;
  ConvLayerSpec spec;  ///< as run, after channel scaling
  std::size_t tiles = 0;
  double gops_binary = 0.0;  ///< ops in units of 2^30
  UtilizationReport util;
  std::uint64_t predicted_cycles = 0;
  double predicted_gops = 0.0;
  std::optional<CycleStats> sim;
  std::optional<bool> verified;
  std::string error;

  bool simulated() const { return sim.has_value(); }
  std::uint64_t cycles() const { return sim ? sim->total_cycles : predicted_cycles; }
  double core_time_ms(double clock_mhz) const { return static_cast<double>(cycles()) / (clock_mhz * 1e3); }
  double gops(const CoreConfig& core) const { return predicted_gops_for(core, cycles()); }
  double predicted_gops_for(const CoreConfig& core, std::uint64_t c) const { return pe1d::predicted_gops(spec, core, c); }
};

struct RunReport {
  std::string workload;
  CoreConfig core;
  RunOptions options;
  std::vector<LayerReport> layers;
  double peak_gops = 0.0;
  double overall_gops = 0.0;      ///< total ops / total core time
  double max_fraction_of_peak = 0.0;

  bool ok() const {
    return std::all_of(layers.begin(), layers.end(),
                       [](const LayerReport& l) { return l.error.empty() && l.verified.value_or(true); });
  }
};

inline std::size_t thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PE1D_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

/// Runs `body(i)` for i in [0, n) on up to `threads` threads.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
    });
  for (auto& th : pool) th.join();
}

namespace detail {

template <class T, class Acc>
void simulate_one(LayerReport& r, const CoreConfig& core, std::uint64_t seed, bool verify) {
  const auto& s = r.spec;
  Tensor3<T> in(FeatureLayout::CHW, {s.c_in, s.h_in, s.w_in});
  Tensor4<T> w(WeightLayout::CiKyKxCo, {s.c_in, s.k_y, s.k_x, s.c_out});
  fill_random(in, seed);
  fill_random(w, seed ^ 0x5bd1e995u);
  auto res = simulate_layer(core, s, in, w);
  r.sim = res.stats;
  if (!verify) return;
  if constexpr (std::is_same_v<T, float>) {
    r.verified = res.output == conv2d_reference(in, w, s);
  } else {
    auto padded = s;
    padded.c_in = s.c_in_padded();
    r.verified = res.output == conv2d_reference(pad_channels(in), pad_weight_channels(w), padded);
  }
}

}  // namespace detail

inline LayerReport run_layer(const NamedLayer& layer, const CoreConfig& core, const RunOptions& opt,
                             std::uint64_t seed) {
  LayerReport r;
  r.name = layer.name;
  r.spec = scale_channels(layer.spec, opt.channel_scale);
  r.spec.precision = core.precision;
  try {
    const auto schedule = build_schedule(r.spec, core);
    r.tiles = schedule.tile_count;
    r.gops_binary = layer_gops_binary(r.spec);
    r.util = total_utilization(schedule, core, opt.analytics);
    r.predicted_cycles = predict_cycles(schedule, core, opt.analytics);
    r.predicted_gops = predicted_gops(r.spec, core, r.predicted_cycles);
    if (opt.mode != RunMode::analyze || opt.verify) {
      if (core.precision == Precision::fp32)
        detail::simulate_one<float, float>(r, core, seed, opt.verify);
      else
        detail::simulate_one<std::int8_t, std::int32_t>(r, core, seed, opt.verify);
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

inline RunReport run_workload(const WorkloadPreset& preset, const CoreConfig& core, const RunOptions& opt) {
  core.validate();
  RunReport rep;
  rep.workload = preset.name;
  rep.core = core;
  rep.options = opt;
  rep.layers.resize(preset.layers.size());
  parallel_for(preset.layers.size(), thread_count(opt.threads),
               [&](std::size_t i) { rep.layers[i] = run_layer(preset.layers[i], core, opt, opt.seed + i); });

  rep.peak_gops = peak_performance(core);
  double ops = 0, seconds = 0;
  for (const auto& l : rep.layers) {
    if (!l.error.empty()) continue;
    ops += layer_gops(l.spec);
    seconds += static_cast<double>(l.cycles()) / (core.clock_mhz * 1e6);
    rep.max_fraction_of_peak = std::max(rep.max_fraction_of_peak, l.gops(core) / rep.peak_gops);
  }
  rep.overall_gops = seconds > 0 ? ops / seconds : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Column order of `analyze`.
inline constexpr const char* kAnalyzeColumns =
    "layer,tiles,u_spatial,u_temporal,u_total,binding_constraint,predicted_cycles,predicted_gflops";

/// Column order of the full run report.
inline constexpr const char* kReportColumns =
    "layer,c_in,c_out,h,w,gops_2p30,tiles,u_spatial,u_temporal,u_total,binding_constraint,"
    "predicted_cycles,predicted_gops,total_cycles,compute_cycles,input_stall_cycles,output_stall_cycles,"
    "pipeline_fill_cycles,core_time_ms,gops,verified,error";

namespace detail {
inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}
}  // namespace detail

inline void write_analyze_csv(std::ostream& os, const RunReport& rep) {
  os << kAnalyzeColumns << '\n';
  for (const auto& l : rep.layers) {
    if (!l.error.empty()) {
      os << l.name << ",,,,,error,,\n";
      continue;
    }
    os << l.name << ',' << l.tiles << ',' << detail::fixed(l.util.u_spatial, 4) << ','
       << detail::fixed(l.util.u_temporal, 4) << ',' << detail::fixed(l.util.u_total, 4) << ','
       << to_string(l.util.binding_constraint) << ',' << l.predicted_cycles << ','
       << detail::fixed(l.predicted_gops, 3) << '\n';
  }
}

inline void write_report_csv(std::ostream& os, const RunReport& rep) {
  using detail::fixed;
  os << kReportColumns << '\n';
  for (const auto& l : rep.layers) {
    const auto& s = l.spec;
    os << l.name << ',' << s.c_in << ',' << s.c_out << ',' << s.h_in << ',' << s.w_in << ',';
    if (!l.error.empty()) {
      os << ",,,,,,,,,,,,,,,," << '"' << l.error << "\"\n";
      continue;
    }
    os << fixed(l.gops_binary, 3) << ',' << l.tiles << ',' << fixed(l.util.u_spatial, 4) << ','
       << fixed(l.util.u_temporal, 4) << ',' << fixed(l.util.u_total, 4) << ',' << to_string(l.util.binding_constraint)
       << ',' << l.predicted_cycles << ',' << fixed(l.predicted_gops, 3) << ',';
    if (l.sim)
      os << l.sim->total_cycles << ',' << l.sim->compute_cycles << ',' << l.sim->input_stall_cycles << ','
         << l.sim->output_stall_cycles << ',' << l.sim->pipeline_fill_cycles << ',';
    else
      os << ",,,,,";
    os << fixed(l.core_time_ms(rep.core.clock_mhz), 3) << ',' << fixed(l.gops(rep.core), 3) << ','
       << (l.verified ? (*l.verified ? "pass" : "FAIL") : "") << ",\n";
  }
  os << "# peak_gops," << fixed(rep.peak_gops, 3) << '\n';
  os << "# overall_gops," << fixed(rep.overall_gops, 3) << '\n';
  os << "# max_fraction_of_peak," << fixed(rep.max_fraction_of_peak, 4) << '\n';
}

inline json report_to_json(const RunReport& rep) {
  json layers = json::array();
  for (const auto& l : rep.layers) {
    json j{{"layer", l.name}, {"spec", layer_to_json(l.spec)}};
    if (!l.error.empty()) {
      j["error"] = l.error;
      layers.push_back(std::move(j));
      continue;
    }
    j["tiles"] = l.tiles;
    j["gops_2p30"] = l.gops_binary;
    j["u_spatial"] = l.util.u_spatial;
    j["u_temporal"] = l.util.u_temporal;
    j["u_total"] = l.util.u_total;
    j["binding_constraint"] = std::string(to_string(l.util.binding_constraint));
    j["predicted_cycles"] = l.predicted_cycles;
    j["predicted_gops"] = l.predicted_gops;
    if (l.sim) j["stats"] = stats_to_json(*l.sim, rep.core.clock_mhz);
    j["core_time_ms"] = l.core_time_ms(rep.core.clock_mhz);
    j["gops"] = l.gops(rep.core);
    if (l.verified) j["verified"] = *l.verified;
    layers.push_back(std::move(j));
  }
  return {{"workload", rep.workload},
          {"core", core_to_json(rep.core)},
          {"channel_scale", rep.options.channel_scale},
          {"width_squared", rep.options.analytics.width_squared},
          {"layers", std::move(layers)},
          {"peak_gops", rep.peak_gops},
          {"overall_gops", rep.overall_gops},
          {"max_fraction_of_peak", rep.max_fraction_of_peak}};
}

// ---------------------------------------------------------------------------
// Randomized verification
// ---------------------------------------------------------------------------

struct VerifyCase {
  ConvLayerSpec spec;
  CoreConfig core;
  std::uint64_t seed = 0;
};

inline std::string describe(const VerifyCase& c) {
  const auto& s = c.spec;
  std::ostringstream os;
  os << to_string(s.precision) << " c_in=" << s.c_in << " c_out=" << s.c_out << " h=" << s.h_in << " w=" << s.w_in
     << " k=" << s.k_y << "x" << s.k_x << " stride=" << s.stride << " pad=" << s.pad << " pes=" << c.core.num_pes
     << " psum=" << c.core.psum_buffer_entries << " seed=" << c.seed;
  return os.str();
}

/// Random small layer: extents <= 16, k in 1..5, stride 1 or 2.
inline VerifyCase random_case(SplitMix64& rng, Precision precision) {
  VerifyCase c;
  auto& s = c.spec;
  s.precision = precision;
  s.k_y = 1 + rng.below(5);
  s.k_x = rng.below(4) == 0 ? 1 + rng.below(5) : s.k_y;
  s.stride = 1 + rng.below(2);
  s.pad = rng.below(std::min(s.k_y, s.k_x));
  auto extent = [&](std::size_t k) {
    // padded extent = (out - 1) * stride + k, input = padded - 2 * pad, capped at 16
    for (;;) {
      const std::size_t out = 1 + rng.below(12);
      const std::size_t padded = (out - 1) * s.stride + k;
      if (padded > 2 * s.pad && padded - 2 * s.pad <= 16) return padded - 2 * s.pad;
    }
  };
  s.h_in = extent(s.k_y);
  s.w_in = extent(s.k_x);
  s.c_in = 1 + rng.below(precision == Precision::fp32 ? 8 : 16);
  s.c_out = 1 + rng.below(8);
  c.core.precision = precision;
  c.core.num_pes = 1 + rng.below(48);
  if (rng.below(3) == 0) c.core.psum_buffer_entries = c.core.output_buffer_entries = 1 + rng.below(4);
  c.seed = rng.next();
  return c;
}

/// Simulates the case and compares it with the reference convolution.
inline bool check_case(const VerifyCase& c) {
  LayerReport r;
  r.spec = c.spec;
  if (c.spec.precision == Precision::fp32)
    detail::simulate_one<float, float>(r, c.core, c.seed, true);
  else
    detail::simulate_one<std::int8_t, std::int32_t>(r, c.core, c.seed, true);
  return r.verified.value_or(false);
}

inline bool case_fails(const VerifyCase& c) {
  try {
    return !check_case(c);
  } catch (const std::exception&) {
    return true;
  }
}

/// Greedily shrinks a failing case while it keeps failing.
inline VerifyCase shrink_case(VerifyCase c) {
  for (bool changed = true; changed;) {
    changed = false;
    auto attempt = [&](auto mutate) {
      VerifyCase t = c;
      if (!mutate(t)) return;
      try {
        t.spec.validate();
      } catch (const std::exception&) {
        return;
      }
      if (case_fails(t)) {
        c = t;
        changed = true;
      }
    };
    attempt([](VerifyCase& t) { return t.spec.c_in > 1 && (--t.spec.c_in, true); });
    attempt([](VerifyCase& t) { return t.spec.c_out > 1 && (--t.spec.c_out, true); });
    attempt([](VerifyCase& t) { return t.spec.h_in > t.spec.stride && (t.spec.h_in -= t.spec.stride, true); });
    attempt([](VerifyCase& t) { return t.spec.w_in > t.spec.stride && (t.spec.w_in -= t.spec.stride, true); });
    attempt([](VerifyCase& t) { return t.core.num_pes > 1 && (--t.core.num_pes, true); });
  }
  return c;
}

struct VerifySummary {
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::optional<VerifyCase> minimal_failure;
  std::string failure_message;

  bool ok() const { return failed == 0; }
};

/// `count` random cases alternating between fp32 and int8x4.
inline VerifySummary verify_sweep(std::uint64_t seed, std::size_t count) {
  SplitMix64 rng(seed);
  std::vector<VerifyCase> cases;
  for (std::size_t i = 0; i < count; ++i)
    cases.push_back(random_case(rng, i % 2 == 0 ? Precision::fp32 : Precision::int8x4));

  VerifySummary sum;
  std::vector<char> ok(cases.size(), 0);
  std::vector<std::string> msg(cases.size());
  parallel_for(cases.size(), thread_count(0), [&](std::size_t i) {
    try {
      ok[i] = check_case(cases[i]) ? 1 : 0;
      if (!ok[i]) msg[i] = "output differs from reference";
    } catch (const std::exception& e) {
      msg[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (ok[i]) {
      ++sum.passed;
    } else {
      ++sum.failed;
      if (!sum.minimal_failure) {
        sum.minimal_failure = shrink_case(cases[i]);
        sum.failure_message = msg[i];
      }
    }
  }
  return sum;
}

}  // namespace pe1d
