#pragma once

// Cycle-level model of one core: controller, 1-D PE array and the three
// pipelined interconnects (input multicast, weight broadcast, output unicast).
//
// Timing model, all in controller cycles:
//  * Input words are injected one per cycle, together with their command, and
//    reach PE j j cycles later. A channel step's words go to input buffer half
//    (step % 2); the half may be refilled once every weight of the step that
//    used it before has been broadcast. Kernels whose two windows do not fit
//    the input FIFO run single-buffered.
//  * Weights are broadcast one per cycle in (c_out, k_y, k_x) order per step,
//    reaching PE j j cycles later. A step's first weight waits until the whole
//    window of that step has been injected.
//  * The first weight of a job carries a commit token for the previous job:
//    PEs move their finished psums into the output buffer. The controller only
//    sends it once every read request of the job before that was issued, so an
//    output buffer is always empty when the commit arrives.
//  * After a job is committed the controller issues one read request per cycle;
//    the response reaches the controller num_pes cycles after the request.
//
// Every controller cycle is booked to exactly one of compute (a weight was
// broadcast), input stall, output stall or pipeline fill.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pe1d/config.hpp"
#include "pe1d/fixture.hpp"
#include "pe1d/interconnect.hpp"
#include "pe1d/reference.hpp"
#include "pe1d/tensor.hpp"
#include "pe1d/tiler.hpp"

namespace pe1d {

/// Broken internal invariant of the core model (a scheduling bug, not bad input).
struct SimulationError : std::logic_error {
  using std::logic_error::logic_error;
};

struct CycleStats {
  std::uint64_t total_cycles = 0;
  std::uint64_t compute_cycles = 0;
  std::uint64_t input_stall_cycles = 0;
  std::uint64_t output_stall_cycles = 0;
  std::uint64_t pipeline_fill_cycles = 0;
  std::uint64_t active_pes = 0;     ///< tile PEs; for aggregates the largest tile
  std::uint64_t macs_executed = 0;  ///< PE MAC operations (one per PE per weight word)
  std::uint64_t lanes = 1;          ///< multiplies per MAC operation
  bool single_buffered = false;

  std::uint64_t lane_macs() const { return macs_executed * lanes; }
  bool accounting_holds() const {
    return total_cycles == compute_cycles + input_stall_cycles + output_stall_cycles + pipeline_fill_cycles;
  }
  /// 2 ops per lane MAC, at the given clock.
  double gops(double clock_mhz) const {
    if (total_cycles == 0) return 0.0;
    return 2.0 * static_cast<double>(lane_macs()) * clock_mhz * 1e6 / static_cast<double>(total_cycles) / 1e9;
  }

  CycleStats& operator+=(const CycleStats& o) {
    total_cycles += o.total_cycles;
    compute_cycles += o.compute_cycles;
    input_stall_cycles += o.input_stall_cycles;
    output_stall_cycles += o.output_stall_cycles;
    pipeline_fill_cycles += o.pipeline_fill_cycles;
    active_pes = std::max(active_pes, o.active_pes);
    macs_executed += o.macs_executed;
    lanes = o.lanes;
    single_buffered = single_buffered || o.single_buffered;
    return *this;
  }
  bool operator==(const CycleStats&) const = default;
};

inline json stats_to_json(const CycleStats& s, double clock_mhz) {
  return {{"total_cycles", s.total_cycles},
          {"compute_cycles", s.compute_cycles},
          {"input_stall_cycles", s.input_stall_cycles},
          {"output_stall_cycles", s.output_stall_cycles},
          {"pipeline_fill_cycles", s.pipeline_fill_cycles},
          {"active_pes", s.active_pes},
          {"macs_executed", s.macs_executed},
          {"lanes", s.lanes},
          {"single_buffered", s.single_buffered},
          {"clock_mhz", clock_mhz},
          {"gops", s.gops(clock_mhz)}};
}

// ---------------------------------------------------------------------------
// Precision modes
// ---------------------------------------------------------------------------

/// Scalar fp32 PE: one multiply and one add per cycle.
struct Fp32Mode {
  using Word = float;
  using Acc = float;
  using InputPlane = Tensor3<float>;  // padded, CHW
  using Weights = Tensor4<float>;     // CiKyKxCo
  static constexpr std::size_t lanes = 1;
  static constexpr Precision precision = Precision::fp32;

  static Acc mac(Acc acc, Word in, Word w) {
    const float prod = in * w;
    return acc + prod;
  }
  static Word input_word(const InputPlane& p, std::size_t step, std::size_t y, std::size_t x) {
    return p(step, y, x);
  }
  static Word weight_word(const Weights& w, std::size_t step, std::size_t ky, std::size_t kx, std::size_t co) {
    return w(step, ky, kx, co);
  }
};

/// vPE: four int8 products reduced by an adder tree into a 32-bit accumulator.
struct Int8x4Mode {
  using Word = Int8Vec;
  using Acc = std::int32_t;
  using InputPlane = PackedInput;      // padded
  using Weights = Tensor4<std::int8_t>;  // CiKyKxCo, c_in a multiple of 4
  static constexpr std::size_t lanes = 4;
  static constexpr Precision precision = Precision::int8x4;

  static Acc mac(Acc acc, const Word& in, const Word& w) {
    std::int32_t p[4];
    for (std::size_t l = 0; l < 4; ++l) p[l] = std::int32_t{in[l]} * std::int32_t{w[l]};
    return ((p[0] + p[1]) + (p[2] + p[3])) + acc;
  }
  static const Word& input_word(const InputPlane& p, std::size_t step, std::size_t y, std::size_t x) {
    return p(step, y, x);
  }
  static Word weight_word(const Weights& w, std::size_t step, std::size_t ky, std::size_t kx, std::size_t co) {
    Word v;
    for (std::size_t l = 0; l < 4; ++l) v[l] = w(4 * step + l, ky, kx, co);
    return v;
  }
};

// ---------------------------------------------------------------------------
// Core
// ---------------------------------------------------------------------------

template <class Mode>
class Core {
 public:
  using Word = typename Mode::Word;
  using Acc = typename Mode::Acc;
  /// Receives every output value as it arrives at the controller.
  using OutputSink = std::function<void(std::size_t job, std::size_t pe, std::size_t co, Acc value)>;

  struct Result {
    CycleStats stats;
    std::vector<CycleStats> per_job;
  };

  Core(const CoreConfig& cfg, const typename Mode::InputPlane& input, const typename Mode::Weights& weights)
      : cfg_(cfg), input_(input), weights_(weights) {
    cfg_.validate();
    if (cfg_.precision != Mode::precision) throw std::invalid_argument("core precision does not match data");
  }

  Result run(std::span<const TileJob> jobs, const OutputSink& sink) {
    Result result;
    if (jobs.empty()) return result;
    setup(jobs);
    result.per_job.assign(jobs.size(), CycleStats{});
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      result.per_job[j].active_pes = jobs[j].active_pes();
      result.per_job[j].lanes = Mode::lanes;
      result.per_job[j].single_buffered = !double_buffered_;
    }

    ReceiverChain<InputPayload> chain(cfg_.num_pes);
    const std::size_t num_steps = steps_.size();
    const std::size_t last_job = jobs.size() - 1;

    std::size_t in_step = 0, in_pos = 0;
    std::size_t w_step = 0, w_pos = 0;
    bool any_weight = false;
    bool final_commit = false;
    std::size_t committed = 0;  // jobs whose commit token has been sent
    std::vector<std::uint64_t> commit_cycle(jobs.size(), 0);
    std::size_t drain_job = 0, drain_pos = 0;  // next read request
    std::deque<Response> responses;

    for (std::uint64_t t = 0;; ++t) {
      // ---- controller decisions, from state at the start of the cycle ----
      enum class Booking { compute, input, output, fill } booking = Booking::fill;
      std::optional<WeightSlot> wslot;
      const std::size_t w_step_at_start = w_step;
      std::size_t booked_job = w_step < num_steps ? steps_[w_step].job : last_job;

      if (w_step < num_steps) {
        const Step& st = steps_[w_step];
        const bool opens_job = st.group == 0 && w_pos == 0;
        const bool input_ready = in_step > w_step;
        const bool output_ready = !opens_job || st.job == 0 || drained_through(drain_job) >= st.job - 1;
        if (!input_ready) {
          booking = any_weight ? Booking::input : Booking::fill;
        } else if (!output_ready) {
          booking = Booking::output;
        } else {
          const TileJob& job = jobs[st.job];
          const std::size_t taps = job.layer.k_y * job.layer.k_x;
          const std::size_t co = w_pos / taps, tap = w_pos % taps;
          WeightSlot s;
          s.stamp = t;
          s.has_weight = true;
          s.job = st.job;
          s.step = w_step;
          s.co = co;
          s.tap = window_slot(job.geometry, tap / job.layer.k_x, tap % job.layer.k_x);
          s.last_of_step = w_pos + 1 == weights_per_step_[st.job];
          s.word = Mode::weight_word(weights_, st.group, tap / job.layer.k_x, tap % job.layer.k_x,
                                     job.co_begin + co);
          if (opens_job && st.job > 0) {
            s.commit_job = static_cast<std::ptrdiff_t>(st.job) - 1;
            commit_cycle[st.job - 1] = t;
            committed = st.job;
          }
          wslot = s;
          booking = Booking::compute;
          any_weight = true;
          if (++w_pos == weights_per_step_[st.job]) {
            w_pos = 0;
            ++w_step;
          }
        }
      } else if (!final_commit) {
        if (drained_through(drain_job) + 1 >= last_job + 1 || last_job == 0) {
          WeightSlot s;
          s.stamp = t;
          s.commit_job = static_cast<std::ptrdiff_t>(last_job);
          commit_cycle[last_job] = t;
          committed = last_job + 1;
          final_commit = true;
          wslot = s;
        } else {
          booking = Booking::output;
        }
      } else if (drain_job <= last_job) {
        booking = Booking::output;
      }

      // Input injection: half of step in_step must be free.
      std::optional<Bundle<InputPayload>> bundle;
      if (in_step < num_steps) {
        const bool half_free =
            double_buffered_ ? (in_step < 2 || w_step_at_start + 1 >= in_step)
                            : (in_step < 1 || w_step_at_start >= in_step);
        if (half_free) {
          const Step& st = steps_[in_step];
          const TileJob& job = jobs[st.job];
          const StreamEntry& e = (*job.commands)[in_pos];
          Bundle<InputPayload> b;
          b.cmd = e.cmd;
          b.valid = e.valid;
          b.payload.step = in_step;
          if (e.valid) b.payload.word = Mode::input_word(input_, st.group, job.window_y + e.iy, job.window_x + e.ix);
          bundle = b;
          if (++in_pos == job.commands->size()) {
            in_pos = 0;
            ++in_step;
          }
        }
      }

      // Output read request.
      std::optional<RequestSlot> rslot;
      if (drain_job < committed && commit_cycle[drain_job] < t) {
        const TileJob& job = jobs[drain_job];
        const std::size_t per_pe = job.co_count;
        rslot = RequestSlot{t, drain_job, drain_pos / per_pe, drain_pos % per_pe};
        if (++drain_pos == job.active_pes() * per_pe) {
          drain_pos = 0;
          ++drain_job;
        }
      }

      // ---- datapath ----
      if (wslot) wring_[t % ring_] = *wslot;
      if (rslot) rring_[t % ring_] = *rslot;
      chain.tick(std::move(bundle), [&](std::size_t pe, const InputPayload& p) { cache_word(pe, p, jobs); });
      for (std::size_t pe = 0; pe < cfg_.num_pes && pe <= t; ++pe) {
        const std::uint64_t src = t - pe;
        if (const WeightSlot& s = wring_[src % ring_]; s.stamp == src) apply_weight(pe, s, jobs, result.per_job);
        if (const RequestSlot& r = rring_[src % ring_]; r.stamp == src && r.pe == pe) {
          PeState& ps = pes_[pe];
          if (ps.out_read >= ps.out_count || ps.out_job != r.job)
            throw SimulationError("read request reached PE " + std::to_string(pe) + " with no output queued");
          responses.push_back({src + cfg_.num_pes, r.job, pe, r.co, ps.out[ps.out_read++]});
        }
      }
      while (!responses.empty() && responses.front().arrival <= t) {
        const Response& r = responses.front();
        sink(r.job, r.pe, r.co, r.value);
        responses.pop_front();
      }

      // ---- accounting ----
      CycleStats& js = result.per_job[booked_job];
      ++js.total_cycles;
      switch (booking) {
        case Booking::compute: ++js.compute_cycles; break;
        case Booking::input: ++js.input_stall_cycles; break;
        case Booking::output: ++js.output_stall_cycles; break;
        case Booking::fill: ++js.pipeline_fill_cycles; break;
      }

      const bool done = w_step == num_steps && final_commit && drain_job > last_job && responses.empty() &&
                        chain.idle();
      if (done) break;
      if (t > cycle_limit_) throw SimulationError("core simulation did not terminate");
    }

    for (const auto& js : result.per_job) result.stats += js;
    result.stats.lanes = Mode::lanes;
    result.stats.single_buffered = !double_buffered_;
    return result;
  }

 private:
  struct Step {
    std::size_t job;
    std::size_t group;
  };
  struct InputPayload {
    std::size_t step = 0;
    Word word{};
  };
  struct WeightSlot {
    std::uint64_t stamp = ~std::uint64_t{0};
    bool has_weight = false;
    bool last_of_step = false;
    std::ptrdiff_t commit_job = -1;
    std::size_t job = 0, step = 0, co = 0, tap = 0;
    Word word{};
  };
  struct RequestSlot {
    std::uint64_t stamp = ~std::uint64_t{0};
    std::size_t job = 0, pe = 0, co = 0;
  };
  struct Response {
    std::uint64_t arrival;
    std::size_t job, pe, co;
    Acc value;
  };
  /// Per-PE storage: two input window halves, psums, output buffer. Weights
  /// are never stored; a PE only sees the broadcast register of the cycle.
  struct PeState {
    std::vector<Word> window[2];
    std::size_t window_count[2] = {0, 0};
    std::ptrdiff_t window_step[2] = {-1, -1};
    std::vector<Acc> psum;
    std::vector<Acc> out;
    std::size_t out_count = 0, out_read = 0, out_job = 0;
  };

  void setup(std::span<const TileJob> jobs) {
    const ConvLayerSpec& layer = jobs.front().layer;
    taps_ = layer.k_y * layer.k_x;
    if (taps_ > cfg_.input_buffer_entries) throw UnschedulableError("kernel window exceeds input buffer");
    double_buffered_ = double_buffered(layer, cfg_);
    steps_.clear();
    weights_per_step_.clear();
    std::size_t max_chunk = 0;
    std::uint64_t work = 0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const TileJob& job = jobs[j];
      if (job.layer.k_y != layer.k_y || job.layer.k_x != layer.k_x)
        throw std::invalid_argument("jobs of one run must share the kernel shape");
      if (job.active_pes() > cfg_.num_pes) throw SimulationError("tile larger than the PE array");
      if (job.co_count > cfg_.channel_chunk()) throw SimulationError("channel chunk exceeds PE buffers");
      if (!job.commands || job.commands->size() != job.window_size())
        throw SimulationError("job command stream does not cover its input window");
      const std::size_t groups = job.layer.channel_steps();
      for (std::size_t g = 0; g < groups; ++g) steps_.push_back({j, g});
      weights_per_step_.push_back(job.weights_per_step());
      max_chunk = std::max(max_chunk, job.co_count);
      work += groups * (job.window_size() + job.weights_per_step()) + job.active_pes() * job.co_count;
    }
    cycle_limit_ = 4 * work + 16 * cfg_.num_pes + 1024;
    ring_ = cfg_.num_pes + 1;
    wring_.assign(ring_, WeightSlot{});
    rring_.assign(ring_, RequestSlot{});
    pes_.assign(cfg_.num_pes, PeState{});
    for (auto& p : pes_) {
      p.window[0].assign(taps_, Word{});
      p.window[1].assign(taps_, Word{});
      p.psum.assign(max_chunk, Acc{});
      p.out.assign(max_chunk, Acc{});
    }
  }

  /// Jobs 0..n-1 have every read request issued when the drain cursor is at n.
  static std::size_t drained_through(std::size_t drain_job) { return drain_job; }

  void cache_word(std::size_t pe, const InputPayload& p, std::span<const TileJob> jobs) {
    const Step& st = steps_[p.step];
    if (pe >= jobs[st.job].active_pes())
      throw SimulationError("idle PE " + std::to_string(pe) + " selected as receiver");
    PeState& ps = pes_[pe];
    const std::size_t half = double_buffered_ ? p.step % 2 : 0;
    if (ps.window_step[half] < 0) ps.window_step[half] = static_cast<std::ptrdiff_t>(p.step);
    if (ps.window_step[half] != static_cast<std::ptrdiff_t>(p.step))
      throw SimulationError("input buffer half overwritten before it was consumed (PE " + std::to_string(pe) + ")");
    if (ps.window_count[half] >= taps_)
      throw SimulationError("PE " + std::to_string(pe) + " cached more than one window");
    ps.window[half][ps.window_count[half]++] = p.word;
  }

  void apply_weight(std::size_t pe, const WeightSlot& s, std::span<const TileJob> jobs,
                    std::vector<CycleStats>& per_job) {
    PeState& ps = pes_[pe];
    if (s.commit_job >= 0) {
      const TileJob& done = jobs[static_cast<std::size_t>(s.commit_job)];
      if (pe < done.active_pes()) {
        if (ps.out_read != ps.out_count)
          throw SimulationError("commit reached PE " + std::to_string(pe) + " before its output buffer drained");
        for (std::size_t co = 0; co < done.co_count; ++co) {
          ps.out[co] = ps.psum[co];
          ps.psum[co] = Acc{};
        }
        ps.out_count = done.co_count;
        ps.out_read = 0;
        ps.out_job = static_cast<std::size_t>(s.commit_job);
      }
    }
    if (!s.has_weight || pe >= jobs[s.job].active_pes()) return;
    const std::size_t half = double_buffered_ ? s.step % 2 : 0;
    if (ps.window_step[half] != static_cast<std::ptrdiff_t>(s.step) || ps.window_count[half] != taps_)
      throw SimulationError("PE " + std::to_string(pe) + " computing without its input window");
    ps.psum[s.co] = Mode::mac(ps.psum[s.co], ps.window[half][s.tap], s.word);
    ++per_job[s.job].macs_executed;
    if (s.last_of_step) {
      ps.window_count[half] = 0;
      ps.window_step[half] = -1;
    }
  }

  CoreConfig cfg_;
  const typename Mode::InputPlane& input_;
  const typename Mode::Weights& weights_;

  std::size_t taps_ = 0;
  bool double_buffered_ = true;
  std::vector<Step> steps_;
  std::vector<std::size_t> weights_per_step_;
  std::size_t ring_ = 1;
  std::vector<WeightSlot> wring_;
  std::vector<RequestSlot> rring_;
  std::vector<PeState> pes_;
  std::uint64_t cycle_limit_ = 0;
};

// ---------------------------------------------------------------------------
// Tile and layer drivers
// ---------------------------------------------------------------------------

template <class Acc>
struct TileResult {
  Tensor3<Acc> outputs;  ///< CHW, (co_count, tile height, tile width)
  CycleStats stats;
};

template <class Acc>
struct LayerResult {
  Tensor3<Acc> output;  ///< CHW, (c_out, h_out, w_out)
  CycleStats stats;
  std::vector<CycleStats> per_job;
  Schedule schedule;
};

namespace detail {

template <class Mode, class Acc>
TileResult<Acc> run_single_tile(const CoreConfig& core, const TileJob& job, const typename Mode::InputPlane& in,
                                const typename Mode::Weights& w) {
  TileResult<Acc> r;
  r.outputs = Tensor3<Acc>(FeatureLayout::CHW, {job.co_count, job.tile.height, job.tile.width});
  Core<Mode> c(core, in, w);
  const auto res = c.run(std::span<const TileJob>(&job, 1), [&](std::size_t, std::size_t pe, std::size_t co, Acc v) {
    r.outputs(co, pe / job.tile.width, pe % job.tile.width) = v;
  });
  r.stats = res.stats;
  return r;
}

inline void check_padded_input(const TileJob& job, std::size_t channels, std::size_t h, std::size_t w) {
  if (job.window_y + job.window_h() > h || job.window_x + job.window_w() > w)
    throw ShapeError("tile input window exceeds the padded input");
  if (channels < job.layer.c_in_padded()) throw ShapeError("padded input has too few channels");
}

}  // namespace detail

/// Runs one job on an otherwise idle core. `padded_input` is the zero-padded
/// CHW input of the whole layer.
inline TileResult<float> simulate_tile(const CoreConfig& core, const TileJob& job, const Tensor3<float>& padded_input,
                                       const Tensor4<float>& weights) {
  const auto& d = padded_input.dims();
  detail::check_padded_input(job, d[0], d[1], d[2]);
  return detail::run_single_tile<Fp32Mode, float>(core, job, padded_input, weights);
}

/// int8x4 variant; channels of input and weights must be a multiple of four.
inline TileResult<std::int32_t> simulate_tile(const CoreConfig& core, const TileJob& job,
                                              const Tensor3<std::int8_t>& padded_input,
                                              const Tensor4<std::int8_t>& weights) {
  const auto packed = pack_int8(padded_input);
  detail::check_padded_input(job, packed.groups * 4, packed.height, packed.width);
  return detail::run_single_tile<Int8x4Mode, std::int32_t>(core, job, packed, weights);
}

namespace detail {

template <class Mode, class Acc>
LayerResult<Acc> run_layer(const CoreConfig& core, const ConvLayerSpec& spec, const typename Mode::InputPlane& in,
                           const typename Mode::Weights& w) {
  LayerResult<Acc> r;
  r.schedule = build_schedule(spec, core);
  r.output = Tensor3<Acc>(FeatureLayout::CHW, {spec.c_out, spec.h_out(), spec.w_out()});
  const auto& jobs = r.schedule.jobs;
  Core<Mode> c(core, in, w);
  auto res = c.run(jobs, [&](std::size_t j, std::size_t pe, std::size_t co, Acc v) {
    const TileJob& job = jobs[j];
    r.output(job.co_begin + co, job.tile.origin_y + pe / job.tile.width, job.tile.origin_x + pe % job.tile.width) = v;
  });
  r.stats = res.stats;
  r.per_job = std::move(res.per_job);
  return r;
}

template <class In, class W>
void check_layer_inputs(const CoreConfig& core, const ConvLayerSpec& spec, const Tensor3<In>& input,
                        const Tensor4<W>& weights) {
  spec.validate();
  if (core.precision != spec.precision) throw std::invalid_argument("core and layer precision differ");
  if (input.layout() != FeatureLayout::CHW) throw ShapeError("layer input must be CHW");
  if (weights.layout() != WeightLayout::CiKyKxCo) throw ShapeError("layer weights must be CiKyKxCo");
  const auto& d = input.dims();
  if (d[0] != spec.c_in || d[1] != spec.h_in || d[2] != spec.w_in) throw ShapeError("input extents do not match layer");
  const auto& wd = weights.dims();
  if (wd[0] != spec.c_in || wd[1] != spec.k_y || wd[2] != spec.k_x || wd[3] != spec.c_out)
    throw ShapeError("weight extents do not match layer");
}

}  // namespace detail

/// Pads, tiles and runs a whole layer on one core. Jobs run back to back, so
/// one job's output drain overlaps the next job's input and compute.
inline LayerResult<float> simulate_layer(const CoreConfig& core, const ConvLayerSpec& spec,
                                         const Tensor3<float>& input, const Tensor4<float>& weights) {
  detail::check_layer_inputs(core, spec, input, weights);
  const auto padded = pad_input(input, spec.pad);
  return detail::run_layer<Fp32Mode, float>(core, spec, padded, weights);
}

/// int8x4 layer; channels are zero-padded to a multiple of four first.
inline LayerResult<std::int32_t> simulate_layer(const CoreConfig& core, const ConvLayerSpec& spec,
                                                const Tensor3<std::int8_t>& input,
                                                const Tensor4<std::int8_t>& weights) {
  detail::check_layer_inputs(core, spec, input, weights);
  const auto packed = pack_int8(pad_input(pad_channels(input), spec.pad));
  const auto w = pad_weight_channels(weights);
  return detail::run_layer<Int8x4Mode, std::int32_t>(core, spec, packed, w);
}

}  // namespace pe1d
