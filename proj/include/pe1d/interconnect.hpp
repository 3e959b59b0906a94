#pragma once

// Input multicast interconnect.
//
// The PEs of a tile are arranged logically as a tile_h x tile_w grid in
// row-major order along the 1-D array. Every streamed input word travels down
// the array together with a 4-bit command, one PE per cycle. Each receiver
// rewrites the command according to its two state bits (RD: cache the word,
// LS: column 0 of an active row) and caches the word when RD is set after the
// update. The controller picks commands so that the set of caching PEs always
// equals the PEs whose convolution window covers the word.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pe1d {

struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

enum class Command : std::uint8_t {
  NoOp = 0,
  DilateX = 1,
  ErodeX = 2,
  ShiftX = 3,
  RotateY = 4,
  DilateY = 5,
  ErodeY = 6,
  ShiftY = 7,
  ShiftXFwd = 8,   // intermediate of ShiftX
  DilateXFwd = 9,  // intermediate of DilateX
  ErodeXFwd = 10,  // intermediate of ErodeX
  RowFwdA = 11,    // intermediates of DilateY / ShiftY
  RowFwdB = 12,
  Start = 13,
  StartFwd = 14,
};

constexpr std::uint8_t code(Command c) { return static_cast<std::uint8_t>(c); }

inline std::string_view mnemonic(Command c) {
  switch (c) {
    case Command::NoOp: return "NoOp";
    case Command::DilateX: return "DilateX";
    case Command::ErodeX: return "ErodeX";
    case Command::ShiftX: return "ShiftX";
    case Command::RotateY: return "RotateY";
    case Command::DilateY: return "DilateY";
    case Command::ErodeY: return "ErodeY";
    case Command::ShiftY: return "ShiftY";
    case Command::ShiftXFwd: return "ShiftX'";
    case Command::DilateXFwd: return "DilateX'";
    case Command::ErodeXFwd: return "ErodeX'";
    case Command::RowFwdA: return "RowFwdA";
    case Command::RowFwdB: return "RowFwdB";
    case Command::Start: return "Start";
    case Command::StartFwd: return "Start'";
  }
  return "?";
}

inline Command command_from_code(unsigned v) {
  if (v > 14) throw ProtocolError("command code " + std::to_string(v) + " outside 0..14");
  return static_cast<Command>(v);
}

struct ReceiverState {
  bool rd = false;
  bool ls = false;
  bool operator==(const ReceiverState&) const = default;
};

struct ReceiverUpdate {
  ReceiverState state;
  Command out;
};

/// One receiver's reaction to an incoming command. Pairs that have no entry
/// in the transition table forward the command and keep the state.
///
/// One pair is added to the table: an ErodeX intermediate reaching the
/// column-0 PE of an active row whose RD is still set re-arms the erosion
/// there. It only occurs when an active row spans the whole tile width, so
/// the next row's first active PE directly follows the previous row's last.
constexpr ReceiverUpdate receiver_step(ReceiverState s, Command in) {
  using C = Command;
  switch (in) {
    case C::Start: return {{true, true}, C::StartFwd};
    case C::StartFwd: return {{false, false}, C::StartFwd};
    case C::ShiftX:
      if (s.rd) return {{false, s.ls}, C::ShiftXFwd};
      break;
    case C::ShiftXFwd:
      if (!s.rd) return {{true, s.ls}, C::ShiftX};
      break;
    case C::DilateX:
      if (s.rd) return {{true, s.ls}, C::DilateXFwd};
      break;
    case C::DilateXFwd:
      if (!s.rd) return {{true, s.ls}, C::DilateX};
      break;
    case C::ErodeX:
      if (s.rd) return {{false, s.ls}, C::ErodeXFwd};
      break;
    case C::ErodeXFwd:
      if (!s.rd) return {{false, s.ls}, C::ErodeX};
      if (s.ls) return {{false, s.ls}, C::ErodeXFwd};
      break;
    case C::RotateY: return {{s.ls, s.ls}, C::RotateY};
    case C::ErodeY:
      if (s.ls) return {{s.rd, false}, C::RotateY};
      break;
    case C::ShiftY:
      if (s.ls) return {{s.rd, false}, C::RowFwdA};
      break;
    case C::RowFwdA:
      if (s.rd) return {{false, s.ls}, C::RowFwdB};
      break;
    case C::RowFwdB:
      if (!s.rd) return {{true, true}, C::RowFwdA};
      break;
    case C::DilateY:
      if (s.ls) return {{true, s.ls}, C::RowFwdA};
      break;
    case C::NoOp: break;
  }
  return {s, in};
}

// ---------------------------------------------------------------------------
// Geometry and the receiver-set oracle
// ---------------------------------------------------------------------------

/// Tile shape plus kernel, enough to describe which PEs need which input.
/// Input coordinates are relative to the tile's input window.
struct WindowGeometry {
  std::size_t tile_h = 1;
  std::size_t tile_w = 1;
  std::size_t k_y = 1;
  std::size_t k_x = 1;
  std::size_t stride = 1;

  std::size_t pes() const { return tile_h * tile_w; }
  std::size_t window_h() const { return (tile_h - 1) * stride + k_y; }
  std::size_t window_w() const { return (tile_w - 1) * stride + k_x; }
  std::size_t window_size() const { return window_h() * window_w(); }

  void validate() const {
    if (tile_h == 0 || tile_w == 0 || k_y == 0 || k_x == 0)
      throw std::invalid_argument("window geometry extents must be >= 1");
    if (stride != 1 && stride != 2)
      throw ProtocolError("input multicast protocol supports stride 1 or 2 only");
  }

  bool operator==(const WindowGeometry&) const = default;
};

/// Closed interval of output indices whose window covers input index `i`
/// along one axis; empty when lo > hi.
struct AxisSpan {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
  bool empty() const { return lo > hi; }
  bool operator==(const AxisSpan&) const = default;
};

inline AxisSpan covering_outputs(std::size_t i, std::size_t k, std::size_t stride, std::size_t extent) {
  // o * stride <= i <= o * stride + k - 1
  const auto ii = static_cast<std::ptrdiff_t>(i);
  const auto kk = static_cast<std::ptrdiff_t>(k);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t num = ii - kk + 1;
  std::ptrdiff_t lo = num <= 0 ? 0 : (num + s - 1) / s;
  std::ptrdiff_t hi = std::min<std::ptrdiff_t>(ii / s, static_cast<std::ptrdiff_t>(extent) - 1);
  return {lo, hi};
}

/// PEs (row-major over the tile) that must cache window input (iy, ix).
inline std::vector<std::size_t> oracle_receivers(const WindowGeometry& g, std::size_t iy, std::size_t ix) {
  if (iy >= g.window_h() || ix >= g.window_w())
    throw std::out_of_range("input (" + std::to_string(iy) + "," + std::to_string(ix) +
                            ") outside the tile's input window");
  const auto rows = covering_outputs(iy, g.k_y, g.stride, g.tile_h);
  const auto cols = covering_outputs(ix, g.k_x, g.stride, g.tile_w);
  std::vector<std::size_t> out;
  for (auto r = rows.lo; r <= rows.hi; ++r)
    for (auto c = cols.lo; c <= cols.hi; ++c)
      out.push_back(static_cast<std::size_t>(r) * g.tile_w + static_cast<std::size_t>(c));
  return out;
}

// ---------------------------------------------------------------------------
// Controller-side command generation
// ---------------------------------------------------------------------------

struct StreamEntry {
  Command cmd;
  std::uint16_t iy;
  std::uint16_t ix;
  bool valid;  ///< false for inputs no PE needs (stride larger than the kernel)
  bool operator==(const StreamEntry&) const = default;
};

namespace detail {

/// Whole-chain effect of one command, applied PE by PE in order.
inline void apply_command(std::vector<ReceiverState>& chain, Command c) {
  for (auto& s : chain) {
    const auto u = receiver_step(s, c);
    s = u.state;
    c = u.out;
  }
}

inline bool rd_matches(const std::vector<ReceiverState>& chain, const WindowGeometry& g,
                       AxisSpan rows, AxisSpan cols) {
  for (std::size_t r = 0; r < g.tile_h; ++r)
    for (std::size_t c = 0; c < g.tile_w; ++c) {
      const auto rr = static_cast<std::ptrdiff_t>(r), cc = static_cast<std::ptrdiff_t>(c);
      const bool want = rr >= rows.lo && rr <= rows.hi && cc >= cols.lo && cc <= cols.hi;
      if (chain[r * g.tile_w + c].rd != want) return false;
    }
  // PEs past the tile are idle and must never cache.
  for (std::size_t i = g.pes(); i < chain.size(); ++i)
    if (chain[i].rd) return false;
  return true;
}

}  // namespace detail

/// Single-column tiles stream their window column by column. Row-major they
/// would need a whole-row erosion that no single command performs, but an
/// H x 1 tile sits on the same PEs as a 1 x H tile, whose rows are easy.
inline bool streams_by_column(const WindowGeometry& g) { return g.tile_w == 1 && g.tile_h > 1; }

/// Slot of kernel tap (ky, kx) in a PE's input window, i.e. its arrival order.
inline std::size_t window_slot(const WindowGeometry& g, std::size_t ky, std::size_t kx) {
  return streams_by_column(g) ? kx * g.k_y + ky : ky * g.k_x + kx;
}

namespace detail {

/// Row transitions try the Y commands first; within a row only the X
/// commands are candidates. The first candidate (in that order) whose effect
/// on the receiver chain reproduces the oracle set is emitted.
inline std::vector<StreamEntry> generate_row_major(const WindowGeometry& g) {
  using C = Command;
  static constexpr C kRowCandidates[] = {C::RotateY, C::DilateY, C::ErodeY, C::ShiftY,
                                         C::NoOp,    C::DilateX, C::ErodeX, C::ShiftX};
  static constexpr C kColCandidates[] = {C::NoOp, C::DilateX, C::ErodeX, C::ShiftX};

  // Model a run of idle PEs behind the tile as well; a longer physical chain
  // behaves like this one since idle receivers only forward.
  std::vector<ReceiverState> chain(2 * g.pes() + 2);
  std::vector<StreamEntry> out;
  out.reserve(g.window_size());

  for (std::size_t iy = 0; iy < g.window_h(); ++iy) {
    const auto rows = covering_outputs(iy, g.k_y, g.stride, g.tile_h);
    for (std::size_t ix = 0; ix < g.window_w(); ++ix) {
      const auto cols = covering_outputs(ix, g.k_x, g.stride, g.tile_w);
      const auto y16 = static_cast<std::uint16_t>(iy), x16 = static_cast<std::uint16_t>(ix);
      if (iy == 0 && ix == 0) {
        detail::apply_command(chain, C::Start);
        out.push_back({C::Start, y16, x16, true});
        continue;
      }
      if (rows.empty() || cols.empty()) {
        out.push_back({C::NoOp, y16, x16, false});
        continue;
      }
      const bool row_start = ix == 0;
      std::optional<C> chosen;
      auto try_candidates = [&](const auto& candidates) {
        for (C c : candidates) {
          auto trial = chain;
          detail::apply_command(trial, c);
          if (detail::rd_matches(trial, g, rows, cols)) {
            chosen = c;
            chain = std::move(trial);
            return;
          }
        }
      };
      if (row_start) try_candidates(kRowCandidates);
      else try_candidates(kColCandidates);
      if (!chosen)
        throw ProtocolError("no command reproduces the receiver set at input (" + std::to_string(iy) +
                            "," + std::to_string(ix) + ") for tile " + std::to_string(g.tile_h) + "x" +
                            std::to_string(g.tile_w) + ", kernel " + std::to_string(g.k_y) + "x" +
                            std::to_string(g.k_x) + ", stride " + std::to_string(g.stride));
      out.push_back({*chosen, y16, x16, true});
    }
  }
  return out;
}

}  // namespace detail

/// One command per input word of the tile's input window, in stream order.
inline std::vector<StreamEntry> generate_command_stream(const WindowGeometry& g) {
  g.validate();
  if (!streams_by_column(g)) return detail::generate_row_major(g);
  auto out = detail::generate_row_major({g.tile_w, g.tile_h, g.k_x, g.k_y, g.stride});
  for (auto& e : out) std::swap(e.iy, e.ix);
  return out;
}

/// Text dump, one line per injection cycle: cycle code mnemonic (y,x).
/// Inputs nobody needs are marked "bubble".
inline void write_command_stream(std::ostream& os, const std::vector<StreamEntry>& stream) {
  for (std::size_t c = 0; c < stream.size(); ++c) {
    const auto& e = stream[c];
    os << c << ' ' << int(code(e.cmd)) << ' ' << mnemonic(e.cmd) << " (" << e.iy << ',' << e.ix << ')'
       << (e.valid ? "" : " bubble") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cycle-level receiver chain
// ---------------------------------------------------------------------------

template <class Payload>
struct Bundle {
  Command cmd = Command::NoOp;
  bool valid = false;
  Payload payload{};
};

/// Pipelined chain of receivers. A bundle injected in cycle t is handled by
/// PE j in cycle t + j; each PE holds one pipeline register, so a PE sees at
/// most one command per cycle.
template <class Payload>
class ReceiverChain {
 public:
  explicit ReceiverChain(std::size_t length) : states_(length), links_(length) {}

  std::size_t length() const { return states_.size(); }
  const ReceiverState& state(std::size_t pe) const { return states_[pe]; }
  bool idle() const { return in_flight_ == 0; }

  /// Advances one cycle. `on_cache(pe, payload)` fires for every PE that
  /// caches a valid word this cycle.
  template <class OnCache>
  void tick(std::optional<Bundle<Payload>> inject, OnCache&& on_cache) {
    if (!states_.empty() && inject) {
      links_[0] = std::move(inject);
      ++in_flight_;
    }
    if (in_flight_ == 0) return;
    for (std::size_t j = states_.size(); j-- > 0;) {
      if (!links_[j]) continue;
      Bundle<Payload> b = std::move(*links_[j]);
      links_[j].reset();
      const auto u = receiver_step(states_[j], b.cmd);
      states_[j] = u.state;
      if (u.state.rd && b.valid) on_cache(j, std::as_const(b.payload));
      if (j + 1 < states_.size()) {
        b.cmd = u.out;
        links_[j + 1] = std::move(b);
      } else {
        --in_flight_;
      }
    }
  }

 private:
  std::vector<ReceiverState> states_;
  std::vector<std::optional<Bundle<Payload>>> links_;
  std::size_t in_flight_ = 0;
};

}  // namespace pe1d
