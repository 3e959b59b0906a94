// pe1d: command-line front end for the 1-D PE array model.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>

#include "CLI11.hpp"
#include "pe1d/pe1d.hpp"

using namespace pe1d;

namespace {

struct CoreArgs {
  std::size_t pes = 16;
  std::string precision = "fp32";
  std::string subtile = "fill";
  double clock_mhz = 250.0;
  std::size_t input_buffer = 32;
  std::size_t psum_buffer = 512;
  std::size_t output_buffer = 512;

  void add_to(CLI::App* app) {
    app->add_option("--pes", pes, "PEs in the core")->check(CLI::PositiveNumber);
    app->add_option("--precision", precision, "fp32 or int8x4");
    app->add_option("--subtile", subtile, "remainder strip cutting: fill or cap");
    app->add_option("--clock", clock_mhz, "clock in MHz");
    app->add_option("--input-buffer", input_buffer, "input FIFO entries per PE");
    app->add_option("--psum-buffer", psum_buffer, "psum entries per PE");
    app->add_option("--output-buffer", output_buffer, "output buffer entries per PE");
  }

  CoreConfig core() const {
    CoreConfig c;
    c.num_pes = pes;
    c.precision = parse_precision(precision);
    c.subtile = parse_subtile_policy(subtile);
    c.clock_mhz = clock_mhz;
    c.input_buffer_entries = input_buffer;
    c.psum_buffer_entries = psum_buffer;
    c.output_buffer_entries = output_buffer;
    c.validate();
    return c;
  }
};

/// CIxCOxHxW[xK[xS[xP]]]; H and W are input extents. Pad defaults to K/2 when
/// that gives an integer output, else 0.
ConvLayerSpec parse_layer(const std::string& text, Precision precision) {
  static const std::regex re(R"((\d+)x(\d+)x(\d+)x(\d+)(?:x(\d+)(?:x(\d+)(?:x(\d+))?)?)?)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw std::invalid_argument("layer must look like CIxCOxHxW[xK[xS[xP]]]");
  auto num = [&](int i, std::size_t dflt) { return m[i].matched ? std::stoul(m[i].str()) : dflt; };
  ConvLayerSpec s;
  s.c_in = num(1, 1);
  s.c_out = num(2, 1);
  s.h_in = num(3, 1);
  s.w_in = num(4, 1);
  s.k_y = s.k_x = num(5, 1);
  s.stride = num(6, 1);
  s.pad = num(7, s.k_y / 2);
  s.precision = precision;
  if (!m[7].matched) {
    try {
      s.validate();
    } catch (const ShapeError&) {
      s.pad = 0;
    }
  }
  s.validate();
  return s;
}

void write_or_print(const std::string& path, const json& j) {
  if (path.empty() || path == "-") std::cout << j.dump(2) << '\n';
  else write_json_file(path, j);
}

struct SimulateArgs {
  std::string config;
  std::string layer;
  std::string input_path, weights_path;
  std::string output_path, stats_path;
  bool verify = false;
  std::uint64_t seed = 1;
};

template <class T, class Acc>
int run_simulate(const SimulateArgs& a, const CoreConfig& core, const ConvLayerSpec& spec, const json& doc) {
  auto load3 = [&](const std::string& key, const std::string& path) -> std::optional<Tensor3<T>> {
    if (!path.empty()) return tensor3_from_json<T>(read_json_file(path));
    if (doc.contains(key)) return tensor3_from_json<T>(doc.at(key));
    return std::nullopt;
  };
  auto load4 = [&](const std::string& key, const std::string& path) -> std::optional<Tensor4<T>> {
    if (!path.empty()) return tensor4_from_json<T>(read_json_file(path));
    if (doc.contains(key)) return tensor4_from_json<T>(doc.at(key));
    return std::nullopt;
  };
  auto in = load3("input", a.input_path);
  auto w = load4("weights", a.weights_path);
  if (!in) {
    in = Tensor3<T>(FeatureLayout::CHW, {spec.c_in, spec.h_in, spec.w_in});
    fill_random(*in, a.seed);
  }
  if (!w) {
    w = Tensor4<T>(WeightLayout::CiKyKxCo, {spec.c_in, spec.k_y, spec.k_x, spec.c_out});
    fill_random(*w, a.seed ^ 0x5bd1e995u);
  }
  if (in->layout() == FeatureLayout::WHC) in = transform_features(*in);
  if (w->layout() == WeightLayout::KyKxCiCo) w = transform_weights(*w);

  const auto res = simulate_layer(core, spec, *in, *w);
  json stats = stats_to_json(res.stats, core.clock_mhz);
  stats["tiles"] = res.schedule.tile_count;
  stats["jobs"] = res.schedule.jobs.size();
  int rc = 0;
  if (a.verify) {
    bool same;
    if constexpr (std::is_same_v<T, float>) {
      same = res.output == conv2d_reference(*in, *w, spec);
    } else {
      auto padded = spec;
      padded.c_in = spec.c_in_padded();
      same = res.output == conv2d_reference(pad_channels(*in), pad_weight_channels(*w), padded);
    }
    stats["verified"] = same;
    std::cerr << (same ? "verify: pass\n" : "verify: FAIL (output differs from reference)\n");
    rc = same ? 0 : 1;
  }
  if (!a.output_path.empty()) write_json_file(a.output_path, tensor_to_json(res.output));
  write_or_print(a.stats_path, stats);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pe1d: 1-D PE array convolution core model"};
  app.require_subcommand(1);

  // simulate
  SimulateArgs sim;
  CoreArgs sim_core;
  auto* simulate = app.add_subcommand("simulate", "cycle-level run of one layer");
  simulate->add_option("--config", sim.config, "JSON with layer fields, core fields, optional input/weights");
  simulate->add_option("--layer", sim.layer, "CIxCOxHxW[xK[xS[xP]]]");
  simulate->add_option("--input", sim.input_path, "input tensor fixture");
  simulate->add_option("--weights", sim.weights_path, "weight tensor fixture");
  simulate->add_option("--output", sim.output_path, "write output tensor fixture here");
  simulate->add_option("--stats", sim.stats_path, "write stats JSON here (default stdout)");
  simulate->add_flag("--verify", sim.verify, "compare with the reference convolution");
  simulate->add_option("--seed", sim.seed, "seed for generated tensors");
  sim_core.add_to(simulate);

  // analyze
  std::string an_layer, an_config, an_preset;
  bool an_width_sq = false;
  std::size_t an_scale = 1;
  CoreArgs an_core;
  auto* analyze = app.add_subcommand("analyze", "closed-form utilization and cycle estimate (CSV)");
  analyze->add_option("--layer", an_layer, "CIxCOxHxW[xK[xS[xP]]]");
  analyze->add_option("--config", an_config, "JSON layer/core document");
  analyze->add_option("--preset", an_preset, "workload preset (vgg16)");
  analyze->add_option("--channel-scale", an_scale, "divide channel counts by this factor");
  analyze->add_flag("--width-squared", an_width_sq, "input read time as W_i^2");
  an_core.add_to(analyze);

  // tile
  std::size_t tile_h = 0, tile_w = 0;
  CoreArgs tile_core;
  auto* tile = app.add_subcommand("tile", "output-plane tiling (CSV)");
  tile->add_option("--height", tile_h, "output height")->required();
  tile->add_option("--width", tile_w, "output width")->required();
  tile_core.add_to(tile);

  // commands
  std::size_t cmd_h = 1, cmd_w = 1, cmd_k = 1, cmd_kx = 0, cmd_stride = 1;
  auto* commands = app.add_subcommand("commands", "input multicast command stream of one tile");
  commands->add_option("--tile-h", cmd_h, "tile height")->required();
  commands->add_option("--tile-w", cmd_w, "tile width")->required();
  commands->add_option("--k", cmd_k, "kernel height (and width)");
  commands->add_option("--kx", cmd_kx, "kernel width if different");
  commands->add_option("--stride", cmd_stride, "stride (1 or 2)");

  // verify
  std::uint64_t ver_seed = 1;
  std::size_t ver_count = 50;
  auto* verify = app.add_subcommand("verify", "randomized simulator-vs-reference sweep");
  verify->add_option("--seed", ver_seed, "sweep seed");
  verify->add_option("--count", ver_count, "number of random layers");

  // vgg16
  CoreArgs vgg_core;
  bool vgg_analyze = false, vgg_simulate = false, vgg_both = false, vgg_verify = false, vgg_width_sq = false;
  std::size_t vgg_scale = 1;
  std::string vgg_csv, vgg_json;
  auto* vgg = app.add_subcommand("vgg16", "VGG-16 convolution layers");
  vgg_core.add_to(vgg);
  vgg->add_flag("--analyze", vgg_analyze, "closed-form model only (default)");
  vgg->add_flag("--simulate", vgg_simulate, "cycle-level simulation");
  vgg->add_flag("--both", vgg_both, "simulation plus model columns");
  vgg->add_flag("--verify", vgg_verify, "check simulated outputs against the reference");
  vgg->add_flag("--width-squared", vgg_width_sq, "input read time as W_i^2");
  vgg->add_option("--channel-scale", vgg_scale, "divide channel counts by this factor");
  vgg->add_option("--csv", vgg_csv, "write the report CSV here (default stdout)");
  vgg->add_option("--json", vgg_json, "also write the report as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      json doc = sim.config.empty() ? json::object() : read_json_file(sim.config);
      CoreConfig core = sim_core.core();
      core = core_from_json(doc, core);
      ConvLayerSpec spec;
      if (!sim.layer.empty()) spec = parse_layer(sim.layer, core.precision);
      else if (doc.contains("c_in")) spec = layer_from_json(doc);
      else throw std::invalid_argument("simulate needs --layer or a --config with layer fields");
      if (!doc.contains("precision")) spec.precision = core.precision;
      core.precision = spec.precision;
      if (core.precision == Precision::fp32) return run_simulate<float, float>(sim, core, spec, doc);
      return run_simulate<std::int8_t, std::int32_t>(sim, core, spec, doc);
    }

    if (*analyze) {
      CoreConfig core = an_core.core();
      WorkloadPreset preset{"layer", {}};
      if (an_preset == "vgg16") {
        preset = vgg16(core.precision);
      } else if (!an_preset.empty()) {
        throw std::invalid_argument("unknown preset '" + an_preset + "'");
      } else if (!an_layer.empty()) {
        preset.layers.push_back({an_layer, parse_layer(an_layer, core.precision)});
      } else if (!an_config.empty()) {
        const auto doc = read_json_file(an_config);
        core = core_from_json(doc, core);
        preset.layers.push_back({"layer", layer_from_json(doc)});
      } else {
        throw std::invalid_argument("analyze needs --layer, --config or --preset");
      }
      RunOptions opt;
      opt.channel_scale = an_scale;
      opt.analytics.width_squared = an_width_sq;
      const auto rep = run_workload(preset, core, opt);
      write_analyze_csv(std::cout, rep);
      for (const auto& l : rep.layers)
        if (!l.error.empty()) std::cerr << l.name << ": " << l.error << '\n';
      return rep.ok() ? 0 : 2;
    }

    if (*tile) {
      const CoreConfig core = tile_core.core();
      std::cout << "kind,origin_y,origin_x,height,width,pixels\n";
      for (const auto& t : tile_output_plane(tile_h, tile_w, core.num_pes, core.subtile))
        std::cout << to_string(t.kind) << ',' << t.origin_y << ',' << t.origin_x << ',' << t.height << ','
                  << t.width << ',' << t.pixels() << '\n';
      return 0;
    }

    if (*commands) {
      const WindowGeometry g{cmd_h, cmd_w, cmd_k, cmd_kx ? cmd_kx : cmd_k, cmd_stride};
      write_command_stream(std::cout, generate_command_stream(g));
      return 0;
    }

    if (*verify) {
      const auto s = verify_sweep(ver_seed, ver_count);
      std::cout << "verify seed=" << ver_seed << " count=" << ver_count << ": " << s.passed << " passed, "
                << s.failed << " failed\n";
      if (s.minimal_failure)
        std::cout << "minimal failing layer: " << describe(*s.minimal_failure) << " (" << s.failure_message << ")\n";
      return s.ok() ? 0 : 1;
    }

    if (*vgg) {
      const CoreConfig core = vgg_core.core();
      RunOptions opt;
      opt.mode = vgg_both ? RunMode::both : vgg_simulate ? RunMode::simulate : RunMode::analyze;
      opt.verify = vgg_verify;
      opt.channel_scale = vgg_scale;
      opt.analytics.width_squared = vgg_width_sq;
      const auto rep = run_workload(vgg16(core.precision), core, opt);
      if (vgg_csv.empty() || vgg_csv == "-") {
        write_report_csv(std::cout, rep);
      } else {
        std::ofstream out(vgg_csv);
        if (!out) throw std::runtime_error("cannot write '" + vgg_csv + "'");
        write_report_csv(out, rep);
      }
      if (!vgg_json.empty()) write_json_file(vgg_json, report_to_json(rep));
      for (const auto& l : rep.layers)
        if (!l.error.empty()) std::cerr << l.name << ": " << l.error << '\n';
      return rep.ok() ? 0 : 2;
    }
  } catch (const UnschedulableError& e) {
    std::cerr << "unschedulable: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
