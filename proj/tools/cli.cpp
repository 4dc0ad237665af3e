#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <charconv>
#include <filesystem>
#include <optional>
#include <system_error>
#include <utility>

#include "utv/utv.hpp"

namespace utv::cli {
namespace {

namespace fs = std::filesystem;

/// Parameter validation failed before any computation; exit 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Buffers every output file and writes them only once the whole command
/// has succeeded. A failure while committing removes what was written.
class PendingOutputs {
 public:
  void add(std::string path, Bytes bytes) {
    files_.emplace_back(std::move(path), std::move(bytes));
  }

  void commit() {
    std::vector<fs::path> staged;
    std::vector<fs::path> done;
    try {
      for (const auto& [path, bytes] : files_) {
        fs::path tmp = path + ".utv-partial";
        staged.push_back(tmp);
        detail::write_file(tmp, bytes);
      }
      for (std::size_t n = 0; n < files_.size(); ++n) {
        fs::rename(staged[n], files_[n].first);
        done.emplace_back(files_[n].first);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : staged) fs::remove(p, ec);
      for (const auto& p : done) fs::remove(p, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, Bytes>> files_;
};

struct SolverFlags {
  std::size_t iterations = 8;
  double rho = 2.0;
  std::string rho_mode = "constant";
  double rho_factor = 1.0;
  double lambda_scale = 1.0;
  std::string map_path;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--iters", iterations, "Unrolled ADMM iterations K")->capture_default_str();
    cmd->add_option("--rho", rho, "Initial ADMM penalty rho0")->capture_default_str();
    cmd->add_option("--rho-mode", rho_mode, "Penalty schedule: constant or geometric")
        ->capture_default_str();
    cmd->add_option("--rho-factor", rho_factor, "Per-iteration factor for geometric schedule")
        ->capture_default_str();
    cmd->add_option("--lambda-scale", lambda_scale, "Multiplier applied to every map entry")
        ->capture_default_str();
    cmd->add_option("--map", map_path,
                    "UTVM map stack; residual stacks are added to the estimated noise level, "
                    "activated stacks are used directly");
  }

  SolverConfig config() const {
    try {
      const RhoMode mode = parse_rho_mode(rho_mode);
      return SolverConfig::make(iterations, rho, mode, rho_factor, lambda_scale);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
};

struct EmitFlags {
  std::string out;
  std::string smooth;
  std::string detail;
  std::string detail_raw;
  std::string map;
  std::string trace;
  int bit_depth = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--out", out, "Output PNG")->required();
    cmd->add_option("--emit-smooth", smooth, "Write the smooth layer y_s as PNG");
    cmd->add_option("--emit-detail", detail,
                    "Write the detail layer y - y_s as PNG, offset-encoded as 0.5 + detail");
    cmd->add_option("--emit-detail-raw", detail_raw,
                    "Write the detail layer losslessly as a one-slice UTVM residual stack");
    cmd->add_option("--emit-map", map, "Write the balancing map stack used (UTVM)");
    cmd->add_option("--trace", trace, "Write per-iteration CSV k,objective,primal_residual");
    cmd->add_option("--bit-depth", bit_depth, "PNG bit depth 8 or 16 (default: input depth)");
  }

  void validate() const {
    if (bit_depth != 0 && bit_depth != 8 && bit_depth != 16)
      throw UsageError("--bit-depth must be 8 or 16");
  }

  int depth_for(const ImageFile& input) const {
    return bit_depth == 0 ? input.bit_depth : bit_depth;
  }
};

std::string format_value(double v) { return fmt::format("{:.6f}", v); }

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

Bytes trace_csv(const std::vector<IterationRecord>& trace) {
  std::string s = "k,objective,primal_residual\n";
  for (const auto& r : trace)
    s += fmt::format("{},{:.17g},{:.17g}\n", r.k, r.objective, r.primal_residual);
  return to_bytes(s);
}

PlanarImage offset_detail(const PlanarImage& detail) {
  PlanarImage out = detail;
  for (double& v : out.values()) v += 0.5;
  return out;
}

NoiseMapStack detail_as_stack(const PlanarImage& detail) {
  NoiseMapStack s(1, detail.extent(), MapKind::Residual);
  auto dst = s.values();
  const auto src = detail.values();
  for (std::size_t n = 0; n < src.size(); ++n) dst[n] = static_cast<float>(src[n]);
  return s;
}

std::optional<NoiseMapStack> load_optional_map(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_map_stack(path);
}

void queue_layers(PendingOutputs& outputs, const EmitFlags& emit, int depth,
                  const PlanarImage& smooth, const PlanarImage& detail,
                  const NoiseMapStack& maps, const std::vector<IterationRecord>& trace) {
  if (!emit.smooth.empty()) outputs.add(emit.smooth, encode_png(smooth, depth));
  if (!emit.detail.empty()) outputs.add(emit.detail, encode_png(offset_detail(detail), depth));
  if (!emit.detail_raw.empty())
    outputs.add(emit.detail_raw, encode_map_stack(detail_as_stack(detail)));
  if (!emit.map.empty()) outputs.add(emit.map, encode_map_stack(maps));
  if (!emit.trace.empty()) outputs.add(emit.trace, trace_csv(trace));
}

std::string epsilon_line(const GlobalNoiseVariation& eps) {
  if (eps.channels() == 3)
    return fmt::format("epsilon r={} g={} b={}", format_value(eps[0]), format_value(eps[1]),
                       format_value(eps[2]));
  std::string s = "epsilon";
  if (eps.channels() == 1) return s + " gray=" + format_value(eps[0]);
  for (std::size_t c = 0; c < eps.channels(); ++c)
    s += fmt::format(" c{}={}", c, format_value(eps[c]));
  return s;
}

EnhanceConfig parse_enhance(const std::string& gain, double target, double cap, double alpha) {
  EnhanceConfig cfg;
  if (gain == "auto") {
    cfg.gain_mode = GainMode::Auto;
  } else {
    double g = 0.0;
    const char* first = gain.data();
    const char* last = first + gain.size();
    auto [ptr, ec] = std::from_chars(first, last, g);
    if (ec != std::errc() || ptr != last)
      throw UsageError("--gain must be 'auto' or a positive number, got '" + gain + "'");
    cfg.gain_mode = GainMode::Fixed;
    cfg.fixed_gain = g;
  }
  cfg.target_luma = target;
  cfg.gain_cap = cap;
  cfg.detail_alpha = alpha;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive unfolded total-variation denoising and low-light enhancement", "utv"};
  app.require_subcommand(1);
  app.footer(
      "Exit status: 0 success, 1 usage error, 2 runtime error.\n"
      "Detail-layer PNGs store 0.5 + (y - y_s), clamped to [0,1]; use --emit-detail-raw\n"
      "for a lossless float copy.");

  std::string input;
  std::string second;

  auto* estimate = app.add_subcommand("estimate", "Estimate per-channel noise level");
  std::string est_out;
  std::size_t est_iters = 8;
  double est_scale = 1.0;
  estimate->add_option("input", input, "Input image (PNG or binary PGM/PPM)")->required();
  estimate->add_option("--out", est_out, "Write the assembled activated map stack (UTVM)");
  estimate->add_option("--iters", est_iters, "Iterations K in the written stack")
      ->capture_default_str();
  estimate->add_option("--lambda-scale", est_scale, "Multiplier applied to every map entry")
      ->capture_default_str();

  auto* denoise = app.add_subcommand("denoise", "Adaptive TV smoothing; writes y_s");
  SolverFlags den_solver;
  EmitFlags den_emit;
  denoise->add_option("input", input, "Input image (PNG or binary PGM/PPM)")->required();
  den_solver.add_to(denoise);
  den_emit.add_to(denoise);

  auto* enhance_cmd = app.add_subcommand("enhance", "Smoothing, luminance gain and detail suppression");
  SolverFlags enh_solver;
  EmitFlags enh_emit;
  std::string gain = "auto";
  double target_luma = 0.4;
  double gain_cap = 32.0;
  double detail_alpha = 1.0;
  enhance_cmd->add_option("input", input, "Input image (PNG or binary PGM/PPM)")->required();
  enh_solver.add_to(enhance_cmd);
  enh_emit.add_to(enhance_cmd);
  enhance_cmd->add_option("--gain", gain, "'auto' or a fixed positive gain")->capture_default_str();
  enhance_cmd->add_option("--target-luma", target_luma, "Auto-gain target mean luminance")
      ->capture_default_str();
  enhance_cmd->add_option("--gain-cap", gain_cap, "Upper bound on the auto gain")
      ->capture_default_str();
  enhance_cmd->add_option("--detail-alpha", detail_alpha,
                          "Detail threshold as a multiple of the mean map")
      ->capture_default_str();

  auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  metrics->add_option("a", input, "First image")->required();
  metrics->add_option("b", second, "Second image")->required();

  std::vector<const char*> argv{"utv"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "utv: error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    PendingOutputs outputs;
    std::string stdout_text;

    if (estimate->parsed()) {
      if (est_iters == 0) throw UsageError("--iters must be >= 1");
      if (!(est_scale >= 0.0) || !std::isfinite(est_scale))
        throw UsageError("--lambda-scale must be non-negative");
      const PlanarImage y = load_image(input);
      const GlobalNoiseVariation eps = estimate_global_noise(y);
      stdout_text = epsilon_line(eps) + "\n";
      if (!est_out.empty())
        outputs.add(est_out,
                    encode_map_stack(assemble_maps(eps, y.height(), y.width(), est_iters, est_scale)));
    } else if (denoise->parsed()) {
      const SolverConfig cfg = den_solver.config();
      den_emit.validate();
      const ImageFile in = read_image_file(input);
      const auto external = load_optional_map(den_solver.map_path);
      const NoiseMapStack maps =
          build_maps(in.image, external ? &*external : nullptr, cfg.iterations, cfg.lambda_scale);
      TvSolution tv = solve_tv(in.image, maps, cfg);
      const int depth = den_emit.depth_for(in);
      const PlanarImage detail = decompose(in.image, tv.smooth);
      outputs.add(den_emit.out, encode_png(tv.smooth, depth));
      queue_layers(outputs, den_emit, depth, tv.smooth, detail, maps, tv.trace);
    } else if (enhance_cmd->parsed()) {
      const SolverConfig cfg = enh_solver.config();
      enh_emit.validate();
      const EnhanceConfig ecfg = parse_enhance(gain, target_luma, gain_cap, detail_alpha);
      const ImageFile in = read_image_file(input);
      const auto external = load_optional_map(enh_solver.map_path);
      EnhanceResult r = enhance_detailed(in.image, ecfg, cfg, external ? &*external : nullptr);
      const int depth = enh_emit.depth_for(in);
      outputs.add(enh_emit.out, encode_png(r.output, depth));
      queue_layers(outputs, enh_emit, depth, r.smooth, r.detail, r.maps, r.trace);
      stdout_text = "gain=" + format_value(r.gain) + "\n";
    } else if (metrics->parsed()) {
      const PlanarImage a = load_image(input);
      const PlanarImage b = load_image(second);
      const MetricReport m = compare(a, b);
      const std::string p = m.psnr.is_infinite() ? "inf" : fmt::format("{:.4f}", m.psnr.db());
      stdout_text = fmt::format("psnr={} ssim={:.4f}\n", p, m.ssim);
    }

    outputs.commit();
    out << stdout_text;
    return kSuccess;
  } catch (const UsageError& e) {
    err << "utv: error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "utv: error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace utv::cli
