#include "siren2/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "siren2/diagnostics.hpp"
#include "siren2/spectral.hpp"

namespace siren2::cli {

using nlohmann::json;

const char* to_string(Command command) {
  switch (command) {
    case Command::Fit:
      return "fit";
    case Command::Denoise:
      return "denoise";
    case Command::Analyze:
      return "analyze";
    case Command::Synth:
      return "synth";
    case Command::Sweep:
      return "sweep";
  }
  return "fit";
}

namespace {

Command command_from_string(const std::string& name) {
  for (auto c : {Command::Fit, Command::Denoise, Command::Analyze, Command::Synth, Command::Sweep})
    if (name == to_string(c)) return c;
  throw UsageError("unknown command: " + name);
}

WinnerHyper preset_hyper(const std::string& name) {
  if (name == "audio") return WinnerHyper::audio();
  if (name == "image") return WinnerHyper::image();
  throw UsageError("unknown hyperparameter preset: " + name + " (expected audio or image)");
}

json optional_number(const std::optional<NoiseScales>& s, bool first) {
  if (!s) return nullptr;
  return first ? s->s0 : s->s1;
}

// Reads `json[key]` into `out` if present, mapping type errors to UsageError.
template <typename T>
void read_key(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok |= key == k;
    if (!ok) throw UsageError("unknown config key '" + key + "' in " + where);
  }
}

}  // namespace

json RunConfig::to_json() const {
  json out;
  out["command"] = to_string(command);
  out["input"] = input.string();
  out["params"] = params_path.string();
  out["out"] = out_dir.string();
  out["seed"] = seed;
  out["hyper_preset"] = hyper_preset;
  out["hyper"] = {net.hyper.s0_max, net.hyper.a, net.hyper.b};
  out["coord_range"] = {coord_range.lo, coord_range.hi};
  out["net"] = {{"hidden", net.hidden},
                {"omega0", net.omega0},
                {"first_layer_omega_scale", net.first_layer_omega_scale},
                {"scheme", siren2::to_string(net.scheme)},
                {"s0", optional_number(net.winner_scales, true)},
                {"s1", optional_number(net.winner_scales, false)},
                {"psi_units", siren2::to_string(net.psi_units)},
                {"rff_features", net.rff.features},
                {"rff_sigma", net.rff.sigma}};
  out["train"] = {{"epochs", train.epochs},
                  {"lr", train.learning_rate},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"epsilon", train.epsilon},
                  {"batch_size", train.batch_size},
                  {"log_every", train.log_every},
                  {"peak_mode", siren2::to_string(train.peak_mode)},
                  {"holdout_fraction", train.holdout_fraction},
                  {"patience", train.patience}};
  out["synth"] = {{"n", synth_n}, {"count", synth_count}, {"max_mask", synth_max_mask}};
  out["denoise"] = {{"snr_db", snr_db}};
  out["sweep"] = {{"s0_values", s0_values}, {"s1_values", s1_values}};
  return out;
}

void apply_json(RunConfig& c, const json& j) {
  reject_unknown(j,
                 {"command", "input", "params", "out", "seed", "hyper_preset", "hyper", "coord_range", "net", "train",
                  "synth", "denoise", "sweep", "resolved"},
                 "config");
  if (j.contains("command")) {
    std::string name;
    read_key(j, "command", name);
    if (command_from_string(name) != c.command)
      throw UsageError("config is for command '" + name + "' but '" + to_string(c.command) + "' was requested");
  }
  std::string path;
  if (j.contains("input")) read_key(j, "input", path), c.input = path;
  if (j.contains("params")) read_key(j, "params", path), c.params_path = path;
  if (j.contains("out")) read_key(j, "out", path), c.out_dir = path;
  read_key(j, "seed", c.seed);
  if (j.contains("hyper_preset")) {
    read_key(j, "hyper_preset", c.hyper_preset);
    if (c.hyper_preset != "custom") c.net.hyper = preset_hyper(c.hyper_preset);
  }
  if (j.contains("hyper")) {
    std::vector<double> h;
    read_key(j, "hyper", h);
    if (h.size() != 3) throw UsageError("config key 'hyper' needs [s0_max, a, b]");
    c.net.hyper = {h[0], h[1], h[2]};
    const auto p = preset_hyper(c.hyper_preset == "custom" ? "audio" : c.hyper_preset);
    if (c.hyper_preset == "custom" || p.s0_max != h[0] || p.a != h[1] || p.b != h[2]) c.hyper_preset = "custom";
  }
  if (j.contains("coord_range")) {
    std::vector<double> r;
    read_key(j, "coord_range", r);
    if (r.size() != 2) throw UsageError("config key 'coord_range' needs [lo, hi]");
    c.coord_range = {r[0], r[1]};
  }
  if (j.contains("net")) {
    const auto& n = j.at("net");
    reject_unknown(n,
                   {"hidden", "omega0", "first_layer_omega_scale", "scheme", "s0", "s1", "psi_units", "rff_features",
                    "rff_sigma"},
                   "net");
    read_key(n, "hidden", c.net.hidden);
    read_key(n, "omega0", c.net.omega0);
    read_key(n, "first_layer_omega_scale", c.net.first_layer_omega_scale);
    std::string s;
    if (n.contains("scheme")) read_key(n, "scheme", s), c.net.scheme = init_scheme_from_string(s);
    if (n.contains("psi_units")) read_key(n, "psi_units", s), c.net.psi_units = centroid_units_from_string(s);
    const bool has_s0 = n.contains("s0") && !n.at("s0").is_null();
    const bool has_s1 = n.contains("s1") && !n.at("s1").is_null();
    if (has_s0 || has_s1) {
      NoiseScales scales = c.net.winner_scales.value_or(NoiseScales{});
      if (has_s0) read_key(n, "s0", scales.s0);
      if (has_s1) read_key(n, "s1", scales.s1);
      c.net.winner_scales = scales;
    } else if (n.contains("s0") || n.contains("s1")) {
      c.net.winner_scales.reset();
    }
    read_key(n, "rff_features", c.net.rff.features);
    read_key(n, "rff_sigma", c.net.rff.sigma);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t,
                   {"epochs", "lr", "beta1", "beta2", "epsilon", "batch_size", "log_every", "peak_mode",
                    "holdout_fraction", "patience"},
                   "train");
    read_key(t, "epochs", c.train.epochs);
    read_key(t, "lr", c.train.learning_rate);
    read_key(t, "beta1", c.train.beta1);
    read_key(t, "beta2", c.train.beta2);
    read_key(t, "epsilon", c.train.epsilon);
    read_key(t, "batch_size", c.train.batch_size);
    read_key(t, "log_every", c.train.log_every);
    std::string s;
    if (t.contains("peak_mode")) read_key(t, "peak_mode", s), c.train.peak_mode = peak_mode_from_string(s);
    read_key(t, "holdout_fraction", c.train.holdout_fraction);
    read_key(t, "patience", c.train.patience);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    reject_unknown(s, {"n", "count", "max_mask"}, "synth");
    read_key(s, "n", c.synth_n);
    read_key(s, "count", c.synth_count);
    read_key(s, "max_mask", c.synth_max_mask);
  }
  if (j.contains("denoise")) {
    const auto& d = j.at("denoise");
    reject_unknown(d, {"snr_db"}, "denoise");
    read_key(d, "snr_db", c.snr_db);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    reject_unknown(s, {"s0_values", "s1_values"}, "sweep");
    read_key(s, "s0_values", c.s0_values);
    read_key(s, "s1_values", c.s1_values);
  }
}

void validate(const RunConfig& c) {
  try {
    c.net.validate();
    c.train.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  const bool needs_input = c.command != Command::Synth && c.command != Command::Sweep;
  if (needs_input && c.input.empty()) throw UsageError(std::string(to_string(c.command)) + " requires --input");
  if (!c.input.empty() && !std::filesystem::exists(c.input)) throw UsageError("input not found: " + c.input.string());
  if (!c.params_path.empty() && !std::filesystem::exists(c.params_path))
    throw UsageError("params file not found: " + c.params_path.string());
  if (c.net.winner_scales && c.net.scheme != InitScheme::Winner)
    throw UsageError("--s0/--s1 require --scheme winner");
  if (!(c.coord_range.hi > c.coord_range.lo)) throw UsageError("coord_range must satisfy lo < hi");
  if (c.hyper_preset != "audio" && c.hyper_preset != "image" && c.hyper_preset != "custom")
    throw UsageError("unknown hyperparameter preset: " + c.hyper_preset);
  if (c.command == Command::Synth) {
    if (c.synth_n < 256 || !is_power_of_two(c.synth_n)) throw UsageError("--n must be a power of two >= 256");
    if (c.synth_count < 2) throw UsageError("--count must be >= 2");
    if (!(c.synth_max_mask >= 0.0 && c.synth_max_mask <= 1.0)) throw UsageError("--max-mask must lie in [0, 1]");
  }
  if (c.command == Command::Denoise && !(c.train.holdout_fraction > 0.0 && c.train.holdout_fraction < 0.5))
    throw UsageError("--holdout-fraction must lie in (0, 0.5)");
  for (double v : c.s0_values)
    if (!(v >= 0.0)) throw UsageError("sweep s0 values must be >= 0");
  for (double v : c.s1_values)
    if (!(v >= 0.0)) throw UsageError("sweep s1 values must be >= 0");
}

RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Sinusoidal neural representations with target-aware noisy initialization", "siren2"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, input, params, out, scheme, hyper_preset, psi_units, peak_mode;
  std::uint64_t seed = 0;
  double omega0 = 0, first_scale = 0, lr = 0, s0 = 0, s1 = 0, max_mask = 0, snr_db = 0, holdout = 0, rff_sigma = 0;
  int epochs = 0, log_every = 0, patience = 0, rff_features = 0;
  std::size_t n = 0, count = 0, batch = 0;
  std::vector<int> hidden;
  std::vector<double> coord_range, hyper, s0_values, s1_values;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  auto opt = [&](const std::string& name, auto& var, const std::string& help, std::function<void(RunConfig&)> apply) {
    overrides.emplace_back(app.add_option(name, var, help), std::move(apply));
  };

  app.add_option("--config", config_path, "JSON config file (flags override its values)")->check(CLI::ExistingFile);
  opt("--input", input, "Target WAV or PGM", [&](RunConfig& c) { c.input = input; });
  opt("--params", params, "Parameter file (analyze)", [&](RunConfig& c) { c.params_path = params; });
  opt("--out", out, "Output directory", [&](RunConfig& c) { c.out_dir = out; });
  opt("--seed", seed, "Random seed", [&](RunConfig& c) { c.seed = seed; });
  opt("--scheme", scheme, "siren | winner | siren_rff",
      [&](RunConfig& c) { c.net.scheme = init_scheme_from_string(scheme); });
  opt("--omega0", omega0, "Sine frequency factor", [&](RunConfig& c) { c.net.omega0 = omega0; });
  opt("--first-layer-omega-scale", first_scale, "Extra frequency factor on the first layer",
      [&](RunConfig& c) { c.net.first_layer_omega_scale = first_scale; });
  opt("--hidden", hidden, "Hidden layer widths, e.g. --hidden 128 128 128 128",
      [&](RunConfig& c) { c.net.hidden = hidden; });
  opt("--epochs", epochs, "Training epochs", [&](RunConfig& c) { c.train.epochs = epochs; });
  opt("--lr", lr, "Adam learning rate", [&](RunConfig& c) { c.train.learning_rate = lr; });
  opt("--batch-size", batch, "Mini-batch size (0 = full batch)", [&](RunConfig& c) { c.train.batch_size = batch; });
  opt("--log-every", log_every, "Logging interval in epochs", [&](RunConfig& c) { c.train.log_every = log_every; });
  opt("--peak-mode", peak_mode, "PSNR peak: unit | max_abs_target",
      [&](RunConfig& c) { c.train.peak_mode = peak_mode_from_string(peak_mode); });
  opt("--s0", s0, "Manual first-layer noise scale", [&](RunConfig& c) {
    auto s = c.net.winner_scales.value_or(NoiseScales{});
    s.s0 = s0;
    c.net.winner_scales = s;
  });
  opt("--s1", s1, "Manual second-layer noise scale", [&](RunConfig& c) {
    auto s = c.net.winner_scales.value_or(NoiseScales{});
    s.s1 = s1;
    c.net.winner_scales = s;
  });
  opt("--hyper-preset", hyper_preset, "Noise-rule preset: audio | image", [&](RunConfig& c) {
    c.hyper_preset = hyper_preset;
    c.net.hyper = preset_hyper(hyper_preset);
  });
  opt("--hyper", hyper, "Noise-rule hyperparameters s0_max a b", [&](RunConfig& c) {
    if (hyper.size() != 3) throw UsageError("--hyper needs three values");
    c.net.hyper = {hyper[0], hyper[1], hyper[2]};
    c.hyper_preset = "custom";
  });
  opt("--psi-units", psi_units, "Centroid units for the noise rule: normalized | bins | hz",
      [&](RunConfig& c) { c.net.psi_units = centroid_units_from_string(psi_units); });
  opt("--coord-range", coord_range, "Coordinate interval lo hi", [&](RunConfig& c) {
    if (coord_range.size() != 2) throw UsageError("--coord-range needs two values");
    c.coord_range = {coord_range[0], coord_range[1]};
  });
  opt("--rff-features", rff_features, "Random Fourier feature count", [&](RunConfig& c) { c.net.rff.features = rff_features; });
  opt("--rff-sigma", rff_sigma, "Random Fourier feature std", [&](RunConfig& c) { c.net.rff.sigma = rff_sigma; });
  opt("--n", n, "Synthetic series length", [&](RunConfig& c) { c.synth_n = n; });
  opt("--count", count, "Synthetic series size", [&](RunConfig& c) { c.synth_count = count; });
  opt("--max-mask", max_mask, "Largest masked fraction of low bins", [&](RunConfig& c) { c.synth_max_mask = max_mask; });
  opt("--snr-db", snr_db, "Noise level for denoising", [&](RunConfig& c) { c.snr_db = snr_db; });
  opt("--holdout-fraction", holdout, "Holdout share for early stopping",
      [&](RunConfig& c) { c.train.holdout_fraction = holdout; });
  opt("--patience", patience, "Logged evaluations without improvement before stopping",
      [&](RunConfig& c) { c.train.patience = patience; });
  opt("--s0-values", s0_values, "Sweep axis for s0", [&](RunConfig& c) { c.s0_values = s0_values; });
  opt("--s1-values", s1_values, "Sweep axis for s1", [&](RunConfig& c) { c.s1_values = s1_values; });

  for (auto c : {Command::Fit, Command::Denoise, Command::Analyze, Command::Synth, Command::Sweep})
    app.add_subcommand(to_string(c), std::string("Run the ") + to_string(c) + " pipeline");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig config;
  config.command = command_from_string(app.get_subcommands().front()->get_name());
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("cannot parse " + config_path + ": " + e.what());
    }
    apply_json(config, j);
  }
  try {
    for (auto& [option, apply] : overrides)
      if (option->count() > 0) apply(config);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (config.out_dir.empty()) {
    const char* root = std::getenv(kOutRootEnv);
    config.out_dir = std::filesystem::path(root && *root ? root : "runs") / to_string(config.command);
  }
  config.net.seed = config.seed;
  config.train.seed = config.seed;
  validate(config);
  return config;
}

// ---------------------------------------------------------------- pipelines

namespace {

struct Target {
  bool image = false;
  Signal1D audio;
  Image2D picture;
  Eigen::MatrixXd values;  // N x 1 training targets
  CoordGrid grid;
};

bool is_pgm(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".pgm";
}

Target load_target(const std::filesystem::path& path, Interval range) {
  Target t;
  if (is_pgm(path)) {
    t.image = true;
    t.picture = load_image_gray(path);
    t.values = as_column(image_to_target(t.picture));
    t.grid = coord_grid_2d(t.picture.height, t.picture.width, range);
  } else {
    t.audio = normalize_peak(load_wav(path));
    t.values = as_column(t.audio.samples);
    t.grid = coord_grid_1d(t.audio.size(), range);
  }
  return t;
}

void prepare(RunConfig& c, const Target& t) {
  c.net.input_dim = t.grid.dim();
  c.net.output_channels = 1;
  c.train.eval_scale = t.image ? 0.5 : 1.0;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json resolved_section(const TrainLog& log, const NetworkConfig& net) {
  return {{"psi", log.psi}, {"psi_units", siren2::to_string(net.psi_units)}, {"s0", log.scales.s0}, {"s1", log.scales.s1}};
}

std::vector<double> column(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.rows()}; }

json reconstruction_metrics(const Target& t, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& truth) {
  json m;
  if (t.image) {
    const Image2D pred = target_to_image(column(prediction), t.picture.height, t.picture.width);
    const Image2D ref = target_to_image(column(truth), t.picture.height, t.picture.width);
    m["psnr"] = psnr(pred.pixels, ref.pixels);
    m["mae"] = mae(pred.pixels, ref.pixels);
    if (ref.height >= kSsimWindow && ref.width >= kSsimWindow) m["ssim"] = ssim(pred, ref);
  } else {
    m["psnr"] = psnr(prediction, truth);
    m["mae"] = mae(column(prediction), column(truth));
  }
  if (!std::isfinite(m["psnr"].get<double>())) m["psnr"] = "inf";
  return m;
}

void write_reconstruction(const Target& t, const Eigen::MatrixXd& prediction, const std::filesystem::path& dir,
                          const std::string& stem) {
  if (t.image) {
    const Image2D img = target_to_image(column(prediction), t.picture.height, t.picture.width);
    save_image_gray(img, dir / (stem + ".pgm"));
    Image2D err = fft_error_map(t.picture, img);
    double peak = 0.0;
    for (double v : err.pixels) peak = std::max(peak, v);
    if (peak > 0.0)
      for (double& v : err.pixels) v /= peak;
    save_image_gray(err, dir / (stem + "_fft_error.pgm"));
  } else {
    Signal1D s = t.audio;
    s.samples = column(prediction);
    save_wav(s, dir / (stem + ".wav"));
  }
}

int run_fit(RunConfig c) {
  const Target t = load_target(c.input, c.coord_range);
  prepare(c, t);
  const FitResult result = fit(c.net, c.train, t.grid, t.values);
  const auto& dir = c.out_dir;
  write_text(dir / "trainlog.csv", result.log.to_csv());
  save_params(result.params, dir / "params.bin");
  const Eigen::MatrixXd prediction = forward(result.params, t.grid);
  write_reconstruction(t, prediction, dir, "reconstruction");

  json summary = to_json(result.log);
  summary["metrics"] = reconstruction_metrics(t, prediction, t.values);
  summary["param_count"] = param_count(c.net);
  if (!t.image) {
    write_layer_spectra(layer_spectra_report(build_params(c.net, result.log.scales), t.grid, "epoch 0"),
                        dir / "spectra" / "epoch0");
    write_layer_spectra(layer_spectra_report(result.params, t.grid, "epoch " + std::to_string(result.log.selected_epoch)),
                        dir / "spectra" / "selected");
  }
  write_json(dir / "summary.json", summary);
  json resolved = c.to_json();
  resolved["resolved"] = resolved_section(result.log, c.net);
  write_json(dir / "resolved.json", resolved);
  std::cout << "peak PSNR " << result.log.peak_psnr << " dB at epoch " << result.log.peak_epoch << " (psi "
            << result.log.psi << ", s0 " << result.log.scales.s0 << ", s1 " << result.log.scales.s1 << ")\n";
  return 0;
}

int run_denoise(RunConfig c) {
  Target clean = load_target(c.input, c.coord_range);
  prepare(c, clean);
  Target noisy = clean;
  if (clean.image) {
    noisy.picture = add_noise_at_snr(clean.picture, c.snr_db, c.seed);
    noisy.values = as_column(image_to_target(noisy.picture));
  } else {
    noisy.audio = add_noise_at_snr(clean.audio, c.snr_db, c.seed);
    noisy.values = as_column(noisy.audio.samples);
  }
  const FitResult result = fit_denoise(c.net, c.train, clean.grid, noisy.values);
  const auto& dir = c.out_dir;
  write_text(dir / "trainlog.csv", result.log.to_csv());
  save_params(result.params, dir / "params.bin");
  const Eigen::MatrixXd prediction = forward(result.params, clean.grid);
  write_reconstruction(clean, prediction, dir, "denoised");
  if (clean.image) {
    Image2D stored = noisy.picture;
    for (double& v : stored.pixels) v = std::clamp(v, 0.0, 1.0);
    save_image_gray(stored, dir / "noisy.pgm");
  } else {
    save_wav(noisy.audio, dir / "noisy.wav");
  }

  json summary = to_json(result.log);
  summary["snr_db"] = c.snr_db;
  summary["noisy_vs_clean"] = reconstruction_metrics(clean, noisy.values, clean.values);
  summary["denoised_vs_clean"] = reconstruction_metrics(clean, prediction, clean.values);
  write_json(dir / "summary.json", summary);
  json resolved = c.to_json();
  resolved["resolved"] = resolved_section(result.log, c.net);
  write_json(dir / "resolved.json", resolved);
  std::cout << "denoised PSNR " << summary["denoised_vs_clean"]["psnr"] << " dB (noisy input "
            << summary["noisy_vs_clean"]["psnr"] << " dB), selected epoch " << result.log.selected_epoch << "\n";
  return 0;
}

int run_analyze(RunConfig c) {
  const Target t = load_target(c.input, c.coord_range);
  prepare(c, t);
  const auto& dir = c.out_dir;
  const std::span<const double> values(t.values.data(), static_cast<std::size_t>(t.values.size()));
  const double rate = t.image ? 1.0 : static_cast<double>(t.audio.sample_rate);
  const Spectrum spectrum = fft(values, rate / static_cast<double>(next_power_of_two(values.size())));
  write_text(dir / "target_spectrum.csv", spectrum_to_csv(spectrum));

  const ResolvedScales resolved = resolve_winner_scales(c.net, t.values);
  json analysis;
  analysis["n_samples"] = values.size();
  analysis["n_fft"] = spectrum.n_fft;
  analysis["psi_bins"] = spectral_centroid(spectrum, CentroidUnits::Bins);
  analysis["psi_normalized"] = spectral_centroid(spectrum, CentroidUnits::Normalized);
  analysis["psi_hz"] = spectral_centroid(spectrum, CentroidUnits::Hz);
  for (const char* preset : {"audio", "image"}) {
    const auto s = winner_noise_scales(resolved.psi, 1, preset_hyper(preset));
    analysis["winner_scales"][preset] = {{"s0", s.s0}, {"s1", s.s1}};
  }

  Params params;
  std::string checkpoint;
  if (!c.params_path.empty()) {
    params = load_params(c.params_path);
    checkpoint = c.params_path.filename().string();
  } else {
    params = build_params(c.net, resolved.scales);
    checkpoint = "epoch 0";
  }
  if (params.input_dim() != t.grid.dim() && params.rff_basis.size() == 0)
    throw ArgumentError("analyze: parameter input dimension does not match the input signal");
  analysis["checkpoint"] = checkpoint;
  analysis["scheme"] = siren2::to_string(params.provenance.scheme);
  if (!t.image) {
    const auto report = layer_spectra_report(params, t.grid, checkpoint);
    write_layer_spectra(report, dir / "spectra");
    json energy;
    for (const auto& l : report.layers) energy[l.name] = high_band_energy(l.psd);
    analysis["high_band_energy"] = energy;
  } else {
    write_reconstruction(t, forward(params, t.grid), dir, "prediction");
  }
  write_json(dir / "analysis.json", analysis);
  json resolved_json = c.to_json();
  resolved_json["resolved"] = {{"psi", resolved.psi},
                               {"psi_units", siren2::to_string(c.net.psi_units)},
                               {"s0", resolved.scales.s0},
                               {"s1", resolved.scales.s1}};
  write_json(dir / "resolved.json", resolved_json);
  return 0;
}

int run_synth(const RunConfig& c) {
  MaskedSeriesOptions opt;
  opt.n_samples = c.synth_n;
  opt.count = c.synth_count;
  opt.seed = c.seed;
  opt.max_mask_fraction = c.synth_max_mask;
  opt.sample_rate = static_cast<int>(c.synth_n);
  const auto series = synth_masked_series(opt);
  json manifest = {{"seed", c.seed},
                   {"n_samples", c.synth_n},
                   {"sample_rate", opt.sample_rate},
                   {"max_mask_fraction", c.synth_max_mask},
                   {"signals", json::array()}};
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto file = series[i].name + ".wav";
    save_wav(series[i], c.out_dir / file);
    manifest["signals"].push_back({{"name", series[i].name},
                                   {"file", file},
                                   {"mask_fraction", series_mask_fraction(i, series.size(), c.synth_max_mask)},
                                   {"psi_bins", spectral_centroid(series[i], CentroidUnits::Bins)},
                                   {"psi_normalized", spectral_centroid(series[i], CentroidUnits::Normalized)}});
  }
  write_json(c.out_dir / "manifest.json", manifest);
  write_json(c.out_dir / "resolved.json", c.to_json());
  return 0;
}

std::vector<double> linspace_axis(double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = hi * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

int run_sweep(RunConfig c) {
  Signal1D target;
  if (!c.input.empty()) {
    target = normalize_peak(load_wav(c.input));
  } else {
    MaskedSeriesOptions opt;
    opt.n_samples = c.synth_n;
    opt.count = c.synth_count;
    opt.seed = c.seed;
    opt.max_mask_fraction = c.synth_max_mask;
    target = synth_masked_series(opt).back();
  }
  c.net.input_dim = 1;
  c.net.output_channels = 1;
  if (c.s0_values.empty()) c.s0_values = linspace_axis(c.net.hyper.s0_max, 5);
  if (c.s1_values.empty()) c.s1_values = linspace_axis(c.net.hyper.b, 5);

  const SweepGrid grid = noise_sweep(target, c.net, c.train, c.s0_values, c.s1_values);
  NetworkConfig auto_net = c.net;
  auto_net.scheme = InitScheme::Winner;
  auto_net.winner_scales.reset();
  const CoordGrid coords = coord_grid_1d(target.size(), c.coord_range);
  const FitResult auto_fit = fit(auto_net, c.train, coords, as_column(target.samples));

  write_text(c.out_dir / "sweep.csv", grid.to_csv());
  json out = to_json(grid);
  out["auto"] = {{"psi", auto_fit.log.psi},
                 {"s0", auto_fit.log.scales.s0},
                 {"s1", auto_fit.log.scales.s1},
                 {"peak_psnr", auto_fit.log.peak_psnr}};
  write_json(c.out_dir / "sweep.json", out);
  json resolved = c.to_json();
  resolved["resolved"] = resolved_section(auto_fit.log, auto_net);
  write_json(c.out_dir / "resolved.json", resolved);
  return 0;
}

}  // namespace

int run(const RunConfig& config) {
  try {
    std::filesystem::create_directories(config.out_dir);
    switch (config.command) {
      case Command::Fit:
        return run_fit(config);
      case Command::Denoise:
        return run_denoise(config);
      case Command::Analyze:
        return run_analyze(config);
      case Command::Synth:
        return run_synth(config);
      case Command::Sweep:
        return run_sweep(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int main_entry(const std::vector<std::string>& args) {
  RunConfig config;
  try {
    config = parse_config(args);
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return run(config);
}

}  // namespace siren2::cli
