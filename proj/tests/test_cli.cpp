#include <cstdlib>

#include "doctest.h"
#include "oracles.hpp"

#include "siren2/cli.hpp"
#include "siren2/spectral.hpp"

using namespace siren2;
using namespace siren2::cli;

namespace {

std::vector<std::string> argv_of(std::initializer_list<std::string> args) {
  std::vector<std::string> v{"siren2"};
  v.insert(v.end(), args);
  return v;
}

// A short synthetic target on disk.
std::filesystem::path write_target(const std::filesystem::path& dir) {
  MaskedSeriesOptions opt;
  opt.n_samples = 256;
  opt.count = 2;
  opt.seed = 1;
  opt.sample_rate = 8000;
  const auto path = dir / "target.wav";
  save_wav(synth_masked_series(opt).back(), path);
  return path;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SIREN2_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("flag parsing") {
  const auto dir = oracle::scratch_dir("cli");
  const auto input = write_target(dir).string();

  SUBCASE("winner with the audio preset") {
    const auto c = parse_config(argv_of({"fit", "--input", input, "--scheme", "winner", "--hyper-preset", "audio"}));
    CHECK(c.command == Command::Fit);
    CHECK(c.net.scheme == InitScheme::Winner);
    CHECK(c.net.hyper.s0_max == 3500.0);
    CHECK(c.net.hyper.a == 5.0);
    CHECK(c.net.hyper.b == 3.0);
    CHECK_FALSE(c.net.winner_scales.has_value());
  }

  SUBCASE("image preset") {
    const auto c = parse_config(argv_of({"fit", "--input", input, "--hyper-preset", "image"}));
    CHECK(c.net.hyper.s0_max == 50.0);
    CHECK(c.net.hyper.b == 0.4);
  }

  SUBCASE("manual scales override the auto rule") {
    const auto c = parse_config(argv_of({"fit", "--input", input, "--scheme", "winner", "--s0", "10", "--s1", "2"}));
    REQUIRE(c.net.winner_scales.has_value());
    CHECK(c.net.winner_scales->s0 == 10.0);
    CHECK(c.net.winner_scales->s1 == 2.0);
    CHECK(c.to_json()["net"]["s0"] == 10.0);
  }

  SUBCASE("seed propagates to network and training") {
    const auto c = parse_config(argv_of({"fit", "--input", input, "--seed", "42", "--epochs", "7"}));
    CHECK(c.net.seed == 42);
    CHECK(c.train.seed == 42);
    CHECK(c.train.epochs == 7);
  }

  SUBCASE("usage errors") {
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--epochs", "-5"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--bogus"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", (dir / "missing.wav").string()})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--epochs", "many"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--s0", "3"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--hyper-preset", "video"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--psi-units", "mel"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({"train"})), UsageError);
    CHECK_THROWS_AS(parse_config(argv_of({})), UsageError);
  }

  SUBCASE("output root from the environment") {
    ::setenv(kOutRootEnv, (dir / "root").c_str(), 1);
    const auto c = parse_config(argv_of({"synth"}));
    CHECK(c.out_dir == dir / "root" / "synth");
    ::unsetenv(kOutRootEnv);
  }
}

TEST_CASE("json config with flag overrides") {
  const auto dir = oracle::scratch_dir("cli");
  const auto input = write_target(dir).string();
  nlohmann::json j = {{"input", input},
                      {"seed", 5},
                      {"net", {{"hidden", {16, 16}}, {"omega0", 20.0}, {"scheme", "winner"}}},
                      {"train", {{"epochs", 12}, {"lr", 1e-3}}}};
  oracle::write_bytes(dir / "cfg.json", j.dump());
  const auto c = parse_config(argv_of({"fit", "--config", (dir / "cfg.json").string(), "--epochs", "3"}));
  CHECK(c.net.hidden == std::vector<int>{16, 16});
  CHECK(c.net.omega0 == 20.0);
  CHECK(c.train.learning_rate == 1e-3);
  CHECK(c.train.epochs == 3);
  CHECK(c.seed == 5);

  j["net"]["dropout"] = 0.5;
  oracle::write_bytes(dir / "bad.json", j.dump());
  CHECK_THROWS_AS(parse_config(argv_of({"fit", "--config", (dir / "bad.json").string()})), UsageError);
  oracle::write_bytes(dir / "typo.json", R"({"seeed": 1})");
  CHECK_THROWS_AS(parse_config(argv_of({"fit", "--config", (dir / "typo.json").string()})), UsageError);
  oracle::write_bytes(dir / "type.json", R"({"train": {"epochs": "ten"}})");
  CHECK_THROWS_AS(parse_config(argv_of({"fit", "--input", input, "--config", (dir / "type.json").string()})),
                  UsageError);

  // resolved.json read back reproduces the same config.
  RunConfig back;
  back.command = Command::Fit;
  apply_json(back, c.to_json());
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("synth writes the series and a manifest") {
  const auto dir = oracle::scratch_dir("cli");
  const auto out = (dir / "synth").string();
  REQUIRE(main_entry(argv_of({"synth", "--n", "4096", "--count", "8", "--seed", "7", "--out", out})) == 0);
  const auto manifest = nlohmann::json::parse(oracle::read_bytes(dir / "synth" / "manifest.json"));
  CHECK(manifest["seed"] == 7);
  REQUIRE(manifest["signals"].size() == 8);
  double prev = -1;
  for (const auto& s : manifest["signals"]) {
    const auto signal = load_wav(dir / "synth" / s["file"].get<std::string>());
    CHECK(signal.size() == 4096);
    const double psi = spectral_centroid(signal);
    CHECK(psi == doctest::Approx(s["psi_bins"].get<double>()).epsilon(1e-6));
    CHECK(psi > prev);
    prev = psi;
  }
}

TEST_CASE("fit runs are reproducible from resolved.json") {
  const auto dir = oracle::scratch_dir("cli");
  const auto input = write_target(dir).string();
  const auto a = (dir / "a").string();
  REQUIRE(main_entry(argv_of({"fit", "--input", input, "--out", a, "--scheme", "winner", "--hidden", "16", "16",
                              "--epochs", "20", "--first-layer-omega-scale", "10", "--seed", "3"})) == 0);
  for (const char* f : {"trainlog.csv", "summary.json", "params.bin", "reconstruction.wav", "resolved.json"})
    CHECK(std::filesystem::exists(dir / "a" / f));
  CHECK(std::filesystem::exists(dir / "a" / "spectra" / "epoch0" / "manifest.json"));

  const auto resolved = nlohmann::json::parse(oracle::read_bytes(dir / "a" / "resolved.json"));
  CHECK(resolved["resolved"]["s0"].get<double>() > 0.0);
  CHECK(resolved["resolved"]["psi"].get<double>() > 0.0);

  const auto b = (dir / "b").string();
  REQUIRE(main_entry(argv_of({"fit", "--config", (dir / "a" / "resolved.json").string(), "--out", b})) == 0);
  CHECK(oracle::read_bytes(dir / "a" / "trainlog.csv") == oracle::read_bytes(dir / "b" / "trainlog.csv"));
  CHECK(oracle::read_bytes(dir / "a" / "params.bin") == oracle::read_bytes(dir / "b" / "params.bin"));

  SUBCASE("analyze a trained checkpoint") {
    const auto out = (dir / "an").string();
    REQUIRE(main_entry(argv_of({"analyze", "--params", (dir / "a" / "params.bin").string(), "--input", input, "--out",
                                out})) == 0);
    CHECK(std::filesystem::exists(dir / "an" / "spectra" / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "an" / "spectra" / "layer1_pre_psd.csv"));
    CHECK(std::filesystem::exists(dir / "an" / "analysis.json"));
  }
}

TEST_CASE("image denoise pipeline") {
  const auto dir = oracle::scratch_dir("cli");
  Image2D img(16, 16);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) img.at(r, c) = 0.2 + 0.6 * (r + c) / 30.0;
  save_image_gray(img, dir / "img.pgm");
  const auto out = (dir / "dn").string();
  REQUIRE(main_entry(argv_of({"denoise", "--input", (dir / "img.pgm").string(), "--out", out, "--hidden", "16",
                              "--epochs", "30", "--holdout-fraction", "0.1", "--hyper-preset", "image"})) == 0);
  for (const char* f : {"denoised.pgm", "noisy.pgm", "denoised_fft_error.pgm", "trainlog.csv", "summary.json"})
    CHECK(std::filesystem::exists(dir / "dn" / f));
  const auto summary = nlohmann::json::parse(oracle::read_bytes(dir / "dn" / "summary.json"));
  CHECK(summary["denoised_vs_clean"].contains("ssim"));
}

TEST_CASE("sweep pipeline") {
  const auto dir = oracle::scratch_dir("cli");
  const auto input = write_target(dir).string();
  const auto out = (dir / "sw").string();
  REQUIRE(main_entry(argv_of({"sweep", "--input", input, "--out", out, "--hidden", "8", "--epochs", "5",
                              "--s0-values", "0", "50", "--s1-values", "0", "1"})) == 0);
  const auto sweep = nlohmann::json::parse(oracle::read_bytes(dir / "sw" / "sweep.json"));
  CHECK(sweep["peak_psnr"].size() == 2);
  CHECK(sweep["auto"].contains("peak_psnr"));
}

TEST_CASE("exit codes of the binary") {
  const auto dir = oracle::scratch_dir("cli");
  const auto input = write_target(dir).string();
  CHECK(run_binary("fit --input " + input + " --epochs -5") == 2);
  CHECK(run_binary("fit --nonsense") == 2);
  CHECK(run_binary("synth --n 256 --count 2 --out " + (dir / "s").string()) == 0);
  // A corrupt input passes validation but fails while loading.
  oracle::write_bytes(dir / "broken.wav", "RIFF");
  CHECK(run_binary("fit --input " + (dir / "broken.wav").string() + " --out " + (dir / "x").string()) == 1);
}
