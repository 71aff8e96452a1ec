#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "siren2/error.hpp"
#include "siren2/signal.hpp"
#include "siren2/spectral.hpp"

using namespace siren2;

TEST_CASE("pcm16 samples scale by 1/32768") {
  const auto dir = oracle::scratch_dir("wav");
  oracle::WavBuilder b;
  for (std::int16_t v : {0, 16384, -16384, 32767}) b.add_pcm16(v);
  oracle::write_bytes(dir / "a.wav", b.bytes());
  const Signal1D s = load_wav(dir / "a.wav");
  REQUIRE(s.size() == 4);
  CHECK(s.samples[0] == 0.0);
  CHECK(s.samples[1] == 0.5);
  CHECK(s.samples[2] == -0.5);
  CHECK(s.samples[3] == 32767.0 / 32768.0);
  CHECK(s.sample_rate == 8000);
}

TEST_CASE("stereo input is averaged to mono") {
  const auto dir = oracle::scratch_dir("wav");
  oracle::WavBuilder b;
  b.channels = 2;
  for (std::int16_t v : {16384, 0, -16384, -16384}) b.add_pcm16(v);
  oracle::write_bytes(dir / "st.wav", b.bytes());
  const Signal1D s = load_wav(dir / "st.wav");
  REQUIRE(s.size() == 2);
  CHECK(s.samples[0] == 0.25);
  CHECK(s.samples[1] == -0.5);
}

TEST_CASE("extensible header with pcm sub-format loads") {
  const auto dir = oracle::scratch_dir("wav");
  oracle::WavBuilder b;
  b.extensible = true;
  b.add_pcm16(8192);
  oracle::write_bytes(dir / "ext.wav", b.bytes());
  CHECK(load_wav(dir / "ext.wav").samples.at(0) == 0.25);
}

TEST_CASE("wav format errors") {
  const auto dir = oracle::scratch_dir("wav");
  SUBCASE("bad magic") {
    oracle::write_bytes(dir / "bad.wav", "RIFX0000WAVEjunk");
    CHECK_THROWS_AS(load_wav(dir / "bad.wav"), FormatError);
  }
  SUBCASE("truncated data chunk") {
    oracle::WavBuilder b;
    for (int i = 0; i < 8; ++i) b.add_pcm16(100);
    auto bytes = b.bytes();
    bytes.resize(bytes.size() - 5);
    oracle::write_bytes(dir / "trunc.wav", bytes);
    CHECK_THROWS_AS(load_wav(dir / "trunc.wav"), FormatError);
  }
  SUBCASE("mu-law is unsupported") {
    oracle::WavBuilder b;
    b.format = 7;
    b.bits = 8;
    b.data = "\x01\x02";
    oracle::write_bytes(dir / "ulaw.wav", b.bytes());
    CHECK_THROWS_AS(load_wav(dir / "ulaw.wav"), UnsupportedFormatError);
  }
  SUBCASE("zero frames") {
    oracle::WavBuilder b;
    oracle::write_bytes(dir / "empty.wav", b.bytes());
    CHECK_THROWS_AS(load_wav(dir / "empty.wav"), EmptySignalError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_wav(dir / "nope.wav"), Error); }
}

TEST_CASE("float32 roundtrip is bit exact") {
  const auto dir = oracle::scratch_dir("wav");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Signal1D s;
  s.sample_rate = 44100;
  for (int i = 0; i < 1000; ++i) s.samples.push_back(static_cast<double>(u(rng)));
  s.samples.push_back(1.0);
  s.samples.push_back(-1.0);
  CHECK(save_wav(s, dir / "f.wav") == 0);
  const Signal1D back = load_wav(dir / "f.wav");
  CHECK(back.sample_rate == 44100);
  CHECK(back.samples == s.samples);
}

TEST_CASE("zero signal writes 100 float zeros after the header") {
  const auto dir = oracle::scratch_dir("wav");
  Signal1D s;
  s.samples.assign(100, 0.0);
  s.sample_rate = 8000;
  save_wav(s, dir / "z.wav");
  const auto bytes = oracle::read_bytes(dir / "z.wav");
  CHECK(bytes.size() == 44 + 400);
  CHECK(bytes.substr(44) == std::string(400, '\0'));
}

TEST_CASE("out-of-range samples are clipped") {
  const auto dir = oracle::scratch_dir("wav");
  Signal1D s;
  s.samples = {0.0, 1.5, -2.0};
  s.sample_rate = 8000;
  CHECK(save_wav(s, dir / "c.wav") == 2);
  const auto back = load_wav(dir / "c.wav");
  CHECK(back.samples == std::vector<double>{0.0, 1.0, -1.0});
}

TEST_CASE("unwritable wav path is an io error") {
  Signal1D s;
  s.samples = {0.0, 0.1};
  CHECK_THROWS_AS(save_wav(s, "/nonexistent_dir_xyz/a.wav"), IoError);
}

TEST_CASE("440 Hz tone peaks at bin 440") {
  const auto dir = oracle::scratch_dir("wav");
  std::vector<std::int16_t> pcm(8000);
  for (std::size_t t = 0; t < pcm.size(); ++t)
    pcm[t] = static_cast<std::int16_t>(std::lround(16000.0 * std::sin(2.0 * std::numbers::pi * 440.0 * t / 8000.0)));
  save_wav_pcm16(pcm, 8000, dir / "tone.wav");
  const Signal1D s = load_wav(dir / "tone.wav");
  REQUIRE(s.size() == 8000);
  const auto spec = oracle::dft(s.samples);
  std::size_t best = 0;
  for (std::size_t k = 1; k <= 4000; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  CHECK(best == 440);
}

TEST_CASE("pgm 8-bit values") {
  const auto dir = oracle::scratch_dir("pgm");
  oracle::write_bytes(dir / "a.pgm", std::string("P5\n# comment\n2 2\n255\n") + std::string("\x00\xff\x80\x40", 4));
  const Image2D img = load_image_gray(dir / "a.pgm");
  REQUIRE(img.height == 2);
  REQUIRE(img.width == 2);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(0, 1) == 1.0);
  CHECK(img.at(1, 0) == 128.0 / 255.0);
  CHECK(img.at(1, 1) == 64.0 / 255.0);
}

TEST_CASE("pgm 16-bit values scale by 1/65535") {
  const auto dir = oracle::scratch_dir("pgm");
  oracle::write_bytes(dir / "b.pgm", std::string("P5 2 1 65535\n") + std::string("\x01\x00\xff\xff", 4));
  const Image2D img = load_image_gray(dir / "b.pgm");
  CHECK(img.at(0, 0) == 256.0 / 65535.0);
  CHECK(img.at(0, 1) == 1.0);
}

TEST_CASE("pgm format errors") {
  const auto dir = oracle::scratch_dir("pgm");
  oracle::write_bytes(dir / "m.pgm", "P2\n2 2\n255\n0 0 0 0\n");
  CHECK_THROWS_AS(load_image_gray(dir / "m.pgm"), FormatError);
  oracle::write_bytes(dir / "t.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\x01", 2));
  CHECK_THROWS_AS(load_image_gray(dir / "t.pgm"), FormatError);
}

TEST_CASE("pgm 16-bit roundtrip is lossless on random grids") {
  const auto dir = oracle::scratch_dir("pgm");
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_int_distribution<int> level(0, 65535);
  for (int trial = 0; trial < 25; ++trial) {
    Image2D img(static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng)));
    for (auto& p : img.pixels) p = level(rng) / 65535.0;
    save_image_gray(img, dir / "r.pgm", 16);
    const Image2D back = load_image_gray(dir / "r.pgm");
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    CHECK(back.pixels == img.pixels);
  }
}

TEST_CASE("pgm 8-bit roundtrip is lossless at 8-bit levels") {
  const auto dir = oracle::scratch_dir("pgm");
  Image2D img(3, 5);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = static_cast<double>(i * 17 % 256) / 255.0;
  save_image_gray(img, dir / "e.pgm", 8);
  CHECK(load_image_gray(dir / "e.pgm").pixels == img.pixels);
}

TEST_CASE("target remapping") {
  Image2D img(1, 3);
  img.pixels = {0.0, 0.5, 1.0};
  const auto t = image_to_target(img);
  CHECK(t == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(target_to_image(t, 1, 3).pixels == img.pixels);
}

TEST_CASE("coordinate grids") {
  const auto g3 = coord_grid_1d(3);
  CHECK(g3.points(0, 0) == -1.0);
  CHECK(g3.points(1, 0) == 0.0);
  CHECK(g3.points(2, 0) == 1.0);

  const auto g5 = coord_grid_1d(5, {-100.0, 100.0});
  const double expect[] = {-100, -50, 0, 50, 100};
  for (int i = 0; i < 5; ++i) CHECK(g5.points(i, 0) == expect[i]);

  const auto g2 = coord_grid_2d(2, 3);
  REQUIRE(g2.size() == 6);
  REQUIRE(g2.dim() == 2);
  CHECK(g2.points(0, 0) == -1.0);
  CHECK(g2.points(0, 1) == -1.0);
  CHECK(g2.points(5, 0) == 1.0);
  CHECK(g2.points(5, 1) == 1.0);
  // Row-major: the second point advances the column coordinate.
  CHECK(g2.points(1, 0) == -1.0);
  CHECK(g2.points(1, 1) == 0.0);

  CHECK_THROWS_AS(coord_grid_1d(1), ArgumentError);
}

TEST_CASE("grid spacing is uniform to rounding") {
  const auto g = coord_grid_1d(4097, {-100.0, 100.0});
  const double h = 200.0 / 4096.0;
  CHECK(g.points(0, 0) == -100.0);
  CHECK(g.points(4096, 0) == 100.0);
  for (Eigen::Index i = 1; i < g.points.rows(); ++i)
    CHECK(std::abs(g.points(i, 0) - g.points(i - 1, 0) - h) <= 1e-12);
}

TEST_CASE("masked series") {
  MaskedSeriesOptions opt;
  opt.n_samples = 1024;
  opt.seed = 5;
  const auto series = synth_masked_series(opt);
  REQUIRE(series.size() == 8);

  SUBCASE("S1 is the normalized base noise") {
    double peak = 0;
    for (double v : series[0].samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == 1.0);
    CHECK(series_mask_fraction(0, 8, 0.9) == 0.0);
    CHECK(series_mask_fraction(7, 8, 0.9) == doctest::Approx(0.9));
  }

  SUBCASE("centroids increase along the series") {
    double prev = -1;
    for (const auto& s : series) {
      const auto spec = oracle::dft(s.samples);
      long double num = 0, den = 0;
      for (std::size_t k = 0; k <= 512; ++k) {
        num += k * std::abs(spec[k]);
        den += std::abs(spec[k]);
      }
      const double psi = static_cast<double>(2 * num / den);
      CHECK(psi > prev);
      prev = psi;
    }
  }

  SUBCASE("S8 carries no energy in its lowest 90% of bins") {
    const auto spec = oracle::dft(series[7].samples);
    long double low = 0, total = 0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const long double e = std::norm(spec[k]);
      total += e;
      const std::size_t one_sided = std::min(k, spec.size() - k);
      if (one_sided < static_cast<std::size_t>(0.9 * 512)) low += e;
    }
    CHECK(static_cast<double>(low / total) < 1e-10);
  }

  SUBCASE("unmasked bins match S1 up to one scalar") {
    const auto a = oracle::dft(series[0].samples);
    const auto b = oracle::dft(series[3].samples);
    const std::size_t cutoff = static_cast<std::size_t>(std::ceil(series_mask_fraction(3, 8, 0.9) * 512));
    const long double ratio = std::abs(b[511]) / std::abs(a[511]);
    for (std::size_t k = cutoff + 1; k < 512; ++k)
      CHECK(static_cast<double>(std::abs(b[k] - ratio * a[k]) / std::abs(a[k])) < 1e-9);
  }

  SUBCASE("deterministic per seed") {
    CHECK(synth_masked_series(opt)[7].samples == series[7].samples);
    auto other = opt;
    other.seed = 6;
    CHECK(synth_masked_series(other)[0].samples != series[0].samples);
  }

  SUBCASE("argument checks") {
    auto bad = opt;
    bad.n_samples = 1000;
    CHECK_THROWS_AS(synth_masked_series(bad), ArgumentError);
    bad = opt;
    bad.count = 1;
    CHECK_THROWS_AS(synth_masked_series(bad), ArgumentError);
  }
}

TEST_CASE("noise injection at a target snr") {
  const auto x = oracle::gaussian(20000, 1);
  const auto y = add_noise_at_snr(x, 5.0, 9);
  double ps = 0, pn = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ps += x[i] * x[i];
    pn += (y[i] - x[i]) * (y[i] - x[i]);
  }
  CHECK(std::abs(10.0 * std::log10(ps / pn) - 5.0) < 0.5);
  CHECK(add_noise_at_snr(x, 5.0, 9) == y);

  const auto quiet = add_noise_at_snr(x, 300.0, 9);
  double err = 0;
  for (std::size_t i = 0; i < x.size(); ++i) err += (quiet[i] - x[i]) * (quiet[i] - x[i]);
  CHECK(std::sqrt(err / x.size()) < 1e-10);

  const std::vector<double> zeros(64, 0.0);
  CHECK_THROWS_AS(add_noise_at_snr(zeros, 5.0, 1), UndefinedQuantityError);
}

TEST_CASE("normalize_peak") {
  Signal1D s;
  s.samples = {0.25, -0.5, 0.1};
  CHECK(normalize_peak(s).samples == std::vector<double>{0.5, -1.0, 0.2});
  s.samples = {0.0, 0.0};
  CHECK_THROWS_AS(normalize_peak(s), UndefinedQuantityError);
}
