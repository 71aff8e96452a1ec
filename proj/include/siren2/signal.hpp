#pragma once

// Target signals, coordinate grids, file I/O and noise injection.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace siren2 {

struct Signal1D {
  std::vector<double> samples;
  int sample_rate = 1;
  std::string name;

  std::size_t size() const { return samples.size(); }
};

/// Row-major grayscale image. Stored intensities live in [0, 1].
struct Image2D {
  std::vector<double> pixels;
  std::size_t height = 0;
  std::size_t width = 0;

  Image2D() = default;
  Image2D(std::size_t h, std::size_t w, double fill = 0.0) : pixels(h * w, fill), height(h), width(w) {}

  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  std::size_t size() const { return pixels.size(); }
};

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

/// Evenly spaced sample coordinates. `points` is N x d, one row per sample.
/// Two-dimensional grids enumerate row-major; column 0 holds the row coordinate.
struct CoordGrid {
  Eigen::MatrixXd points;
  std::vector<std::size_t> shape;
  std::vector<Interval> ranges;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// ---------------------------------------------------------------- audio

/// Reads a RIFF/WAVE file holding PCM16 or IEEE float32 samples. Multi-channel
/// audio is downmixed by averaging channels. PCM16 values are divided by 32768.
Signal1D load_wav(const std::filesystem::path& path);

/// Writes a mono IEEE float32 WAV. Samples outside [-1, 1] are clipped and a
/// warning is printed to stderr. Returns the number of clipped samples.
std::size_t save_wav(const Signal1D& signal, const std::filesystem::path& path);

/// Writes a mono PCM16 WAV (used for fixtures and interchange).
void save_wav_pcm16(std::span<const std::int16_t> samples, int sample_rate,
                    const std::filesystem::path& path);

/// Scales samples so that max |x| == 1. Throws UndefinedQuantityError on an
/// all-zero signal.
Signal1D normalize_peak(Signal1D signal);

// ---------------------------------------------------------------- images

/// Reads a binary PGM (P5). maxval <= 255 uses one byte per pixel, otherwise
/// two big-endian bytes. Values are scaled by 1/maxval.
Image2D load_image_gray(const std::filesystem::path& path);

/// Writes a binary PGM at 8 or 16 bits. Values are clamped to [0, 1].
void save_image_gray(const Image2D& image, const std::filesystem::path& path, int bit_depth = 16);

/// [0,1] intensities to [-1,1] training targets, and back.
std::vector<double> image_to_target(const Image2D& image);
Image2D target_to_image(std::span<const double> values, std::size_t height, std::size_t width);

// ---------------------------------------------------------------- grids

CoordGrid coord_grid(std::span<const std::size_t> shape, std::span<const Interval> ranges);
CoordGrid coord_grid_1d(std::size_t n, Interval range = {});
CoordGrid coord_grid_2d(std::size_t height, std::size_t width, Interval range = {});

// ---------------------------------------------------------------- synthesis

struct MaskedSeriesOptions {
  std::size_t n_samples = 4096;
  std::size_t count = 8;
  std::uint64_t seed = 0;
  double max_mask_fraction = 0.9;
  int sample_rate = 1;
};

/// Cutoff fraction applied to series member `index` (0-based).
double series_mask_fraction(std::size_t index, std::size_t count, double max_mask_fraction);

/// Broadband series S1..Sn: S1 is seeded white Gaussian noise normalized to
/// peak 1; later members zero a linearly growing share of the low one-sided
/// bins of S1 and are renormalized to peak 1.
std::vector<Signal1D> synth_masked_series(const MaskedSeriesOptions& options);

// ---------------------------------------------------------------- noise

/// Adds white Gaussian noise whose variance is mean(x^2) / 10^(snr_db / 10).
std::vector<double> add_noise_at_snr(std::span<const double> values, double snr_db, std::uint64_t seed);
Signal1D add_noise_at_snr(const Signal1D& signal, double snr_db, std::uint64_t seed);
Image2D add_noise_at_snr(const Image2D& image, double snr_db, std::uint64_t seed);

}  // namespace siren2
