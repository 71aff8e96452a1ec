#pragma once

// Fourier analysis: transforms, pre-activation PSDs, spectral centroid,
// the target-aware noise-scale rule, high-pass masking and FFT error maps.

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "siren2/signal.hpp"

namespace siren2 {

using Complex = std::complex<double>;

/// One-sided DFT magnitudes over bins 0..n_fft/2.
struct Spectrum {
  std::vector<double> magnitudes;
  double bin_hz = 1.0;
  std::size_t n_fft = 0;
  std::size_t n_input = 0;  // length before zero padding
};

/// Per-bin sum over units of squared one-sided DFT magnitudes.
struct PsdCurve {
  std::vector<double> values;
  int layer_index = 0;
  std::size_t n_units = 0;
};

enum class CentroidUnits {
  Bins,        // bin index k
  Hz,          // k * sample_rate / N
  Normalized,  // k / N, so the doubled centroid lies in [0, 1]
};

struct WinnerHyper {
  double s0_max = 3500.0;
  double a = 5.0;
  double b = 3.0;

  static WinnerHyper audio() { return {3500.0, 5.0, 3.0}; }
  static WinnerHyper image() { return {50.0, 5.0, 0.4}; }
};

struct NoiseScales {
  double s0 = 0.0;
  double s1 = 0.0;
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 transform. Size must be a power of two.
/// The inverse is unnormalized.
void fft_inplace(std::span<Complex> data, bool inverse = false);

/// Transform of arbitrary length (radix-2 when possible, Bluestein otherwise).
std::vector<Complex> dft_any(std::span<const Complex> data, bool inverse = false);

/// Full complex DFT of a real sequence, zero padded to a power of two.
std::vector<Complex> rfft_full(std::span<const double> samples);

/// O(N^2) direct evaluation, one-sided magnitudes. Serves as the FFT oracle.
Spectrum dft_naive(std::span<const double> samples);
std::vector<Complex> dft_naive_complex(std::span<const double> samples);

/// One-sided magnitude spectrum. Non-power-of-two input is zero padded and the
/// padded length is recorded in n_fft.
Spectrum fft(std::span<const double> samples, double bin_hz = 1.0);

/// `pre_activations` is N samples x N_h units.
PsdCurve cumulative_psd(const Eigen::MatrixXd& pre_activations, int layer_index);

/// psi = 2 * sum_k k |Y(k)| / sum_k |Y(k)| over one-sided bins.
double spectral_centroid(const Spectrum& spectrum, CentroidUnits units = CentroidUnits::Bins);
double spectral_centroid(std::span<const double> samples, CentroidUnits units = CentroidUnits::Bins,
                         double sample_rate = 1.0);
double spectral_centroid(const Signal1D& signal, CentroidUnits units = CentroidUnits::Bins);
double spectral_centroid(const Image2D& image, CentroidUnits units = CentroidUnits::Bins);

/// s0 = s0_max (1 - exp(-a psi / C)), s1 = b psi / C.
NoiseScales winner_noise_scales(double psi, int channels, const WinnerHyper& hyper);

/// Zeroes one-sided bins with index < cutoff * (N / 2).
Spectrum highpass_mask(const Spectrum& spectrum, double cutoff_fraction);
/// Masks both conjugate halves and returns the inverse transform.
/// Length must be a power of two.
std::vector<double> highpass_mask(std::span<const double> samples, double cutoff_fraction);

/// 2-D transform by separable row/column passes. `values` is row-major.
std::vector<Complex> fft2d(std::span<const double> values, std::size_t height, std::size_t width);

/// log(1 + |F(truth) - F(prediction)|), DC shifted to the centre.
Image2D fft_error_map(const Image2D& truth, const Image2D& prediction);

std::string spectrum_to_csv(const Spectrum& spectrum);
std::string psd_to_csv(const PsdCurve& curve);

const char* to_string(CentroidUnits units);
CentroidUnits centroid_units_from_string(const std::string& name);

}  // namespace siren2
