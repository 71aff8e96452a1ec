#include "siren2/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "siren2/error.hpp"

namespace siren2 {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw ArgumentError("fft_inplace: length must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles are evaluated directly rather than by recurrence so the error
    // stays at a few ulps for large n.
    std::vector<Complex> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = data[i + k];
        const Complex v = data[i + k + half] * twiddle[k];
        data[i + k] = u + v;
        data[i + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> dft_any(std::span<const Complex> data, bool inverse) {
  const std::size_t n = data.size();
  std::vector<Complex> out(data.begin(), data.end());
  if (n <= 1) return out;
  if (is_power_of_two(n)) {
    fft_inplace(out, inverse);
    return out;
  }

  // Bluestein: X_k = conj(w_k) * sum_j (x_j conj(w_j)) w_{k-j}, w_j = exp(i pi j^2 / n).
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t j = 0; j < n; ++j) {
    // j^2 mod 2n keeps the angle argument small.
    const auto jj = static_cast<double>((static_cast<unsigned long long>(j) * j) % (2 * n));
    const double angle = sign * std::numbers::pi * jj / static_cast<double>(n);
    chirp[j] = {std::cos(angle), std::sin(angle)};
  }
  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<Complex> a(m), b(m);
  for (std::size_t j = 0; j < n; ++j) a[j] = out[j] * chirp[j];
  b[0] = std::conj(chirp[0]);
  for (std::size_t j = 1; j < n; ++j) b[j] = b[m - j] = std::conj(chirp[j]);
  fft_inplace(a);
  fft_inplace(b);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_inplace(a, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
  return out;
}

std::vector<Complex> rfft_full(std::span<const double> samples) {
  std::vector<Complex> buf(next_power_of_two(std::max<std::size_t>(samples.size(), 1)));
  for (std::size_t i = 0; i < samples.size(); ++i) buf[i] = samples[i];
  fft_inplace(buf);
  return buf;
}

std::vector<Complex> dft_naive_complex(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0) throw ArgumentError("dft_naive: empty input");
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (!std::isfinite(samples[t])) throw ArgumentError("dft_naive: non-finite input");
      // (k t) mod n keeps the phase exact for large products.
      const auto kt = static_cast<double>((static_cast<unsigned long long>(k) * t) % n);
      const double angle = -2.0 * std::numbers::pi * kt / static_cast<double>(n);
      acc += samples[t] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

namespace {

Spectrum one_sided(const std::vector<Complex>& full, std::size_t n_input, double bin_hz) {
  Spectrum s;
  s.n_fft = full.size();
  s.n_input = n_input;
  s.bin_hz = bin_hz;
  s.magnitudes.resize(full.size() / 2 + 1);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) s.magnitudes[k] = std::abs(full[k]);
  return s;
}

}  // namespace

Spectrum dft_naive(std::span<const double> samples) {
  return one_sided(dft_naive_complex(samples), samples.size(), 1.0);
}

Spectrum fft(std::span<const double> samples, double bin_hz) {
  if (samples.empty()) throw ArgumentError("fft: empty input");
  for (double v : samples)
    if (!std::isfinite(v)) throw ArgumentError("fft: non-finite input");
  return one_sided(rfft_full(samples), samples.size(), bin_hz);
}

PsdCurve cumulative_psd(const Eigen::MatrixXd& pre_activations, int layer_index) {
  if (pre_activations.size() == 0) throw ArgumentError("cumulative_psd: empty matrix");
  const auto n = static_cast<std::size_t>(pre_activations.rows());
  PsdCurve curve;
  curve.layer_index = layer_index;
  curve.n_units = static_cast<std::size_t>(pre_activations.cols());
  const std::size_t n_fft = next_power_of_two(n);
  curve.values.assign(n_fft / 2 + 1, 0.0);
  std::vector<Complex> buf(n_fft);
  for (Eigen::Index j = 0; j < pre_activations.cols(); ++j) {
    std::fill(buf.begin(), buf.end(), Complex{});
    for (std::size_t i = 0; i < n; ++i) buf[i] = pre_activations(static_cast<Eigen::Index>(i), j);
    fft_inplace(buf);
    for (std::size_t k = 0; k < curve.values.size(); ++k) curve.values[k] += std::norm(buf[k]);
  }
  return curve;
}

double spectral_centroid(const Spectrum& spectrum, CentroidUnits units) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < spectrum.magnitudes.size(); ++k) {
    num += static_cast<double>(k) * spectrum.magnitudes[k];
    den += spectrum.magnitudes[k];
  }
  if (!(den > 0.0)) throw UndefinedQuantityError("spectral_centroid: signal has no spectral mass");
  const double psi_bins = 2.0 * num / den;
  switch (units) {
    case CentroidUnits::Bins:
      return psi_bins;
    case CentroidUnits::Hz:
      return psi_bins * spectrum.bin_hz;
    case CentroidUnits::Normalized:
      return psi_bins / static_cast<double>(spectrum.n_fft);
  }
  return psi_bins;
}

double spectral_centroid(std::span<const double> samples, CentroidUnits units, double sample_rate) {
  const std::size_t n_fft = next_power_of_two(samples.size());
  return spectral_centroid(fft(samples, sample_rate / static_cast<double>(n_fft)), units);
}

double spectral_centroid(const Signal1D& signal, CentroidUnits units) {
  return spectral_centroid(signal.samples, units, static_cast<double>(signal.sample_rate));
}

double spectral_centroid(const Image2D& image, CentroidUnits units) {
  return spectral_centroid(image.pixels, units, 1.0);
}

NoiseScales winner_noise_scales(double psi, int channels, const WinnerHyper& hyper) {
  if (!(psi >= 0.0) || !std::isfinite(psi)) throw ArgumentError("winner_noise_scales: psi must be finite and >= 0");
  if (channels < 1) throw ArgumentError("winner_noise_scales: channel count must be >= 1");
  if (hyper.s0_max < 0.0 || !(hyper.a > 0.0) || hyper.b < 0.0)
    throw ArgumentError("winner_noise_scales: need s0_max >= 0, a > 0, b >= 0");
  const double ratio = psi / static_cast<double>(channels);
  return {hyper.s0_max * -std::expm1(-hyper.a * ratio), hyper.b * ratio};
}

Spectrum highpass_mask(const Spectrum& spectrum, double cutoff_fraction) {
  if (!(cutoff_fraction >= 0.0 && cutoff_fraction <= 1.0))
    throw ArgumentError("highpass_mask: cutoff fraction must lie in [0, 1]");
  Spectrum out = spectrum;
  const double cutoff = cutoff_fraction * static_cast<double>(spectrum.n_fft / 2);
  for (std::size_t k = 0; k < out.magnitudes.size() && static_cast<double>(k) < cutoff; ++k) out.magnitudes[k] = 0.0;
  return out;
}

std::vector<double> highpass_mask(std::span<const double> samples, double cutoff_fraction) {
  if (!(cutoff_fraction >= 0.0 && cutoff_fraction <= 1.0))
    throw ArgumentError("highpass_mask: cutoff fraction must lie in [0, 1]");
  const std::size_t n = samples.size();
  if (!is_power_of_two(n)) throw ArgumentError("highpass_mask: length must be a power of two");
  if (cutoff_fraction == 0.0) return {samples.begin(), samples.end()};

  auto full = rfft_full(samples);
  const double cutoff = cutoff_fraction * static_cast<double>(n / 2);
  for (std::size_t k = 0; k <= n / 2 && static_cast<double>(k) < cutoff; ++k) {
    full[k] = 0.0;
    full[(n - k) % n] = 0.0;
  }
  fft_inplace(full, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real() / static_cast<double>(n);
  return out;
}

std::vector<Complex> fft2d(std::span<const double> values, std::size_t height, std::size_t width) {
  if (values.size() != height * width || values.empty()) throw ArgumentError("fft2d: size mismatch");
  std::vector<Complex> grid(values.begin(), values.end());
  std::vector<Complex> line;
  for (std::size_t r = 0; r < height; ++r) {
    line.assign(grid.begin() + static_cast<std::ptrdiff_t>(r * width),
                grid.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    const auto t = dft_any(line);
    std::copy(t.begin(), t.end(), grid.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  line.resize(height);
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t r = 0; r < height; ++r) line[r] = grid[r * width + c];
    const auto t = dft_any(line);
    for (std::size_t r = 0; r < height; ++r) grid[r * width + c] = t[r];
  }
  return grid;
}

Image2D fft_error_map(const Image2D& truth, const Image2D& prediction) {
  if (truth.height != prediction.height || truth.width != prediction.width || truth.size() != prediction.size())
    throw ArgumentError("fft_error_map: shape mismatch");
  const std::size_t h = truth.height, w = truth.width;
  std::vector<double> diff(truth.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = truth.pixels[i] - prediction.pixels[i];
  // The transform is linear, so F(truth) - F(prediction) = F(truth - prediction).
  const auto spec = fft2d(diff, h, w);
  Image2D map(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t sr = (r + h / 2) % h;
      const std::size_t sc = (c + w / 2) % w;
      map.at(sr, sc) = std::log1p(std::abs(spec[r * w + c]));
    }
  }
  return map;
}

std::string spectrum_to_csv(const Spectrum& spectrum) {
  std::ostringstream out;
  out.precision(17);
  out << "bin,frequency,magnitude\n";
  for (std::size_t k = 0; k < spectrum.magnitudes.size(); ++k)
    out << k << "," << static_cast<double>(k) * spectrum.bin_hz << "," << spectrum.magnitudes[k] << "\n";
  return out.str();
}

std::string psd_to_csv(const PsdCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "bin,psd\n";
  for (std::size_t k = 0; k < curve.values.size(); ++k) out << k << "," << curve.values[k] << "\n";
  return out.str();
}

const char* to_string(CentroidUnits units) {
  switch (units) {
    case CentroidUnits::Bins:
      return "bins";
    case CentroidUnits::Hz:
      return "hz";
    case CentroidUnits::Normalized:
      return "normalized";
  }
  return "bins";
}

CentroidUnits centroid_units_from_string(const std::string& name) {
  if (name == "bins") return CentroidUnits::Bins;
  if (name == "hz") return CentroidUnits::Hz;
  if (name == "normalized") return CentroidUnits::Normalized;
  throw ArgumentError("unknown centroid units: " + name);
}

}  // namespace siren2
