#include "siren2/signal.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>

#include "siren2/error.hpp"
#include "siren2/spectral.hpp"

namespace siren2 {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string wav_header(std::uint16_t format, std::uint16_t bits, int sample_rate, std::uint32_t data_bytes) {
  std::string out;
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put32(out, 16);
  put16(out, format);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out += "data";
  put32(out, data_bytes);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

// ---------------------------------------------------------------- audio

Signal1D load_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError(path.string() + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(path.string() + ": fmt chunk too short");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      sample_rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError(path.string() + ": extensible fmt chunk too short");
        format = le16(chunk + 32);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError(path.string() + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(path.string() + ": missing data chunk");
  if (channels == 0 || sample_rate == 0) throw FormatError(path.string() + ": invalid channel count or rate");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedFormatError(path.string() + ": unsupported encoding (format " + std::to_string(format) +
                                 ", " + std::to_string(bits) + " bits)");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw EmptySignalError(path.string() + ": no samples");

  Signal1D out;
  out.sample_rate = static_cast<int>(sample_rate);
  out.name = path.stem().string();
  out.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + f * frame_bytes + c * (bits / 8);
      if (pcm16) {
        acc += static_cast<double>(static_cast<std::int16_t>(le16(p))) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(le32(p)));
      }
    }
    out.samples[f] = channels == 1 ? acc : acc / channels;
    if (!std::isfinite(out.samples[f])) throw FormatError(path.string() + ": non-finite sample");
  }
  return out;
}

std::size_t save_wav(const Signal1D& signal, const std::filesystem::path& path) {
  if (signal.sample_rate <= 0) throw ArgumentError("save_wav: sample rate must be positive");
  const auto bytes = static_cast<std::uint32_t>(signal.samples.size() * 4);
  std::string out = wav_header(kFormatFloat, 32, signal.sample_rate, bytes);
  out.reserve(out.size() + bytes);
  std::size_t clipped = 0;
  for (double s : signal.samples) {
    if (s > 1.0 || s < -1.0) {
      ++clipped;
      s = std::clamp(s, -1.0, 1.0);
    }
    put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
  }
  if (clipped > 0) {
    std::cerr << "warning: save_wav clipped " << clipped << " sample(s) to [-1, 1] in " << path.string() << "\n";
  }
  write_bytes(path, out);
  return clipped;
}

void save_wav_pcm16(std::span<const std::int16_t> samples, int sample_rate, const std::filesystem::path& path) {
  std::string out = wav_header(kFormatPcm, 16, sample_rate, static_cast<std::uint32_t>(samples.size() * 2));
  for (auto s : samples) put16(out, static_cast<std::uint16_t>(s));
  write_bytes(path, out);
}

Signal1D normalize_peak(Signal1D signal) {
  double peak = 0.0;
  for (double s : signal.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) throw UndefinedQuantityError("normalize_peak: all-zero signal");
  for (double& s : signal.samples) s /= peak;
  return signal;
}

// ---------------------------------------------------------------- images

Image2D load_image_gray(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError(path.string() + ": bad PGM header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1u << 30)) throw FormatError(path.string() + ": PGM header value too large");
      ++pos;
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError(path.string() + ": bad magic number");
  pos = 2;
  const std::size_t width = read_int();
  const std::size_t height = read_int();
  const std::size_t maxval = read_int();
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535)
    throw FormatError(path.string() + ": invalid PGM dimensions or maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(path.string() + ": bad PGM header");
  ++pos;

  const std::size_t depth = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos < width * height * depth) throw FormatError(path.string() + ": truncated PGM payload");

  Image2D img(height, width);
  for (std::size_t i = 0; i < width * height; ++i) {
    std::size_t v = depth == 1 ? bytes[pos + i] : (static_cast<std::size_t>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
    img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

void save_image_gray(const Image2D& image, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("save_image_gray: bit depth must be 8 or 16");
  if (image.height * image.width != image.pixels.size() || image.pixels.empty())
    throw ArgumentError("save_image_gray: inconsistent image shape");
  const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
  std::ostringstream header;
  header << "P5\n" << image.width << " " << image.height << "\n" << maxval << "\n";
  std::string out = header.str();
  for (double v : image.pixels) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (bit_depth == 16) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  write_bytes(path, out);
}

std::vector<double> image_to_target(const Image2D& image) {
  std::vector<double> out(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), out.begin(), [](double v) { return 2.0 * v - 1.0; });
  return out;
}

Image2D target_to_image(std::span<const double> values, std::size_t height, std::size_t width) {
  if (values.size() != height * width) throw ArgumentError("target_to_image: size mismatch");
  Image2D img(height, width);
  std::transform(values.begin(), values.end(), img.pixels.begin(), [](double v) { return 0.5 * (v + 1.0); });
  return img;
}

// ---------------------------------------------------------------- grids

namespace {

std::vector<double> linspace(std::size_t n, Interval range) {
  std::vector<double> out(n);
  const double span = range.hi - range.lo;
  for (std::size_t i = 0; i < n; ++i) out[i] = range.lo + span * static_cast<double>(i) / static_cast<double>(n - 1);
  out.front() = range.lo;
  out.back() = range.hi;
  return out;
}

}  // namespace

CoordGrid coord_grid(std::span<const std::size_t> shape, std::span<const Interval> ranges) {
  if (shape.empty() || shape.size() > 2) throw ArgumentError("coord_grid: 1 or 2 axes supported");
  if (ranges.size() != shape.size()) throw ArgumentError("coord_grid: one range per axis required");
  for (auto n : shape)
    if (n < 2) throw ArgumentError("coord_grid: each axis needs at least 2 points");
  for (const auto& r : ranges)
    if (!(r.hi > r.lo)) throw ArgumentError("coord_grid: empty range");

  CoordGrid grid;
  grid.shape.assign(shape.begin(), shape.end());
  grid.ranges.assign(ranges.begin(), ranges.end());
  if (shape.size() == 1) {
    const auto axis = linspace(shape[0], ranges[0]);
    grid.points = Eigen::Map<const Eigen::VectorXd>(axis.data(), static_cast<Eigen::Index>(axis.size()));
  } else {
    const auto rows = linspace(shape[0], ranges[0]);
    const auto cols = linspace(shape[1], ranges[1]);
    grid.points.resize(static_cast<Eigen::Index>(shape[0] * shape[1]), 2);
    for (std::size_t r = 0; r < shape[0]; ++r) {
      for (std::size_t c = 0; c < shape[1]; ++c) {
        const auto i = static_cast<Eigen::Index>(r * shape[1] + c);
        grid.points(i, 0) = rows[r];
        grid.points(i, 1) = cols[c];
      }
    }
  }
  return grid;
}

CoordGrid coord_grid_1d(std::size_t n, Interval range) {
  const std::array<std::size_t, 1> shape{n};
  const std::array<Interval, 1> ranges{range};
  return coord_grid(shape, ranges);
}

CoordGrid coord_grid_2d(std::size_t height, std::size_t width, Interval range) {
  const std::array<std::size_t, 2> shape{height, width};
  const std::array<Interval, 2> ranges{range, range};
  return coord_grid(shape, ranges);
}

// ---------------------------------------------------------------- synthesis

double series_mask_fraction(std::size_t index, std::size_t count, double max_mask_fraction) {
  return max_mask_fraction * static_cast<double>(index) / static_cast<double>(count - 1);
}

std::vector<Signal1D> synth_masked_series(const MaskedSeriesOptions& options) {
  const std::size_t n = options.n_samples;
  if (n < 256 || !is_power_of_two(n)) throw ArgumentError("synth_masked_series: length must be a power of two >= 256");
  if (options.count < 2) throw ArgumentError("synth_masked_series: count must be at least 2");
  if (!(options.max_mask_fraction >= 0.0 && options.max_mask_fraction <= 1.0))
    throw ArgumentError("synth_masked_series: mask fraction must lie in [0, 1]");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Signal1D base;
  base.sample_rate = options.sample_rate;
  base.samples.resize(n);
  for (double& s : base.samples) s = normal(rng);
  base = normalize_peak(std::move(base));

  std::vector<Signal1D> series;
  series.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    Signal1D s;
    s.sample_rate = options.sample_rate;
    s.name = "S" + std::to_string(i + 1);
    if (i == 0) {
      s.samples = base.samples;
    } else {
      s.samples = highpass_mask(base.samples, series_mask_fraction(i, options.count, options.max_mask_fraction));
      s = normalize_peak(std::move(s));
    }
    series.push_back(std::move(s));
  }
  return series;
}

// ---------------------------------------------------------------- noise

std::vector<double> add_noise_at_snr(std::span<const double> values, double snr_db, std::uint64_t seed) {
  if (values.empty()) throw ArgumentError("add_noise_at_snr: empty signal");
  if (std::isnan(snr_db)) throw ArgumentError("add_noise_at_snr: SNR is NaN");
  double power = 0.0;
  for (double v : values) power += v * v;
  power /= static_cast<double>(values.size());
  if (power == 0.0) throw UndefinedQuantityError("add_noise_at_snr: SNR undefined for an all-zero signal");

  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v += sigma * normal(rng);
  return out;
}

Signal1D add_noise_at_snr(const Signal1D& signal, double snr_db, std::uint64_t seed) {
  Signal1D out = signal;
  out.samples = add_noise_at_snr(signal.samples, snr_db, seed);
  return out;
}

Image2D add_noise_at_snr(const Image2D& image, double snr_db, std::uint64_t seed) {
  Image2D out = image;
  out.pixels = add_noise_at_snr(image.pixels, snr_db, seed);
  return out;
}

}  // namespace siren2
