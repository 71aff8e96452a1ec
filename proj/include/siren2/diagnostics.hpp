#pragma once

// Experiment harnesses: per-layer distribution/PSD reports, the masked-series
// bottleneck experiment and the (s0, s1) sensitivity sweep.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "siren2/network.hpp"
#include "siren2/spectral.hpp"
#include "siren2/training.hpp"

namespace siren2 {

constexpr std::size_t kHistogramBins = 101;

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

/// Symmetric range covering the 0.1-99.9 percentiles, 101 bins; values
/// outside the range land in the edge bins.
Histogram symmetric_histogram(const Eigen::MatrixXd& values, std::size_t bins = kHistogramBins);

struct LayerSpectra {
  std::string name;  // "layer1_pre", "layer1_post", ..., "output"
  int layer_index = 0;
  Histogram histogram;
  PsdCurve psd;
};

struct LayerSpectraReport {
  std::string checkpoint;
  std::vector<LayerSpectra> layers;

  const LayerSpectra& find(const std::string& name) const;
};

LayerSpectraReport layer_spectra_report(const Params& params, const CoordGrid& coords,
                                        const std::string& checkpoint);

/// Sum of PSD values in bins strictly above the median bin index.
double high_band_energy(const PsdCurve& curve);

struct BottleneckRow {
  std::size_t signal_index = 0;
  std::string signal_name;
  double psi = 0.0;
  InitScheme scheme = InitScheme::Siren;
  NoiseScales scales;
  double peak_psnr = 0.0;
  int peak_epoch = 0;
  double rms_ratio = 0.0;  // RMS(output) / RMS(target) at the returned params
  bool failed = false;
  std::string error;
};

struct BottleneckTable {
  std::vector<BottleneckRow> rows;

  const BottleneckRow& at(std::size_t signal_index, InitScheme scheme) const;
  std::string to_csv() const;
};

/// Harness-level knobs shared by the experiments.
struct HarnessOptions {
  std::vector<InitScheme> schemes = {InitScheme::Siren, InitScheme::Winner};
  /// Restricts the WINNER scheme to these series indices (empty = all).
  std::vector<std::size_t> winner_subset;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Trains every (signal, scheme) pair with shared seeds. Each signal is
/// fitted on a 1-D grid over net.first_layer range [-1, 1].
BottleneckTable bottleneck_experiment(const std::vector<Signal1D>& series, const NetworkConfig& net,
                                      const TrainConfig& train, const HarnessOptions& options = {});

struct SweepGrid {
  std::vector<double> s0_values;
  std::vector<double> s1_values;
  /// psnr[i][j] for s0_values[i], s1_values[j]. Failed cells are empty.
  std::vector<std::vector<std::optional<double>>> psnr;

  std::string to_csv() const;
};

SweepGrid noise_sweep(const Signal1D& target, const NetworkConfig& net, const TrainConfig& train,
                      const std::vector<double>& s0_values, const std::vector<double>& s1_values,
                      unsigned threads = 0);

/// Runs `task(i)` for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

nlohmann::json to_json(const Histogram& histogram);
nlohmann::json to_json(const LayerSpectraReport& report);
nlohmann::json to_json(const BottleneckTable& table);
nlohmann::json to_json(const SweepGrid& grid);

/// Writes one CSV per layer plus manifest.json into `directory`.
void write_layer_spectra(const LayerSpectraReport& report, const std::filesystem::path& directory);

}  // namespace siren2
