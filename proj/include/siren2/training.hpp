#pragma once

// Metrics, Adam, supervised fitting and self-supervised (holdout) denoising.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "siren2/network.hpp"
#include "siren2/signal.hpp"

namespace siren2 {

enum class PeakMode { Unit, MaxAbsTarget };

const char* to_string(PeakMode mode);
PeakMode peak_mode_from_string(const std::string& name);

struct TrainConfig {
  int epochs = 3000;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;      // mini-batch shuffling and holdout selection
  int log_every = 1;
  PeakMode peak_mode = PeakMode::Unit;
  /// Multiplies prediction and target before PSNR is taken: 0.5 maps
  /// [-1, 1] image targets back to their [0, 1] range.
  double eval_scale = 1.0;
  double holdout_fraction = 0.02;
  int patience = 500;  // logged evaluations without holdout improvement

  void validate() const;
};

// ---------------------------------------------------------------- metrics

double mse(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& truth);

/// 10 log10(peak^2 / MSE). Returns +infinity when MSE is zero.
double psnr(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& truth, PeakMode mode = PeakMode::Unit);
double psnr(std::span<const double> prediction, std::span<const double> truth, PeakMode mode = PeakMode::Unit);

double mae(std::span<const double> prediction, std::span<const double> truth);

/// Mean SSIM over all 8x8 sliding windows (stride 1, uniform weights),
/// c1 = (0.01 R)^2, c2 = (0.03 R)^2.
double ssim(const Image2D& prediction, const Image2D& truth, double data_range = 1.0);

constexpr std::size_t kSsimWindow = 8;

// ---------------------------------------------------------------- Adam

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  long step = 0;

  static AdamState zeros_like(const Params& params);
};

/// Bias-corrected Adam update applied in place.
void adam_step(AdamState& state, Params& params, const Grads& grads, const TrainConfig& config);

// ---------------------------------------------------------------- fitting

struct LogEntry {
  int epoch = 0;
  double loss = 0.0;
  double psnr = 0.0;
  double holdout_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainLog {
  std::vector<LogEntry> entries;
  int peak_epoch = 0;
  double peak_psnr = -std::numeric_limits<double>::infinity();
  /// Epoch whose parameters were returned (peak PSNR, or holdout minimum).
  int selected_epoch = 0;
  bool stopped_early = false;
  double psi = 0.0;
  NoiseScales scales;
  double wall_seconds = 0.0;

  std::string to_csv() const;
};

nlohmann::json to_json(const TrainLog& log);

struct FitResult {
  Params params;
  TrainLog log;
};

/// Centroid of the target and the WINNER scales the config resolves to.
/// For non-WINNER schemes the scales are zero. Manual scales take precedence.
struct ResolvedScales {
  double psi = 0.0;
  NoiseScales scales;
};
ResolvedScales resolve_winner_scales(const NetworkConfig& config, const Eigen::MatrixXd& targets);

/// Full-batch (or shuffled mini-batch) MSE training. Returns the parameters
/// at the logged epoch with the highest PSNR.
FitResult fit(const NetworkConfig& net, const TrainConfig& train, const CoordGrid& coords,
              const Eigen::MatrixXd& targets);

/// Trains on all points except a seeded holdout subset and returns the
/// parameters at the logged epoch with minimum holdout loss. Stops after
/// `patience` logged evaluations without improvement.
FitResult fit_denoise(const NetworkConfig& net, const TrainConfig& train, const CoordGrid& coords,
                      const Eigen::MatrixXd& noisy_targets);

/// Indices of the holdout subset used by fit_denoise.
std::vector<std::size_t> holdout_indices(std::size_t n_points, double fraction, std::uint64_t seed);

Eigen::MatrixXd as_column(std::span<const double> values);

}  // namespace siren2
