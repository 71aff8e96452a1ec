#include "siren2/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "siren2/error.hpp"

namespace siren2 {

using Eigen::MatrixXd;

const char* to_string(PeakMode mode) { return mode == PeakMode::Unit ? "unit" : "max_abs_target"; }

PeakMode peak_mode_from_string(const std::string& name) {
  if (name == "unit") return PeakMode::Unit;
  if (name == "max_abs_target") return PeakMode::MaxAbsTarget;
  throw ArgumentError("unknown PSNR peak mode: " + name);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("train: epochs must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("train: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ArgumentError("train: Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ArgumentError("train: epsilon must be > 0");
  if (log_every < 1) throw ArgumentError("train: log_every must be >= 1");
  if (!(eval_scale > 0.0)) throw ArgumentError("train: eval_scale must be > 0");
  if (patience < 1) throw ArgumentError("train: patience must be >= 1");
}

// ---------------------------------------------------------------- metrics

namespace {

void check_same_shape(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ArgumentError(std::string(what) + ": shape mismatch");
  if (a == 0) throw ArgumentError(std::string(what) + ": empty input");
}

double mean_sq_diff(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(b.size());
}

double psnr_from_mse(double mse_value, double peak) {
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak) - 10.0 * std::log10(mse_value);
}

double peak_of(std::span<const double> truth, PeakMode mode) {
  if (mode == PeakMode::Unit) return 1.0;
  double peak = 0.0;
  for (double v : truth) peak = std::max(peak, std::abs(v));
  return peak;
}

}  // namespace

double mse(const MatrixXd& prediction, const MatrixXd& truth) {
  if (prediction.rows() != truth.rows() || prediction.cols() != truth.cols())
    throw ArgumentError("mse: shape mismatch");
  if (truth.size() == 0) throw ArgumentError("mse: empty input");
  return mean_sq_diff(std::span<const double>(prediction.data(), static_cast<std::size_t>(prediction.size())),
                      std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

double psnr(std::span<const double> prediction, std::span<const double> truth, PeakMode mode) {
  check_same_shape(prediction.size(), truth.size(), "psnr");
  return psnr_from_mse(mean_sq_diff(prediction, truth), peak_of(truth, mode));
}

double psnr(const MatrixXd& prediction, const MatrixXd& truth, PeakMode mode) {
  if (prediction.rows() != truth.rows() || prediction.cols() != truth.cols())
    throw ArgumentError("psnr: shape mismatch");
  return psnr(std::span<const double>(prediction.data(), static_cast<std::size_t>(prediction.size())),
              std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())), mode);
}

double mae(std::span<const double> prediction, std::span<const double> truth) {
  check_same_shape(prediction.size(), truth.size(), "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += std::abs(prediction[i] - truth[i]);
  return acc / static_cast<double>(truth.size());
}

double ssim(const Image2D& prediction, const Image2D& truth, double data_range) {
  if (prediction.height != truth.height || prediction.width != truth.width || prediction.size() != truth.size())
    throw ArgumentError("ssim: shape mismatch");
  if (truth.height < kSsimWindow || truth.width < kSsimWindow)
    throw ArgumentError("ssim: image smaller than the 8x8 window");
  if (!(data_range > 0.0)) throw ArgumentError("ssim: data range must be > 0");

  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const double inv = 1.0 / static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r = 0; r + kSsimWindow <= truth.height; ++r) {
    for (std::size_t c = 0; c + kSsimWindow <= truth.width; ++c) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < kSsimWindow; ++i)
        for (std::size_t j = 0; j < kSsimWindow; ++j) {
          mx += prediction.at(r + i, c + j);
          my += truth.at(r + i, c + j);
        }
      mx *= inv;
      my *= inv;
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < kSsimWindow; ++i)
        for (std::size_t j = 0; j < kSsimWindow; ++j) {
          const double dx = prediction.at(r + i, c + j) - mx;
          const double dy = truth.at(r + i, c + j) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      vx *= inv;
      vy *= inv;
      cxy *= inv;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

// ---------------------------------------------------------------- Adam

AdamState AdamState::zeros_like(const Params& params) {
  AdamState s;
  s.m = zero_grads_like(params);
  s.v = zero_grads_like(params);
  return s;
}

void adam_step(AdamState& state, Params& params, const Grads& grads, const TrainConfig& config) {
  if (grads.size() != params.layers.size()) throw ArgumentError("adam_step: gradient layout mismatch");
  if (state.m.size() != params.layers.size()) state = AdamState::zeros_like(params);
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (grads[l].weight.rows() != params.layers[l].weight.rows() ||
        grads[l].weight.cols() != params.layers[l].weight.cols() ||
        grads[l].bias.size() != params.layers[l].bias.size())
      throw ArgumentError("adam_step: gradient shape mismatch at layer " + std::to_string(l + 1));
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite())
      throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(l + 1));
  }

  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = config.learning_rate, eps = config.epsilon;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < grads.size(); ++l) {
    update(params.layers[l].weight, state.m[l].weight, state.v[l].weight, grads[l].weight);
    update(params.layers[l].bias, state.m[l].bias, state.v[l].bias, grads[l].bias);
  }
}

// ---------------------------------------------------------------- logs

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt_double(v);
}

}  // namespace

std::string TrainLog::to_csv() const {
  const bool holdout = std::any_of(entries.begin(), entries.end(), [](const LogEntry& e) { return !std::isnan(e.holdout_loss); });
  std::string out = holdout ? "epoch,loss,psnr,holdout_loss\n" : "epoch,loss,psnr\n";
  for (const auto& e : entries) {
    out += std::to_string(e.epoch) + "," + fmt_double(e.loss) + "," + fmt_double(e.psnr);
    if (holdout) out += "," + fmt_double(e.holdout_loss);
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const TrainLog& log) {
  return {{"logged_epochs", log.entries.size()},
          {"peak_psnr", json_number(log.peak_psnr)},
          {"peak_epoch", log.peak_epoch},
          {"selected_epoch", log.selected_epoch},
          {"stopped_early", log.stopped_early},
          {"final_epoch", log.entries.empty() ? 0 : log.entries.back().epoch},
          {"psi", log.psi},
          {"s0", log.scales.s0},
          {"s1", log.scales.s1},
          {"wall_seconds", log.wall_seconds}};
}

// ---------------------------------------------------------------- fitting

Eigen::MatrixXd as_column(std::span<const double> values) {
  MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return m;
}

ResolvedScales resolve_winner_scales(const NetworkConfig& config, const MatrixXd& targets) {
  ResolvedScales out;
  const bool needs_psi = config.scheme == InitScheme::Winner && !config.winner_scales;
  // Row-major flattening: channels interleave per point.
  const MatrixXd flat = targets.transpose();
  const std::span<const double> values(flat.data(), static_cast<std::size_t>(flat.size()));
  try {
    out.psi = spectral_centroid(values, config.psi_units, 1.0);
  } catch (const UndefinedQuantityError&) {
    if (needs_psi) throw;
    out.psi = 0.0;
  }
  if (config.scheme != InitScheme::Winner) return out;
  out.scales = config.winner_scales ? *config.winner_scales
                                    : winner_noise_scales(out.psi, config.output_channels, config.hyper);
  return out;
}

namespace {

void check_problem(const NetworkConfig& net, const CoordGrid& coords, const MatrixXd& targets) {
  if (coords.size() == 0) throw ArgumentError("fit: empty coordinate grid");
  if (static_cast<std::size_t>(targets.rows()) != coords.size())
    throw ArgumentError("fit: target count does not match coordinate count");
  if (targets.cols() != net.output_channels) throw ArgumentError("fit: target channels do not match output_channels");
  if (coords.dim() != net.input_dim) throw ArgumentError("fit: coordinate dimension does not match input_dim");
  if (!targets.allFinite()) throw ArgumentError("fit: non-finite targets");
}

double scaled_psnr(const MatrixXd& out, const MatrixXd& targets, const TrainConfig& cfg) {
  if (cfg.eval_scale == 1.0) return psnr(out, targets, cfg.peak_mode);
  return psnr(MatrixXd(out * cfg.eval_scale), MatrixXd(targets * cfg.eval_scale), cfg.peak_mode);
}

template <typename Fn>
auto rethrow_with_epoch(int epoch, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
  }
}

}  // namespace

FitResult fit(const NetworkConfig& net, const TrainConfig& train, const CoordGrid& coords, const MatrixXd& targets) {
  net.validate();
  train.validate();
  check_problem(net, coords, targets);
  const auto start = std::chrono::steady_clock::now();

  const ResolvedScales resolved = resolve_winner_scales(net, targets);
  Params params = build_params(net, resolved.scales);

  FitResult result;
  result.log.psi = resolved.psi;
  result.log.scales = resolved.scales;
  result.params = params;

  Workspace ws;
  Grads grads = zero_grads_like(params);
  AdamState adam = AdamState::zeros_like(params);
  const auto n = static_cast<Eigen::Index>(coords.size());
  const double grad_scale = 2.0 / static_cast<double>(targets.size());
  MatrixXd residual;

  std::mt19937_64 shuffle_rng(train.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  MatrixXd batch_x, batch_y;

  for (int epoch = 0; epoch <= train.epochs; ++epoch) {
    const bool log_now = epoch % train.log_every == 0 || epoch == train.epochs;
    const bool full_batch = train.batch_size == 0 || train.batch_size >= coords.size();

    if (full_batch || log_now) {
      const MatrixXd& out = rethrow_with_epoch(epoch, [&]() -> const MatrixXd& { return ws.forward(params, coords.points); });
      residual = out - targets;
      if (log_now) {
        LogEntry entry;
        entry.epoch = epoch;
        entry.loss = residual.squaredNorm() / static_cast<double>(residual.size());
        entry.psnr = scaled_psnr(out, targets, train);
        result.log.entries.push_back(entry);
        if (entry.psnr > result.log.peak_psnr || result.log.entries.size() == 1) {
          result.log.peak_psnr = entry.psnr;
          result.log.peak_epoch = epoch;
          result.params = params;
        }
      }
    }
    if (epoch == train.epochs) break;

    if (full_batch) {
      residual *= grad_scale;
      rethrow_with_epoch(epoch, [&] { ws.backward(params, residual, grads); return 0; });
      rethrow_with_epoch(epoch, [&] { adam_step(adam, params, grads, train); return 0; });
      continue;
    }

    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const auto bs = static_cast<Eigen::Index>(train.batch_size);
    for (Eigen::Index begin = 0; begin < n; begin += bs) {
      const Eigen::Index count = std::min(bs, n - begin);
      batch_x.resize(count, coords.points.cols());
      batch_y.resize(count, targets.cols());
      for (Eigen::Index i = 0; i < count; ++i) {
        batch_x.row(i) = coords.points.row(order[static_cast<std::size_t>(begin + i)]);
        batch_y.row(i) = targets.row(order[static_cast<std::size_t>(begin + i)]);
      }
      rethrow_with_epoch(epoch, [&] {
        const MatrixXd& out = ws.forward(params, batch_x);
        residual = (2.0 / static_cast<double>(batch_y.size())) * (out - batch_y);
        ws.backward(params, residual, grads);
        adam_step(adam, params, grads, train);
        return 0;
      });
    }
  }

  result.log.selected_epoch = result.log.peak_epoch;
  result.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<std::size_t> holdout_indices(std::size_t n_points, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 0.5)) throw ArgumentError("holdout fraction must lie in (0, 0.5)");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_points)));
  if (count == 0) throw ArgumentError("holdout set is empty after rounding");
  std::vector<std::size_t> all(n_points);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

FitResult fit_denoise(const NetworkConfig& net, const TrainConfig& train, const CoordGrid& coords,
                      const MatrixXd& noisy_targets) {
  net.validate();
  train.validate();
  check_problem(net, coords, noisy_targets);
  if (train.batch_size != 0) throw ArgumentError("fit_denoise: only full-batch training is supported");
  const auto start = std::chrono::steady_clock::now();

  const auto n = static_cast<Eigen::Index>(coords.size());
  const auto channels = noisy_targets.cols();
  const auto holdout = holdout_indices(coords.size(), train.holdout_fraction, train.seed);
  Eigen::VectorXd train_mask = Eigen::VectorXd::Ones(n);
  for (auto i : holdout) train_mask(static_cast<Eigen::Index>(i)) = 0.0;
  const double n_train = static_cast<double>(n - static_cast<Eigen::Index>(holdout.size())) * static_cast<double>(channels);
  const double n_hold = static_cast<double>(holdout.size()) * static_cast<double>(channels);

  // The noise rule and the PSNR log only see training points.
  MatrixXd train_targets = noisy_targets;
  for (auto i : holdout) train_targets.row(static_cast<Eigen::Index>(i)).setZero();
  const ResolvedScales resolved = resolve_winner_scales(net, train_targets);
  Params params = build_params(net, resolved.scales);

  FitResult result;
  result.log.psi = resolved.psi;
  result.log.scales = resolved.scales;
  result.params = params;

  Workspace ws;
  Grads grads = zero_grads_like(params);
  AdamState adam = AdamState::zeros_like(params);
  MatrixXd residual;
  double best_holdout = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch <= train.epochs; ++epoch) {
    const MatrixXd& out = rethrow_with_epoch(epoch, [&]() -> const MatrixXd& { return ws.forward(params, coords.points); });
    residual = out - noisy_targets;
    double holdout_sq = 0.0;
    for (auto i : holdout) holdout_sq += residual.row(static_cast<Eigen::Index>(i)).squaredNorm();
    residual.array().colwise() *= train_mask.array();

    const bool log_now = epoch % train.log_every == 0 || epoch == train.epochs;
    if (log_now) {
      LogEntry entry;
      entry.epoch = epoch;
      entry.loss = residual.squaredNorm() / n_train;
      const double scale = train.eval_scale;
      const double train_mse = entry.loss * scale * scale;
      const double peak = train.peak_mode == PeakMode::Unit ? 1.0 : scale * train_targets.cwiseAbs().maxCoeff();
      entry.psnr = train_mse == 0.0 ? std::numeric_limits<double>::infinity()
                                    : 10.0 * std::log10(peak * peak) - 10.0 * std::log10(train_mse);
      entry.holdout_loss = holdout_sq / n_hold;
      result.log.entries.push_back(entry);
      if (entry.psnr > result.log.peak_psnr || result.log.entries.size() == 1) {
        result.log.peak_psnr = entry.psnr;
        result.log.peak_epoch = epoch;
      }
      if (entry.holdout_loss < best_holdout) {
        best_holdout = entry.holdout_loss;
        result.log.selected_epoch = epoch;
        result.params = params;
        since_best = 0;
      } else if (++since_best >= train.patience) {
        result.log.stopped_early = true;
        break;
      }
    }
    if (epoch == train.epochs) break;

    residual *= 2.0 / n_train;
    rethrow_with_epoch(epoch, [&] { ws.backward(params, residual, grads); return 0; });
    rethrow_with_epoch(epoch, [&] { adam_step(adam, params, grads, train); return 0; });
  }

  result.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace siren2
