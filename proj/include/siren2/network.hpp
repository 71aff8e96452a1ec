#pragma once

// Sinusoidal MLP: initialization (uniform baseline, noisy WINNER variant,
// optional random Fourier feature front end), forward passes and exact
// backpropagation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "siren2/spectral.hpp"

namespace siren2 {

enum class InitScheme { Siren, Winner, SirenRff };

const char* to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& name);

struct RffConfig {
  int features = 64;   // m rows of the embedding matrix; output width is 2m
  double sigma = 1.0;  // std of the Gaussian embedding entries
};

struct NetworkConfig {
  int input_dim = 1;
  std::vector<int> hidden = {128, 128, 128, 128};
  int output_channels = 1;
  double omega0 = 30.0;
  double first_layer_omega_scale = 1.0;
  InitScheme scheme = InitScheme::Siren;
  /// Manual WINNER scales. Empty means derive them from the target.
  std::optional<NoiseScales> winner_scales;
  WinnerHyper hyper = WinnerHyper::audio();
  CentroidUnits psi_units = CentroidUnits::Normalized;
  RffConfig rff;
  std::uint64_t seed = 0;

  /// Width of the first dense layer's input (2m with RFF, d otherwise).
  int embedded_dim() const;
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;    // fan_out

  int fan_in() const { return static_cast<int>(weight.cols()); }
  int fan_out() const { return static_cast<int>(weight.rows()); }
};

struct Provenance {
  InitScheme scheme = InitScheme::Siren;
  std::uint64_t seed = 0;
  double s0 = 0.0;
  double s1 = 0.0;
  std::vector<std::string> layer_rules;  // one entry per dense layer
};

struct Params {
  std::vector<DenseLayer> layers;  // hidden layers followed by the affine output
  Eigen::MatrixXd rff_basis;       // m x d, empty when no embedding
  double omega0 = 30.0;
  double first_layer_omega_scale = 1.0;
  Provenance provenance;

  std::size_t hidden_count() const { return layers.empty() ? 0 : layers.size() - 1; }
  int input_dim() const;
  /// Frequency multiplier applied inside the sine of hidden layer `l` (0-based).
  double layer_omega(std::size_t l) const { return l == 0 ? omega0 * first_layer_omega_scale : omega0; }
  std::size_t trainable_count() const;
};

/// Gradients share the layout of Params::layers.
using Grads = std::vector<DenseLayer>;

/// Per hidden layer: pre = omega (W h + b), post = sin(pre). Matrices are N x width.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
  Eigen::MatrixXd output;  // N x C
};

/// Uniform U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0) for every layer,
/// zero biases. Builds the RFF basis as well when scheme is SirenRff.
Params init_siren(const NetworkConfig& config);

double init_bound(int fan_in, double omega0);

/// Adds N(0, (s/omega)^2) noise to W(1) with s = s0 and to W(2) with s = s1,
/// where omega is the layer's sine frequency (omega0 times
/// params.first_layer_omega_scale for W(1), omega0 for W(2)). Later layers and
/// all biases are left untouched.
Params perturb_winner(Params params, double s0, double s1, double omega0, std::uint64_t seed);

/// Seed used for the WINNER noise draw of a network seeded with `seed`.
std::uint64_t winner_noise_seed(std::uint64_t seed);

/// init_siren followed by the perturbation for the WINNER scheme, using the
/// supplied scales.
Params build_params(const NetworkConfig& config, const NoiseScales& scales);

/// Row i is [cos(2 pi B x_i), sin(2 pi B x_i)].
Eigen::MatrixXd rff_embed(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& basis);

Eigen::MatrixXd forward(const Params& params, const Eigen::MatrixXd& coords);
Eigen::MatrixXd forward(const Params& params, const CoordGrid& grid);

ForwardTrace forward_traced(const Params& params, const Eigen::MatrixXd& coords);

struct LossAndGrads {
  double loss = 0.0;
  Grads grads;
};

/// Mean squared error over all N*C entries and its exact gradient.
LossAndGrads backward(const Params& params, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets);

/// Reusable buffers for repeated forward/backward passes during training.
class Workspace {
 public:
  /// Forward pass retaining what backward needs. Returns the output (N x C).
  const Eigen::MatrixXd& forward(const Params& params, const Eigen::MatrixXd& coords);

  /// Backpropagates dLoss/dOutput through the cached pass into `grads`.
  /// Must follow forward() with the same params and coords.
  void backward(const Params& params, const Eigen::MatrixXd& output_grad, Grads& grads);

 private:
  Eigen::MatrixXd embedded_;
  std::vector<Eigen::MatrixXd> post_;   // sin(pre) per hidden layer
  std::vector<Eigen::MatrixXd> cos_;    // omega * cos(pre) per hidden layer
  Eigen::MatrixXd output_;
  Eigen::MatrixXd delta_;
  Eigen::MatrixXd next_delta_;
  const Eigen::MatrixXd* input_ = nullptr;
};

Grads zero_grads_like(const Params& params);

/// sum over layers of fan_in * fan_out + fan_out. The RFF basis is fixed and
/// not counted.
std::size_t param_count(const NetworkConfig& config);

/// Binary container: "S2PARAMS" magic, u64 header length, JSON header,
/// then every tensor as little-endian float64 in header order.
void save_params(const Params& params, const std::filesystem::path& path);
Params load_params(const std::filesystem::path& path);

}  // namespace siren2
