#include "siren2/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

#include "siren2/error.hpp"
#include "siren2/sine_kernel.hpp"

namespace siren2 {

using Eigen::Index;
using Eigen::MatrixXd;

const char* to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::Siren:
      return "siren";
    case InitScheme::Winner:
      return "winner";
    case InitScheme::SirenRff:
      return "siren_rff";
  }
  return "siren";
}

InitScheme init_scheme_from_string(const std::string& name) {
  if (name == "siren") return InitScheme::Siren;
  if (name == "winner") return InitScheme::Winner;
  if (name == "siren_rff") return InitScheme::SirenRff;
  throw ArgumentError("unknown init scheme: " + name);
}

int NetworkConfig::embedded_dim() const {
  return scheme == InitScheme::SirenRff ? 2 * rff.features : input_dim;
}

void NetworkConfig::validate() const {
  if (input_dim < 1) throw ArgumentError("network: input_dim must be >= 1");
  if (output_channels < 1) throw ArgumentError("network: output_channels must be >= 1");
  for (int w : hidden)
    if (w < 1) throw ArgumentError("network: hidden widths must be >= 1");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ArgumentError("network: omega0 must be positive");
  if (!(first_layer_omega_scale > 0.0) || !std::isfinite(first_layer_omega_scale))
    throw ArgumentError("network: first_layer_omega_scale must be positive");
  if (winner_scales && (winner_scales->s0 < 0.0 || winner_scales->s1 < 0.0))
    throw ArgumentError("network: WINNER scales must be >= 0");
  if (scheme == InitScheme::SirenRff && (rff.features < 1 || !(rff.sigma > 0.0)))
    throw ArgumentError("network: RFF needs features >= 1 and sigma > 0");
}

int Params::input_dim() const {
  if (rff_basis.size() > 0) return static_cast<int>(rff_basis.cols());
  return layers.empty() ? 0 : layers.front().fan_in();
}

std::size_t Params::trainable_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

double init_bound(int fan_in, double omega0) { return std::sqrt(6.0 / fan_in) / omega0; }

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<int> layer_dims(const NetworkConfig& config) {
  std::vector<int> dims{config.embedded_dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.output_channels);
  return dims;
}

void check_finite(const MatrixXd& m, std::size_t layer, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite ") + what + " at layer " + std::to_string(layer + 1));
  }
}

}  // namespace

std::uint64_t winner_noise_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x57494E4E4552ull); }

Params init_siren(const NetworkConfig& config) {
  config.validate();
  const auto dims = layer_dims(config);
  Params p;
  p.omega0 = config.omega0;
  p.first_layer_omega_scale = config.first_layer_omega_scale;
  p.provenance.scheme = config.scheme;
  p.provenance.seed = config.seed;

  std::mt19937_64 rng(config.seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = init_bound(fan_in, config.omega0);
    std::uniform_real_distribution<double> uniform(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Index r = 0; r < fan_out; ++r)
      for (Index c = 0; c < fan_in; ++c) layer.weight(r, c) = uniform(rng);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    p.layers.push_back(std::move(layer));
    p.provenance.layer_rules.push_back("uniform(+-sqrt(6/fan_in)/omega0)");
  }

  if (config.scheme == InitScheme::SirenRff) {
    std::mt19937_64 rff_rng(splitmix64(config.seed ^ 0x524646ull));
    std::normal_distribution<double> normal(0.0, config.rff.sigma);
    p.rff_basis.resize(config.rff.features, config.input_dim);
    for (Index r = 0; r < p.rff_basis.rows(); ++r)
      for (Index c = 0; c < p.rff_basis.cols(); ++c) p.rff_basis(r, c) = normal(rff_rng);
  }
  return p;
}

Params perturb_winner(Params params, double s0, double s1, double omega0, std::uint64_t seed) {
  if (!(s0 >= 0.0) || !(s1 >= 0.0)) throw ArgumentError("perturb_winner: noise scales must be >= 0");
  if (!(omega0 > 0.0)) throw ArgumentError("perturb_winner: omega0 must be positive");
  const double scales[2] = {s0, s1};
  const std::size_t noisy = std::min<std::size_t>(2, params.hidden_count());
  for (std::size_t l = 0; l < noisy; ++l) {
    if (scales[l] == 0.0) continue;
    // Divide by the frequency the layer actually applies, so s is the std of
    // the added angular frequency per unit input.
    const double layer_scale = l == 0 ? params.first_layer_omega_scale : 1.0;
    const double std_dev = scales[l] / (omega0 * layer_scale);
    std::mt19937_64 rng(splitmix64(seed + l));
    std::normal_distribution<double> normal(0.0, std_dev);
    auto& w = params.layers[l].weight;
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) += normal(rng);
    params.provenance.layer_rules[l] += " + normal(0, s" + std::to_string(l) + "/omega)";
  }
  params.provenance.scheme = InitScheme::Winner;
  params.provenance.s0 = s0;
  params.provenance.s1 = s1;
  return params;
}

Params build_params(const NetworkConfig& config, const NoiseScales& scales) {
  Params p = init_siren(config);
  if (config.scheme == InitScheme::Winner) {
    p = perturb_winner(std::move(p), scales.s0, scales.s1, config.omega0, winner_noise_seed(config.seed));
  }
  return p;
}

MatrixXd rff_embed(const MatrixXd& coords, const MatrixXd& basis) {
  if (coords.cols() != basis.cols()) throw ArgumentError("rff_embed: coordinate dimension mismatch");
  const MatrixXd proj = (2.0 * std::numbers::pi) * (coords * basis.transpose());
  MatrixXd out(coords.rows(), 2 * basis.rows());
  out.leftCols(basis.rows()) = proj.array().cos().matrix();
  out.rightCols(basis.rows()) = proj.array().sin().matrix();
  return out;
}

namespace {

void check_input(const Params& params, const MatrixXd& coords) {
  if (params.layers.empty()) throw ArgumentError("forward: network has no layers");
  if (coords.cols() != params.input_dim()) {
    throw ArgumentError("forward: coordinates have " + std::to_string(coords.cols()) + " columns, network expects " +
                        std::to_string(params.input_dim()));
  }
}

}  // namespace

ForwardTrace forward_traced(const Params& params, const MatrixXd& coords) {
  check_input(params, coords);
  ForwardTrace trace;
  MatrixXd h = params.rff_basis.size() > 0 ? rff_embed(coords, params.rff_basis) : coords;
  for (std::size_t l = 0; l < params.hidden_count(); ++l) {
    const auto& layer = params.layers[l];
    MatrixXd pre = h * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    pre *= params.layer_omega(l);
    check_finite(pre, l, "pre-activation");
    MatrixXd post(pre.rows(), pre.cols());
    sine(pre.data(), post.data(), static_cast<std::size_t>(pre.size()));
    h = post;
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
  }
  const auto& last = params.layers.back();
  trace.output = h * last.weight.transpose();
  trace.output.rowwise() += last.bias.transpose();
  check_finite(trace.output, params.layers.size() - 1, "output");
  return trace;
}

MatrixXd forward(const Params& params, const MatrixXd& coords) {
  Workspace ws;
  return ws.forward(params, coords);
}

MatrixXd forward(const Params& params, const CoordGrid& grid) { return forward(params, grid.points); }

const MatrixXd& Workspace::forward(const Params& params, const MatrixXd& coords) {
  check_input(params, coords);
  const MatrixXd* h = &coords;
  if (params.rff_basis.size() > 0) {
    embedded_ = rff_embed(coords, params.rff_basis);
    h = &embedded_;
  }
  input_ = h;
  const std::size_t hidden = params.hidden_count();
  post_.resize(hidden);
  cos_.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto& layer = params.layers[l];
    auto& z = post_[l];
    z.noalias() = *h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    cos_[l].resize(z.rows(), z.cols());
    const double omega = params.layer_omega(l);
    // In place: z becomes sin(omega z), cos_ holds omega cos(omega z).
    if (!sine_cosine_scaled(z.data(), z.data(), cos_[l].data(), static_cast<std::size_t>(z.size()), omega)) {
      throw NumericError("non-finite pre-activation at layer " + std::to_string(l + 1));
    }
    h = &z;
  }
  const auto& last = params.layers.back();
  output_.noalias() = *h * last.weight.transpose();
  output_.rowwise() += last.bias.transpose();
  check_finite(output_, params.layers.size() - 1, "output");
  return output_;
}

void Workspace::backward(const Params& params, const MatrixXd& output_grad, Grads& grads) {
  if (input_ == nullptr) throw ArgumentError("Workspace::backward called before forward");
  if (output_grad.rows() != output_.rows() || output_grad.cols() != output_.cols())
    throw ArgumentError("Workspace::backward: gradient shape mismatch");
  if (grads.size() != params.layers.size()) grads = zero_grads_like(params);

  const std::size_t hidden = params.hidden_count();
  const std::size_t last = params.layers.size() - 1;
  const MatrixXd& h_last = hidden == 0 ? *input_ : post_[hidden - 1];
  grads[last].weight.noalias() = output_grad.transpose() * h_last;
  grads[last].bias = output_grad.colwise().sum().transpose();
  if (hidden == 0) return;

  delta_.noalias() = output_grad * params.layers[last].weight;
  for (std::size_t l = hidden; l-- > 0;) {
    delta_.array() *= cos_[l].array();
    check_finite(delta_, l, "gradient");
    const MatrixXd& h_prev = l == 0 ? *input_ : post_[l - 1];
    grads[l].weight.noalias() = delta_.transpose() * h_prev;
    grads[l].bias = delta_.colwise().sum().transpose();
    if (l > 0) {
      next_delta_.noalias() = delta_ * params.layers[l].weight;
      std::swap(delta_, next_delta_);
    }
  }
}

Grads zero_grads_like(const Params& params) {
  Grads g(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    g[l].weight = MatrixXd::Zero(params.layers[l].weight.rows(), params.layers[l].weight.cols());
    g[l].bias = Eigen::VectorXd::Zero(params.layers[l].bias.size());
  }
  return g;
}

LossAndGrads backward(const Params& params, const MatrixXd& coords, const MatrixXd& targets) {
  Workspace ws;
  const MatrixXd& out = ws.forward(params, coords);
  if (targets.rows() != out.rows() || targets.cols() != out.cols())
    throw ArgumentError("backward: targets must be N x C matching the network output");
  const MatrixXd residual = out - targets;
  LossAndGrads result;
  result.loss = residual.squaredNorm() / static_cast<double>(residual.size());
  const MatrixXd output_grad = (2.0 / static_cast<double>(residual.size())) * residual;
  result.grads = zero_grads_like(params);
  ws.backward(params, output_grad, result.grads);
  return result;
}

std::size_t param_count(const NetworkConfig& config) {
  config.validate();
  const auto dims = layer_dims(config);
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    n += static_cast<std::size_t>(dims[l]) * static_cast<std::size_t>(dims[l + 1]) + static_cast<std::size_t>(dims[l + 1]);
  return n;
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr char kMagic[8] = {'S', '2', 'P', 'A', 'R', 'A', 'M', 'S'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void put_matrix(std::string& out, const MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
}

}  // namespace

void save_params(const Params& params, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = "siren2-params";
  header["version"] = 1;
  header["omega0"] = params.omega0;
  header["first_layer_omega_scale"] = params.first_layer_omega_scale;
  header["scheme"] = to_string(params.provenance.scheme);
  header["seed"] = params.provenance.seed;
  header["s0"] = params.provenance.s0;
  header["s1"] = params.provenance.s1;
  header["layer_rules"] = params.provenance.layer_rules;
  auto tensors = nlohmann::json::array();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    tensors.push_back({{"name", "layer" + std::to_string(l + 1) + ".weight"},
                       {"shape", {layer.weight.rows(), layer.weight.cols()}}});
    tensors.push_back({{"name", "layer" + std::to_string(l + 1) + ".bias"}, {"shape", {layer.bias.size()}}});
  }
  if (params.rff_basis.size() > 0)
    tensors.push_back({{"name", "rff_basis"}, {"shape", {params.rff_basis.rows(), params.rff_basis.cols()}}});
  header["tensors"] = tensors;

  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  for (const auto& layer : params.layers) {
    put_matrix(out, layer.weight);
    put_matrix(out, layer.bias);
  }
  if (params.rff_basis.size() > 0) put_matrix(out, params.rff_basis);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Params load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError(path.string() + ": not a parameter file");
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw FormatError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }

  Params p;
  std::size_t pos = 16 + header_len;
  auto read_matrix = [&](Index rows, Index cols) {
    if (rows < 0 || cols < 0 || (bytes.size() - pos) / 8 < static_cast<std::size_t>(rows * cols))
      throw FormatError(path.string() + ": truncated tensor data");
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        m(r, c) = std::bit_cast<double>(get_u64(bytes.data() + pos));
        pos += 8;
      }
    return m;
  };

  try {
    p.omega0 = header.at("omega0").get<double>();
    p.first_layer_omega_scale = header.at("first_layer_omega_scale").get<double>();
    p.provenance.scheme = init_scheme_from_string(header.at("scheme").get<std::string>());
    p.provenance.seed = header.at("seed").get<std::uint64_t>();
    p.provenance.s0 = header.at("s0").get<double>();
    p.provenance.s1 = header.at("s1").get<double>();
    p.provenance.layer_rules = header.at("layer_rules").get<std::vector<std::string>>();
    const auto& tensors = header.at("tensors");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = tensors[i];
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<std::vector<Index>>();
      if (name == "rff_basis") {
        if (shape.size() != 2) throw FormatError(path.string() + ": bad rff_basis shape");
        p.rff_basis = read_matrix(shape[0], shape[1]);
      } else if (name.ends_with(".weight")) {
        if (shape.size() != 2) throw FormatError(path.string() + ": bad weight shape");
        DenseLayer layer;
        layer.weight = read_matrix(shape[0], shape[1]);
        p.layers.push_back(std::move(layer));
      } else if (name.ends_with(".bias")) {
        if (shape.size() != 1 || p.layers.empty()) throw FormatError(path.string() + ": bad bias entry");
        p.layers.back().bias = read_matrix(shape[0], 1);
      } else {
        throw FormatError(path.string() + ": unknown tensor " + name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  if (pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes after tensors");
  for (std::size_t l = 1; l < p.layers.size(); ++l)
    if (p.layers[l].fan_in() != p.layers[l - 1].fan_out()) throw FormatError(path.string() + ": layer shapes do not chain");
  return p;
}

}  // namespace siren2
