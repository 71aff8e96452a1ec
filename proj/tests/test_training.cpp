#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"

#include "siren2/error.hpp"
#include "siren2/training.hpp"

using namespace siren2;

namespace {

Params scalar_params(double w) {
  Params p;
  p.layers.resize(1);
  p.layers[0].weight = Eigen::MatrixXd::Constant(1, 1, w);
  p.layers[0].bias = Eigen::VectorXd::Zero(1);
  return p;
}

Grads scalar_grads(double g) {
  Grads grads(1);
  grads[0].weight = Eigen::MatrixXd::Constant(1, 1, g);
  grads[0].bias = Eigen::VectorXd::Zero(1);
  return grads;
}

Eigen::MatrixXd sine_column(std::size_t n, double cycles, double amp = 1.0) {
  Eigen::MatrixXd y(n, 1);
  for (std::size_t i = 0; i < n; ++i) y(i, 0) = amp * std::sin(2.0 * std::numbers::pi * cycles * i / n);
  return y;
}

NetworkConfig small_net(std::uint64_t seed = 0) {
  NetworkConfig c;
  c.hidden = {32, 32};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("psnr") {
  const Eigen::MatrixXd t = (Eigen::MatrixXd(4, 1) << 1, -1, 1, -1).finished();
  CHECK(std::isinf(psnr(t, t)));
  CHECK(psnr(Eigen::MatrixXd::Zero(4, 1), t) == doctest::Approx(0.0));

  const Eigen::MatrixXd s = sine_column(1024, 8);
  const double p = psnr(Eigen::MatrixXd(0.9 * s), s);
  CHECK(p == doctest::Approx(10.0 * std::log10(1.0 / 0.005)).epsilon(1e-9));
  CHECK(p == doctest::Approx(23.01).epsilon(1e-3));

  const Eigen::MatrixXd noisy = s + 0.01 * Eigen::MatrixXd::Ones(1024, 1);
  CHECK(psnr(noisy, s) == 10.0 * std::log10(1.0) - 10.0 * std::log10(mse(noisy, s)));

  const Eigen::MatrixXd half = 0.5 * s;
  CHECK(psnr(Eigen::MatrixXd(0.9 * half), half, PeakMode::MaxAbsTarget) == doctest::Approx(p).epsilon(1e-6));
  CHECK_THROWS_AS(psnr(Eigen::MatrixXd::Zero(3, 1), t), ArgumentError);
}

TEST_CASE("mae") {
  const std::vector<double> a{1, -1}, z{0, 0};
  CHECK(mae(a, a) == 0.0);
  CHECK(mae(z, a) == 1.0);
  const auto x = oracle::gaussian(50, 1), y = oracle::gaussian(50, 2);
  double ref = 0;
  for (std::size_t i = 0; i < 50; ++i) ref += std::abs(x[i] - y[i]);
  CHECK(mae(x, y) == doctest::Approx(ref / 50.0));
}

TEST_CASE("ssim") {
  Image2D a(12, 12);
  for (std::size_t i = 0; i < a.size(); ++i) a.pixels[i] = 0.5 + 0.3 * std::sin(0.37 * static_cast<double>(i));
  CHECK(ssim(a, a) == doctest::Approx(1.0));

  const double c1 = 1e-4, c2 = 9e-4;
  const Image2D half(8, 8, 0.5), shifted(8, 8, 0.6);
  CHECK(ssim(shifted, half) == doctest::Approx((2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1)));

  Image2D board(8, 8), inverted(8, 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      board.at(r, c) = (r + c) % 2 == 0 ? 1.0 : 0.0;
      inverted.at(r, c) = 1.0 - board.at(r, c);
    }
  CHECK(ssim(inverted, board) < 0.0);
  CHECK(ssim(inverted, board) == doctest::Approx((-0.5 + c2) / (0.5 + c2)));

  // One window: direct evaluation of the formula.
  Image2D x(8, 8), y(8, 8);
  const auto rx = oracle::gaussian(64, 3, 0.1), ry = oracle::gaussian(64, 4, 0.1);
  for (std::size_t i = 0; i < 64; ++i) {
    x.pixels[i] = 0.4 + rx[i];
    y.pixels[i] = 0.45 + 0.5 * rx[i] + ry[i];
  }
  const double mx = oracle::mean(x.pixels), my = oracle::mean(y.pixels);
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    vx += (x.pixels[i] - mx) * (x.pixels[i] - mx) / 64;
    vy += (y.pixels[i] - my) * (y.pixels[i] - my) / 64;
    cxy += (x.pixels[i] - mx) * (y.pixels[i] - my) / 64;
  }
  const double expected = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  CHECK(ssim(x, y) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(ssim(Image2D(4, 4), Image2D(4, 4)), ArgumentError);
  CHECK_THROWS_AS(ssim(Image2D(8, 9), Image2D(9, 8)), ArgumentError);
}

TEST_CASE("adam") {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;

  SUBCASE("zero gradient leaves parameters unchanged and decays moments") {
    Params p = scalar_params(2.0);
    AdamState st = AdamState::zeros_like(p);
    adam_step(st, p, scalar_grads(1.0), cfg);
    const double m = st.m[0].weight(0, 0), v = st.v[0].weight(0, 0);
    adam_step(st, p, scalar_grads(0.0), cfg);
    CHECK(st.m[0].weight(0, 0) == doctest::Approx(0.9 * m));
    CHECK(st.v[0].weight(0, 0) == doctest::Approx(0.999 * v));
    Params q = scalar_params(2.0);
    AdamState fresh = AdamState::zeros_like(q);
    adam_step(fresh, q, scalar_grads(0.0), cfg);
    CHECK(q.layers[0].weight(0, 0) == 2.0);
    CHECK(fresh.m[0].weight(0, 0) == 0.0);
  }

  SUBCASE("first step moves by lr times the sign") {
    for (double g : {5.0, -0.003}) {
      Params p = scalar_params(1.0);
      AdamState st = AdamState::zeros_like(p);
      adam_step(st, p, scalar_grads(g), cfg);
      CHECK(p.layers[0].weight(0, 0) == doctest::Approx(1.0 - 0.1 * (g > 0 ? 1 : -1)).epsilon(1e-6));
    }
  }

  SUBCASE("quadratic trajectory matches the reference") {
    Params p = scalar_params(0.0);
    AdamState st = AdamState::zeros_like(p);
    oracle::ScalarAdam ref{0.1};
    double w_ref = 0.0, worst = 0.0;
    for (int step = 0; step < 1000; ++step) {
      const double w = p.layers[0].weight(0, 0);
      adam_step(st, p, scalar_grads(2.0 * (w - 3.0)), cfg);
      w_ref = ref.step(w_ref, 2.0 * (w_ref - 3.0));
      worst = std::max(worst, std::abs(p.layers[0].weight(0, 0) - w_ref));
      if (step == 199) CHECK(std::abs(p.layers[0].weight(0, 0) - 3.0) < 1e-2);
    }
    CHECK(worst < 1e-12);
    CHECK(st.step == 1000);
  }

  SUBCASE("non-finite gradient") {
    Params p = scalar_params(0.0);
    AdamState st = AdamState::zeros_like(p);
    CHECK_THROWS_AS(adam_step(st, p, scalar_grads(NAN), cfg), NumericError);
  }
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.epochs = -1;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("fit with zero epochs returns the initialization") {
  TrainConfig t;
  t.epochs = 0;
  const auto grid = coord_grid_1d(64);
  const auto r = fit(small_net(), t, grid, sine_column(64, 2));
  REQUIRE(r.log.entries.size() == 1);
  const Params init = init_siren(small_net());
  for (std::size_t l = 0; l < init.layers.size(); ++l) CHECK(r.params.layers[l].weight == init.layers[l].weight);
}

TEST_CASE("low-frequency sine is fitted well") {
  NetworkConfig net;
  net.hidden = {64, 64};
  TrainConfig t;
  t.epochs = 2000;
  const auto grid = coord_grid_1d(512);
  const auto r = fit(net, t, grid, sine_column(512, 3));
  CHECK(r.log.peak_psnr > 40.0);
  double best = -1e9;
  for (const auto& e : r.log.entries) best = std::max(best, e.psnr);
  CHECK(r.log.peak_psnr == best);
  CHECK(psnr(forward(r.params, grid), sine_column(512, 3)) == doctest::Approx(r.log.peak_psnr).epsilon(1e-9));

  // Windowed mean loss decreases.
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start + 500 <= r.log.entries.size(); start += 500) {
    double mean = 0;
    for (std::size_t i = start; i < start + 500; ++i) mean += r.log.entries[i].loss;
    mean /= 500;
    CHECK(mean <= prev);
    prev = mean;
  }
}

TEST_CASE("fit is deterministic") {
  TrainConfig t;
  t.epochs = 50;
  t.seed = 3;
  const auto grid = coord_grid_1d(128);
  const auto y = sine_column(128, 5);
  const auto a = fit(small_net(1), t, grid, y), b = fit(small_net(1), t, grid, y);
  CHECK(a.log.to_csv() == b.log.to_csv());
  t.batch_size = 32;
  const auto c = fit(small_net(1), t, grid, y), d = fit(small_net(1), t, grid, y);
  CHECK(c.log.to_csv() == d.log.to_csv());
  CHECK(c.log.to_csv() != a.log.to_csv());
}

TEST_CASE("auto scales on a constant target reduce to the baseline") {
  TrainConfig t;
  t.epochs = 20;
  const auto grid = coord_grid_1d(64);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(64, 1, 0.3);
  NetworkConfig winner = small_net(2);
  winner.scheme = InitScheme::Winner;
  const auto a = fit(winner, t, grid, y), b = fit(small_net(2), t, grid, y);
  CHECK(a.log.scales.s0 == 0.0);
  CHECK(a.log.scales.s1 == 0.0);
  CHECK(a.log.to_csv() == b.log.to_csv());
}

TEST_CASE("resolved winner scales") {
  NetworkConfig net = small_net();
  net.scheme = InitScheme::Winner;
  const auto y = sine_column(256, 32);
  const auto r = resolve_winner_scales(net, y);
  CHECK(r.psi == doctest::Approx(0.25));
  const auto expected = winner_noise_scales(r.psi, 1, net.hyper);
  CHECK(r.scales.s0 == expected.s0);
  CHECK(r.scales.s1 == expected.s1);
  net.winner_scales = NoiseScales{1.0, 2.0};
  CHECK(resolve_winner_scales(net, y).scales.s1 == 2.0);
  net.winner_scales.reset();
  CHECK_THROWS_AS(resolve_winner_scales(net, Eigen::MatrixXd::Zero(16, 1)), UndefinedQuantityError);
}

TEST_CASE("holdout indices") {
  const auto h = holdout_indices(1000, 0.02, 4);
  CHECK(h.size() == 20);
  CHECK(std::is_sorted(h.begin(), h.end()));
  CHECK(std::adjacent_find(h.begin(), h.end()) == h.end());
  CHECK(holdout_indices(1000, 0.02, 4) == h);
  CHECK_THROWS_AS(holdout_indices(10, 0.01, 1), ArgumentError);
  CHECK_THROWS_AS(holdout_indices(10, 0.5, 1), ArgumentError);
}

TEST_CASE("denoising fit") {
  TrainConfig t;
  t.epochs = 300;
  t.holdout_fraction = 0.1;
  t.patience = 50;
  t.seed = 8;
  const auto grid = coord_grid_1d(256);
  Eigen::MatrixXd noisy = sine_column(256, 3);
  const auto noise = oracle::gaussian(256, 3, 0.3);
  for (int i = 0; i < 256; ++i) noisy(i, 0) += noise[i];
  const auto r = fit_denoise(small_net(3), t, grid, noisy);

  SUBCASE("returned epoch minimizes the holdout loss") {
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    for (const auto& e : r.log.entries)
      if (e.holdout_loss < best) best = e.holdout_loss, best_epoch = e.epoch;
    CHECK(r.log.selected_epoch == best_epoch);
    CHECK(r.log.to_csv().rfind("epoch,loss,psnr,holdout_loss\n", 0) == 0);
  }

  SUBCASE("holdout targets never reach the training loss") {
    Eigen::MatrixXd scrambled = noisy;
    for (auto i : holdout_indices(256, t.holdout_fraction, t.seed)) scrambled(i, 0) = -5.0 * noisy(i, 0) + 1.0;
    const auto s = fit_denoise(small_net(3), t, grid, scrambled);
    const std::size_t common = std::min(s.log.entries.size(), r.log.entries.size());
    bool holdout_differs = false;
    for (std::size_t i = 0; i < common; ++i) {
      CHECK(s.log.entries[i].loss == r.log.entries[i].loss);
      holdout_differs |= s.log.entries[i].holdout_loss != r.log.entries[i].holdout_loss;
    }
    CHECK(holdout_differs);
  }

  SUBCASE("early stopping honours patience") {
    TrainConfig impatient = t;
    impatient.epochs = 3000;
    impatient.patience = 5;
    impatient.learning_rate = 1e-2;
    const auto e = fit_denoise(small_net(3), impatient, grid, noisy);
    CHECK(e.log.stopped_early);
    CHECK(e.log.entries.back().epoch - e.log.selected_epoch == 5);
  }
}
