#include "siren2/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "siren2/error.hpp"

namespace siren2 {

using Eigen::MatrixXd;

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Histogram symmetric_histogram(const MatrixXd& values, std::size_t bins) {
  if (values.size() == 0) throw ArgumentError("histogram: no values");
  if (bins == 0) throw ArgumentError("histogram: need at least one bin");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const auto pick = [&](double q) {
    return sorted[static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)))];
  };
  const double range = std::max(std::abs(pick(0.001)), std::abs(pick(0.999)));

  Histogram h;
  h.lo = -range;
  h.hi = range;
  h.counts.assign(bins, 0);
  for (double v : sorted) {
    std::size_t b = bins / 2;
    if (range > 0.0) {
      const double pos = (v + range) / (2.0 * range) * static_cast<double>(bins);
      b = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
    }
    ++h.counts[b];
  }
  return h;
}

const LayerSpectra& LayerSpectraReport::find(const std::string& name) const {
  for (const auto& l : layers)
    if (l.name == name) return l;
  throw ArgumentError("layer spectra report has no entry " + name);
}

LayerSpectraReport layer_spectra_report(const Params& params, const CoordGrid& coords, const std::string& checkpoint) {
  if (coords.dim() != 1) throw ArgumentError("layer_spectra_report: PSDs need a 1-D coordinate grid");
  const ForwardTrace trace = forward_traced(params, coords.points);
  LayerSpectraReport report;
  report.checkpoint = checkpoint;
  for (std::size_t l = 0; l < trace.pre.size(); ++l) {
    const int index = static_cast<int>(l + 1);
    const std::string base = "layer" + std::to_string(index);
    report.layers.push_back({base + "_pre", index, symmetric_histogram(trace.pre[l]), cumulative_psd(trace.pre[l], index)});
    report.layers.push_back({base + "_post", index, symmetric_histogram(trace.post[l]), cumulative_psd(trace.post[l], index)});
  }
  const int out_index = static_cast<int>(trace.pre.size() + 1);
  report.layers.push_back({"output", out_index, symmetric_histogram(trace.output), cumulative_psd(trace.output, out_index)});
  return report;
}

double high_band_energy(const PsdCurve& curve) {
  const std::size_t median = (curve.values.size() - 1) / 2;
  double e = 0.0;
  for (std::size_t k = median + 1; k < curve.values.size(); ++k) e += curve.values[k];
  return e;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------- bottleneck

namespace {

double rms(const MatrixXd& m) { return std::sqrt(m.squaredNorm() / static_cast<double>(m.size())); }

}  // namespace

const BottleneckRow& BottleneckTable::at(std::size_t signal_index, InitScheme scheme) const {
  for (const auto& r : rows)
    if (r.signal_index == signal_index && r.scheme == scheme) return r;
  throw ArgumentError("bottleneck table has no row for signal " + std::to_string(signal_index + 1) + " / " +
                      to_string(scheme));
}

BottleneckTable bottleneck_experiment(const std::vector<Signal1D>& series, const NetworkConfig& net,
                                      const TrainConfig& train, const HarnessOptions& options) {
  if (series.empty()) throw ArgumentError("bottleneck_experiment: empty series");
  net.validate();
  train.validate();

  struct Job {
    std::size_t signal;
    InitScheme scheme;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (auto scheme : options.schemes) {
      if (scheme == InitScheme::Winner && !options.winner_subset.empty() &&
          std::find(options.winner_subset.begin(), options.winner_subset.end(), i) == options.winner_subset.end())
        continue;
      jobs.push_back({i, scheme});
    }
  }

  BottleneckTable table;
  table.rows.resize(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
    const auto& signal = series[jobs[j].signal];
    BottleneckRow& row = table.rows[j];
    row.signal_index = jobs[j].signal;
    row.signal_name = signal.name.empty() ? "S" + std::to_string(jobs[j].signal + 1) : signal.name;
    row.scheme = jobs[j].scheme;
    try {
      NetworkConfig cfg = net;
      cfg.scheme = jobs[j].scheme;
      const CoordGrid grid = coord_grid_1d(signal.size());
      const MatrixXd target = as_column(signal.samples);
      row.psi = spectral_centroid(signal.samples, cfg.psi_units, static_cast<double>(signal.sample_rate));
      const FitResult fitted = fit(cfg, train, grid, target);
      row.scales = fitted.log.scales;
      row.peak_psnr = fitted.log.peak_psnr;
      row.peak_epoch = fitted.log.peak_epoch;
      row.rms_ratio = rms(forward(fitted.params, grid.points)) / rms(target);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  return table;
}

std::string BottleneckTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "signal,name,psi,scheme,s0,s1,peak_psnr,peak_epoch,rms_ratio,failed\n";
  for (const auto& r : rows) {
    out << r.signal_index + 1 << "," << r.signal_name << "," << r.psi << "," << to_string(r.scheme) << "," << r.scales.s0
        << "," << r.scales.s1 << "," << r.peak_psnr << "," << r.peak_epoch << "," << r.rms_ratio << ","
        << (r.failed ? 1 : 0) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- sweep

SweepGrid noise_sweep(const Signal1D& target, const NetworkConfig& net, const TrainConfig& train,
                      const std::vector<double>& s0_values, const std::vector<double>& s1_values, unsigned threads) {
  if (s0_values.empty() || s1_values.empty()) throw ArgumentError("noise_sweep: axes must be non-empty");
  net.validate();
  train.validate();
  SweepGrid grid;
  grid.s0_values = s0_values;
  grid.s1_values = s1_values;
  grid.psnr.assign(s0_values.size(), std::vector<std::optional<double>>(s1_values.size()));

  const CoordGrid coords = coord_grid_1d(target.size());
  const MatrixXd y = as_column(target.samples);
  const std::size_t cols = s1_values.size();
  parallel_for(s0_values.size() * cols, threads, [&](std::size_t cell) {
    const std::size_t i = cell / cols, j = cell % cols;
    NetworkConfig cfg = net;
    cfg.scheme = InitScheme::Winner;
    cfg.winner_scales = NoiseScales{s0_values[i], s1_values[j]};
    try {
      grid.psnr[i][j] = fit(cfg, train, coords, y).log.peak_psnr;
    } catch (const std::exception&) {
      grid.psnr[i][j].reset();
    }
  });
  return grid;
}

std::string SweepGrid::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "s0,s1,peak_psnr\n";
  for (std::size_t i = 0; i < s0_values.size(); ++i)
    for (std::size_t j = 0; j < s1_values.size(); ++j) {
      out << s0_values[i] << "," << s1_values[j] << ",";
      if (psnr[i][j]) out << *psnr[i][j];
      out << "\n";
    }
  return out.str();
}

// ---------------------------------------------------------------- serialization

nlohmann::json to_json(const Histogram& histogram) {
  return {{"lo", histogram.lo}, {"hi", histogram.hi}, {"counts", histogram.counts}};
}

nlohmann::json to_json(const LayerSpectraReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"name", l.name},
                      {"layer_index", l.layer_index},
                      {"n_units", l.psd.n_units},
                      {"histogram", to_json(l.histogram)},
                      {"psd", l.psd.values}});
  }
  return {{"checkpoint", report.checkpoint}, {"layers", layers}};
}

nlohmann::json to_json(const BottleneckTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"signal", r.signal_index + 1}, {"name", r.signal_name},     {"psi", r.psi},
                          {"scheme", to_string(r.scheme)}, {"s0", r.scales.s0},       {"s1", r.scales.s1},
                          {"peak_psnr", r.peak_psnr},      {"peak_epoch", r.peak_epoch}, {"rms_ratio", r.rms_ratio},
                          {"failed", r.failed}};
    if (r.failed) row["error"] = r.error;
    rows.push_back(row);
  }
  return {{"rows", rows}};
}

nlohmann::json to_json(const SweepGrid& grid) {
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : grid.psnr) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& cell : row) r.push_back(cell ? nlohmann::json(*cell) : nlohmann::json(nullptr));
    matrix.push_back(r);
  }
  return {{"s0_values", grid.s0_values}, {"s1_values", grid.s1_values}, {"peak_psnr", matrix}};
}

void write_layer_spectra(const LayerSpectraReport& report, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
  };
  nlohmann::json manifest = {{"checkpoint", report.checkpoint}, {"layers", nlohmann::json::array()}};
  for (const auto& l : report.layers) {
    std::ostringstream hist;
    hist.precision(17);
    hist << "bin,left,right,count\n";
    const double width = (l.histogram.hi - l.histogram.lo) / static_cast<double>(l.histogram.counts.size());
    for (std::size_t b = 0; b < l.histogram.counts.size(); ++b) {
      hist << b << "," << l.histogram.lo + width * static_cast<double>(b) << ","
           << l.histogram.lo + width * static_cast<double>(b + 1) << "," << l.histogram.counts[b] << "\n";
    }
    write(directory / (l.name + "_hist.csv"), hist.str());
    write(directory / (l.name + "_psd.csv"), psd_to_csv(l.psd));
    manifest["layers"].push_back({{"name", l.name},
                                  {"layer_index", l.layer_index},
                                  {"histogram_csv", l.name + "_hist.csv"},
                                  {"psd_csv", l.name + "_psd.csv"}});
  }
  write(directory / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace siren2
