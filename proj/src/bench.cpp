#include "imd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "imd/error.hpp"
#include "imd/numerics.hpp"

namespace imd {

namespace {

using Clock = std::chrono::steady_clock;

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double timer_resolution_ms() {
  static const double resolution = [] {
    double best = 1e9;
    for (int i = 0; i < 20; ++i) {
      const auto t0 = Clock::now();
      auto t1 = Clock::now();
      while (t1 == t0) t1 = Clock::now();
      best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
  }();
  return resolution;
}

TimingRow time_callable(const std::string& method, std::size_t n, std::size_t d, std::size_t repeats,
                        const std::function<void()>& setup, const std::function<void()>& body) {
  if (repeats < 5) throw std::invalid_argument("time_pairing: repeats must be >= 5, got " + std::to_string(repeats));
  for (std::size_t w = 0; w < kWarmups; ++w) {
    if (setup) setup();
    body();
  }
  std::vector<double> samples;
  samples.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    if (setup) setup();
    const auto t0 = Clock::now();
    body();
    const auto t1 = Clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::ranges::sort(samples);
  TimingRow row;
  row.method = method;
  row.n = n;
  row.d = d;
  row.repeats = repeats;
  row.median_ms = quantile_sorted(samples, 0.5);
  row.iqr_ms = quantile_sorted(samples, 0.75) - quantile_sorted(samples, 0.25);
  row.reliable = timer_resolution_ms() <= 0.01 * row.median_ms;
  return row;
}

std::vector<TimingRow> time_pairing(const std::vector<PairingMethod>& methods, const std::vector<std::size_t>& batch_sizes,
                                    std::size_t d, std::size_t repeats, Rng& rng, const BenchOptions& options) {
  if (batch_sizes.empty()) throw std::invalid_argument("time_pairing: empty batch grid");
  if (methods.empty()) throw std::invalid_argument("time_pairing: no methods");
  if (repeats < 5) throw std::invalid_argument("time_pairing: repeats must be >= 5, got " + std::to_string(repeats));
  if (d == 0) throw std::invalid_argument("time_pairing: d must be >= 1");
  for (std::size_t n : batch_sizes) {
    if (n < 2) throw std::invalid_argument("time_pairing: batch sizes must be >= 2");
  }

  std::vector<TimingRow> rows;
  for (std::size_t n : batch_sizes) {
    // Pre-allocated inputs: only the pairing itself is timed.
    Tensor images = gaussian_sample(rng, {n, d});
    for (double& v : images.data()) v *= 0.5;
    Tensor noises = gaussian_sample(rng, {n, d});
    std::map<PairingMethod, double> medians;
    for (PairingMethod method : methods) {
      TimingRow row;
      switch (method) {
        case PairingMethod::assignment:
          row = time_callable(to_string(method), n, d, repeats,
                              [&] { noises = gaussian_sample(rng, {n, d}); },
                              [&] { pair_assignment(images, noises); });
          break;
        case PairingMethod::knn:
          row = time_callable(to_string(method), n, d, repeats, {},
                              [&] { knn_select(images, options.knn_k, rng, options.threads); });
          break;
        case PairingMethod::random:
          row = time_callable(to_string(method), n, d, repeats, {}, [&] { pair_random(images, rng); });
          break;
        case PairingMethod::scaled:
          row = time_callable(to_string(method), n, d, repeats, {}, [&] { scale_images(images, 2.0); });
          break;
      }
      medians[method] = row.median_ms;
      rows.push_back(row);
    }
    if (medians.contains(PairingMethod::assignment) && medians.contains(PairingMethod::knn)) {
      TimingRow ratio;
      ratio.method = kRatioMethod;
      ratio.n = n;
      ratio.d = d;
      ratio.repeats = repeats;
      ratio.median_ms = medians[PairingMethod::assignment] / medians[PairingMethod::knn];
      rows.push_back(ratio);
    }
  }
  return rows;
}

double loglog_slope(const std::vector<TimingRow>& rows, const std::string& method) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (r.method != method) continue;
    if (!(r.median_ms > 0.0)) throw std::invalid_argument("loglog_slope: non-positive median for " + method);
    xs.push_back(std::log(static_cast<double>(r.n)));
    ys.push_back(std::log(r.median_ms));
  }
  if (xs.size() < 2) throw std::invalid_argument("loglog_slope: need at least two rows of " + method);
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: all rows share one batch size");
  return sxy / sxx;
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "method,n,d,repeats,median_ms,iqr_ms\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.n << ',' << r.d << ',' << r.repeats << ',' << format_double(r.median_ms) << ','
        << format_double(r.iqr_ms) << '\n';
  }
  return out.str();
}

std::vector<TimingRow> parse_timing_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,n,d,repeats,median_ms,iqr_ms") {
    throw IoError("timing CSV: unexpected header");
  }
  std::vector<TimingRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(fields, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw IoError("timing CSV: expected 6 columns in '" + line + "'");
    try {
      TimingRow r;
      r.method = f[0];
      r.n = std::stoull(f[1]);
      r.d = std::stoull(f[2]);
      r.repeats = std::stoull(f[3]);
      r.median_ms = std::stod(f[4]);
      r.iqr_ms = std::stod(f[5]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError("timing CSV: malformed row '" + line + "'");
    }
  }
  return rows;
}

nlohmann::json to_json(const TimingRow& r) {
  return {{"method", r.method},       {"n", r.n},           {"d", r.d},
          {"repeats", r.repeats},     {"median_ms", r.median_ms}, {"iqr_ms", r.iqr_ms},
          {"reliable", r.reliable}};
}

TimingRow timing_row_from_json(const nlohmann::json& j) {
  TimingRow r;
  r.method = j.at("method").get<std::string>();
  r.n = j.at("n").get<std::size_t>();
  r.d = j.at("d").get<std::size_t>();
  r.repeats = j.at("repeats").get<std::size_t>();
  r.median_ms = j.at("median_ms").get<double>();
  r.iqr_ms = j.at("iqr_ms").get<double>();
  r.reliable = j.value("reliable", true);
  return r;
}

void emit_timing_report(const std::vector<TimingRow>& rows, const std::filesystem::path& stem,
                        const nlohmann::json& metadata) {
  if (rows.empty()) throw std::invalid_argument("emit_timing_report: no rows");
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
  };
  nlohmann::json j;
  j["metadata"] = metadata;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) j["rows"].push_back(to_json(r));
  std::filesystem::path csv = stem, json = stem;
  csv += ".csv";
  json += ".json";
  write(csv, timing_csv(rows));
  write(json, j.dump(2) + "\n");
}

}  // namespace imd
