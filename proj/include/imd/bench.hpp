#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "imd/pairing.hpp"
#include "imd/rng.hpp"

namespace imd {

struct TimingRow {
  std::string method;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t repeats = 0;
  double median_ms = 0.0;  // for ratio rows: t_assign / t_knn
  double iqr_ms = 0.0;
  bool reliable = true;  // false when the timer cannot resolve 1% of the median
};

inline constexpr const char* kRatioMethod = "ratio_assign_knn";
inline constexpr std::size_t kWarmups = 3;

/// Median and IQR (linear-interpolated quartiles) of `repeats` timed calls
/// after kWarmups untimed ones. `setup` runs before every call, untimed.
TimingRow time_callable(const std::string& method, std::size_t n, std::size_t d, std::size_t repeats,
                        const std::function<void()>& setup, const std::function<void()>& body);

struct BenchOptions {
  std::size_t knn_k = 8;
  unsigned threads = 1;  // KNN selection threads; recorded in the report metadata
};

/// Times assignment (cost matrix + solve) and KNN (k-fold noise sampling +
/// selection) on standardized Gaussian image batches for each n, and appends
/// one ratio row per n. Requires n >= 2 and repeats >= 5.
std::vector<TimingRow> time_pairing(const std::vector<PairingMethod>& methods, const std::vector<std::size_t>& batch_sizes,
                                    std::size_t d, std::size_t repeats, Rng& rng, const BenchOptions& options = {});

/// Least-squares slope of log(median_ms) against log(n) over rows of `method`.
double loglog_slope(const std::vector<TimingRow>& rows, const std::string& method);

/// Timer tick in milliseconds, measured.
double timer_resolution_ms();

/// CSV with header method,n,d,repeats,median_ms,iqr_ms (values at %.17g).
std::string timing_csv(const std::vector<TimingRow>& rows);
std::vector<TimingRow> parse_timing_csv(const std::string& text);

nlohmann::json to_json(const TimingRow& row);
TimingRow timing_row_from_json(const nlohmann::json& j);

/// Writes `<stem>.csv` and `<stem>.json` (rows plus `metadata`).
void emit_timing_report(const std::vector<TimingRow>& rows, const std::filesystem::path& stem,
                        const nlohmann::json& metadata = nlohmann::json::object());

}  // namespace imd
