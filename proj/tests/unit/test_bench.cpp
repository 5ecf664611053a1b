#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imd/bench.hpp"
#include "imd/error.hpp"

using namespace imd;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("time_callable: a no-op is below timer resolution and flagged") {
  const auto row = time_callable("noop", 1, 1, 5, {}, [] {});
  CHECK(row.median_ms < 0.01);
  CHECK_FALSE(row.reliable);
  CHECK(row.repeats == 5);
}

TEST_CASE("time_callable: warmups and setup run untimed") {
  int setups = 0, bodies = 0;
  const auto row = time_callable("count", 1, 1, 7, [&] { ++setups; }, [&] { ++bodies; });
  CHECK(setups == 7 + static_cast<int>(kWarmups));
  CHECK(bodies == 7 + static_cast<int>(kWarmups));
  CHECK(row.iqr_ms >= 0.0);
}

TEST_CASE("time_pairing: preconditions") {
  Rng rng(1);
  const std::vector<PairingMethod> both = {PairingMethod::assignment, PairingMethod::knn};
  CHECK_THROWS_AS(time_pairing(both, {16}, 8, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(time_pairing(both, {}, 8, 5, rng), std::invalid_argument);
  CHECK_THROWS_AS(time_pairing(both, {1}, 8, 5, rng), std::invalid_argument);
}

TEST_CASE("time_pairing: rows and ratio rows") {
  Rng rng(2);
  const auto rows = time_pairing({PairingMethod::assignment, PairingMethod::knn}, {32, 64}, 128, 5, rng);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].method == "assignment");
  CHECK(rows[1].method == "knn");
  CHECK(rows[2].method == kRatioMethod);
  CHECK(rows[2].median_ms == doctest::Approx(rows[0].median_ms / rows[1].median_ms).epsilon(1e-12));
  for (const auto& r : rows) CHECK(r.median_ms > 0.0);
}

TEST_CASE("KNN time stays within 3x when k doubles") {
  Rng rng(3);
  BenchOptions four, eight;
  four.knn_k = 4;
  eight.knn_k = 8;
  const auto a = time_pairing({PairingMethod::knn}, {256}, 3072, 7, rng, four);
  const auto b = time_pairing({PairingMethod::knn}, {256}, 3072, 7, rng, eight);
  CHECK(b[0].median_ms < 3.0 * a[0].median_ms);
  CHECK(a[0].median_ms < 3.0 * b[0].median_ms);
}

TEST_CASE("loglog_slope recovers power laws") {
  std::vector<TimingRow> rows;
  for (std::size_t n : {128u, 256u, 512u, 1024u}) {
    rows.push_back({"cubic", n, 1, 5, 1e-6 * std::pow(n, 3.0), 0.0, true});
    rows.push_back({"linear", n, 1, 5, 0.01 * n, 0.0, true});
  }
  CHECK(loglog_slope(rows, "cubic") == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(loglog_slope(rows, "linear") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope(rows, "absent"), std::invalid_argument);
}

TEST_CASE("emit_timing_report: CSV and JSON mirror") {
  const auto dir = std::filesystem::temp_directory_path() / "imd_bench_test";
  std::filesystem::create_directories(dir);
  const std::vector<TimingRow> one = {{"knn", 256, 3072, 5, 1.0 / 3.0, 0.125, true}};
  emit_timing_report(one, dir / "one");
  const std::string csv = slurp(dir / "one.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.starts_with("method,n,d,repeats,median_ms,iqr_ms\n"));

  const std::vector<TimingRow> rows = {{"assignment", 256, 3072, 5, 12.345678901234567, 0.5, true},
                                       {"knn", 256, 3072, 5, 0.7000000000000001, 0.01, false},
                                       {kRatioMethod, 256, 3072, 5, 12.345678901234567 / 0.7000000000000001, 0, true}};
  emit_timing_report(rows, dir / "grid", {{"k", 8}});
  const auto json = nlohmann::json::parse(slurp(dir / "grid.json"));
  CHECK(json.at("metadata").at("k") == 8);
  REQUIRE(json.at("rows").size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto back = timing_row_from_json(json.at("rows")[i]);
    CHECK(back.method == rows[i].method);
    CHECK(back.median_ms == rows[i].median_ms);
    CHECK(back.iqr_ms == rows[i].iqr_ms);
    CHECK(back.reliable == rows[i].reliable);
  }
  const auto parsed = parse_timing_csv(slurp(dir / "grid.csv"));
  REQUIRE(parsed.size() == 3);
  CHECK(std::fabs(parsed[0].median_ms / parsed[1].median_ms - parsed[2].median_ms) < 1e-9);
  CHECK(parsed[0].median_ms == rows[0].median_ms);
  CHECK_THROWS_AS(emit_timing_report({}, dir / "none"), std::invalid_argument);
  CHECK_THROWS_AS(parse_timing_csv("bad header\n"), IoError);
  std::filesystem::remove_all(dir);
}
