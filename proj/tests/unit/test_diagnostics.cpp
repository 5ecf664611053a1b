#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "imd/datasets.hpp"
#include "imd/diagnostics.hpp"
#include "imd/error.hpp"
#include "imd/numerics.hpp"

using namespace imd;

namespace {

PairingConfig config_for(PairingMethod method, std::size_t k = 1) {
  PairingConfig c;
  c.method = method;
  c.k = k;
  return c;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("miscibility: deterministic +u / -u clusters") {
  const Tensor images = Tensor::from_rows({{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}});
  const NoiseSource source = [](const Tensor&, Rng&) { return Tensor::from_rows({{1.0, 2.0, 2.0}, {-1.0, -2.0, -2.0}}); };
  Rng rng(1);
  const auto r = miscibility_score(images, source, 100, rng, "fixed");
  CHECK(r.mean_centroid_distance == 6.0);  // 2 * ||(1, 2, 2)||
  CHECK(r.std_centroid_distance == 0.0);
  CHECK(r.n_images == 2);
  CHECK(to_json(r).at("method") == "fixed");
}

TEST_CASE("miscibility: random pairing matches the i.i.d. closed form") {
  const std::size_t m = 10000, d = 4;
  std::vector<double> scores;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    scores.push_back(miscibility_score(config_for(PairingMethod::random), 6, m, d, rng).mean_centroid_distance);
  }
  const double expected = iid_centroid_distance(m, d);
  INFO("mean " << mean(scores) << " expected " << expected << " se " << stderr_of(scores));
  CHECK(std::fabs(mean(scores) - expected) < 3.0 * stderr_of(scores));
  // Closed form against d = 1: E|N(0, 2/m)| = sqrt(2/m) sqrt(2/pi).
  CHECK(iid_centroid_distance(50, 1) == doctest::Approx(std::sqrt(2.0 / 50) * std::sqrt(2.0 / M_PI)).epsilon(1e-12));
}

TEST_CASE("miscibility: ordering random < knn < assignment") {
  std::vector<double> rnd, knn, asg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r1(seed, 1), r2(seed, 1), r3(seed, 1);
    rnd.push_back(miscibility_score(config_for(PairingMethod::random), 8, 200, 256, r1).mean_centroid_distance);
    knn.push_back(miscibility_score(config_for(PairingMethod::knn, 8), 8, 200, 256, r2).mean_centroid_distance);
    asg.push_back(miscibility_score(config_for(PairingMethod::assignment), 8, 200, 256, r3).mean_centroid_distance);
  }
  INFO("random " << mean(rnd) << " knn " << mean(knn) << " assignment " << mean(asg));
  CHECK(mean(knn) - mean(rnd) > 3.0 * std::hypot(stderr_of(knn), stderr_of(rnd)));
  CHECK(mean(asg) - mean(knn) > 3.0 * std::hypot(stderr_of(asg), stderr_of(knn)));
}

TEST_CASE("miscibility: preconditions") {
  Rng rng(2);
  CHECK_THROWS_AS(miscibility_score(config_for(PairingMethod::random), 1, 100, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(miscibility_score(config_for(PairingMethod::random), 4, 99, 4, rng), std::invalid_argument);
}

TEST_CASE("kl_to_gaussian: closed forms") {
  // Columns alternate +1 / -1: mean 0 and ML variance 1 exactly.
  Tensor standard = Tensor::matrix(1000, 3);
  for (std::size_t i = 0; i < 1000; ++i)
    for (std::size_t j = 0; j < 3; ++j) standard(i, j) = (i % 2 == 0) ? 1.0 : -1.0;
  CHECK(std::fabs(kl_to_gaussian(standard)) < 1e-12);

  Tensor shifted = standard;
  const double mu[3] = {0.5, -1.0, 2.0};
  for (std::size_t i = 0; i < 1000; ++i)
    for (std::size_t j = 0; j < 3; ++j) shifted(i, j) += mu[j];
  CHECK(kl_to_gaussian(shifted) == doctest::Approx((0.25 + 1.0 + 4.0) / 2).epsilon(1e-10));

  Tensor flat = standard;
  for (std::size_t i = 0; i < 1000; ++i) flat(i, 1) = 3.0;
  CHECK_THROWS_AS(kl_to_gaussian(flat), NumericalError);
  CHECK_THROWS_AS(kl_to_gaussian(Tensor::matrix(999, 2)), std::invalid_argument);
}

TEST_CASE("kl_to_gaussian: non-negative and small for i.i.d. draws") {
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    Tensor x = gaussian_sample(rng, {2000, 8});
    for (double& v : x.data()) v = v * (0.5 + 0.25 * t) + 0.1 * t;
    CHECK(kl_to_gaussian(x) >= 0.0);
  }
  // Sampling noise alone: E[KL] is about d / m.
  const double kl = kl_to_gaussian(gaussian_sample(rng, {20000, 16}));
  CHECK(kl < 5.0 * 16.0 / 20000.0);
}

TEST_CASE("MomentAccumulator agrees with a two-pass computation") {
  Rng rng(4);
  Tensor x = gaussian_sample(rng, {3000, 5});
  for (double& v : x.data()) v = 1e3 + 2.0 * v;
  MomentAccumulator acc(5);
  acc.add(x);
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 3000; ++i) m += x(i, j);
    m /= 3000;
    for (std::size_t i = 0; i < 3000; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    v /= 3000;
    CHECK(acc.mean()[j] == doctest::Approx(m).epsilon(1e-13));
    CHECK(acc.variance()[j] == doctest::Approx(v).epsilon(1e-10));
  }
  CHECK_THROWS_AS(acc.add(std::vector<double>(4)), std::invalid_argument);
}

namespace {

DenoiserModel trained_toy_model(std::uint64_t seed, int steps) {
  Rng data_rng(seed, 9);
  DatasetSpec spec;
  const Tensor data = make_dataset(spec, data_rng);
  Rng init(seed, 1);
  TrainState state = TrainState::create(DenoiserModel::initialize(ModelSpec{}, init), make_ddpm_linear_schedule(), {},
                                        {}, Rng(seed, 2));
  Rng batches(seed, 7);
  for (int s = 0; s < steps; ++s) {
    std::vector<std::size_t> idx(256);
    for (auto& i : idx) i = batches.below(data.rows());
    train_step(state, gather_rows(data, idx));
  }
  return state.model;
}

}  // namespace

TEST_CASE("perturbation_study on a briefly trained model") {
  const DenoiserModel model = trained_toy_model(1, 1500);
  const auto schedule = make_ddpm_linear_schedule();
  Rng rng(5);
  PerturbationSpec spec;
  spec.base = gaussian_sample(rng, {256, 2});
  for (int p = 0; p < 10; ++p) spec.perturbations.push_back(gaussian_sample(rng, {256, 2}));
  spec.weights = {0.0, 0.1, 0.2, 0.3, 10.0};
  const auto report = perturbation_study(model, schedule, spec, 20);

  REQUIRE(report.rows.size() == 50);
  for (std::size_t p = 0; p < 10; ++p) CHECK(report.rows[p].deviation == 0.0);
  CHECK(report.mean_deviation[0] == 0.0);
  for (std::size_t w = 1; w < 4; ++w) CHECK(report.mean_deviation[w] >= report.mean_deviation[w - 1]);
  // The plain sum at W=10 leaves the training distribution, so outputs land
  // far outside the data and overshoot the reference scale.
  CHECK(report.mean_deviation[4] > report.reference_scale);
  CHECK(perturbation_study(model, schedule, spec, 20).mean_deviation == report.mean_deviation);

  // Renormalised, W=10 nearly decorrelates the noise and the deviation
  // approaches the spread of independent samples.
  spec.renormalize = true;
  const auto renorm = perturbation_study(model, schedule, spec, 20);
  INFO("W=10 deviation " << renorm.mean_deviation[4] << " reference " << renorm.reference_scale);
  CHECK(std::fabs(renorm.mean_deviation[4] - renorm.reference_scale) < 0.2 * renorm.reference_scale);
  CHECK(renorm.mean_deviation[0] == 0.0);
}

TEST_CASE("perturbation_study: preconditions") {
  const DenoiserModel model(ModelSpec{});
  const auto schedule = make_ddpm_linear_schedule();
  PerturbationSpec spec;
  spec.base = Tensor::matrix(4, 2);
  spec.perturbations = {Tensor::matrix(4, 2)};
  spec.weights = {0.1};
  CHECK_THROWS_AS(perturbation_study(model, schedule, spec, 5), std::invalid_argument);
  spec.weights = {0.0, -0.1};
  CHECK_THROWS_AS(perturbation_study(model, schedule, spec, 5), std::invalid_argument);
  spec.weights = {0.0};
  spec.perturbations = {Tensor::matrix(3, 2)};
  CHECK_THROWS_AS(perturbation_study(model, schedule, spec, 5), std::invalid_argument);
}

TEST_CASE("sweep_k on standardized image-like data") {
  Rng rng(6);
  DatasetSpec spec;
  spec.name = "image_blobs";
  spec.n = 1024;
  spec.dim = 3072;
  const Tensor images = make_dataset(spec, rng);
  int calls = 0;
  const auto rows = sweep_k(images, {1, 2, 4, 8, 16}, rng, [&](std::size_t k) {
    ++calls;
    return std::optional<std::int64_t>(static_cast<std::int64_t>(k) * 100);
  });
  REQUIRE(rows.size() == 5);
  CHECK(calls == 5);
  CHECK(rows[0].delta_percent == 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].delta_percent <= rows[i - 1].delta_percent);
  CHECK(rows[3].delta_percent < -0.5);
  CHECK(rows[3].delta_percent > -3.0);
  CHECK(rows[4].steps_to_threshold == 1600);
  CHECK(to_json(rows[0]).at("k") == 1);

  CHECK_THROWS_AS(sweep_k(images, {}, rng), std::invalid_argument);
  CHECK_THROWS_AS(sweep_k(images, {2, 4}, rng), std::invalid_argument);
  CHECK_THROWS_AS(sweep_k(images, {1, 4, 2}, rng), std::invalid_argument);
  CHECK(default_k_grid().back() == 128);
}

namespace {

double planar_distance(const Point2& a, const Point2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

TEST_CASE("trajectory_projection: identical points project to the origin") {
  const std::vector<Tensor> steps(3, Tensor::from_rows({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}));
  for (const auto& line : trajectory_projection(steps))
    for (const auto& p : line) CHECK(p == Point2{0.0, 0.0});
}

TEST_CASE("trajectory_projection: planar embeddings keep pairwise distances") {
  Rng rng(7);
  for (std::size_t d : {3u, 10u, 200u}) {
    // Orthonormal u, v in R^d by Gram-Schmidt, plus an offset.
    std::vector<double> u(d), v(d), o(d);
    for (auto* vec : {&u, &v, &o})
      for (double& x : *vec) x = rng.normal();
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    };
    const double nu = std::sqrt(dot(u, u));
    for (double& x : u) x /= nu;
    const double uv = dot(u, v);
    for (std::size_t i = 0; i < d; ++i) v[i] -= uv * u[i];
    const double nv = std::sqrt(dot(v, v));
    for (double& x : v) x /= nv;

    const std::size_t n = 6, n_steps = 4;
    std::vector<std::vector<Point2>> plane(n, std::vector<Point2>(n_steps));
    std::vector<Tensor> steps(n_steps, Tensor::matrix(n, d));
    for (std::size_t s = 0; s < n_steps; ++s)
      for (std::size_t i = 0; i < n; ++i) {
        plane[i][s] = {rng.normal(), 3.0 * rng.normal()};
        for (std::size_t k = 0; k < d; ++k) steps[s](i, k) = o[k] + plane[i][s][0] * u[k] + plane[i][s][1] * v[k];
      }
    const auto proj = trajectory_projection(steps);
    for (std::size_t a = 0; a < n * n_steps; ++a)
      for (std::size_t b = a + 1; b < n * n_steps; ++b) {
        const auto &pa = proj[a % n][a / n], &pb = proj[b % n][b / n];
        const auto &qa = plane[a % n][a / n], &qb = plane[b % n][b / n];
        CHECK(std::fabs(planar_distance(pa, pb) - planar_distance(qa, qb)) < 1e-8);
      }
    CHECK(trajectory_projection(steps) == proj);
  }
}

TEST_CASE("trajectory_projection: rank one input zero-pads the second component") {
  std::vector<Tensor> steps;
  for (double s : {0.0, 1.0, 2.0}) steps.push_back(Tensor::from_rows({{s, 2 * s, 0.0}, {-s, -2 * s, 0.0}}));
  for (const auto& line : trajectory_projection(steps))
    for (const auto& p : line) CHECK(std::fabs(p[1]) < 1e-12);
  CHECK_THROWS_AS(trajectory_projection({}), std::invalid_argument);
  CHECK_THROWS_AS(trajectory_projection({Tensor::from_rows({{1.0, 2.0}})}), std::invalid_argument);
  CHECK_THROWS_AS(trajectory_projection({Tensor::matrix(2, 3), Tensor::matrix(2, 4)}), std::invalid_argument);
}

TEST_CASE("orientation is exact") {
  CHECK(orientation({0, 0}, {1, 0}, {0, 1}) == 1);
  CHECK(orientation({0, 0}, {0, 1}, {1, 0}) == -1);
  const double x = 0.1;
  CHECK(orientation({0, 0}, {1, 1}, {x, x}) == 0);
  CHECK(orientation({0, 0}, {1, 1}, {x, std::nextafter(x, 1.0)}) == 1);
  CHECK(orientation({0, 0}, {1, 1}, {x, std::nextafter(x, 0.0)}) == -1);

  // Oracle: coordinates k * 2^-40 with |k| < 2^50 make the determinant an
  // exact 128-bit integer.
  Rng rng(8);
  int disagreements = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    long long k[6];
    const long long base = static_cast<long long>(rng.below(1ULL << 49));
    for (auto& v : k) v = base + static_cast<long long>(rng.below(5)) - 2;  // nearly collinear
    if (trial % 2) k[5] = k[4] = static_cast<long long>(rng.below(1ULL << 49));
    const double s = std::ldexp(1.0, -40);
    const Point2 a{k[0] * s, k[1] * s}, b{k[2] * s, k[3] * s}, c{k[4] * s, k[5] * s};
    const __int128 det = static_cast<__int128>(k[0] - k[4]) * (k[3] - k[5]) -
                         static_cast<__int128>(k[1] - k[5]) * (k[2] - k[4]);
    const int oracle = det > 0 ? 1 : (det < 0 ? -1 : 0);
    if (orientation(a, b, c) != oracle) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("crossing_count: small cases") {
  const Polyline a{{0, 0}, {1, 0}, {2, 0}}, b{{0, 1}, {1, 1}, {2, 1}};
  CHECK(crossing_count({a, b}) == 0);
  CHECK(crossing_count({Polyline{{0, 0}, {1, 1}}, Polyline{{0, 1}, {1, 0}}}) == 1);
  CHECK(crossing_count({Polyline{{0, 0}, {1, 1}}, Polyline{{1, 1}, {2, 0}}}) == 0);      // shared endpoint
  CHECK(crossing_count({Polyline{{0, 0}, {2, 0}}, Polyline{{1, 0}, {3, 0}}}) == 0);      // collinear overlap
  CHECK(crossing_count({Polyline{{0, 0}, {2, 0}}, Polyline{{1, -1}, {1, 0}}}) == 0);     // T-junction
  CHECK(crossing_count({Polyline{{0.5, 0.5}, {0.5, 0.5}}, Polyline{{0, 1}, {1, 0}}}) == 0);  // zero length
  CHECK(crossing_count({Polyline{{0, 0}, {2, 2}, {0, 2}}, Polyline{{0, 2}, {2, 0}, {2, 2}}}) == 1);
  CHECK(crossing_count({}) == 0);
  CHECK_THROWS_AS(crossing_count({a, Polyline{{0, 0}}}), std::invalid_argument);
}

TEST_CASE("crossing_count matches an integer brute force") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(6), len = 2 + rng.below(5);
    std::vector<std::vector<std::array<long long, 2>>> pts(n, std::vector<std::array<long long, 2>>(len));
    std::vector<Polyline> lines(n, Polyline(len));
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t s = 0; s < len; ++s) {
        pts[t][s] = {static_cast<long long>(rng.below(7)), static_cast<long long>(rng.below(7))};
        lines[t][s] = {static_cast<double>(pts[t][s][0]), static_cast<double>(pts[t][s][1])};
      }
    auto orient = [](const std::array<long long, 2>& a, const std::array<long long, 2>& b,
                     const std::array<long long, 2>& c) {
      const long long v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
      return (v > 0) - (v < 0);
    };
    std::int64_t expected = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        for (std::size_t s = 0; s + 1 < len; ++s)
          for (std::size_t u = 0; u + 1 < len; ++u) {
            const auto &a = pts[p][s], &b = pts[p][s + 1], &c = pts[q][u], &d = pts[q][u + 1];
            if (orient(a, b, c) * orient(a, b, d) < 0 && orient(c, d, a) * orient(c, d, b) < 0) ++expected;
          }
    CHECK(crossing_count(lines) == expected);
  }
}

TEST_CASE("paired_noise_moments: random pairing keeps N(0, I) moments") {
  Rng rng(21);
  const std::size_t d = 8, n = 20001;  // odd count exercises the tail chunk
  const MomentAccumulator acc = paired_noise_moments(config_for(PairingMethod::random), n, d, 0.5, rng);
  CHECK(acc.count() == n);
  CHECK(acc.dim() == d);
  // Fitting both moments to n i.i.d. rows has E[KL] close to d / n.
  CHECK(kl_to_gaussian(acc) < 3.0 * static_cast<double>(d) / static_cast<double>(n));

  CHECK_THROWS_AS(paired_noise_moments(config_for(PairingMethod::random), 1, d, 0.5, rng), std::invalid_argument);
  CHECK_THROWS_AS(paired_noise_moments(config_for(PairingMethod::random), 10, d, 0.5, rng, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(paired_noise_moments(config_for(PairingMethod::knn, 0), 10, d, 0.5, rng), std::invalid_argument);
}

TEST_CASE("paired_noise_moments: KNN selection shrinks the noise towards the images") {
  Rng a(22), b(22);
  const std::size_t d = 16, n = 8192;
  const double random_kl = kl_to_gaussian(paired_noise_moments(config_for(PairingMethod::random), n, d, 1.0, a));
  const double knn_kl = kl_to_gaussian(paired_noise_moments(config_for(PairingMethod::knn, 8), n, d, 1.0, b));
  INFO("random " << random_kl << " knn " << knn_kl);
  CHECK(knn_kl > 2.0 * random_kl);
}

TEST_CASE("project_x0_trajectories: matches the projection of the DDIM x0 path") {
  const DenoiserModel model = trained_toy_model(2, 200);
  const auto schedule = make_ddpm_linear_schedule();
  Rng rng(23);
  const Tensor noise = gaussian_sample(rng, {12, 2});
  const auto lines = project_x0_trajectories(model, schedule, noise, 10);
  const auto expected = trajectory_projection(sample_ddim(model, schedule, 10, noise).x0_trajectory);
  REQUIRE(lines.size() == 12);
  CHECK(lines.front().size() == 10);
  CHECK(lines == expected);

  // A zero network predicts no noise, so x0 = x_T / sqrt(alpha_T) at every
  // step and each trajectory collapses to one point.
  const DenoiserModel zero(ModelSpec{});
  for (const auto& line : project_x0_trajectories(zero, schedule, noise, 10)) {
    for (const auto& p : line) {
      CHECK(p[0] == doctest::Approx(line.front()[0]).epsilon(1e-9));
      CHECK(p[1] == doctest::Approx(line.front()[1]).epsilon(1e-9));
    }
  }

  ModelSpec velocity;
  velocity.target = PredictionTarget::velocity;
  CHECK_THROWS_AS(project_x0_trajectories(DenoiserModel(velocity), schedule, noise, 10), ConfigError);
}
