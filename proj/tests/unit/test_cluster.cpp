#include "oracles.hpp"

#include "reid/cluster.hpp"
#include "reid/dataset.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

using namespace reid;

namespace {

Points sorted_1d(Points c) {
  std::sort(c.begin(), c.end());
  return c;
}

std::vector<PoseVector> toy_poses(int ids, int imgs) {
  ToySpec spec;
  spec.num_identities = ids;
  spec.images_per_identity = imgs;
  std::vector<PoseVector> out;
  for (const auto &s : synth_toy_dataset(spec))
    out.push_back(*s.pose);
  return out;
}

} // namespace

TEST_SUITE("cluster") {

TEST_CASE("complete pose features are the plain concatenation") {
  PoseVector p;
  for (int j = 0; j < kNumJoints; ++j)
    p.joints[j] = {0.01 * j, 1.0 - 0.02 * j, 1.0};
  const Point f = pose_to_feature(p, mean_imputation({p}));
  REQUIRE(f.size() == 50);
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK(f[2 * j] == p.joints[j].x);
    CHECK(f[2 * j + 1] == p.joints[j].y);
  }
  CHECK(encode_pose(p) == f);
}

TEST_CASE("missing joints take the dataset-mean location") {
  PoseVector a, b, probe;
  for (int j = 0; j < kNumJoints; ++j) {
    a.joints[j] = {0.5, 0.5, 1.0};
    b.joints[j] = {0.5, 0.5, 1.0};
    probe.joints[j] = {0.2, 0.2, 1.0};
  }
  a.joints[7] = {0.3, 0.5, 1.0};
  b.joints[7] = {0.5, 0.7, 1.0};
  probe.joints[7] = {0, 0, 0};
  const Imputation fill = mean_imputation({a, b});
  CHECK(fill[7][0] == doctest::Approx(0.4));
  CHECK(fill[7][1] == doctest::Approx(0.6));
  const Point f = pose_to_feature(probe, fill);
  CHECK(f[14] == doctest::Approx(0.4));
  CHECK(f[15] == doctest::Approx(0.6));
  const Point e = encode_pose(probe);
  CHECK(e[14] == 0.0);
  CHECK(e[15] == 0.0);
}

TEST_CASE("poses below the presence threshold are filtered out") {
  PoseVector empty, full;
  for (auto &k : full.joints)
    k = {0.5, 0.5, 1.0};
  const auto kept = filter_poses({empty, full, empty}, 0.7);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == full);
}

TEST_CASE("coincident pairs give their two locations as centres") {
  ClusterConfig cfg;
  const auto r = kmeans_fit({{0, 0}, {0, 0}, {1, 1}, {1, 1}}, 2, cfg);
  CHECK(sorted_1d(r.centers) == Points{{0, 0}, {1, 1}});
  CHECK(r.inertia == 0.0);
}

TEST_CASE("1-D six-point instance matches exhaustive partitioning") {
  ClusterConfig cfg;
  const Points pts{{0}, {0.1}, {0.2}, {0.8}, {0.9}, {1.0}};
  const auto r = kmeans_fit(pts, 2, cfg);
  const Points c = sorted_1d(r.centers);
  CHECK(c[0][0] == doctest::Approx(0.1));
  CHECK(c[1][0] == doctest::Approx(0.9));
  CHECK(r.inertia == doctest::Approx(oracle::exhaustive_kmeans_inertia(pts, 2)));
}

TEST_CASE("k equal to the point count gives zero inertia") {
  ClusterConfig cfg;
  const Points pts{{0.1, 0.3}, {0.7, 0.2}, {0.4, 0.9}, {0.5, 0.5}};
  const auto r = kmeans_fit(pts, 4, cfg);
  CHECK(r.inertia == doctest::Approx(0.0));
  CHECK(sorted_1d(r.centers) == sorted_1d(pts));
}

TEST_CASE("too few points is an error") {
  ClusterConfig cfg;
  CHECK_THROWS_AS(kmeans_fit({{0.0}}, 2, cfg), ConfigError);
  CHECK_THROWS_AS(gmm_fit({{0.0}}, 2, cfg), ConfigError);
}

TEST_CASE("k-means matches the exhaustive optimum on small random instances") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + static_cast<int>(uniform_index(rng, 6));
    const int k = 1 + static_cast<int>(uniform_index(rng, std::min(3, n)));
    Points pts(n, Point(2));
    for (auto &p : pts)
      for (double &v : p)
        v = uniform(rng, 0, 1);
    ClusterConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto r = kmeans_fit(pts, k, cfg);
    CHECK(std::abs(r.inertia - oracle::exhaustive_kmeans_inertia(pts, k)) <= 1e-9);
  }
}

TEST_CASE("Lloyd inertia never increases") {
  Rng rng(3);
  Points pts(200, Point(5));
  for (auto &p : pts)
    for (double &v : p)
      v = uniform(rng, 0, 1);
  ClusterConfig cfg;
  cfg.n_init = 1;
  const auto r = kmeans_fit(pts, 6, cfg);
  REQUIRE(r.inertia_history.size() >= 2);
  for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
    CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-12);
  CHECK(r.inertia == doctest::Approx(inertia(pts, r.centers, r.assignments)));
}

TEST_CASE("a single component on identical points has floored variance") {
  ClusterConfig cfg;
  const auto m = gmm_fit(Points(10, Point{0.3, 0.6}), 1, cfg);
  CHECK(m.weights[0] == doctest::Approx(1.0));
  CHECK(m.means[0][0] == doctest::Approx(0.3));
  CHECK(m.means[0][1] == doctest::Approx(0.6));
  CHECK(m.variances[0][0] == doctest::Approx(kVarianceFloor));
  CHECK(m.variances[0][1] == doctest::Approx(kVarianceFloor));
}

TEST_CASE("separated blobs are recovered") {
  Rng rng(8);
  Points pts;
  for (int i = 0; i < 200; ++i)
    pts.push_back({0.1 * normal(rng), 0.1 * normal(rng)});
  for (int i = 0; i < 200; ++i)
    pts.push_back({10 + 0.1 * normal(rng), 0.1 * normal(rng)});
  ClusterConfig cfg;
  const auto m = gmm_fit(pts, 2, cfg);
  Points means = sorted_1d(m.means);
  CHECK(std::abs(means[0][0]) < 0.05);
  CHECK(std::abs(means[0][1]) < 0.05);
  CHECK(std::abs(means[1][0] - 10) < 0.05);
  CHECK(std::abs(means[1][1]) < 0.05);
  CHECK(m.weights[0] + m.weights[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("EM log-likelihood is non-decreasing") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(seed);
    Points pts(120, Point(3));
    for (auto &p : pts)
      for (double &v : p)
        v = uniform(rng, 0, 1) + (uniform(rng, 0, 1) < 0.5 ? 2.0 : 0.0);
    ClusterConfig cfg;
    cfg.seed = seed;
    const auto m = gmm_fit(pts, 3, cfg);
    for (std::size_t i = 1; i < m.log_likelihood_trace.size(); ++i)
      CHECK(m.log_likelihood_trace[i] >= m.log_likelihood_trace[i - 1] - 1e-9);
    double w = 0;
    for (double x : m.weights)
      w += x;
    CHECK(std::abs(w - 1.0) <= 1e-9);
    for (const auto &var : m.variances)
      for (double v : var)
        CHECK(v >= kVarianceFloor);
  }
}

TEST_CASE("sampling a floored single component stays at the mean") {
  GmmModel m;
  m.dim = 2;
  m.weights = {1.0};
  m.means = {{0.4, 0.6}};
  m.variances = {{kVarianceFloor, kVarianceFloor}};
  for (const auto &s : gmm_sample(m, 100, 3)) {
    CHECK(std::abs(s[0] - 0.4) < 0.01);
    CHECK(std::abs(s[1] - 0.6) < 0.01);
  }
}

TEST_CASE("sampling twelve poses gives twelve vectors deterministically") {
  GmmModel m;
  m.dim = 50;
  m.weights = {0.5, 0.5};
  m.means = {Point(50, 0.3), Point(50, 0.7)};
  m.variances = {Point(50, 0.01), Point(50, 0.01)};
  const Points s = gmm_sample(m, 12, 5);
  CHECK(s.size() == 12);
  CHECK(s == gmm_sample(m, 12, 5));
  for (const auto &p : s)
    for (double v : p)
      CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("sample mean converges to the mixture mean") {
  GmmModel m;
  m.dim = 2;
  m.weights = {0.3, 0.7};
  m.means = {{0.3, 0.5}, {0.7, 0.4}};
  m.variances = {{0.0025, 0.0016}, {0.0025, 0.0009}};
  const int n = 10000;
  const Points s = gmm_sample(m, n, 42);
  for (int d = 0; d < 2; ++d) {
    double mean = 0, second = 0;
    for (int c = 0; c < 2; ++c) {
      mean += m.weights[c] * m.means[c][d];
      second += m.weights[c] * (m.variances[c][d] + m.means[c][d] * m.means[c][d]);
    }
    const double sigma = std::sqrt(second - mean * mean);
    double got = 0;
    for (const auto &p : s)
      got += p[d] / n;
    CHECK(std::abs(got - mean) < 3 * sigma / 100);
  }
}

TEST_CASE("fullbody k-means gives K centre poses") {
  const auto poses = toy_poses(6, 6);
  ClusterConfig cfg;
  cfg.method = ClusterMethod::kmeans;
  cfg.mode = ClusterMode::fullbody;
  cfg.K = 8;
  const PoseSet set = derive_pose_set(poses, cfg);
  REQUIRE(set.poses.size() == 8);
  Points feats;
  for (const auto &p : poses)
    feats.push_back(pose_to_feature(p, mean_imputation(poses)));
  const auto centres = kmeans_fit(feats, 8, cfg).centers;
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(encode_pose(set.poses[k]) == centres[k]);
    CHECK(set.poses[k].present_count() == kNumJoints);
    CHECK(set.poses[k].source == PoseSource::clustered);
  }
}

TEST_CASE("pose set derivation is a pure function of its inputs") {
  const auto poses = toy_poses(6, 6);
  for (const auto method : {ClusterMethod::kmeans, ClusterMethod::gmm})
    for (const auto mode : {ClusterMode::fullbody, ClusterMode::bodyjoint}) {
      ClusterConfig cfg;
      cfg.method = method;
      cfg.mode = mode;
      cfg.K = 12;
      cfg.seed = 3;
      const PoseSet a = derive_pose_set(poses, cfg);
      const PoseSet b = derive_pose_set(poses, cfg);
      CHECK(a.poses == b.poses);
      CHECK(a.poses.size() == 12);
      for (const auto &p : a.poses) {
        for (const auto &k : p.joints) {
          CHECK(k.c == 1.0);
          CHECK((k.x >= 0.0 && k.x <= 1.0 && k.y >= 0.0 && k.y <= 1.0));
        }
      }
    }
}

TEST_CASE("bodyjoint k-means picks every coordinate from that joint's centres") {
  const auto poses = toy_poses(5, 6);
  ClusterConfig cfg;
  cfg.method = ClusterMethod::kmeans;
  cfg.mode = ClusterMode::bodyjoint;
  cfg.K = 16;
  cfg.n_cbj = 3;
  const PoseSet set = derive_pose_set(poses, cfg);
  const Imputation fill = mean_imputation(poses);
  for (int j = 0; j < kNumJoints; ++j) {
    Points pts;
    for (const auto &p : poses)
      pts.push_back({p.joints[j].present() ? p.joints[j].x : fill[j][0],
                     p.joints[j].present() ? p.joints[j].y : fill[j][1]});
    ClusterConfig jc = cfg;
    jc.seed = cfg.seed + static_cast<std::uint64_t>(j) * 7919;
    const auto centres = kmeans_fit(pts, cfg.n_cbj, jc).centers;
    REQUIRE(centres.size() == 3);
    for (const auto &p : set.poses) {
      const Point xy{p.joints[j].x, p.joints[j].y};
      CHECK(std::find(centres.begin(), centres.end(), xy) != centres.end());
    }
  }
  std::set<Point> distinct;
  for (const auto &p : set.poses)
    distinct.insert(encode_pose(p));
  CHECK(distinct.size() > 1);
}

TEST_CASE("too few usable poses is an error") {
  ClusterConfig cfg;
  cfg.K = 12;
  CHECK_THROWS_AS(derive_pose_set(toy_poses(2, 3), cfg), ConfigError);
}

TEST_CASE("pose sets round trip through JSON") {
  ClusterConfig cfg;
  cfg.K = 4;
  cfg.method = ClusterMethod::kmeans;
  const PoseSet set = derive_pose_set(toy_poses(3, 4), cfg);
  const PoseSet back = pose_set_from_json(nlohmann::json::parse(to_json(set).dump()));
  CHECK(back.poses == set.poses);
  CHECK(back.provenance.K == 4);
  CHECK(back.provenance.method == ClusterMethod::kmeans);
}

}
