#include "reid/cluster.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace reid {

const char *to_string(ClusterMethod m) { return m == ClusterMethod::kmeans ? "kmeans" : "gmm"; }
const char *to_string(ClusterMode m) { return m == ClusterMode::fullbody ? "fullbody" : "bodyjoint"; }

ClusterMethod cluster_method_from_string(const std::string &s) {
  if (s == "kmeans") return ClusterMethod::kmeans;
  if (s == "gmm") return ClusterMethod::gmm;
  throw ConfigError("unknown cluster method '" + s + "'");
}

ClusterMode cluster_mode_from_string(const std::string &s) {
  if (s == "fullbody" || s == "pose") return ClusterMode::fullbody;
  if (s == "bodyjoint" || s == "joint") return ClusterMode::bodyjoint;
  throw ConfigError("unknown cluster mode '" + s + "'");
}

void ClusterConfig::validate() const {
  if (K < 1) throw ConfigError("cluster.K must be >= 1");
  if (n_cbj < 1) throw ConfigError("cluster.n_cbj must be >= 1");
  if (max_iter < 1) throw ConfigError("cluster.max_iter must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("cluster.tol must be > 0");
  if (n_init < 1) throw ConfigError("cluster.n_init must be >= 1");
  if (!(min_present_frac >= 0.0 && min_present_frac <= 1.0))
    throw ConfigError("cluster.min_present_frac must lie in [0,1]");
}

nlohmann::json to_json(const ClusterConfig &c) {
  return {{"method", to_string(c.method)}, {"mode", to_string(c.mode)},
          {"K", c.K}, {"n_cbj", c.n_cbj}, {"max_iter", c.max_iter},
          {"tol", c.tol}, {"n_init", c.n_init}, {"seed", c.seed},
          {"min_present_frac", c.min_present_frac}};
}

ClusterConfig cluster_config_from_json(const nlohmann::json &j) {
  ClusterConfig c;
  c.method = cluster_method_from_string(j.at("method").get<std::string>());
  c.mode = cluster_mode_from_string(j.at("mode").get<std::string>());
  c.K = j.at("K").get<int>();
  c.n_cbj = j.at("n_cbj").get<int>();
  c.max_iter = j.at("max_iter").get<int>();
  c.tol = j.at("tol").get<double>();
  c.n_init = j.at("n_init").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.min_present_frac = j.at("min_present_frac").get<double>();
  c.validate();
  return c;
}

namespace {

double sq_dist(const Point &a, const Point &b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

void check_points(const Points &points, int k) {
  if (k < 1)
    throw ConfigError("cluster count must be >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw ConfigError("need at least " + std::to_string(k) + " points, got " +
                      std::to_string(points.size()));
  for (const auto &p : points)
    if (p.size() != points.front().size() || p.empty())
      throw ConfigError("points must share one non-zero dimension");
}

Points kmeanspp_init(const Points &points, int k, Rng &rng) {
  const std::size_t n = points.size();
  std::vector<std::size_t> chosen{uniform_index(rng, n)};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], points[chosen.back()]));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = uniform(rng, 0.0, total);
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // Every point coincides with a chosen centre; take any unchosen one.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end())
          rest.push_back(i);
      pick = rest[uniform_index(rng, rest.size())];
    }
    chosen.push_back(pick);
  }
  Points centers;
  for (auto i : chosen)
    centers.push_back(points[i]);
  return centers;
}

int nearest(const Point &p, const Points &centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = sq_dist(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

/// Cluster means of an assignment; an emptied cluster keeps its previous centre.
void recompute_means(const Points &points, KMeansResult &r, std::vector<int> &counts) {
  const std::size_t k = r.centers.size(), dim = points.front().size();
  Points sums(k, Point(dim, 0.0));
  counts.assign(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    ++counts[r.assignments[i]];
    for (std::size_t d = 0; d < dim; ++d)
      sums[r.assignments[i]][d] += points[i][d];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (std::size_t d = 0; d < dim; ++d)
        r.centers[c][d] = sums[c][d] / counts[c];
}

/// Single-point transfers (Hartigan's criterion) after Lloyd converges: move a
/// point whenever doing so lowers the total inertia once both means are
/// updated. Lloyd fixed points that are not transfer-stable get escaped.
void transfer_refine(const Points &points, KMeansResult &r) {
  std::vector<int> counts;
  recompute_means(points, r, counts);
  const std::size_t dim = points.front().size();
  for (int sweep = 0; sweep < 1000; ++sweep) {
    bool moved = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int a = r.assignments[i];
      if (counts[a] <= 1)
        continue;
      const double leave = counts[a] / (counts[a] - 1.0) * sq_dist(points[i], r.centers[a]);
      int to = -1;
      double best = leave * (1.0 - 1e-12);
      for (int b = 0; b < static_cast<int>(r.centers.size()); ++b) {
        if (b == a)
          continue;
        const double join = counts[b] / (counts[b] + 1.0) * sq_dist(points[i], r.centers[b]);
        if (join < best) {
          best = join;
          to = b;
        }
      }
      if (to < 0)
        continue;
      for (std::size_t d = 0; d < dim; ++d) {
        r.centers[a][d] = (r.centers[a][d] * counts[a] - points[i][d]) / (counts[a] - 1);
        r.centers[to][d] = (r.centers[to][d] * counts[to] + points[i][d]) / (counts[to] + 1);
      }
      --counts[a];
      ++counts[to];
      r.assignments[i] = to;
      moved = true;
    }
    if (!moved)
      break;
  }
  recompute_means(points, r, counts);
}

KMeansResult lloyd(const Points &points, int k, const ClusterConfig &cfg, Rng &rng) {
  const std::size_t n = points.size(), dim = points.front().size();
  KMeansResult r;
  r.centers = kmeanspp_init(points, k, rng);
  r.assignments.assign(n, 0);
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i)
      r.assignments[i] = nearest(points[i], r.centers);

    // Repair empty clusters with the worst-served point.
    std::vector<int> counts(k, 0);
    for (int a : r.assignments)
      ++counts[a];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0)
        continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[r.assignments[i]] <= 1)
          continue;
        const double d = sq_dist(points[i], r.centers[r.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[r.assignments[far]];
      r.assignments[far] = c;
      counts[c] = 1;
      r.centers[c] = points[far];
    }
    r.inertia_history.push_back(inertia(points, r.centers, r.assignments));

    Points next(k, Point(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < dim; ++d)
        next[r.assignments[i]][d] += points[i][d];
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      for (auto &v : next[c])
        v /= counts[c];
      shift = std::max(shift, std::sqrt(sq_dist(next[c], r.centers[c])));
    }
    r.centers = std::move(next);
    if (shift < cfg.tol)
      break;
  }
  for (std::size_t i = 0; i < n; ++i)
    r.assignments[i] = nearest(points[i], r.centers);
  transfer_refine(points, r);
  r.inertia = inertia(points, r.centers, r.assignments);
  r.inertia_history.push_back(r.inertia);
  return r;
}

} // namespace

double inertia(const Points &points, const Points &centers, const std::vector<int> &assignments) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    s += sq_dist(points[i], centers[assignments[i]]);
  return s;
}

KMeansResult kmeans_fit(const Points &points, int k, const ClusterConfig &cfg) {
  check_points(points, k);
  Rng rng(cfg.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < cfg.n_init; ++run) {
    auto r = lloyd(points, k, cfg, rng);
    if (r.inertia < best.inertia)
      best = std::move(r);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Diagonal Gaussian mixture

namespace {

double log_gauss(const Point &x, const Point &mean, const Point &var) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d)
    s += std::log(2.0 * M_PI * var[d]) + (x[d] - mean[d]) * (x[d] - mean[d]) / var[d];
  return -0.5 * s;
}

double log_sum_exp(const std::vector<double> &v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m))
    return m;
  double s = 0.0;
  for (double x : v)
    s += std::exp(x - m);
  return m + std::log(s);
}

} // namespace

double GmmModel::log_density(const Point &x) const {
  std::vector<double> terms(weights.size());
  for (std::size_t c = 0; c < weights.size(); ++c)
    terms[c] = std::log(weights[c]) + log_gauss(x, means[c], variances[c]);
  return log_sum_exp(terms);
}

double GmmModel::mean_log_likelihood(const Points &points) const {
  double s = 0.0;
  for (const auto &p : points)
    s += log_density(p);
  return s / static_cast<double>(points.size());
}

GmmModel gmm_fit(const Points &points, int k, const ClusterConfig &cfg) {
  check_points(points, k);
  const std::size_t n = points.size(), dim = points.front().size();
  const auto km = kmeans_fit(points, k, cfg);

  GmmModel m;
  m.dim = static_cast<int>(dim);
  m.means = km.centers;
  m.weights.assign(k, 0.0);
  m.variances.assign(k, Point(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const int c = km.assignments[i];
    m.weights[c] += 1.0;
    for (std::size_t d = 0; d < dim; ++d)
      m.variances[c][d] += std::pow(points[i][d] - m.means[c][d], 2);
  }
  for (int c = 0; c < k; ++c) {
    for (auto &v : m.variances[c])
      v = std::max(v / std::max(m.weights[c], 1.0), kVarianceFloor);
    m.weights[c] /= static_cast<double>(n);
  }

  std::vector<std::vector<double>> resp(n, std::vector<double>(k));
  std::vector<double> terms(k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c)
        terms[c] = m.weights[c] > 0.0
                       ? std::log(m.weights[c]) + log_gauss(points[i], m.means[c], m.variances[c])
                       : -std::numeric_limits<double>::infinity();
      const double lse = log_sum_exp(terms);
      ll += lse;
      for (int c = 0; c < k; ++c)
        resp[i][c] = std::exp(terms[c] - lse);
    }
    ll /= static_cast<double>(n);
    m.log_likelihood_trace.push_back(ll);
    if (ll - prev < cfg.tol)
      break;
    prev = ll;

    // M-step
    for (int c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        nk += resp[i][c];
      m.weights[c] = nk / static_cast<double>(n);
      if (nk < 1e-12)
        continue; // dead component keeps its last parameters at zero weight
      Point mean(dim, 0.0), var(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d)
          mean[d] += resp[i][c] * points[i][d];
      for (auto &v : mean)
        v /= nk;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d)
          var[d] += resp[i][c] * std::pow(points[i][d] - mean[d], 2);
      for (auto &v : var)
        v = std::max(v / nk, kVarianceFloor);
      m.means[c] = std::move(mean);
      m.variances[c] = std::move(var);
    }
  }
  return m;
}

Points gmm_sample(const GmmModel &model, int n, std::uint64_t seed) {
  Rng rng(seed);
  Points out;
  out.reserve(n);
  for (int s = 0; s < n; ++s) {
    const double u = uniform(rng, 0.0, 1.0);
    std::size_t c = 0;
    double acc = model.weights[0];
    while (u >= acc && c + 1 < model.weights.size())
      acc += model.weights[++c];
    Point x(model.dim);
    for (int d = 0; d < model.dim; ++d)
      x[d] = std::clamp(model.means[c][d] + std::sqrt(model.variances[c][d]) * normal(rng), 0.0, 1.0);
    out.push_back(std::move(x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pose features and pose sets

Imputation mean_imputation(const std::vector<PoseVector> &poses) {
  Imputation fill{};
  for (int j = 0; j < kNumJoints; ++j) {
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (const auto &p : poses)
      if (p.joints[j].present()) {
        sx += p.joints[j].x;
        sy += p.joints[j].y;
        ++n;
      }
    fill[j] = n > 0 ? std::array<double, 2>{sx / n, sy / n} : std::array<double, 2>{0.5, 0.5};
  }
  return fill;
}

Point pose_to_feature(const PoseVector &p, const Imputation &fill) {
  Point f(kPoseDim);
  for (int j = 0; j < kNumJoints; ++j) {
    const auto &k = p.joints[j];
    f[2 * j] = k.present() ? k.x : fill[j][0];
    f[2 * j + 1] = k.present() ? k.y : fill[j][1];
  }
  return f;
}

Point encode_pose(const PoseVector &p) { return pose_to_feature(p, Imputation{}); }

PoseVector feature_to_pose(const Point &f) {
  if (f.size() != static_cast<std::size_t>(kPoseDim))
    throw Error("pose feature must have 50 entries");
  PoseVector p;
  p.source = PoseSource::clustered;
  for (int j = 0; j < kNumJoints; ++j)
    p.joints[j] = {std::clamp(f[2 * j], 0.0, 1.0), std::clamp(f[2 * j + 1], 0.0, 1.0), 1.0};
  return p;
}

nlohmann::json to_json(const PoseSet &set) {
  nlohmann::json poses = nlohmann::json::array();
  for (const auto &p : set.poses)
    poses.push_back(to_json(p));
  return {{"poses", poses}, {"provenance", to_json(set.provenance)}};
}

PoseSet pose_set_from_json(const nlohmann::json &j) {
  PoseSet s;
  try {
    for (const auto &p : j.at("poses"))
      s.poses.push_back(pose_from_json(p));
    s.provenance = cluster_config_from_json(j.at("provenance"));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad pose set: ") + e.what());
  }
  return s;
}

void save_pose_set(const PoseSet &set, const std::string &path) {
  write_file(path, to_json(set).dump(1) + "\n");
}

PoseSet load_pose_set(const std::string &path) {
  try {
    return pose_set_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::vector<PoseVector> filter_poses(const std::vector<PoseVector> &poses, double min_present_frac) {
  std::vector<PoseVector> out;
  for (const auto &p : poses)
    if (p.present_count() >= min_present_frac * kNumJoints && p.present_count() > 0)
      out.push_back(p);
  return out;
}

PoseSet derive_pose_set(const std::vector<PoseVector> &poses, const ClusterConfig &cfg) {
  cfg.validate();
  const auto kept = filter_poses(poses, cfg.min_present_frac);
  const auto need = static_cast<std::size_t>(std::max(cfg.K, cfg.n_cbj));
  if (kept.size() < need)
    throw ConfigError("pose clustering needs at least " + std::to_string(need) +
                      " usable poses, got " + std::to_string(kept.size()));
  const auto fill = mean_imputation(kept);
  PoseSet out;
  out.provenance = cfg;

  if (cfg.mode == ClusterMode::fullbody) {
    Points feats;
    for (const auto &p : kept)
      feats.push_back(pose_to_feature(p, fill));
    Points chosen;
    if (cfg.method == ClusterMethod::kmeans)
      chosen = kmeans_fit(feats, cfg.K, cfg).centers;
    else
      chosen = gmm_sample(gmm_fit(feats, cfg.K, cfg), cfg.K, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    for (const auto &f : chosen)
      out.poses.push_back(feature_to_pose(f));
    return out;
  }

  // Body-joint mode: one small model per joint, poses assembled joint by joint.
  Rng pick(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::array<Points, kNumJoints> centers;
  std::array<GmmModel, kNumJoints> mixtures;
  for (int j = 0; j < kNumJoints; ++j) {
    Points pts;
    for (const auto &p : kept)
      pts.push_back({p.joints[j].present() ? p.joints[j].x : fill[j][0],
                     p.joints[j].present() ? p.joints[j].y : fill[j][1]});
    ClusterConfig jc = cfg;
    jc.seed = cfg.seed + static_cast<std::uint64_t>(j) * 7919;
    if (cfg.method == ClusterMethod::kmeans)
      centers[j] = kmeans_fit(pts, cfg.n_cbj, jc).centers;
    else
      mixtures[j] = gmm_fit(pts, cfg.n_cbj, jc);
  }
  std::array<Points, kNumJoints> draws;
  if (cfg.method == ClusterMethod::gmm)
    for (int j = 0; j < kNumJoints; ++j)
      draws[j] = gmm_sample(mixtures[j], cfg.K, cfg.seed + 104729 * (j + 1));
  for (int k = 0; k < cfg.K; ++k) {
    Point f(kPoseDim);
    for (int j = 0; j < kNumJoints; ++j) {
      const Point &xy = cfg.method == ClusterMethod::kmeans
                            ? centers[j][uniform_index(pick, centers[j].size())]
                            : draws[j][k];
      f[2 * j] = xy[0];
      f[2 * j + 1] = xy[1];
    }
    out.poses.push_back(feature_to_pose(f));
  }
  return out;
}

} // namespace reid
