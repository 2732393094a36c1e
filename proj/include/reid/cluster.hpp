#pragma once

#include "reid/common.hpp"
#include "reid/pose.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <vector>

namespace reid {

using Point = std::vector<double>;
using Points = std::vector<Point>;

enum class ClusterMethod { kmeans, gmm };
enum class ClusterMode { fullbody, bodyjoint };

const char *to_string(ClusterMethod m);
const char *to_string(ClusterMode m);
ClusterMethod cluster_method_from_string(const std::string &s);
ClusterMode cluster_mode_from_string(const std::string &s);

struct ClusterConfig {
  ClusterMethod method = ClusterMethod::gmm;
  ClusterMode mode = ClusterMode::fullbody;
  int K = 12;     ///< output pose count (clusters in fullbody mode)
  int n_cbj = 3;  ///< clusters per joint in bodyjoint mode
  int max_iter = 300;
  double tol = 1e-6;
  int n_init = 20; ///< k-means restarts; the lowest-inertia run wins
  std::uint64_t seed = 0;
  double min_present_frac = 0.7;

  void validate() const;
};

nlohmann::json to_json(const ClusterConfig &cfg);
ClusterConfig cluster_config_from_json(const nlohmann::json &j);

struct KMeansResult {
  Points centers;
  std::vector<int> assignments;
  double inertia = 0.0;
  /// Inertia after every assignment step of the winning run.
  std::vector<double> inertia_history;
};

/// Lloyd's algorithm with k-means++ seeding; empty clusters are re-seeded
/// with the point farthest from its centre.
KMeansResult kmeans_fit(const Points &points, int k, const ClusterConfig &cfg);

double inertia(const Points &points, const Points &centers,
               const std::vector<int> &assignments);

inline constexpr double kVarianceFloor = 1e-6;

struct GmmModel {
  int dim = 0;
  std::vector<double> weights;
  Points means;
  Points variances; ///< diagonal covariance per component
  /// Mean per-point log-likelihood recorded at every EM iteration.
  std::vector<double> log_likelihood_trace;

  double log_density(const Point &x) const;
  double mean_log_likelihood(const Points &points) const;
};

/// EM with diagonal covariances initialised from kmeans_fit.
GmmModel gmm_fit(const Points &points, int k, const ClusterConfig &cfg);

/// Component by weight, then a Gaussian draw; coordinates clamped to [0,1].
Points gmm_sample(const GmmModel &model, int n, std::uint64_t seed);

/// Per-joint replacement location for missing joints.
using Imputation = std::array<std::array<double, 2>, kNumJoints>;

/// Dataset-mean location of every joint over present entries.
Imputation mean_imputation(const std::vector<PoseVector> &poses);

/// Concatenated (x, y) per joint, missing joints replaced from `fill`.
Point pose_to_feature(const PoseVector &p, const Imputation &fill);

/// Fixed-layout pose encoding with missing joints at (0, 0).
Point encode_pose(const PoseVector &p);

PoseVector feature_to_pose(const Point &f);

struct PoseSet {
  std::vector<PoseVector> poses;
  ClusterConfig provenance;
};

nlohmann::json to_json(const PoseSet &set);
PoseSet pose_set_from_json(const nlohmann::json &j);
void save_pose_set(const PoseSet &set, const std::string &path);
PoseSet load_pose_set(const std::string &path);

/// Poses with at least min_present_frac of their joints present.
std::vector<PoseVector> filter_poses(const std::vector<PoseVector> &poses,
                                     double min_present_frac);

PoseSet derive_pose_set(const std::vector<PoseVector> &poses, const ClusterConfig &cfg);

} // namespace reid
