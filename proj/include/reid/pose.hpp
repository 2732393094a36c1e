#pragma once

#include <array>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace reid {

inline constexpr int kNumJoints = 25;
inline constexpr int kPoseDim = 2 * kNumJoints;

/// BODY_25 keypoint order.
enum class Joint : int {
  Nose, Neck, RShoulder, RElbow, RWrist, LShoulder, LElbow, LWrist, MidHip,
  RHip, RKnee, RAnkle, LHip, LKnee, LAnkle, REye, LEye, REar, LEar,
  LBigToe, LSmallToe, LHeel, RBigToe, RSmallToe, RHeel
};

const char *joint_name(int index);

struct Keypoint {
  double x = 0.0; ///< normalized horizontal coordinate
  double y = 0.0; ///< normalized vertical coordinate
  double c = 0.0; ///< confidence; exactly 0 when missing

  bool present() const { return c > 0.0; }
  bool operator==(const Keypoint &) const = default;
};

enum class PoseSource { detected, clustered, synthetic };

const char *to_string(PoseSource s);
PoseSource pose_source_from_string(const std::string &s);

struct PoseVector {
  std::array<Keypoint, kNumJoints> joints{};
  PoseSource source = PoseSource::detected;

  int present_count() const;
  double summed_confidence() const;
  bool operator==(const PoseVector &) const = default;
};

/// Parse a detector BODY_25 JSON file. Pixel coordinates are divided by the
/// image width/height and clamped to [0,1]. With several people the one with
/// the greatest summed confidence wins; with none, an all-missing pose is
/// returned.
PoseVector load_pose_file(const std::string &path, int image_width,
                          int image_height);
PoseVector parse_pose_json(const nlohmann::json &doc, int image_width,
                           int image_height);

/// Inverse of parse_pose_json: one person in pixel coordinates.
nlohmann::json pose_to_detector_json(const PoseVector &pose, int image_width,
                                     int image_height);

/// Lossless normalized-coordinate serialization.
nlohmann::json to_json(const PoseVector &pose);
PoseVector pose_from_json(const nlohmann::json &j);

} // namespace reid
