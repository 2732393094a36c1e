#include "reid/pose.hpp"

#include "reid/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace reid {

namespace {
constexpr std::array<const char *, kNumJoints> kJointNames = {
    "Nose",     "Neck",      "RShoulder", "RElbow",  "RWrist",
    "LShoulder", "LElbow",   "LWrist",    "MidHip",  "RHip",
    "RKnee",    "RAnkle",    "LHip",      "LKnee",   "LAnkle",
    "REye",     "LEye",      "REar",      "LEar",    "LBigToe",
    "LSmallToe", "LHeel",    "RBigToe",   "RSmallToe", "RHeel"};

Keypoint normalize(double px, double py, double c, int w, int h) {
  if (!std::isfinite(px) || !std::isfinite(py) || !std::isfinite(c))
    throw FormatError("non-finite keypoint value");
  if (c <= 0.0)
    return {};
  return {std::clamp(px / w, 0.0, 1.0), std::clamp(py / h, 0.0, 1.0),
          std::clamp(c, 0.0, 1.0)};
}
} // namespace

const char *joint_name(int index) { return kJointNames.at(index); }

const char *to_string(PoseSource s) {
  switch (s) {
  case PoseSource::detected: return "detected";
  case PoseSource::clustered: return "clustered";
  case PoseSource::synthetic: return "synthetic";
  }
  return "detected";
}

PoseSource pose_source_from_string(const std::string &s) {
  if (s == "detected") return PoseSource::detected;
  if (s == "clustered") return PoseSource::clustered;
  if (s == "synthetic") return PoseSource::synthetic;
  throw FormatError("unknown pose source '" + s + "'");
}

int PoseVector::present_count() const {
  return static_cast<int>(std::count_if(joints.begin(), joints.end(),
                                        [](const Keypoint &k) { return k.present(); }));
}

double PoseVector::summed_confidence() const {
  double s = 0.0;
  for (const auto &k : joints)
    s += k.c;
  return s;
}

PoseVector parse_pose_json(const nlohmann::json &doc, int image_width,
                           int image_height) {
  if (image_width <= 0 || image_height <= 0)
    throw ConfigError("pose normalization needs a positive image size");
  if (!doc.is_object() || !doc.contains("people") || !doc["people"].is_array())
    throw FormatError("pose JSON lacks a \"people\" array");

  PoseVector best;
  double best_conf = -1.0;
  for (const auto &person : doc["people"]) {
    if (!person.contains("pose_keypoints_2d"))
      throw FormatError("person entry lacks \"pose_keypoints_2d\"");
    const auto &kp = person["pose_keypoints_2d"];
    if (!kp.is_array() || kp.size() != 3 * kNumJoints)
      throw FormatError("\"pose_keypoints_2d\" must hold 75 numbers");
    PoseVector p;
    for (int j = 0; j < kNumJoints; ++j) {
      const auto &vx = kp[3 * j], &vy = kp[3 * j + 1], &vc = kp[3 * j + 2];
      if (!vx.is_number() || !vy.is_number() || !vc.is_number())
        throw FormatError("non-numeric keypoint entry");
      p.joints[j] = normalize(vx.get<double>(), vy.get<double>(),
                              vc.get<double>(), image_width, image_height);
    }
    const double conf = p.summed_confidence();
    if (conf > best_conf) {
      best = p;
      best_conf = conf;
    }
  }
  best.source = PoseSource::detected;
  return best;
}

PoseVector load_pose_file(const std::string &path, int image_width,
                          int image_height) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(path + ": " + e.what());
  }
  try {
    return parse_pose_json(doc, image_width, image_height);
  } catch (const FormatError &e) {
    throw FormatError(path + ": " + e.what());
  }
}

nlohmann::json pose_to_detector_json(const PoseVector &pose, int image_width,
                                     int image_height) {
  nlohmann::json kp = nlohmann::json::array();
  for (const auto &k : pose.joints) {
    kp.push_back(k.present() ? k.x * image_width : 0.0);
    kp.push_back(k.present() ? k.y * image_height : 0.0);
    kp.push_back(k.c);
  }
  return {{"version", 1.3},
          {"people", nlohmann::json::array({{{"person_id", {-1}},
                                              {"pose_keypoints_2d", kp}}})}};
}

nlohmann::json to_json(const PoseVector &pose) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto &k : pose.joints)
    joints.push_back({k.x, k.y, k.c});
  return {{"source", to_string(pose.source)}, {"joints", joints}};
}

PoseVector pose_from_json(const nlohmann::json &j) {
  PoseVector p;
  try {
    p.source = pose_source_from_string(j.at("source").get<std::string>());
    const auto &joints = j.at("joints");
    if (joints.size() != kNumJoints)
      throw FormatError("pose must have 25 joints");
    for (int i = 0; i < kNumJoints; ++i) {
      const auto &t = joints[i];
      p.joints[i] = {t.at(0).get<double>(), t.at(1).get<double>(),
                     t.at(2).get<double>()};
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad pose record: ") + e.what());
  }
  return p;
}

} // namespace reid
