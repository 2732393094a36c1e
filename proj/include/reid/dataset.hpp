#pragma once

#include "reid/common.hpp"
#include "reid/image.hpp"
#include "reid/pose.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace reid {

/// Which standard subset a sample was filed under on disk, when known.
enum class Subset { unspecified, train, gallery, query };

const char *to_string(Subset s);
Subset subset_from_string(const std::string &s);

struct Sample {
  Image image;
  int identity = 0;
  std::optional<int> camera;
  std::optional<PoseVector> pose;
  std::string path;
  Subset subset = Subset::unspecified;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> gallery;
  std::vector<Sample> query;
  int num_identities_train = 0;
  /// Sorted distinct train identities; position = classifier label.
  std::vector<int> train_identities;

  /// Classifier label of a train identity. Throws for unknown identities.
  int class_index(int identity) const;
};

enum class Naming { market1501, flat };
enum class Protocol { market1501, duke, cuhk03, cuhk01, toy };

Naming naming_from_string(const std::string &s);
Protocol protocol_from_string(const std::string &s);
const char *to_string(Protocol p);

/// Parsed "ID_cC..." filename. Returns nullopt when the name does not match.
struct ParsedName {
  int identity;
  int camera;
};
std::optional<ParsedName> parse_market_name(const std::string &filename);

/// Load every raster image under `root`, ordered by path.
///
/// market1501 naming parses identity and camera from the filename and infers
/// the subset from the directory (bounding_box_train, bounding_box_test,
/// query). flat naming reads `root/manifest.csv` (path,identity,camera[,subset]).
/// A detector file `<stem>_keypoints.json` next to an image is attached as its
/// pose. Unreadable or unparseable files are skipped with a warning.
std::vector<Sample> load_image_dir(const std::string &root, Naming naming);

/// Resize every image to (h, w) in place.
void resize_samples(std::vector<Sample> &samples, int h, int w);

DatasetSplit make_split(const std::vector<Sample> &samples, Protocol protocol,
                        std::uint64_t seed = 0);

/// Write `root/manifest.csv` for flat-naming ingestion.
void write_manifest(const std::vector<Sample> &samples, const std::string &root);

struct PoseRange {
  double arm_deg = 70.0;   ///< upper-arm swing about hanging-down
  double elbow_deg = 60.0; ///< forearm bend relative to upper arm
  double leg_deg = 25.0;   ///< thigh swing about vertical
  double knee_deg = 35.0;  ///< shin bend relative to thigh
  double lean_deg = 6.0;   ///< torso lean
};

struct ToySpec {
  int num_identities = 10;
  int images_per_identity = 8;
  int height = 64;
  int width = 32;
  std::uint64_t appearance_seed = 7;
  PoseRange pose_range;

  void validate() const;
};

/// Articulated stick figures with per-identity torso/leg/head colours on a
/// plain background. Each joint carries a one-pixel marker whose colour
/// encodes the joint index (R = B = 1, G = 8(j+1)/255); the attached pose is
/// the exact marker-pixel centre. Camera = image index mod 2.
std::vector<Sample> synth_toy_dataset(const ToySpec &spec);

/// Marker colour of joint j.
std::array<double, 3> marker_color(int joint);

/// Write PNGs, one `<stem>_keypoints.json` per image, and manifest.csv.
void write_toy_dataset(const std::vector<Sample> &samples, const std::string &root);

/// Lossless metadata record (everything but pixels).
nlohmann::json sample_metadata(const Sample &s);
Sample sample_from_metadata(const nlohmann::json &j);

} // namespace reid
