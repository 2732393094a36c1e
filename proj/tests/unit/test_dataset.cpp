#include "oracles.hpp"
#include "toy_run.hpp"

#include "reid/dataset.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <set>

namespace fs = std::filesystem;
using namespace reid;

namespace {

nlohmann::json person(const std::vector<double> &triples) {
  return {{"pose_keypoints_2d", triples}};
}

std::vector<double> flat_keypoints(double fill_c) {
  std::vector<double> v;
  for (int j = 0; j < kNumJoints; ++j) {
    v.push_back(10.0 + j);
    v.push_back(20.0 + j);
    v.push_back(fill_c);
  }
  return v;
}

std::vector<std::string> paths_of(const std::vector<Sample> &s) {
  std::vector<std::string> out;
  for (const auto &x : s)
    out.push_back(x.path);
  return out;
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("market1501 filenames give identity and camera") {
  const auto parsed = parse_market_name("0002_c1s1_000451_03.jpg");
  REQUIRE(parsed);
  CHECK(parsed->identity == 2);
  CHECK(parsed->camera == 1);
  CHECK_FALSE(parse_market_name("holiday.jpg"));
}

TEST_CASE("market1501 directories load with subsets from their folder") {
  const std::string root = toy::fresh_dir("market_dir");
  fs::create_directories(fs::path(root) / "bounding_box_train");
  fs::create_directories(fs::path(root) / "query");
  save_png(Image(16, 8, 0.2), root + "/bounding_box_train/0002_c1s1_000451_03.png");
  save_png(Image(16, 8, 0.4), root + "/bounding_box_train/0007_c3s2_000100_01.png");
  save_png(Image(16, 8, 0.6), root + "/query/0002_c2s1_000200_01.png");
  save_png(Image(16, 8, 0.6), root + "/query/not_a_market_name.png");

  const std::size_t warnings = warning_count();
  const auto samples = load_image_dir(root, Naming::market1501);
  CHECK(warning_count() == warnings + 1);
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].identity == 2);
  CHECK(*samples[0].camera == 1);
  CHECK(samples[0].subset == Subset::train);
  CHECK(samples[2].subset == Subset::query);
  CHECK(*samples[2].camera == 2);
}

TEST_CASE("empty directory is an error") {
  const std::string root = toy::fresh_dir("empty_dir");
  CHECK_THROWS_WITH_AS(load_image_dir(root, Naming::market1501),
                       doctest::Contains("no samples found"), Error);
}

TEST_CASE("flat manifest with four files and two identities") {
  const std::string root = toy::fresh_dir("flat_four");
  std::string csv = "path,identity,camera\n";
  for (int i = 0; i < 4; ++i) {
    const std::string name = "img" + std::to_string(i) + ".png";
    save_png(Image(8, 4, 0.1 * i), root + "/" + name);
    csv += name + "," + std::to_string(i < 2 ? 3 : 9) + "," + std::to_string(i % 2) + "\n";
  }
  write_file(root + "/manifest.csv", csv);
  const auto samples = load_image_dir(root, Naming::flat);
  REQUIRE(samples.size() == 4);
  std::set<int> ids;
  for (const auto &s : samples)
    ids.insert(s.identity);
  CHECK(ids == std::set<int>{3, 9});
  for (const auto &s : samples)
    for (double v : s.image.data)
      CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("pose file of 75 zeros is all missing") {
  const std::string dir = toy::fresh_dir("pose_zero");
  const std::string path = dir + "/p_keypoints.json";
  write_file(path, nlohmann::json{{"people", {person(std::vector<double>(75, 0.0))}}}.dump());
  const PoseVector p = load_pose_file(path, 64, 128);
  CHECK(p.present_count() == 0);
  for (const auto &k : p.joints)
    CHECK(k.c == 0.0);
}

TEST_CASE("pixel coordinates are normalized by image size") {
  std::vector<double> v(75, 0.0);
  v[0] = 64;
  v[1] = 32;
  v[2] = 0.9;
  const PoseVector p = parse_pose_json({{"people", {person(v)}}}, 128, 128);
  CHECK(p.joints[0].x == doctest::Approx(0.5));
  CHECK(p.joints[0].y == doctest::Approx(0.25));
  CHECK(p.joints[0].c == doctest::Approx(0.9));
}

TEST_CASE("the person with greater summed confidence is chosen") {
  // 25 x 0.408 = 10.2 and 25 x 0.124 = 3.1
  const auto first = flat_keypoints(0.408);
  auto second = flat_keypoints(0.124);
  second[0] = 99;
  const PoseVector p = parse_pose_json({{"people", {person(first), person(second)}}}, 128, 128);
  CHECK(p.summed_confidence() == doctest::Approx(10.2));
  CHECK(p.joints[0].x == doctest::Approx(10.0 / 128));

  const PoseVector q = parse_pose_json({{"people", {person(second), person(first)}}}, 128, 128);
  CHECK(q == p);
}

TEST_CASE("malformed pose files are format errors") {
  CHECK_THROWS_AS(parse_pose_json({{"persons", nlohmann::json::array()}}, 64, 128), FormatError);
  CHECK_THROWS_AS(parse_pose_json({{"people", {person(std::vector<double>(74, 0.0))}}}, 64, 128),
                  FormatError);
  CHECK_THROWS_AS(parse_pose_json({{"people", {{{"face", 1}}}}}, 64, 128), FormatError);
  const PoseVector none = parse_pose_json({{"people", nlohmann::json::array()}}, 64, 128);
  CHECK(none.present_count() == 0);
}

TEST_CASE("loaded coordinates always lie in the unit square") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v;
    for (int j = 0; j < kNumJoints; ++j) {
      v.push_back(uniform(rng, -20.0, 90.0));
      v.push_back(uniform(rng, -20.0, 150.0));
      v.push_back(uniform(rng, 0.0, 1.0) < 0.2 ? 0.0 : uniform(rng, 0.01, 1.0));
    }
    const PoseVector p = parse_pose_json({{"people", {person(v)}}}, 64, 128);
    for (const auto &k : p.joints) {
      CHECK((k.x >= 0.0 && k.x <= 1.0));
      CHECK((k.y >= 0.0 && k.y <= 1.0));
    }
  }
}

TEST_CASE("pose and sample metadata round trip losslessly") {
  Rng rng(5);
  PoseVector p;
  p.source = PoseSource::clustered;
  for (auto &k : p.joints)
    k = {uniform(rng, 0, 1), uniform(rng, 0, 1), 1.0};
  p.joints[3] = {0, 0, 0};
  CHECK(pose_from_json(to_json(p)) == p);

  Sample s;
  s.identity = 42;
  s.camera = 3;
  s.pose = p;
  s.path = "some/where.png";
  s.subset = Subset::gallery;
  const Sample back = sample_from_metadata(nlohmann::json::parse(sample_metadata(s).dump()));
  CHECK(back.identity == 42);
  CHECK(back.camera == 3);
  CHECK(back.pose == p);
  CHECK(back.path == s.path);
  CHECK(back.subset == Subset::gallery);

  Sample bare;
  bare.identity = 1;
  const Sample bare_back = sample_from_metadata(sample_metadata(bare));
  CHECK_FALSE(bare_back.camera);
  CHECK_FALSE(bare_back.pose);
}

TEST_CASE("toy protocol splits by identity parity") {
  ToySpec spec;
  spec.num_identities = 10;
  spec.images_per_identity = 4;
  const DatasetSplit split = make_split(synth_toy_dataset(spec), Protocol::toy);
  std::set<int> train, test;
  for (const auto &s : split.train)
    train.insert(s.identity);
  for (const auto *part : {&split.gallery, &split.query})
    for (const auto &s : *part)
      test.insert(s.identity);
  CHECK(train.size() == 5);
  CHECK(test.size() == 5);
  for (int id : train)
    CHECK(test.count(id) == 0);
  CHECK(split.num_identities_train == 5);
  std::set<int> gallery_ids;
  for (const auto &s : split.gallery)
    gallery_ids.insert(s.identity);
  for (const auto &q : split.query)
    CHECK(gallery_ids.count(q.identity) == 1);
}

TEST_CASE("market1501 split follows the manifest tags") {
  const std::string root = toy::fresh_dir("market_manifest");
  std::string csv = "path,identity,camera,subset\n";
  std::map<std::string, std::string> tag;
  for (int id = 0; id < 6; ++id)
    for (int k = 0; k < 3; ++k) {
      const std::string name = "p" + std::to_string(id) + "_" + std::to_string(k) + ".png";
      save_png(Image(8, 4, 0.5), root + "/" + name);
      const std::string subset = id < 3 ? "train" : (k == 0 ? "query" : "gallery");
      csv += name + "," + std::to_string(id) + "," + std::to_string(k) + "," + subset + "\n";
      tag[(fs::path(root) / name).string()] = subset;
    }
  write_file(root + "/manifest.csv", csv);
  const DatasetSplit split = make_split(load_image_dir(root, Naming::flat), Protocol::market1501);
  CHECK(split.train.size() == 9);
  CHECK(split.query.size() == 3);
  CHECK(split.gallery.size() == 6);
  for (const auto &s : split.train)
    CHECK(tag[s.path] == "train");
  for (const auto &s : split.query)
    CHECK(tag[s.path] == "query");
  for (const auto &s : split.gallery)
    CHECK(tag[s.path] == "gallery");
}

TEST_CASE("cuhk03 splits are a function of the seed") {
  ToySpec spec;
  spec.num_identities = 12;
  spec.images_per_identity = 4;
  const auto samples = synth_toy_dataset(spec);
  const auto a = make_split(samples, Protocol::cuhk03, 17);
  const auto b = make_split(samples, Protocol::cuhk03, 17);
  CHECK(paths_of(a.train) == paths_of(b.train));
  CHECK(paths_of(a.gallery) == paths_of(b.gallery));
  CHECK(paths_of(a.query) == paths_of(b.query));
  bool differs = false;
  for (std::uint64_t seed = 18; seed < 28 && !differs; ++seed)
    differs = paths_of(make_split(samples, Protocol::cuhk03, seed).query) != paths_of(a.query);
  CHECK(differs);
}

TEST_CASE("protocols needing cameras reject samples without them") {
  ToySpec spec;
  spec.num_identities = 4;
  spec.images_per_identity = 2;
  auto samples = synth_toy_dataset(spec);
  samples[1].camera.reset();
  for (const auto p : {Protocol::toy, Protocol::cuhk03, Protocol::cuhk01, Protocol::market1501})
    CHECK_THROWS_AS(make_split(samples, p), ConfigError);
  CHECK_THROWS_AS(make_split({}, Protocol::toy), ConfigError);
}

TEST_CASE("toy dataset counts and colour schemes") {
  ToySpec spec;
  spec.num_identities = 2;
  spec.images_per_identity = 3;
  const auto samples = synth_toy_dataset(spec);
  REQUIRE(samples.size() == 6);
  std::map<int, std::set<std::array<double, 3>>> head_colour;
  for (const auto &s : samples) {
    REQUIRE(s.pose);
    CHECK(s.pose->source == PoseSource::synthetic);
    CHECK(s.pose->present_count() == kNumJoints);
    const auto &neck = s.pose->joints[static_cast<int>(Joint::Neck)];
    const int x = static_cast<int>(neck.x * spec.width);
    const int y = static_cast<int>(neck.y * spec.height - 0.09 * spec.height);
    head_colour[s.identity].insert({s.image.at(y, x, 0), s.image.at(y, x, 1), s.image.at(y, x, 2)});
  }
  REQUIRE(head_colour.size() == 2);
  CHECK(head_colour[0].size() == 1);
  CHECK(head_colour[1].size() == 1);
  CHECK(*head_colour[0].begin() != *head_colour[1].begin());
}

TEST_CASE("toy synthesis is deterministic") {
  ToySpec spec;
  spec.num_identities = 3;
  spec.images_per_identity = 2;
  const auto a = synth_toy_dataset(spec);
  const auto b = synth_toy_dataset(spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].pose == b[i].pose);
  }
  spec.appearance_seed += 1;
  CHECK_FALSE(synth_toy_dataset(spec)[0].image == a[0].image);
}

TEST_CASE("detected markers match the emitted pose within one pixel") {
  ToySpec spec;
  spec.num_identities = 4;
  spec.images_per_identity = 5;
  for (const auto &s : synth_toy_dataset(spec)) {
    const auto found = oracle::detect_markers(s.image);
    for (int j = 0; j < kNumJoints; ++j) {
      REQUIRE(found[j]);
      CHECK(std::abs(found[j]->first - s.pose->joints[j].x * spec.width) <= 1.0);
      CHECK(std::abs(found[j]->second - s.pose->joints[j].y * spec.height) <= 1.0);
    }
  }
}

TEST_CASE("committed fixture loads with its poses and markers intact") {
  auto samples = load_image_dir(toy::fixture_dataset(), Naming::flat);
  REQUIRE(samples.size() == 80);
  for (const auto &s : samples) {
    REQUIRE(s.pose);
    CHECK(s.image.height == 64);
    CHECK(s.image.width == 32);
    const auto found = oracle::detect_markers(s.image);
    for (int j = 0; j < kNumJoints; ++j) {
      REQUIRE(found[j]);
      CHECK(std::abs(found[j]->first - s.pose->joints[j].x * 32) <= 1.0);
      CHECK(std::abs(found[j]->second - s.pose->joints[j].y * 64) <= 1.0);
    }
  }
  const DatasetSplit split = make_split(samples, Protocol::toy);
  CHECK(split.num_identities_train == 5);
}

TEST_CASE("toy spec validation") {
  ToySpec spec;
  spec.num_identities = 1;
  CHECK_THROWS_AS(synth_toy_dataset(spec), ConfigError);
  spec.num_identities = 2;
  spec.images_per_identity = 1;
  CHECK_THROWS_AS(synth_toy_dataset(spec), ConfigError);
}

}
