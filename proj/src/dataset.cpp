#include "reid/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace reid {

const char *to_string(Subset s) {
  switch (s) {
  case Subset::unspecified: return "";
  case Subset::train: return "train";
  case Subset::gallery: return "gallery";
  case Subset::query: return "query";
  }
  return "";
}

Subset subset_from_string(const std::string &s) {
  if (s.empty()) return Subset::unspecified;
  if (s == "train") return Subset::train;
  if (s == "gallery" || s == "test") return Subset::gallery;
  if (s == "query") return Subset::query;
  throw FormatError("unknown subset '" + s + "'");
}

int DatasetSplit::class_index(int identity) const {
  auto it = std::lower_bound(train_identities.begin(), train_identities.end(), identity);
  if (it == train_identities.end() || *it != identity)
    throw Error("identity " + std::to_string(identity) + " is not a train identity");
  return static_cast<int>(it - train_identities.begin());
}

Naming naming_from_string(const std::string &s) {
  if (s == "market1501") return Naming::market1501;
  if (s == "flat") return Naming::flat;
  throw ConfigError("unknown naming '" + s + "'");
}

Protocol protocol_from_string(const std::string &s) {
  if (s == "market1501") return Protocol::market1501;
  if (s == "duke") return Protocol::duke;
  if (s == "cuhk03") return Protocol::cuhk03;
  if (s == "cuhk01") return Protocol::cuhk01;
  if (s == "toy") return Protocol::toy;
  throw ConfigError("unknown protocol '" + s + "'");
}

const char *to_string(Protocol p) {
  switch (p) {
  case Protocol::market1501: return "market1501";
  case Protocol::duke: return "duke";
  case Protocol::cuhk03: return "cuhk03";
  case Protocol::cuhk01: return "cuhk01";
  case Protocol::toy: return "toy";
  }
  return "toy";
}

std::optional<ParsedName> parse_market_name(const std::string &filename) {
  // Market-1501: 0002_c1s1_000451_03.jpg ; DukeMTMC: 0005_c2_f0046985.jpg
  static const std::regex re(R"(^(-?\d+)_c(\d+)(s\d+)?_.*)");
  std::smatch m;
  if (!std::regex_match(filename, m, re))
    return std::nullopt;
  return ParsedName{std::stoi(m[1]), std::stoi(m[2])};
}

namespace {

bool is_image_file(const fs::path &p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

Subset subset_from_dir(const fs::path &p) {
  const auto dir = p.parent_path().filename().string();
  if (dir == "bounding_box_train") return Subset::train;
  if (dir == "bounding_box_test") return Subset::gallery;
  if (dir == "query") return Subset::query;
  return Subset::unspecified;
}

void attach_pose(Sample &s, const fs::path &image_path) {
  const auto pose_path =
      image_path.parent_path() / (image_path.stem().string() + "_keypoints.json");
  if (!fs::exists(pose_path))
    return;
  try {
    s.pose = load_pose_file(pose_path.string(), s.image.width, s.image.height);
  } catch (const FormatError &e) {
    warn(std::string("skipping pose: ") + e.what());
  }
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

std::vector<Sample> load_market(const fs::path &root) {
  std::vector<fs::path> files;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && is_image_file(e.path()))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<Sample> out;
  for (const auto &f : files) {
    const auto parsed = parse_market_name(f.filename().string());
    if (!parsed) {
      warn("unparseable filename " + f.string());
      continue;
    }
    if (parsed->identity < 0) {
      warn("junk identity in " + f.string());
      continue;
    }
    Sample s;
    try {
      s.image = load_image(f.string());
    } catch (const FormatError &e) {
      warn(e.what());
      continue;
    }
    s.identity = parsed->identity;
    s.camera = parsed->camera;
    s.path = f.string();
    s.subset = subset_from_dir(f);
    attach_pose(s, f);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_flat(const fs::path &root) {
  const auto manifest = root / "manifest.csv";
  if (!fs::exists(manifest))
    throw FormatError("flat naming requires " + manifest.string());
  std::ifstream in(manifest);
  std::string line;
  std::getline(in, line); // header
  struct Row {
    fs::path path;
    int identity;
    std::optional<int> camera;
    Subset subset;
  };
  std::vector<Row> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto cells = split_csv(line);
    try {
      if (cells.size() < 2)
        throw std::invalid_argument("too few columns");
      Row r{root / cells[0], std::stoi(cells[1]), std::nullopt, Subset::unspecified};
      if (cells.size() > 2 && !cells[2].empty())
        r.camera = std::stoi(cells[2]);
      if (cells.size() > 3)
        r.subset = subset_from_string(cells[3]);
      if (r.identity < 0 || (r.camera && *r.camera < 0))
        throw std::invalid_argument("negative label");
      rows.push_back(std::move(r));
    } catch (const std::exception &e) {
      warn("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row &a, const Row &b) { return a.path < b.path; });

  std::vector<Sample> out;
  for (const auto &r : rows) {
    Sample s;
    try {
      s.image = load_image(r.path.string());
    } catch (const FormatError &e) {
      warn(e.what());
      continue;
    }
    s.identity = r.identity;
    s.camera = r.camera;
    s.subset = r.subset;
    s.path = r.path.string();
    attach_pose(s, r.path);
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace

std::vector<Sample> load_image_dir(const std::string &root, Naming naming) {
  if (!fs::is_directory(root))
    throw Error("image directory " + root + " does not exist");
  auto out = naming == Naming::market1501 ? load_market(root) : load_flat(root);
  if (out.empty())
    throw Error("no samples found in " + root);
  return out;
}

void resize_samples(std::vector<Sample> &samples, int h, int w) {
  for (auto &s : samples)
    s.image = resize_bilinear(s.image, h, w);
}

namespace {

void require_cameras(const std::vector<Sample> &samples, Protocol p) {
  for (const auto &s : samples)
    if (!s.camera)
      throw ConfigError(std::string("protocol ") + to_string(p) +
                        " requires camera labels; missing for " + s.path);
}

std::vector<int> distinct_identities(const std::vector<Sample> &samples) {
  std::set<int> ids;
  for (const auto &s : samples)
    ids.insert(s.identity);
  return {ids.begin(), ids.end()};
}

void finish(DatasetSplit &split) {
  split.train_identities = distinct_identities(split.train);
  split.num_identities_train = static_cast<int>(split.train_identities.size());
}

void shuffle(std::vector<int> &v, Rng &rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

DatasetSplit split_by_subset(const std::vector<Sample> &samples, Protocol p) {
  require_cameras(samples, p);
  DatasetSplit split;
  for (const auto &s : samples) {
    switch (s.subset) {
    case Subset::train: split.train.push_back(s); break;
    case Subset::gallery: split.gallery.push_back(s); break;
    case Subset::query: split.query.push_back(s); break;
    case Subset::unspecified:
      throw ConfigError(std::string("protocol ") + to_string(p) +
                        " needs train/gallery/query tags; untagged: " + s.path);
    }
  }
  finish(split);
  return split;
}

DatasetSplit split_toy(const std::vector<Sample> &samples) {
  require_cameras(samples, Protocol::toy);
  DatasetSplit split;
  std::set<std::pair<int, int>> seen; // (identity, camera) already given a query
  for (const auto &s : samples) {
    if (s.identity % 2 == 0) {
      split.train.push_back(s);
    } else if (seen.insert({s.identity, *s.camera}).second) {
      split.query.push_back(s);
    } else {
      split.gallery.push_back(s);
    }
  }
  finish(split);
  return split;
}

DatasetSplit split_cuhk03(const std::vector<Sample> &samples, std::uint64_t seed) {
  require_cameras(samples, Protocol::cuhk03);
  auto ids = distinct_identities(samples);
  Rng rng(seed);
  shuffle(ids, rng);
  const std::size_t n_test = std::min<std::size_t>(100, ids.size() / 2);
  const std::set<int> test(ids.begin(), ids.begin() + static_cast<long>(n_test));

  // One probe per test identity, drawn from its lowest-numbered camera.
  std::map<int, int> probe_camera;
  for (const auto &s : samples)
    if (test.count(s.identity)) {
      auto [it, fresh] = probe_camera.emplace(s.identity, *s.camera);
      if (!fresh)
        it->second = std::min(it->second, *s.camera);
    }
  std::map<int, std::vector<std::size_t>> probe_candidates;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (test.count(samples[i].identity) &&
        *samples[i].camera == probe_camera[samples[i].identity])
      probe_candidates[samples[i].identity].push_back(i);
  std::set<std::size_t> probes;
  for (const auto &[id, idx] : probe_candidates)
    probes.insert(idx[uniform_index(rng, idx.size())]);

  DatasetSplit split;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto &s = samples[i];
    if (!test.count(s.identity))
      split.train.push_back(s);
    else if (probes.count(i))
      split.query.push_back(s);
    else if (*s.camera != probe_camera[s.identity])
      split.gallery.push_back(s);
  }
  finish(split);
  return split;
}

DatasetSplit split_cuhk01(const std::vector<Sample> &samples, std::uint64_t seed) {
  require_cameras(samples, Protocol::cuhk01);
  auto ids = distinct_identities(samples);
  Rng rng(seed);
  shuffle(ids, rng);
  const std::set<int> test(ids.begin(), ids.begin() + static_cast<long>(ids.size() - ids.size() / 2));
  int cam_a = std::numeric_limits<int>::max();
  for (const auto &s : samples)
    cam_a = std::min(cam_a, *s.camera);

  DatasetSplit split;
  for (const auto &s : samples) {
    if (!test.count(s.identity))
      split.train.push_back(s);
    else if (*s.camera == cam_a)
      split.query.push_back(s);
    else
      split.gallery.push_back(s);
  }
  finish(split);
  return split;
}

} // namespace

DatasetSplit make_split(const std::vector<Sample> &samples, Protocol protocol,
                        std::uint64_t seed) {
  if (samples.empty())
    throw ConfigError("make_split: no samples");
  switch (protocol) {
  case Protocol::market1501:
  case Protocol::duke: return split_by_subset(samples, protocol);
  case Protocol::cuhk03: return split_cuhk03(samples, seed);
  case Protocol::cuhk01: return split_cuhk01(samples, seed);
  case Protocol::toy: return split_toy(samples);
  }
  throw ConfigError("unknown protocol");
}

void write_manifest(const std::vector<Sample> &samples, const std::string &root) {
  std::ostringstream os;
  os << "path,identity,camera,subset\n";
  for (const auto &s : samples) {
    os << fs::path(s.path).lexically_relative(root).string() << ',' << s.identity << ',';
    if (s.camera)
      os << *s.camera;
    os << ',' << to_string(s.subset) << '\n';
  }
  write_file((fs::path(root) / "manifest.csv").string(), os.str());
}

// ---------------------------------------------------------------------------
// Toy articulated figures

void ToySpec::validate() const {
  if (num_identities < 2)
    throw ConfigError("toy spec needs at least 2 identities");
  if (images_per_identity < 2)
    throw ConfigError("toy spec needs at least 2 images per identity");
  if (height < 32 || width < 16)
    throw ConfigError("toy images must be at least 32x16");
  const auto &r = pose_range;
  for (double v : {r.arm_deg, r.elbow_deg, r.leg_deg, r.knee_deg, r.lean_deg})
    if (!(v >= 0.0 && v <= 180.0))
      throw ConfigError("pose_range angles must lie in [0, 180]");
}

std::array<double, 3> marker_color(int joint) {
  return {1.0, 8.0 * (joint + 1) / 255.0, 1.0};
}

namespace {

using Color = std::array<double, 3>;
struct Pt {
  double x, y;
};

struct Appearance {
  Color torso, legs, head;
};

Color random_color(Rng &rng) {
  return {uniform(rng, 0.05, 0.85), uniform(rng, 0.05, 0.85), uniform(rng, 0.05, 0.85)};
}

double appearance_distance(const Appearance &a, const Appearance &b) {
  double d = 0.0;
  for (int c = 0; c < 3; ++c)
    d += std::pow(a.torso[c] - b.torso[c], 2) + std::pow(a.legs[c] - b.legs[c], 2) +
         std::pow(a.head[c] - b.head[c], 2);
  return std::sqrt(d);
}

std::vector<Appearance> make_appearances(int n, Rng &rng) {
  std::vector<Appearance> out;
  while (static_cast<int>(out.size()) < n) {
    Appearance cand{random_color(rng), random_color(rng), random_color(rng)};
    bool ok = true;
    for (int attempt = 0; attempt < 200; ++attempt) {
      ok = std::all_of(out.begin(), out.end(), [&](const Appearance &a) {
        return appearance_distance(a, cand) > 0.35;
      });
      if (ok)
        break;
      cand = {random_color(rng), random_color(rng), random_color(rng)};
    }
    out.push_back(cand);
  }
  return out;
}

Pt polar(Pt from, double len, double deg_from_down) {
  const double r = deg_from_down * M_PI / 180.0;
  return {from.x + len * std::sin(r), from.y + len * std::cos(r)};
}

/// Continuous joint positions (pixels) for one random pose.
std::array<Pt, kNumJoints> random_skeleton(const ToySpec &spec, Rng &rng) {
  const double H = spec.height, W = spec.width;
  const auto &r = spec.pose_range;
  std::array<Pt, kNumJoints> j{};
  auto idx = [](Joint k) { return static_cast<int>(k); };

  const double cx = W / 2.0 + uniform(rng, -0.04, 0.04) * W;
  const Pt neck{cx, 0.22 * H};
  const double lean = uniform(rng, -r.lean_deg, r.lean_deg);
  const Pt midhip = polar(neck, 0.30 * H, lean);
  j[idx(Joint::Neck)] = neck;
  j[idx(Joint::MidHip)] = midhip;

  const Pt head{neck.x, neck.y - 0.09 * H};
  j[idx(Joint::Nose)] = {head.x, head.y + 0.02 * H};
  j[idx(Joint::REye)] = {head.x - 0.03 * H, head.y - 0.015 * H};
  j[idx(Joint::LEye)] = {head.x + 0.03 * H, head.y - 0.015 * H};
  j[idx(Joint::REar)] = {head.x - 0.06 * H, head.y};
  j[idx(Joint::LEar)] = {head.x + 0.06 * H, head.y};

  // Person faces the camera: their right side is on the image left.
  const double shoulder = 0.09 * H;
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? -1.0 : 1.0;
    const Joint sh = side == 0 ? Joint::RShoulder : Joint::LShoulder;
    const Joint el = side == 0 ? Joint::RElbow : Joint::LElbow;
    const Joint wr = side == 0 ? Joint::RWrist : Joint::LWrist;
    const Pt ps{neck.x + s * shoulder, neck.y + 0.01 * H};
    const double upper = s * uniform(rng, 0.0, r.arm_deg) + uniform(rng, -10, 10);
    const Pt pe = polar(ps, 0.14 * H, upper);
    const Pt pw = polar(pe, 0.13 * H, upper + s * uniform(rng, 0.0, r.elbow_deg));
    j[idx(sh)] = ps;
    j[idx(el)] = pe;
    j[idx(wr)] = pw;

    const Joint hp = side == 0 ? Joint::RHip : Joint::LHip;
    const Joint kn = side == 0 ? Joint::RKnee : Joint::LKnee;
    const Joint an = side == 0 ? Joint::RAnkle : Joint::LAnkle;
    const Joint heel = side == 0 ? Joint::RHeel : Joint::LHeel;
    const Joint big = side == 0 ? Joint::RBigToe : Joint::LBigToe;
    const Joint small = side == 0 ? Joint::RSmallToe : Joint::LSmallToe;
    const Pt ph{midhip.x + s * 0.05 * H, midhip.y};
    const double thigh = s * uniform(rng, -r.leg_deg * 0.3, r.leg_deg);
    const Pt pk = polar(ph, 0.17 * H, thigh);
    const Pt pa = polar(pk, 0.16 * H, thigh - s * uniform(rng, 0.0, r.knee_deg) * 0.5);
    j[idx(hp)] = ph;
    j[idx(kn)] = pk;
    j[idx(an)] = pa;
    j[idx(heel)] = {pa.x - s * 0.01 * H, pa.y + 0.03 * H};
    j[idx(big)] = {pa.x + s * 0.05 * H, pa.y + 0.04 * H};
    j[idx(small)] = {pa.x + s * 0.03 * H, pa.y + 0.05 * H};
  }
  for (auto &p : j) {
    p.x = std::clamp(p.x, 0.0, W - 1.0);
    p.y = std::clamp(p.y, 0.0, H - 1.0);
  }
  return j;
}

void draw_segment(Image &img, Pt a, Pt b, double radius, const Color &col) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius)));
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double t = len2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = a.x + t * dx - x, ey = a.y + t * dy - y;
      if (ex * ex + ey * ey <= radius * radius)
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = col[c];
    }
}

Image render(const ToySpec &spec, const Appearance &look,
             const std::array<Pt, kNumJoints> &j, double background,
             std::array<std::pair<int, int>, kNumJoints> &markers) {
  const double H = spec.height;
  Image img(spec.height, spec.width, background);
  auto at = [&](Joint k) { return j[static_cast<int>(k)]; };
  const double limb = std::max(1.0, 0.03 * H);

  draw_segment(img, at(Joint::RHip), at(Joint::RKnee), limb, look.legs);
  draw_segment(img, at(Joint::RKnee), at(Joint::RAnkle), limb, look.legs);
  draw_segment(img, at(Joint::LHip), at(Joint::LKnee), limb, look.legs);
  draw_segment(img, at(Joint::LKnee), at(Joint::LAnkle), limb, look.legs);
  draw_segment(img, at(Joint::RAnkle), at(Joint::RBigToe), limb * 0.7, look.legs);
  draw_segment(img, at(Joint::LAnkle), at(Joint::LBigToe), limb * 0.7, look.legs);
  draw_segment(img, at(Joint::Neck), at(Joint::MidHip), 0.075 * H, look.torso);
  draw_segment(img, at(Joint::RShoulder), at(Joint::RElbow), limb, look.torso);
  draw_segment(img, at(Joint::RElbow), at(Joint::RWrist), limb, look.torso);
  draw_segment(img, at(Joint::LShoulder), at(Joint::LElbow), limb, look.torso);
  draw_segment(img, at(Joint::LElbow), at(Joint::LWrist), limb, look.torso);
  const Pt head{at(Joint::Neck).x, at(Joint::Neck).y - 0.09 * H};
  draw_segment(img, head, head, 0.075 * H, look.head);

  // Markers: nearest free pixel to each continuous joint position.
  std::set<std::pair<int, int>> used;
  for (int k = 0; k < kNumJoints; ++k) {
    const int px = static_cast<int>(std::lround(j[k].x));
    const int py = static_cast<int>(std::lround(j[k].y));
    std::pair<int, int> best{-1, -1};
    for (int radius = 0; best.first < 0; ++radius) {
      double best_d = 1e30;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != radius)
            continue;
          const int x = px + dx, y = py + dy;
          if (x < 0 || y < 0 || x >= spec.width || y >= spec.height || used.count({x, y}))
            continue;
          const double d = std::hypot(x - j[k].x, y - j[k].y);
          if (d < best_d) {
            best_d = d;
            best = {x, y};
          }
        }
    }
    used.insert(best);
    markers[k] = best;
    const auto col = marker_color(k);
    for (int c = 0; c < 3; ++c)
      img.at(best.second, best.first, c) = col[c];
  }
  quantize8(img);
  return img;
}

} // namespace

std::vector<Sample> synth_toy_dataset(const ToySpec &spec) {
  spec.validate();
  Rng rng(spec.appearance_seed);
  const auto looks = make_appearances(spec.num_identities, rng);
  std::vector<Sample> out;
  for (int id = 0; id < spec.num_identities; ++id) {
    for (int i = 0; i < spec.images_per_identity; ++i) {
      const auto skeleton = random_skeleton(spec, rng);
      const double background = uniform(rng, 0.90, 0.95);
      std::array<std::pair<int, int>, kNumJoints> markers{};
      Sample s;
      s.image = render(spec, looks[id], skeleton, background, markers);
      PoseVector p;
      p.source = PoseSource::synthetic;
      for (int k = 0; k < kNumJoints; ++k)
        p.joints[k] = {(markers[k].first + 0.5) / spec.width,
                       (markers[k].second + 0.5) / spec.height, 1.0};
      s.pose = p;
      s.identity = id;
      s.camera = i % 2;
      char name[64];
      std::snprintf(name, sizeof(name), "id%04d_img%02d.png", id, i);
      s.path = name;
      out.push_back(std::move(s));
    }
  }
  return out;
}

void write_toy_dataset(const std::vector<Sample> &samples, const std::string &root) {
  fs::create_directories(root);
  std::vector<Sample> located;
  for (const auto &s : samples) {
    const fs::path p = fs::path(root) / fs::path(s.path).filename();
    save_png(s.image, p.string());
    if (s.pose) {
      const auto doc = pose_to_detector_json(*s.pose, s.image.width, s.image.height);
      write_file((p.parent_path() / (p.stem().string() + "_keypoints.json")).string(),
                 doc.dump(1) + "\n");
    }
    Sample meta;
    meta.identity = s.identity;
    meta.camera = s.camera;
    meta.subset = s.subset;
    meta.path = p.string();
    located.push_back(std::move(meta));
  }
  write_manifest(located, root);
}

nlohmann::json sample_metadata(const Sample &s) {
  nlohmann::json j{{"path", s.path}, {"identity", s.identity},
                   {"subset", to_string(s.subset)}};
  j["camera"] = s.camera ? nlohmann::json(*s.camera) : nlohmann::json(nullptr);
  j["pose"] = s.pose ? to_json(*s.pose) : nlohmann::json(nullptr);
  return j;
}

Sample sample_from_metadata(const nlohmann::json &j) {
  Sample s;
  try {
    s.path = j.at("path").get<std::string>();
    s.identity = j.at("identity").get<int>();
    s.subset = subset_from_string(j.at("subset").get<std::string>());
    if (!j.at("camera").is_null())
      s.camera = j.at("camera").get<int>();
    if (!j.at("pose").is_null())
      s.pose = pose_from_json(j.at("pose"));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad sample record: ") + e.what());
  }
  return s;
}

} // namespace reid
