#include "reid/commands.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace reid {

// ------------------------------------------------------------------ manifest

nlohmann::json to_json(const RunManifest &m) {
  return {{"command", m.command},   {"arguments", m.arguments}, {"config", m.config},
          {"inputs", m.inputs},     {"components", m.components}, {"outputs", m.outputs},
          {"started", m.started},   {"finished", m.finished}};
}

RunManifest run_manifest_from_json(const nlohmann::json &j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.arguments = j.value("arguments", nlohmann::json::object());
    m.config = j.at("config");
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.components = j.value("components", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("run manifest: ") + e.what());
  }
  return m;
}

ArtifactPaths::ArtifactPaths(const ExperimentConfig &cfg) : root(cfg.output_dir) {
  const fs::path r(root);
  dataset = cfg.dataset.root.empty() ? (r / "dataset").string() : cfg.dataset.root;
  poses = (r / "poses.json").string();
  fr1 = (r / "fr1.ckpt").string();
  fr2 = (r / "fr2.ckpt").string();
  finetune_history = (r / "finetune_history.json").string();
  gan = (r / "gan.ckpt").string();
  gan_history = (r / "gan_history.json").string();
  fusion = (r / "fusion.ckpt").string();
  fusion_history = (r / "fusion_history.json").string();
  gallery_desc = (r / "gallery.desc").string();
  query_desc = (r / "query.desc").string();
  report_json = (r / "report.json").string();
  report_txt = (r / "report.txt").string();
  cmc_plot = (r / "cmc.png").string();
  distance_plot = (r / "distances.png").string();
  generated = (r / "generated.png").string();
  ablation_csv = (r / "ablation.csv").string();
  cells = (r / "cells").string();
}

std::string ArtifactPaths::manifest(const std::string &command) const {
  return (fs::path(root) / "manifests" / (command + ".json")).string();
}

namespace {

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string relative_to(const std::string &path, const std::string &root) {
  const fs::path p = fs::weakly_canonical(path);
  const fs::path r = fs::weakly_canonical(root);
  const auto rel = p.lexically_relative(r);
  if (rel.empty() || *rel.begin() == "..")
    return path;
  return rel.generic_string();
}

std::string hash_file(const std::string &path) { return git_blob_hash(read_file(path)); }

/// Hash of "relative-path blob-hash" lines over every regular file, sorted.
std::string hash_tree(const std::string &dir) {
  std::vector<std::string> lines;
  for (const auto &e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      lines.push_back(fs::relative(e.path(), dir).generic_string() + " " +
                      hash_file(e.path().string()));
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto &l : lines)
    all += l + "\n";
  return git_blob_hash(all);
}

class ManifestWriter {
public:
  ManifestWriter(const ExperimentConfig &cfg, std::string command) : paths_(cfg) {
    m_.command = std::move(command);
    m_.config = to_json(cfg);
    m_.started = now_utc();
  }

  RunManifest &manifest() { return m_; }

  void input(const std::string &path) {
    m_.inputs[relative_to(path, paths_.root)] =
        fs::is_directory(path) ? hash_tree(path) : hash_file(path);
  }
  void output(const std::string &path) {
    m_.outputs[relative_to(path, paths_.root)] =
        fs::is_directory(path) ? hash_tree(path) : hash_file(path);
  }
  void component(const std::string &name, const std::string &hash) { m_.components[name] = hash; }

  RunManifest finish() {
    m_.finished = now_utc();
    const std::string path = paths_.manifest(m_.command);
    fs::create_directories(fs::path(path).parent_path());
    write_file(path, to_json(m_).dump(2) + "\n");
    return m_;
  }

private:
  ArtifactPaths paths_;
  RunManifest m_;
};

void write_json(const std::string &path, const nlohmann::json &j) {
  fs::create_directories(fs::path(path).parent_path());
  write_file(path, j.dump(2) + "\n");
}

// ------------------------------------------------------------------ loading

DatasetSplit load_split(const ExperimentConfig &cfg, const ArtifactPaths &paths) {
  const bool flat = cfg.dataset.naming == Naming::flat;
  const fs::path marker = flat ? fs::path(paths.dataset) / "manifest.csv" : fs::path(paths.dataset);
  if (!fs::exists(marker)) {
    if (cfg.dataset.root.empty())
      throw MissingPrerequisite("no dataset at " + paths.dataset + " (run synth first)");
    throw MissingPrerequisite("dataset not found: " + marker.string());
  }
  auto samples = load_image_dir(paths.dataset, cfg.dataset.naming);
  if (samples.empty())
    throw ConfigError("dataset at " + paths.dataset + " holds no readable images");
  resize_samples(samples, cfg.dataset.height, cfg.dataset.width);
  return make_split(samples, cfg.dataset.protocol, cfg.seed);
}

Checkpoint need_checkpoint(const std::string &path, const std::string &producer) {
  if (!fs::exists(path))
    throw MissingPrerequisite(fs::path(path).filename().string() + " not found in " +
                              fs::path(path).parent_path().string() + " (run " + producer +
                              " first)");
  return load_checkpoint(path);
}

PoseSet need_pose_set(const std::string &path) {
  if (!fs::exists(path))
    throw MissingPrerequisite("pose set " + path + " not found (run cluster first)");
  return load_pose_set(path);
}

/// F_R1, F_R2 and the generator from a train-gan run.
Pipeline load_backbones(const ArtifactPaths &paths, ManifestWriter &mw) {
  Pipeline p;
  p.fr1 = FeatureExtractor::from_checkpoint(need_checkpoint(paths.fr1, "train-gan"));
  p.fr2 = FeatureExtractor::from_checkpoint(need_checkpoint(paths.fr2, "train-gan"));
  p.generator = gan_from_checkpoint(need_checkpoint(paths.gan, "train-gan")).first;
  mw.input(paths.fr1);
  mw.input(paths.fr2);
  mw.input(paths.gan);
  mw.component("fr1", p.fr1->hash());
  mw.component("fr2", p.fr2->hash());
  mw.component("generator", hash_params(p.generator->params()));
  return p;
}

Pipeline load_pipeline(const ArtifactPaths &paths, ManifestWriter &mw) {
  const Checkpoint fusion = need_checkpoint(paths.fusion, "train-fusion");
  Pipeline p = load_backbones(paths, mw);
  p.poses = need_pose_set(paths.poses);
  p.fusion = FusionNet::from_checkpoint(fusion);
  mw.input(paths.poses);
  mw.input(paths.fusion);
  mw.component("fusion", p.fusion->hash());
  return p;
}

std::vector<PoseVector> train_poses(const DatasetSplit &split) {
  std::vector<PoseVector> poses;
  for (const auto &s : split.train)
    if (s.pose)
      poses.push_back(*s.pose);
  if (poses.empty())
    throw ConfigError("no training sample carries a pose");
  return poses;
}

// ------------------------------------------------------------------ plots

const cv::Scalar kPalette[] = {{200, 80, 30}, {40, 40, 210}, {40, 150, 40}, {150, 60, 150}};

void plot_cmc(const std::vector<std::pair<std::string, std::vector<double>>> &curves,
              const std::string &path) {
  const int W = 640, H = 420, left = 60, right = 20, top = 40, bottom = 50;
  cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  const int pw = W - left - right, ph = H - top - bottom;
  const std::size_t ranks = curves.empty() ? 1 : curves.front().second.size();
  auto px = [&](std::size_t k) {
    return left + (ranks > 1 ? static_cast<int>(std::lround(pw * double(k) / double(ranks - 1)))
                             : pw / 2);
  };
  auto py = [&](double v) { return top + static_cast<int>(std::lround(ph * (1.0 - v))); };

  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    cv::line(canvas, {left, py(v)}, {left + pw, py(v)}, cv::Scalar(225, 225, 225), 1);
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << v;
    cv::putText(canvas, s.str(), {left - 40, py(v) + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  for (std::size_t k = 0; k < ranks; ++k)
    if (k == 0 || (k + 1) % 5 == 0)
      cv::putText(canvas, std::to_string(k + 1), {px(k) - 6, top + ph + 18},
                  cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  cv::rectangle(canvas, {left, top}, {left + pw, top + ph}, cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, "rank", {left + pw / 2 - 15, H - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  cv::putText(canvas, "CMC", {left + pw / 2 - 15, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.6,
              cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto colour = kPalette[c % std::size(kPalette)];
    std::vector<cv::Point> pts;
    for (std::size_t k = 0; k < curves[c].second.size(); ++k)
      pts.emplace_back(px(k), py(curves[c].second[k]));
    cv::polylines(canvas, pts, false, colour, 2, cv::LINE_AA);
    const int ly = top + ph - 15 - 18 * static_cast<int>(curves.size() - 1 - c);
    cv::line(canvas, {left + pw - 150, ly}, {left + pw - 125, ly}, colour, 2);
    cv::putText(canvas, curves[c].first, {left + pw - 118, ly + 5}, cv::FONT_HERSHEY_SIMPLEX,
                0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  fs::create_directories(fs::path(path).parent_path());
  if (!cv::imwrite(path, canvas))
    throw Error("could not write " + path);
}

void plot_distances(const std::vector<std::pair<std::string, DistanceStudy>> &studies,
                    const std::string &path) {
  const int W = 520, H = 380, left = 70, top = 40, bottom = 60;
  cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  const int ph = H - top - bottom;
  double vmax = 0;
  for (const auto &[name, s] : studies)
    vmax = std::max({vmax, s.intra_mean, s.inter_mean});
  if (vmax <= 0)
    vmax = 1;
  const int group = (W - left - 20) / std::max<int>(1, static_cast<int>(studies.size()));
  const int bar = std::min(50, group / 3);
  cv::line(canvas, {left, top + ph}, {W - 20, top + ph}, cv::Scalar(0, 0, 0), 1);
  cv::line(canvas, {left, top}, {left, top + ph}, cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, "mean distance (x1e-3)", {left, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  for (std::size_t g = 0; g < studies.size(); ++g) {
    const int x0 = left + static_cast<int>(g) * group + (group - 2 * bar) / 2;
    const double vals[2] = {studies[g].second.intra_mean, studies[g].second.inter_mean};
    for (int b = 0; b < 2; ++b) {
      const int h = static_cast<int>(std::lround(ph * vals[b] / vmax));
      cv::rectangle(canvas, {x0 + b * bar, top + ph - h}, {x0 + (b + 1) * bar - 4, top + ph},
                    kPalette[b], cv::FILLED);
      std::ostringstream s;
      s << std::fixed << std::setprecision(1) << vals[b];
      cv::putText(canvas, s.str(), {x0 + b * bar, top + ph - h - 5}, cv::FONT_HERSHEY_SIMPLEX,
                  0.35, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    cv::putText(canvas, studies[g].first, {x0, top + ph + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  const char *labels[2] = {"intra", "inter"};
  for (int b = 0; b < 2; ++b) {
    cv::rectangle(canvas, {W - 110, H - 40 + 16 * b - 8}, {W - 98, H - 40 + 16 * b + 2},
                  kPalette[b], cv::FILLED);
    cv::putText(canvas, labels[b], {W - 92, H - 40 + 16 * b + 2}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  fs::create_directories(fs::path(path).parent_path());
  if (!cv::imwrite(path, canvas))
    throw Error("could not write " + path);
}

Image hstack(const std::vector<Image> &panels, int gap) {
  int width = 0, height = 0;
  for (const auto &p : panels) {
    width += p.width;
    height = std::max(height, p.height);
  }
  width += gap * static_cast<int>(panels.size() > 0 ? panels.size() - 1 : 0);
  Image out(height, width, 1.0);
  int x0 = 0;
  for (const auto &p : panels) {
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x)
        for (int c = 0; c < Image::channels; ++c)
          out.at(y, x0 + x, c) = p.at(y, x, c);
    x0 += p.width + gap;
  }
  return out;
}

FusionTraining fit_fusion(const ExperimentConfig &seeded, const DatasetSplit &split,
                          Pipeline &pipeline) {
  return train_fusion(split.train, split.train_identities, pipeline, seeded.fusion,
                      seeded.augment);
}

} // namespace

// ------------------------------------------------------------------ commands

RunManifest cmd_synth(const ExperimentConfig &cfg) {
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "synth");
  const auto samples = synth_toy_dataset(cfg.dataset.toy);
  write_toy_dataset(samples, paths.dataset);
  mw.output(paths.dataset);
  return mw.finish();
}

RunManifest cmd_cluster(const ExperimentConfig &cfg) {
  const ExperimentConfig s = cfg.seeded();
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "cluster");
  const DatasetSplit split = load_split(cfg, paths);
  mw.input(paths.dataset);
  const PoseSet set = derive_pose_set(train_poses(split), s.cluster);
  save_pose_set(set, paths.poses);
  mw.output(paths.poses);
  return mw.finish();
}

RunManifest cmd_train_gan(const ExperimentConfig &cfg) {
  const ExperimentConfig s = cfg.seeded();
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "train-gan");
  const DatasetSplit split = load_split(cfg, paths);
  mw.input(paths.dataset);

  FeatureExtractor fr1 =
      cfg.backbone.fr1_weights.empty()
          ? FeatureExtractor(cfg.dataset.protocol == Protocol::toy ? ExtractorVariant::toy
                                                                  : ExtractorVariant::generic,
                             s.backbone.arch, s.backbone.finetune.seed ^ 0xF1ULL)
          : FeatureExtractor::from_weight_manifest(cfg.backbone.fr1_weights,
                                                   ExtractorVariant::generic);
  if (!cfg.backbone.fr1_weights.empty())
    mw.input(cfg.backbone.fr1_weights);
  if (fr1.arch().height != cfg.dataset.height || fr1.arch().width != cfg.dataset.width)
    throw ConfigError("F_R1 input size does not match dataset.height x dataset.width");

  FinetuneHistory ft;
  FeatureExtractor fr2 = cfg.backbone.fr2_weights.empty()
                             ? finetune_reid(fr1, split.train, s.backbone.finetune, &ft)
                             : FeatureExtractor::from_weight_manifest(
                                   cfg.backbone.fr2_weights, ExtractorVariant::reid_finetuned);
  if (!cfg.backbone.fr2_weights.empty())
    mw.input(cfg.backbone.fr2_weights);

  fs::create_directories(paths.root);
  save_checkpoint(fr1.to_checkpoint(), paths.fr1);
  save_checkpoint(fr2.to_checkpoint(), paths.fr2);
  write_json(paths.finetune_history, {{"train_loss", ft.train_loss},
                                      {"val_accuracy", ft.val_accuracy},
                                      {"best_epoch", ft.best_epoch}});
  mw.component("fr1", fr1.hash());
  mw.component("fr2", fr2.hash());

  GanModels gan = train_ptgan(split.train, split.train_identities, fr1, s.gan, s.augment,
                              paths.root);
  write_json(paths.gan_history, to_json(gan.history));
  mw.component("generator", hash_params(gan.generator.params()));
  mw.component("discriminator", hash_params(gan.discriminator.params()));
  for (const auto *p : {&paths.fr1, &paths.fr2, &paths.finetune_history, &paths.gan,
                        &paths.gan_history})
    mw.output(*p);
  return mw.finish();
}

RunManifest cmd_generate(const ExperimentConfig &cfg, const std::string &image,
                         const std::string &pose_set, const std::string &output) {
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "generate");
  mw.manifest().arguments = {{"image", image}, {"pose_set", pose_set}, {"output", output}};
  Pipeline p = load_backbones(paths, mw);
  const std::string poses_path = pose_set.empty() ? paths.poses : pose_set;
  p.poses = need_pose_set(poses_path);
  mw.input(poses_path);

  Image source;
  if (image.empty()) {
    const DatasetSplit split = load_split(cfg, paths);
    mw.input(paths.dataset);
    const auto &pool = split.query.empty() ? split.train : split.query;
    source = pool.front().image;
  } else {
    source = resize_bilinear(load_image(image), cfg.dataset.height, cfg.dataset.width);
    mw.input(image);
  }
  std::vector<Image> panels{source};
  for (auto &g : p.render(source))
    panels.push_back(std::move(g));
  const std::string out = output.empty() ? paths.generated : output;
  fs::create_directories(fs::absolute(out).parent_path());
  save_png(hstack(panels, 2), out);
  mw.output(out);
  return mw.finish();
}

RunManifest cmd_train_fusion(const ExperimentConfig &cfg) {
  const ExperimentConfig s = cfg.seeded();
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "train-fusion");
  Pipeline p = load_backbones(paths, mw);
  p.poses = need_pose_set(paths.poses);
  mw.input(paths.poses);
  const DatasetSplit split = load_split(cfg, paths);
  mw.input(paths.dataset);

  FusionTraining t = fit_fusion(s, split, p);
  save_checkpoint(t.net.to_checkpoint(), paths.fusion);
  write_json(paths.fusion_history, to_json(t.history));
  mw.component("fusion", t.net.hash());
  mw.output(paths.fusion);
  mw.output(paths.fusion_history);
  return mw.finish();
}

RunManifest cmd_index(const ExperimentConfig &cfg) {
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "index");
  Pipeline p = load_pipeline(paths, mw);
  const DatasetSplit split = load_split(cfg, paths);
  mw.input(paths.dataset);
  for (const auto &[samples, file] : {std::pair{&split.gallery, &paths.gallery_desc},
                                      std::pair{&split.query, &paths.query_desc}}) {
    const DescribedSet d = describe(*samples, p, cfg.eval.source);
    save_descriptor_matrix(build_index(d.descriptors, d.identities, d.cameras, cfg.eval.metric,
                                       d.paths),
                           *file);
    mw.output(*file);
    mw.output(*file + ".json");
  }
  return mw.finish();
}

RunManifest cmd_eval(const ExperimentConfig &cfg) {
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "eval");
  Pipeline p = load_pipeline(paths, mw);
  const DatasetSplit split = load_split(cfg, paths);
  mw.input(paths.dataset);

  std::vector<DescriptorSource> sources{cfg.eval.source};
  if (cfg.eval.source != DescriptorSource::baseline)
    sources.push_back(DescriptorSource::baseline);

  nlohmann::json reports = nlohmann::json::object();
  std::string table;
  std::vector<std::pair<std::string, std::vector<double>>> curves;
  std::vector<std::pair<std::string, DistanceStudy>> studies;
  for (const auto source : sources) {
    EvalOptions o = cfg.eval;
    o.source = source;
    const EvalReport r = evaluate(split, p, o);
    reports[to_string(source)] = to_json(r);
    table += format_table(r, std::string("descriptor: ") + to_string(source)) + "\n";
    curves.emplace_back(to_string(source), r.cmc);
    DistanceStudy ds;
    ds.intra_mean = r.intra_mean;
    ds.inter_mean = r.inter_mean;
    studies.emplace_back(to_string(source), ds);
  }
  write_json(paths.report_json, {{"options", to_json(cfg.eval)},
                                 {"protocol", to_string(cfg.dataset.protocol)},
                                 {"reports", reports}});
  write_file(paths.report_txt, table);
  plot_cmc(curves, paths.cmc_plot);
  plot_distances(studies, paths.distance_plot);
  for (const auto *f : {&paths.report_json, &paths.report_txt, &paths.cmc_plot,
                        &paths.distance_plot})
    mw.output(*f);
  return mw.finish();
}

RunManifest cmd_ablate(const ExperimentConfig &cfg) {
  const ArtifactPaths paths(cfg);
  ManifestWriter mw(cfg, "ablate");
  Pipeline base = load_backbones(paths, mw);
  const DatasetSplit split = load_split(cfg, paths);
  mw.input(paths.dataset);
  const auto poses = train_poses(split);

  std::ostringstream csv;
  csv << "method,mode,K,rank1,mAP\n";
  std::size_t failed = 0;
  for (const auto mode : {ClusterMode::fullbody, ClusterMode::bodyjoint})
    for (const auto method : {ClusterMethod::kmeans, ClusterMethod::gmm})
      for (const int K : kAblationK) {
        ExperimentConfig cell = cfg;
        cell.cluster.method = method;
        cell.cluster.mode = mode;
        cell.cluster.K = K;
        const ExperimentConfig s = cell.seeded();
        const std::string name =
            std::string(to_string(mode)) + "_" + to_string(method) + "_K" + std::to_string(K);
        const fs::path dir = fs::path(paths.cells) / name;
        csv << to_string(method) << ',' << to_string(mode) << ',' << K << ',';
        try {
          Pipeline p = base;
          p.poses = derive_pose_set(poses, s.cluster);
          FusionTraining t = fit_fusion(s, split, p);
          p.fusion = std::move(t.net);
          const EvalReport r = evaluate(split, p, cfg.eval);
          save_pose_set(*p.poses, (dir / "poses.json").string());
          write_json((dir / "report.json").string(), to_json(r));
          std::ostringstream row;
          row << std::setprecision(6) << r.rank1 << ',' << r.map;
          csv << row.str() << '\n';
        } catch (const DivergenceError &) {
          throw;
        } catch (const Error &e) {
          ++failed;
          warn("ablation cell " + name + " failed: " + e.what());
          csv << "nan,nan\n";
        }
      }
  write_file(paths.ablation_csv, csv.str());
  mw.output(paths.ablation_csv);
  mw.output(paths.cells);
  mw.manifest().arguments = {{"failed_cells", failed}};
  RunManifest m = mw.finish();
  if (failed)
    throw Error(std::to_string(failed) + " ablation cell(s) failed; see " + paths.ablation_csv);
  return m;
}

RunManifest replay(const std::string &manifest_path, const std::string &output_dir) {
  if (!fs::exists(manifest_path))
    throw MissingPrerequisite("run manifest not found: " + manifest_path);
  RunManifest m;
  try {
    m = run_manifest_from_json(nlohmann::json::parse(read_file(manifest_path)));
  } catch (const nlohmann::json::parse_error &e) {
    throw FormatError("run manifest " + manifest_path + ": " + e.what());
  }
  ExperimentConfig cfg = experiment_config_from_json(m.config);
  if (!output_dir.empty())
    cfg.output_dir = output_dir;
  if (m.command == "synth") return cmd_synth(cfg);
  if (m.command == "cluster") return cmd_cluster(cfg);
  if (m.command == "train-gan") return cmd_train_gan(cfg);
  if (m.command == "generate")
    return cmd_generate(cfg, m.arguments.value("image", ""), m.arguments.value("pose_set", ""),
                        m.arguments.value("output", ""));
  if (m.command == "train-fusion") return cmd_train_fusion(cfg);
  if (m.command == "index") return cmd_index(cfg);
  if (m.command == "eval") return cmd_eval(cfg);
  if (m.command == "ablate") return cmd_ablate(cfg);
  throw FormatError("run manifest names unknown command '" + m.command + "'");
}

std::vector<AblationRow> read_ablation_csv(const std::string &path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "method,mode,K,rank1,mAP")
    throw FormatError("ablation csv: unexpected header in " + path);
  std::vector<AblationRow> rows;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
      f.push_back(cell);
    if (f.size() != 5)
      throw FormatError("ablation csv: malformed row '" + line + "'");
    AblationRow r{};
    r.method = cluster_method_from_string(f[0]);
    r.mode = cluster_mode_from_string(f[1]);
    r.K = std::stoi(f[2]);
    r.ok = f[3] != "nan" && f[4] != "nan";
    r.rank1 = r.ok ? std::stod(f[3]) : std::nan("");
    r.map = r.ok ? std::stod(f[4]) : std::nan("");
    rows.push_back(r);
  }
  return rows;
}

} // namespace reid
