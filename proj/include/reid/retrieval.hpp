#pragma once

#include "reid/dataset.hpp"
#include "reid/fusion.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace reid {

enum class Metric { euclidean, cosine };
const char *to_string(Metric m);
Metric metric_from_string(const std::string &s);

/// market1501: gallery entries sharing identity and camera with the query are
/// excluded. none: every gallery entry is valid (probe/gallery cameras are
/// already disjoint, e.g. cuhk01).
enum class MaskProtocol { market1501, none };
MaskProtocol mask_protocol_for(Protocol p);

enum class Pooling { mean, max };

/// Immutable gallery: descriptors are held as float32 so a descriptor-file
/// round trip reproduces every distance bit for bit.
class GalleryIndex {
public:
  GalleryIndex(std::vector<float> descriptors, std::size_t dim, std::vector<int> identities,
               std::vector<int> cameras, Metric metric, std::vector<std::string> paths = {});

  std::size_t size() const { return identities_.size(); }
  std::size_t dim() const { return dim_; }
  Metric metric() const { return metric_; }
  const float *row(std::size_t i) const { return descriptors_.data() + i * dim_; }
  const std::vector<float> &descriptors() const { return descriptors_; }
  const std::vector<int> &identities() const { return identities_; }
  const std::vector<int> &cameras() const { return cameras_; }
  const std::vector<std::string> &paths() const { return paths_; }

  /// Distance of gallery row i to `query` under the index metric
  /// (cosine: 1 - cosine similarity).
  double distance(const Descriptor &query, std::size_t i) const;

private:
  std::vector<float> descriptors_;
  std::size_t dim_;
  std::vector<int> identities_;
  std::vector<int> cameras_;
  Metric metric_;
  std::vector<std::string> paths_;
};

GalleryIndex build_index(const std::vector<Descriptor> &descriptors,
                         const std::vector<int> &identities, const std::vector<int> &cameras,
                         Metric metric, const std::vector<std::string> &paths = {});

double descriptor_distance(const Descriptor &a, const Descriptor &b, Metric metric);

struct RetrievalResult {
  Descriptor query;
  int query_identity = 0;
  int query_camera = 0;
  std::vector<std::size_t> ranked_indices; ///< valid gallery rows, best first
  std::vector<double> distances;           ///< aligned with ranked_indices
  std::vector<bool> valid_mask;            ///< per gallery row
  std::vector<bool> matches;               ///< aligned with ranked_indices
};

/// Rank valid gallery rows by ascending distance, ties by gallery index.
RetrievalResult rank(const GalleryIndex &index, const Descriptor &query, int query_identity,
                     int query_camera, MaskProtocol protocol = MaskProtocol::market1501);

/// Pool several query descriptors into one probe (mean by default) and rank.
RetrievalResult multi_query_rank(const GalleryIndex &index, const std::vector<Descriptor> &queries,
                                 int query_identity, int query_camera,
                                 MaskProtocol protocol = MaskProtocol::market1501,
                                 Pooling pooling = Pooling::mean);

/// cmc[k-1] = fraction of queries whose first match is at rank <= k. Queries
/// with no valid match are excluded with a warning; `excluded` receives their count.
std::vector<double> cmc(const std::vector<RetrievalResult> &results, int max_rank,
                        std::size_t *excluded = nullptr);

/// Mean over relevant positions of precision at that position.
double average_precision(const std::vector<bool> &relevance);
std::optional<double> average_precision(const RetrievalResult &result);
double mean_average_precision(const std::vector<RetrievalResult> &results,
                              std::size_t *excluded = nullptr,
                              std::vector<double> *per_query = nullptr);

/// Intermediate matrices of k-reciprocal re-ranking over [queries; gallery].
struct RerankMatrices {
  std::size_t num_queries = 0, num_gallery = 0;
  std::vector<std::vector<double>> original; ///< row-normalized distances, all x all
  std::vector<std::vector<std::size_t>> expansion; ///< k-reciprocal expansion sets
  std::vector<std::vector<double>> encoding;       ///< V after local query expansion
  std::vector<std::vector<double>> jaccard;        ///< queries x gallery
  std::vector<std::vector<double>> final_dist;     ///< queries x gallery
};

RerankMatrices rerank_matrices(const std::vector<Descriptor> &queries, const GalleryIndex &index,
                               int k1, int k2, double lambda);

/// Replace distances by (1 - lambda) * Jaccard + lambda * original and re-sort.
/// Throws when k1 >= gallery size.
std::vector<RetrievalResult> rerank(const GalleryIndex &index,
                                    const std::vector<RetrievalResult> &results, int k1 = 20,
                                    int k2 = 6, double lambda = 0.3);

struct DistanceStudy {
  double intra_mean = 0; ///< x 10^3
  double inter_mean = 0; ///< x 10^3
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;
};
constexpr double kDistanceScale = 1e3;

DistanceStudy distance_study(const std::vector<Descriptor> &descriptors,
                             const std::vector<int> &labels, Metric metric = Metric::euclidean);

struct EvalReport {
  std::vector<double> cmc;
  double rank1 = 0, rank5 = 0, rank10 = 0;
  double map = 0;
  std::vector<double> per_query_ap;
  double intra_mean = 0, inter_mean = 0;
  std::size_t num_queries = 0;
  std::size_t excluded_queries = 0;

  /// cmc non-decreasing and in [0,1]; map in [0,1].
  bool satisfies_invariants() const;
};
nlohmann::json to_json(const EvalReport &r);
std::string format_table(const EvalReport &r, const std::string &title);

enum class DescriptorSource { fused, baseline, max_fused };
const char *to_string(DescriptorSource s);
DescriptorSource descriptor_source_from_string(const std::string &s);

struct EvalOptions {
  Metric metric = Metric::euclidean;
  MaskProtocol protocol = MaskProtocol::market1501;
  bool rerank = false;
  int k1 = 20;
  int k2 = 6;
  double lambda = 0.3;
  bool multi_query = false;
  Pooling pooling = Pooling::mean;
  int max_rank = 20;
  DescriptorSource source = DescriptorSource::fused;
};
nlohmann::json to_json(const EvalOptions &o);
EvalOptions eval_options_from_json(const nlohmann::json &j);

struct DescribedSet {
  std::vector<Descriptor> descriptors;
  std::vector<int> identities;
  std::vector<int> cameras;
  std::vector<std::string> paths;
};

DescribedSet describe(const std::vector<Sample> &samples, Pipeline &pipeline,
                      DescriptorSource source);

/// Score query descriptors against a gallery index.
EvalReport evaluate_descriptors(const DescribedSet &queries, const GalleryIndex &gallery,
                                const EvalOptions &options);

/// Describe query and gallery with the pipeline, rank, and aggregate.
EvalReport evaluate(const DatasetSplit &split, Pipeline &pipeline, const EvalOptions &options);

/// Binary descriptor matrix: "RIDDESC\0" | uint32 version | uint64 M | uint64 D |
/// uint32 metric | M*D float32 row-major, plus `<path>.json` listing paths,
/// identities and cameras.
void save_descriptor_matrix(const GalleryIndex &index, const std::string &path);
GalleryIndex load_descriptor_matrix(const std::string &path);

} // namespace reid
