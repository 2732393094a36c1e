#include "reid/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace reid {

const char *to_string(Metric m) { return m == Metric::cosine ? "cosine" : "euclidean"; }

Metric metric_from_string(const std::string &s) {
  if (s == "euclidean")
    return Metric::euclidean;
  if (s == "cosine")
    return Metric::cosine;
  throw ConfigError("unknown metric '" + s + "' (expected euclidean or cosine)");
}

MaskProtocol mask_protocol_for(Protocol p) {
  return p == Protocol::cuhk01 ? MaskProtocol::none : MaskProtocol::market1501;
}

// ------------------------------------------------------------------ index

GalleryIndex::GalleryIndex(std::vector<float> descriptors, std::size_t dim,
                           std::vector<int> identities, std::vector<int> cameras, Metric metric,
                           std::vector<std::string> paths)
    : descriptors_(std::move(descriptors)), dim_(dim), identities_(std::move(identities)),
      cameras_(std::move(cameras)), metric_(metric), paths_(std::move(paths)) {
  if (identities_.empty())
    throw Error("gallery index: empty gallery");
  if (dim_ == 0 || descriptors_.size() != identities_.size() * dim_ ||
      cameras_.size() != identities_.size())
    throw Error("gallery index: descriptor, identity and camera counts disagree");
  if (!paths_.empty() && paths_.size() != identities_.size())
    throw Error("gallery index: path count disagrees with descriptor count");
  for (float v : descriptors_)
    if (!std::isfinite(v))
      throw Error("gallery index: non-finite descriptor value");
}

double descriptor_distance(const Descriptor &a, const Descriptor &b, Metric metric) {
  if (a.size() != b.size())
    throw Error("descriptor_distance: dimension mismatch");
  if (metric == Metric::euclidean) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0)
    return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double GalleryIndex::distance(const Descriptor &query, std::size_t i) const {
  if (query.size() != dim_)
    throw Error("rank: query has dimension " + std::to_string(query.size()) + ", index has " +
                std::to_string(dim_));
  const float *r = row(i);
  return descriptor_distance(query, Descriptor(r, r + dim_), metric_);
}

GalleryIndex build_index(const std::vector<Descriptor> &descriptors,
                         const std::vector<int> &identities, const std::vector<int> &cameras,
                         Metric metric, const std::vector<std::string> &paths) {
  if (descriptors.empty())
    throw Error("build_index: empty gallery");
  const std::size_t dim = descriptors.front().size();
  std::vector<float> flat;
  flat.reserve(descriptors.size() * dim);
  for (const auto &d : descriptors) {
    if (d.size() != dim)
      throw Error("build_index: descriptors have differing lengths");
    for (double v : d) {
      if (!std::isfinite(v))
        throw Error("build_index: non-finite descriptor value");
      flat.push_back(static_cast<float>(v));
    }
  }
  return GalleryIndex(std::move(flat), dim, identities, cameras, metric, paths);
}

// ------------------------------------------------------------------ ranking

namespace {

RetrievalResult ranked_from_distances(const GalleryIndex &index, const Descriptor &query,
                                      int qid, int qcam, const std::vector<bool> &valid,
                                      const std::vector<double> &dist) {
  RetrievalResult r;
  r.query = query;
  r.query_identity = qid;
  r.query_camera = qcam;
  r.valid_mask = valid;
  for (std::size_t i = 0; i < index.size(); ++i)
    if (valid[i])
      r.ranked_indices.push_back(i);
  std::stable_sort(r.ranked_indices.begin(), r.ranked_indices.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  for (std::size_t i : r.ranked_indices) {
    r.distances.push_back(dist[i]);
    r.matches.push_back(index.identities()[i] == qid);
  }
  return r;
}

std::vector<bool> valid_mask(const GalleryIndex &index, int qid, int qcam, MaskProtocol protocol) {
  std::vector<bool> valid(index.size(), true);
  if (protocol == MaskProtocol::market1501)
    for (std::size_t i = 0; i < index.size(); ++i)
      if (index.identities()[i] == qid && index.cameras()[i] == qcam)
        valid[i] = false;
  return valid;
}

} // namespace

RetrievalResult rank(const GalleryIndex &index, const Descriptor &query, int query_identity,
                     int query_camera, MaskProtocol protocol) {
  std::vector<double> dist(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    dist[i] = index.distance(query, i);
  return ranked_from_distances(index, query, query_identity, query_camera,
                               valid_mask(index, query_identity, query_camera, protocol), dist);
}

RetrievalResult multi_query_rank(const GalleryIndex &index, const std::vector<Descriptor> &queries,
                                 int query_identity, int query_camera, MaskProtocol protocol,
                                 Pooling pooling) {
  if (queries.empty())
    throw Error("multi_query_rank: no query descriptors");
  Descriptor probe = queries.front();
  for (std::size_t q = 1; q < queries.size(); ++q) {
    if (queries[q].size() != probe.size())
      throw Error("multi_query_rank: query descriptors differ in length");
    for (std::size_t i = 0; i < probe.size(); ++i)
      probe[i] = pooling == Pooling::mean ? probe[i] + queries[q][i]
                                          : std::max(probe[i], queries[q][i]);
  }
  if (pooling == Pooling::mean && queries.size() > 1)
    for (double &v : probe)
      v /= static_cast<double>(queries.size());
  return rank(index, probe, query_identity, query_camera, protocol);
}

// ------------------------------------------------------------------ metrics

std::vector<double> cmc(const std::vector<RetrievalResult> &results, int max_rank,
                        std::size_t *excluded) {
  if (max_rank < 1)
    throw Error("cmc: max_rank must be at least 1");
  std::vector<double> curve(max_rank, 0.0);
  std::size_t counted = 0, skipped = 0;
  for (const auto &r : results) {
    auto it = std::find(r.matches.begin(), r.matches.end(), true);
    if (it == r.matches.end()) {
      ++skipped;
      continue;
    }
    ++counted;
    const auto first = static_cast<int>(it - r.matches.begin());
    for (int k = first; k < max_rank; ++k)
      curve[k] += 1.0;
  }
  if (skipped)
    warn("cmc: " + std::to_string(skipped) + " queries without a valid match excluded");
  if (excluded)
    *excluded = skipped;
  if (counted)
    for (double &v : curve)
      v /= static_cast<double>(counted);
  return curve;
}

double average_precision(const std::vector<bool> &relevance) {
  double hits = 0, sum = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i)
    if (relevance[i]) {
      hits += 1;
      sum += hits / static_cast<double>(i + 1);
    }
  if (hits == 0)
    throw Error("average_precision: no relevant item");
  return sum / hits;
}

std::optional<double> average_precision(const RetrievalResult &result) {
  if (std::find(result.matches.begin(), result.matches.end(), true) == result.matches.end())
    return std::nullopt;
  return average_precision(result.matches);
}

double mean_average_precision(const std::vector<RetrievalResult> &results, std::size_t *excluded,
                              std::vector<double> *per_query) {
  double sum = 0;
  std::size_t counted = 0, skipped = 0;
  if (per_query)
    per_query->clear();
  for (const auto &r : results) {
    const auto ap = average_precision(r);
    if (!ap) {
      ++skipped;
      continue;
    }
    sum += *ap;
    ++counted;
    if (per_query)
      per_query->push_back(*ap);
  }
  if (skipped)
    warn("mAP: " + std::to_string(skipped) + " queries without a valid match excluded");
  if (excluded)
    *excluded = skipped;
  return counted ? sum / static_cast<double>(counted) : 0.0;
}

// ------------------------------------------------------------------ re-ranking

namespace {

std::vector<std::size_t> k_reciprocal(const std::vector<std::vector<std::size_t>> &initial_rank,
                                      std::size_t i, int k) {
  std::vector<std::size_t> out;
  const std::size_t take = std::min<std::size_t>(k + 1, initial_rank[i].size());
  for (std::size_t a = 0; a < take; ++a) {
    const std::size_t c = initial_rank[i][a];
    const auto &back = initial_rank[c];
    const std::size_t take_c = std::min<std::size_t>(k + 1, back.size());
    if (std::find(back.begin(), back.begin() + static_cast<long>(take_c), i) !=
        back.begin() + static_cast<long>(take_c))
      out.push_back(c);
  }
  return out;
}

} // namespace

RerankMatrices rerank_matrices(const std::vector<Descriptor> &queries, const GalleryIndex &index,
                               int k1, int k2, double lambda) {
  if (k1 < 1 || k2 < 1)
    throw Error("rerank: k1 and k2 must be at least 1");
  if (static_cast<std::size_t>(k1) >= index.size())
    throw Error("rerank: k1 (" + std::to_string(k1) + ") must be smaller than the gallery size (" +
                std::to_string(index.size()) + ")");
  if (lambda < 0 || lambda > 1)
    throw Error("rerank: lambda must lie in [0,1]");

  RerankMatrices m;
  m.num_queries = queries.size();
  m.num_gallery = index.size();
  std::vector<Descriptor> all = queries;
  for (std::size_t g = 0; g < index.size(); ++g)
    all.emplace_back(index.row(g), index.row(g) + index.dim());
  const std::size_t n = all.size();

  m.original.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      m.original[i][j] = m.original[j][i] = descriptor_distance(all[i], all[j], index.metric());
  for (auto &row : m.original) {
    const double mx = *std::max_element(row.begin(), row.end());
    if (mx > 0)
      for (double &v : row)
        v /= mx;
  }

  std::vector<std::vector<std::size_t>> initial_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto &r = initial_rank[i];
    r.resize(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
    std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) {
      return m.original[i][a] < m.original[i][b];
    });
  }

  std::vector<std::vector<double>> V(n, std::vector<double>(n, 0.0));
  m.expansion.resize(n);
  const int half = static_cast<int>(std::lround(k1 / 2.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto R = k_reciprocal(initial_rank, i, k1);
    std::vector<std::size_t> E = R;
    for (std::size_t c : R) {
      const auto Rc = k_reciprocal(initial_rank, c, half);
      std::size_t common = 0;
      for (std::size_t x : Rc)
        common += std::find(R.begin(), R.end(), x) != R.end();
      if (3.0 * static_cast<double>(common) > 2.0 * static_cast<double>(Rc.size()))
        E.insert(E.end(), Rc.begin(), Rc.end());
    }
    std::sort(E.begin(), E.end());
    E.erase(std::unique(E.begin(), E.end()), E.end());
    double total = 0;
    for (std::size_t e : E)
      total += std::exp(-m.original[i][e]);
    for (std::size_t e : E)
      V[i][e] = std::exp(-m.original[i][e]) / total;
    m.expansion[i] = std::move(E);
  }

  if (k2 > 1) {
    std::vector<std::vector<double>> qe(n, std::vector<double>(n, 0.0));
    const std::size_t take = std::min<std::size_t>(k2, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < take; ++a)
        for (std::size_t j = 0; j < n; ++j)
          qe[i][j] += V[initial_rank[i][a]][j];
      for (double &v : qe[i])
        v /= static_cast<double>(take);
    }
    V = std::move(qe);
  }
  m.encoding = V;

  const std::size_t Q = m.num_queries, M = m.num_gallery;
  m.jaccard.assign(Q, std::vector<double>(M, 0.0));
  m.final_dist.assign(Q, std::vector<double>(M, 0.0));
  for (std::size_t q = 0; q < Q; ++q)
    for (std::size_t g = 0; g < M; ++g) {
      double mn = 0, mx = 0;
      for (std::size_t j = 0; j < n; ++j) {
        mn += std::min(V[q][j], V[Q + g][j]);
        mx += std::max(V[q][j], V[Q + g][j]);
      }
      m.jaccard[q][g] = mx > 0 ? 1.0 - mn / mx : 1.0;
      m.final_dist[q][g] = (1.0 - lambda) * m.jaccard[q][g] + lambda * m.original[q][Q + g];
    }
  return m;
}

std::vector<RetrievalResult> rerank(const GalleryIndex &index,
                                    const std::vector<RetrievalResult> &results, int k1, int k2,
                                    double lambda) {
  std::vector<Descriptor> queries;
  for (const auto &r : results)
    queries.push_back(r.query);
  const RerankMatrices m = rerank_matrices(queries, index, k1, k2, lambda);
  std::vector<RetrievalResult> out;
  for (std::size_t q = 0; q < results.size(); ++q)
    out.push_back(ranked_from_distances(index, results[q].query, results[q].query_identity,
                                        results[q].query_camera, results[q].valid_mask,
                                        m.final_dist[q]));
  return out;
}

// ------------------------------------------------------------------ distances

DistanceStudy distance_study(const std::vector<Descriptor> &descriptors,
                             const std::vector<int> &labels, Metric metric) {
  if (descriptors.size() != labels.size())
    throw Error("distance_study: descriptor and label counts differ");
  std::vector<int> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw Error("distance_study: needs at least two labels");
  DistanceStudy s;
  double intra = 0, inter = 0;
  for (std::size_t i = 0; i < descriptors.size(); ++i)
    for (std::size_t j = i + 1; j < descriptors.size(); ++j) {
      const double d = descriptor_distance(descriptors[i], descriptors[j], metric);
      if (labels[i] == labels[j]) {
        intra += d;
        ++s.intra_pairs;
      } else {
        inter += d;
        ++s.inter_pairs;
      }
    }
  s.intra_mean = s.intra_pairs ? kDistanceScale * intra / static_cast<double>(s.intra_pairs) : 0;
  s.inter_mean = kDistanceScale * inter / static_cast<double>(s.inter_pairs);
  return s;
}

// ------------------------------------------------------------------ reports

bool EvalReport::satisfies_invariants() const {
  for (std::size_t k = 0; k < cmc.size(); ++k) {
    if (cmc[k] < 0 || cmc[k] > 1)
      return false;
    if (k > 0 && cmc[k] < cmc[k - 1])
      return false;
  }
  return map >= 0 && map <= 1;
}

nlohmann::json to_json(const EvalReport &r) {
  return {{"cmc", r.cmc},
          {"rank1", r.rank1},
          {"rank5", r.rank5},
          {"rank10", r.rank10},
          {"map", r.map},
          {"per_query_ap", r.per_query_ap},
          {"intra_mean", r.intra_mean},
          {"inter_mean", r.inter_mean},
          {"num_queries", r.num_queries},
          {"excluded_queries", r.excluded_queries}};
}

std::string format_table(const EvalReport &r, const std::string &title) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << title << "\n";
  os << "  queries     " << r.num_queries;
  if (r.excluded_queries)
    os << " (" << r.excluded_queries << " without a match)";
  os << "\n";
  os << "  rank-1      " << 100 * r.rank1 << " %\n";
  os << "  rank-5      " << 100 * r.rank5 << " %\n";
  os << "  rank-10     " << 100 * r.rank10 << " %\n";
  os << "  mAP         " << 100 * r.map << " %\n";
  os << "  intra dist  " << r.intra_mean << " (x1e-3)\n";
  os << "  inter dist  " << r.inter_mean << " (x1e-3)\n";
  return os.str();
}

const char *to_string(DescriptorSource s) {
  switch (s) {
  case DescriptorSource::fused: return "fused";
  case DescriptorSource::baseline: return "baseline";
  case DescriptorSource::max_fused: return "max_fused";
  }
  return "fused";
}

DescriptorSource descriptor_source_from_string(const std::string &s) {
  if (s == "fused")
    return DescriptorSource::fused;
  if (s == "baseline")
    return DescriptorSource::baseline;
  if (s == "max_fused")
    return DescriptorSource::max_fused;
  throw ConfigError("unknown descriptor source '" + s + "'");
}

nlohmann::json to_json(const EvalOptions &o) {
  return {{"metric", to_string(o.metric)},
          {"rerank", o.rerank},
          {"k1", o.k1},
          {"k2", o.k2},
          {"lambda", o.lambda},
          {"multi_query", o.multi_query},
          {"pooling", o.pooling == Pooling::mean ? "mean" : "max"},
          {"max_rank", o.max_rank},
          {"source", to_string(o.source)}};
}

EvalOptions eval_options_from_json(const nlohmann::json &j) {
  EvalOptions o;
  o.metric = metric_from_string(j.value("metric", std::string(to_string(o.metric))));
  o.rerank = j.value("rerank", o.rerank);
  o.k1 = j.value("k1", o.k1);
  o.k2 = j.value("k2", o.k2);
  o.lambda = j.value("lambda", o.lambda);
  o.multi_query = j.value("multi_query", o.multi_query);
  const std::string pooling = j.value("pooling", std::string("mean"));
  if (pooling != "mean" && pooling != "max")
    throw ConfigError("eval.pooling must be mean or max");
  o.pooling = pooling == "mean" ? Pooling::mean : Pooling::max;
  o.max_rank = j.value("max_rank", o.max_rank);
  o.source = descriptor_source_from_string(j.value("source", std::string("fused")));
  if (o.max_rank < 10)
    throw ConfigError("eval.max_rank must be at least 10");
  if (o.k1 < 1 || o.k2 < 1 || o.lambda < 0 || o.lambda > 1)
    throw ConfigError("eval rerank parameters out of range");
  return o;
}

DescribedSet describe(const std::vector<Sample> &samples, Pipeline &pipeline,
                      DescriptorSource source) {
  DescribedSet out;
  for (const auto &s : samples) {
    switch (source) {
    case DescriptorSource::fused: out.descriptors.push_back(pipeline.extract_fused(s.image)); break;
    case DescriptorSource::baseline:
      out.descriptors.push_back(pipeline.extract_baseline(s.image));
      break;
    case DescriptorSource::max_fused:
      out.descriptors.push_back(pipeline.extract_max_fused(s.image));
      break;
    }
    out.identities.push_back(s.identity);
    out.cameras.push_back(s.camera.value_or(-1));
    out.paths.push_back(s.path);
  }
  return out;
}

EvalReport evaluate_descriptors(const DescribedSet &queries, const GalleryIndex &gallery,
                                const EvalOptions &options) {
  if (queries.descriptors.empty())
    throw Error("evaluate: no queries");
  std::vector<RetrievalResult> results;
  if (options.multi_query) {
    std::map<std::pair<int, int>, std::vector<Descriptor>> groups;
    std::vector<std::pair<int, int>> order;
    for (std::size_t q = 0; q < queries.descriptors.size(); ++q) {
      const std::pair<int, int> key{queries.identities[q], queries.cameras[q]};
      if (!groups.count(key))
        order.push_back(key);
      groups[key].push_back(queries.descriptors[q]);
    }
    for (const auto &key : order)
      results.push_back(multi_query_rank(gallery, groups[key], key.first, key.second,
                                         options.protocol, options.pooling));
  } else {
    for (std::size_t q = 0; q < queries.descriptors.size(); ++q)
      results.push_back(rank(gallery, queries.descriptors[q], queries.identities[q],
                             queries.cameras[q], options.protocol));
  }
  if (options.rerank)
    results = rerank(gallery, results, options.k1, options.k2, options.lambda);

  EvalReport report;
  report.num_queries = results.size();
  report.cmc = cmc(results, options.max_rank, &report.excluded_queries);
  report.rank1 = report.cmc[0];
  report.rank5 = report.cmc[4];
  report.rank10 = report.cmc[9];
  report.map = mean_average_precision(results, nullptr, &report.per_query_ap);

  std::vector<Descriptor> all = queries.descriptors;
  std::vector<int> labels = queries.identities;
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    all.emplace_back(gallery.row(g), gallery.row(g) + gallery.dim());
    labels.push_back(gallery.identities()[g]);
  }
  const DistanceStudy ds = distance_study(all, labels, gallery.metric());
  report.intra_mean = ds.intra_mean;
  report.inter_mean = ds.inter_mean;
  return report;
}

EvalReport evaluate(const DatasetSplit &split, Pipeline &pipeline, const EvalOptions &options) {
  const DescribedSet q = describe(split.query, pipeline, options.source);
  const DescribedSet g = describe(split.gallery, pipeline, options.source);
  const GalleryIndex index = build_index(g.descriptors, g.identities, g.cameras, options.metric,
                                         g.paths);
  return evaluate_descriptors(q, index, options);
}

// ------------------------------------------------------------------ files

namespace {

constexpr char kDescMagic[8] = {'R', 'I', 'D', 'D', 'E', 'S', 'C', '\0'};
constexpr std::uint32_t kDescVersion = 1;

template <typename T> void put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T> T get(const std::string &in, std::size_t &pos) {
  if (pos + sizeof(T) > in.size())
    throw FormatError("descriptor matrix: truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

} // namespace

void save_descriptor_matrix(const GalleryIndex &index, const std::string &path) {
  std::string out(kDescMagic, sizeof(kDescMagic));
  put<std::uint32_t>(out, kDescVersion);
  put<std::uint64_t>(out, index.size());
  put<std::uint64_t>(out, index.dim());
  put<std::uint32_t>(out, index.metric() == Metric::cosine ? 1u : 0u);
  out.append(reinterpret_cast<const char *>(index.descriptors().data()),
             index.descriptors().size() * sizeof(float));
  write_file(path, out);
  const nlohmann::json sidecar = {{"paths", index.paths()},
                                  {"identities", index.identities()},
                                  {"cameras", index.cameras()},
                                  {"metric", to_string(index.metric())}};
  write_file(path + ".json", sidecar.dump(2) + "\n");
}

GalleryIndex load_descriptor_matrix(const std::string &path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof(kDescMagic) ||
      std::memcmp(bytes.data(), kDescMagic, sizeof(kDescMagic)) != 0)
    throw FormatError("descriptor matrix: bad magic in " + path);
  std::size_t pos = sizeof(kDescMagic);
  if (get<std::uint32_t>(bytes, pos) != kDescVersion)
    throw FormatError("descriptor matrix: unsupported version");
  const auto m = get<std::uint64_t>(bytes, pos);
  const auto d = get<std::uint64_t>(bytes, pos);
  const auto metric = get<std::uint32_t>(bytes, pos);
  if (metric > 1)
    throw FormatError("descriptor matrix: unknown metric code");
  if (bytes.size() - pos != m * d * sizeof(float))
    throw FormatError("descriptor matrix: payload size does not match header");
  std::vector<float> values(m * d);
  std::memcpy(values.data(), bytes.data() + pos, values.size() * sizeof(float));
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(path + ".json"));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("descriptor sidecar: ") + e.what());
  }
  return GalleryIndex(std::move(values), d, sidecar.at("identities").get<std::vector<int>>(),
                      sidecar.at("cameras").get<std::vector<int>>(),
                      metric == 1 ? Metric::cosine : Metric::euclidean,
                      sidecar.at("paths").get<std::vector<std::string>>());
}

} // namespace reid
