#include "reid/checkpoint.hpp"

#include <cstring>
#include <filesystem>

namespace reid {

namespace {

constexpr char kMagic[8] = {'R', 'I', 'D', 'C', 'K', 'P', 'T', '1'};

template <typename T> void put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T> T get(const std::string &in, std::size_t &pos) {
  if (pos + sizeof(T) > in.size())
    throw FormatError("checkpoint: truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::size_t element_count(const std::vector<int> &shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0)
      throw FormatError("negative dimension in tensor shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

} // namespace

const TensorBlob *Checkpoint::find(const std::string &name) const {
  for (const auto &t : tensors)
    if (t.name == name)
      return &t;
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint &ckpt) {
  nlohmann::json header;
  header["kind"] = ckpt.kind;
  header["epoch"] = ckpt.epoch;
  header["rng_state"] = ckpt.rng_state;
  header["config"] = ckpt.config;
  header["meta"] = ckpt.meta;
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto &t : ckpt.tensors) {
    if (element_count(t.shape) != t.values.size())
      throw Error("checkpoint tensor '" + t.name + "' has inconsistent shape");
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.values.size();
  }
  header["tensors"] = table;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto &t : ckpt.tensors)
    out.append(reinterpret_cast<const char *>(t.values.data()), t.values.size() * sizeof(double));
  return out;
}

Checkpoint parse_checkpoint(const std::string &bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic");
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != Checkpoint::kVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto len = get<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size())
    throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  pos += len;
  const std::size_t payload = pos;
  const std::size_t payload_doubles = (bytes.size() - payload) / sizeof(double);

  Checkpoint ckpt;
  try {
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.meta = header.at("meta");
    for (const auto &entry : header.at("tensors")) {
      TensorBlob t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = element_count(t.shape);
      if (offset + n > payload_doubles)
        throw FormatError("checkpoint: tensor '" + t.name + "' exceeds payload");
      t.values.resize(n);
      std::memcpy(t.values.data(), bytes.data() + payload + offset * sizeof(double),
                  n * sizeof(double));
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint &ckpt, const std::string &path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string &path) {
  if (!std::filesystem::exists(path))
    throw MissingPrerequisite("checkpoint not found: " + path);
  return parse_checkpoint(read_file(path));
}

void store_params(Checkpoint &ckpt, const nn::NamedParams &params, const std::string &prefix) {
  for (const auto &[name, p] : params)
    ckpt.tensors.push_back({prefix + name, p->shape, p->value});
}

void restore_params(const Checkpoint &ckpt, const nn::NamedParams &params,
                    const std::string &prefix) {
  for (const auto &[name, p] : params) {
    const TensorBlob *t = ckpt.find(prefix + name);
    if (!t)
      throw FormatError("checkpoint '" + ckpt.kind + "' lacks tensor " + prefix + name);
    if (t->shape != p->shape)
      throw FormatError("checkpoint tensor " + prefix + name + " has the wrong shape");
    p->value = t->values;
  }
}

std::string hash_params(const nn::NamedParams &params) {
  std::string buf;
  for (const auto &[name, p] : params) {
    buf += name;
    buf.push_back('\0');
    for (int d : p->shape)
      put<std::int32_t>(buf, d);
    buf.append(reinterpret_cast<const char *>(p->value.data()), p->size() * sizeof(double));
  }
  return git_blob_hash(buf);
}

void save_weight_manifest(const nn::NamedParams &params, const nlohmann::json &architecture,
                          const std::string &manifest_path) {
  namespace fs = std::filesystem;
  const fs::path mp(manifest_path);
  const std::string data_name = mp.stem().string() + ".bin";
  std::string raw;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto &[name, p] : params) {
    tensors[name] = {{"shape", p->shape}, {"offset", raw.size()}};
    for (double v : p->value)
      put<float>(raw, static_cast<float>(v));
  }
  nlohmann::json doc = {{"format", "reid-weights"}, {"version", 1},
                        {"dtype", "float32"},      {"data", data_name},
                        {"architecture", architecture}, {"tensors", tensors}};
  write_file((mp.parent_path() / data_name).string(), raw);
  write_file(manifest_path, doc.dump(2) + "\n");
}

namespace {

nlohmann::json read_manifest(const std::string &manifest_path) {
  if (!std::filesystem::exists(manifest_path))
    throw MissingPrerequisite("weight manifest not found: " + manifest_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("weight manifest: ") + e.what());
  }
  if (doc.value("format", "") != "reid-weights" || doc.value("dtype", "") != "float32")
    throw FormatError("weight manifest: expected format reid-weights with dtype float32");
  return doc;
}

} // namespace

nlohmann::json read_weight_architecture(const std::string &manifest_path) {
  return read_manifest(manifest_path).value("architecture", nlohmann::json::object());
}

void load_weight_manifest(const std::string &manifest_path, const nn::NamedParams &params) {
  const nlohmann::json doc = read_manifest(manifest_path);
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  const std::string raw = read_file((dir / doc.at("data").get<std::string>()).string());
  const auto &tensors = doc.at("tensors");
  for (const auto &[name, p] : params) {
    if (!tensors.contains(name))
      throw FormatError("weight manifest lacks tensor " + name);
    const auto &entry = tensors.at(name);
    if (entry.at("shape").get<std::vector<int>>() != p->shape)
      throw FormatError("weight manifest tensor " + name + " has the wrong shape");
    std::size_t pos = entry.at("offset").get<std::size_t>();
    for (std::size_t i = 0; i < p->size(); ++i)
      p->value[i] = get<float>(raw, pos);
  }
}

} // namespace reid
