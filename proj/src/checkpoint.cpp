#include "sgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

namespace sgan {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'S', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::vector<char>& bytes, std::size_t count) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < count; ++i) {
    h ^= static_cast<std::uint8_t>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::vector<char>& out, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("corrupt checkpoint: truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

template <typename Scalar>
constexpr const char* dtype_name() {
  return std::is_same_v<Scalar, float> ? "float32" : "float64";
}

/// Validates names and shapes by loading into a freshly built network.
template <typename Scalar>
void check_against_spec(const ModelParams<Scalar>& p) {
  if (p.is_generator()) {
    Generator<Scalar> g(std::get<GeneratorSpec>(p.spec));
    g.import_tensors(p.tensors);
  } else {
    Discriminator<Scalar> d(std::get<DiscriminatorSpec>(p.spec));
    d.import_tensors(p.tensors);
  }
}

template <typename Scalar>
void write_container(const std::vector<const ModelParams<Scalar>*>& nets, const json& metadata,
                     const std::filesystem::path& path) {
  json header;
  header["dtype"] = dtype_name<Scalar>();
  header["metadata"] = metadata;
  header["networks"] = json::array();
  for (const auto* net : nets) {
    if (!all_finite(net->tensors)) throw NumericalError("refusing to save non-finite parameters");
    json entry;
    entry["spec"] = spec_to_json(net->spec);
    if (net->is_generator()) entry["input_order"] = {"latent", "map"};
    entry["tensors"] = json::array();
    for (const auto& [name, t] : net->tensors)
      entry["tensors"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
    header["networks"].push_back(entry);
  }
  const std::string text = header.dump();

  std::vector<char> bytes(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(bytes, kCheckpointVersion);
  put<std::uint64_t>(bytes, text.size());
  bytes.insert(bytes.end(), text.begin(), text.end());
  for (const auto* net : nets)
    for (const auto& [name, t] : net->tensors) {
      const auto* p = reinterpret_cast<const char*>(t.data());
      bytes.insert(bytes.end(), p, p + t.size() * sizeof(Scalar));
    }
  put<std::uint64_t>(bytes, fnv1a(bytes, bytes.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
}

template <typename Stored, typename Scalar>
nn::RowMatrix<Scalar> read_tensor(const std::vector<char>& bytes, std::size_t& pos, Index rows,
                                  Index cols) {
  const std::size_t n = std::size_t(rows * cols);
  if (pos + n * sizeof(Stored) > bytes.size()) throw DataError("corrupt checkpoint: truncated");
  nn::RowMatrix<Stored> t(rows, cols);
  std::memcpy(t.data(), bytes.data() + pos, n * sizeof(Stored));
  pos += n * sizeof(Stored);
  return t.template cast<Scalar>();
}

template <typename Scalar>
std::pair<std::vector<ModelParams<Scalar>>, json> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw DataError("corrupt checkpoint: bad magic or truncated: " + path.string());
  std::size_t pos = 8;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint version mismatch: file has " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion));
  const std::size_t body = bytes.size() - 8;
  std::size_t tail = body;
  if (get<std::uint64_t>(bytes, tail) != fnv1a(bytes, body))
    throw DataError("corrupt checkpoint: checksum mismatch (truncated or damaged): " + path.string());
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (pos + header_len > body) throw DataError("corrupt checkpoint: truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + std::ptrdiff_t(pos),
                         bytes.begin() + std::ptrdiff_t(pos + header_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  pos += header_len;

  std::vector<ModelParams<Scalar>> nets;
  try {
    const std::string dtype = header.at("dtype");
    if (dtype != "float32" && dtype != "float64")
      throw DataError("corrupt checkpoint: unknown dtype " + dtype);
    for (const json& entry : header.at("networks")) {
      ModelParams<Scalar> p{spec_from_json(entry.at("spec")), {}};
      if (p.is_generator() && entry.at("input_order") != json({"latent", "map"}))
        throw DataError("checkpoint generator input order must be [latent, map]");
      for (const json& t : entry.at("tensors")) {
        const Index rows = t.at("rows"), cols = t.at("cols");
        p.tensors[t.at("name")] = dtype == "float32"
                                      ? read_tensor<float, Scalar>(bytes, pos, rows, cols)
                                      : read_tensor<double, Scalar>(bytes, pos, rows, cols);
      }
      check_against_spec(p);
      nets.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint spec invalid: ") + e.what());
  }
  if (pos != body) throw DataError("corrupt checkpoint: payload size mismatch");
  return {std::move(nets), header.value("metadata", json::object())};
}

}  // namespace

json spec_to_json(const NetworkSpec& spec) {
  if (const auto* g = std::get_if<GeneratorSpec>(&spec)) {
    return {{"network", "generator"},      {"resolution", g->resolution},
            {"latent_dim", g->latent_dim}, {"base_filters", g->base_filters},
            {"max_filters", g->max_filters}, {"kernel", 5},
            {"stride", 2},                 {"depth", g->depth()}};
  }
  const auto& d = std::get<DiscriminatorSpec>(spec);
  return {{"network", "discriminator"}, {"resolution", d.resolution},
          {"base_filters", d.base_filters}, {"max_filters", d.max_filters},
          {"kernel", 5},                 {"stride", 2},
          {"depth", d.depth()}};
}

NetworkSpec spec_from_json(const json& j) {
  const std::string kind = j.at("network");
  if (j.value("kernel", 5) != 5 || j.value("stride", 2) != 2)
    throw DataError("checkpoint uses an unsupported kernel/stride");
  if (kind == "generator") {
    GeneratorSpec g{j.at("resolution"), j.at("latent_dim"), j.at("base_filters"), j.at("max_filters")};
    if (j.contains("depth") && j["depth"] != g.depth())
      throw DataError("shape mismatch: checkpoint depth disagrees with its resolution");
    return g;
  }
  if (kind == "discriminator") {
    DiscriminatorSpec d{j.at("resolution"), j.at("base_filters"), j.at("max_filters")};
    if (j.contains("depth") && j["depth"] != d.depth())
      throw DataError("shape mismatch: checkpoint depth disagrees with its resolution");
    return d;
  }
  throw DataError("unknown network kind in checkpoint: " + kind);
}

template <typename Scalar>
void save_params(const ModelParams<Scalar>& params, const std::filesystem::path& path) {
  write_container<Scalar>({&params}, json::object(), path);
}

template <typename Scalar>
ModelParams<Scalar> load_params(const std::filesystem::path& path) {
  auto [nets, meta] = read_container<Scalar>(path);
  if (nets.size() != 1)
    throw DataError("expected a single-network file, found " + std::to_string(nets.size()) + " networks");
  return std::move(nets.front());
}

template <typename Scalar>
void save_checkpoint(const GanCheckpoint<Scalar>& ckpt, const std::filesystem::path& path) {
  if (!ckpt.generator.is_generator() || ckpt.discriminator.is_generator())
    throw UsageError("checkpoint roles are swapped");
  write_container<Scalar>({&ckpt.generator, &ckpt.discriminator}, ckpt.metadata, path);
}

template <typename Scalar>
GanCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  auto [nets, meta] = read_container<Scalar>(path);
  if (nets.size() != 2 || !nets[0].is_generator() || nets[1].is_generator())
    throw DataError("checkpoint must hold a generator followed by a discriminator");
  return {std::move(nets[0]), std::move(nets[1]), std::move(meta)};
}

template void save_params<float>(const ModelParams<float>&, const std::filesystem::path&);
template void save_params<double>(const ModelParams<double>&, const std::filesystem::path&);
template ModelParams<float> load_params<float>(const std::filesystem::path&);
template ModelParams<double> load_params<double>(const std::filesystem::path&);
template void save_checkpoint<float>(const GanCheckpoint<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const GanCheckpoint<double>&, const std::filesystem::path&);
template GanCheckpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template GanCheckpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace sgan
