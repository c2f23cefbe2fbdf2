#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <variant>
#include <vector>

#include "sgan/models.hpp"

namespace sgan {

/// Checkpoint container layout (all integers little-endian):
///
///   bytes 0-7    magic "SGANCKPT"
///   bytes 8-11   format version (uint32), currently 1
///   bytes 12-19  header length L (uint64)
///   next L bytes UTF-8 JSON header: dtype, per-network spec, generator input
///                order, tensor table (name, rows, cols) and free-form metadata
///   payload      tensors in table order, row-major IEEE-754 (float32/float64)
///   last 8 bytes FNV-1a 64 checksum of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NetworkSpec = std::variant<GeneratorSpec, DiscriminatorSpec>;

/// Flat registry of one network's tensors (weights and normalization
/// statistics) plus the spec that shaped them.
template <typename Scalar>
struct ModelParams {
  NetworkSpec spec;
  TensorRegistry<Scalar> tensors;

  bool is_generator() const { return std::holds_alternative<GeneratorSpec>(spec); }
};

template <typename Scalar>
ModelParams<Scalar> export_params(Generator<Scalar>& g) {
  return {g.spec(), g.export_tensors()};
}

template <typename Scalar>
ModelParams<Scalar> export_params(Discriminator<Scalar>& d) {
  return {d.spec(), d.export_tensors()};
}

/// Generator and discriminator saved together, with run metadata
/// (iteration, seed, "trained" flag, ...).
template <typename Scalar>
struct GanCheckpoint {
  ModelParams<Scalar> generator;
  ModelParams<Scalar> discriminator;
  nlohmann::json metadata = nlohmann::json::object();
};

template <typename Scalar>
void save_params(const ModelParams<Scalar>& params, const std::filesystem::path& path);

/// Throws DataError on a version mismatch, a corrupt or truncated file, or
/// tensors inconsistent with the embedded spec.
template <typename Scalar>
ModelParams<Scalar> load_params(const std::filesystem::path& path);

template <typename Scalar>
void save_checkpoint(const GanCheckpoint<Scalar>& ckpt, const std::filesystem::path& path);

template <typename Scalar>
GanCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
Generator<Scalar> make_generator(const ModelParams<Scalar>& params) {
  Generator<Scalar> g(std::get<GeneratorSpec>(params.spec));
  g.import_tensors(params.tensors);
  return g;
}

template <typename Scalar>
Discriminator<Scalar> make_discriminator(const ModelParams<Scalar>& params) {
  Discriminator<Scalar> d(std::get<DiscriminatorSpec>(params.spec));
  d.import_tensors(params.tensors);
  return d;
}

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

}  // namespace sgan
