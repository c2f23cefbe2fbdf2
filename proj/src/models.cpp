#include "sgan/models.hpp"

#include <algorithm>

namespace sgan {

Index network_depth(Index resolution) {
  Index depth = 0;
  for (Index r = resolution; r > 4; r /= 2) ++depth;
  return depth;
}

namespace {

void check_resolution(Index resolution) {
  if (resolution != 32 && resolution != 64 && resolution != 128)
    throw UsageError("resolution must be 32, 64 or 128 (got " + std::to_string(resolution) + ")");
}

std::vector<Index> doubling(Index depth, Index base, Index cap) {
  std::vector<Index> f;
  Index c = base;
  for (Index i = 0; i < depth; ++i) {
    f.push_back(std::min(c, cap));
    c *= 2;
  }
  return f;
}

}  // namespace

std::vector<Index> GeneratorSpec::down_filters() const {
  return doubling(depth(), base_filters, max_filters);
}

std::vector<Index> GeneratorSpec::up_filters() const {
  std::vector<Index> f;
  Index c = down_filters().back();
  for (Index j = 0; j + 1 < depth(); ++j) {
    c = std::max<Index>(1, c / 2);
    f.push_back(c);
  }
  f.push_back(3);
  return f;
}

std::vector<std::array<Index, 3>> GeneratorSpec::layer_shapes() const {
  std::vector<std::array<Index, 3>> shapes;
  Index r = resolution;
  for (Index c : down_filters()) {
    r /= 2;
    shapes.push_back({c, r, r});
  }
  for (Index c : up_filters()) {
    r *= 2;
    shapes.push_back({c, r, r});
  }
  return shapes;
}

void GeneratorSpec::validate() const {
  check_resolution(resolution);
  if (latent_dim < 1) throw UsageError("latent dimension must be positive");
  if (base_filters < 1 || max_filters < base_filters)
    throw UsageError("filter counts must satisfy 1 <= base <= max");
}

std::vector<Index> DiscriminatorSpec::filters() const {
  return doubling(depth(), base_filters, max_filters);
}

std::vector<std::array<Index, 3>> DiscriminatorSpec::layer_shapes() const {
  std::vector<std::array<Index, 3>> shapes;
  Index r = resolution;
  for (Index c : filters()) {
    r /= 2;
    shapes.push_back({c, r, r});
  }
  return shapes;
}

void DiscriminatorSpec::validate() const {
  check_resolution(resolution);
  if (base_filters < 1 || max_filters < base_filters)
    throw UsageError("filter counts must satisfy 1 <= base <= max");
}

}  // namespace sgan
