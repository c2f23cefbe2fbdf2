#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sgan/imaging.hpp"
#include "sgan/nn/layers.hpp"
#include "sgan/rng.hpp"

namespace sgan {

template <typename Scalar>
using LatentVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Latent batch, one column per sample.
template <typename Scalar>
using LatentBatch = nn::Matrix<Scalar>;

/// Draws z ~ U[-1, 1]^dim column by column.
template <typename Scalar>
LatentBatch<Scalar> sample_latent(Index dim, Index count, Rng& rng) {
  std::uniform_real_distribution<Scalar> dist(Scalar(-1), Scalar(1));
  LatentBatch<Scalar> z(dim, count);
  for (Index n = 0; n < count; ++n)
    for (Index k = 0; k < dim; ++k) z(k, n) = dist(rng);
  return z;
}

/// Replicates z over an h x w grid: output(k, y, x) = z[k].
template <typename Scalar>
nn::Tensor<Scalar> tile_latent(const LatentVector<Scalar>& z, Index h, Index w) {
  nn::Tensor<Scalar> t(1, z.size(), h, w);
  t.data.colwise() = z;
  return t;
}

/// Stacks equally sized images into a batch tensor.
template <typename Scalar>
nn::Tensor<Scalar> stack_images(std::span<const Image<Scalar>> images) {
  if (images.empty()) throw UsageError("stack_images: empty batch");
  const Index h = images.front().height, w = images.front().width;
  nn::Tensor<Scalar> t(Index(images.size()), 3, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].height != h || images[n].width != w)
      throw UsageError("stack_images: images differ in shape");
    t.data.middleCols(Index(n) * h * w, h * w) = images[n].data;
  }
  return t;
}

template <typename Scalar>
nn::Tensor<Scalar> stack_images(const Image<Scalar>& image) {
  return stack_images(std::span<const Image<Scalar>>(&image, 1));
}

template <typename Scalar>
Image<Scalar> unstack_image(const nn::Tensor<Scalar>& t, Index n) {
  assert(t.channels == 3 && n < t.batch);
  Image<Scalar> img(t.height, t.width);
  img.data = t.data.middleCols(n * t.sites(), t.sites());
  return img;
}

/// Resolution-parametric depth: stride-2 layers until a 4 x 4 floor.
Index network_depth(Index resolution);

struct GeneratorSpec {
  Index resolution = 64;
  Index latent_dim = 100;
  Index base_filters = 64;
  Index max_filters = 512;

  Index depth() const { return network_depth(resolution); }
  /// Output channels of each down-path conv (doubling, capped).
  std::vector<Index> down_filters() const;
  /// Output channels of each up-path transposed conv; the last entry is 3.
  std::vector<Index> up_filters() const;
  /// Declared (channels, height, width) after every conv / transposed conv.
  std::vector<std::array<Index, 3>> layer_shapes() const;
  void validate() const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  Index resolution = 64;
  Index base_filters = 64;
  Index max_filters = 512;

  Index depth() const { return network_depth(resolution); }
  std::vector<Index> filters() const;
  std::vector<std::array<Index, 3>> layer_shapes() const;
  void validate() const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

/// Named tensors of one network. Keys are layer-qualified names such as
/// "down1.bn.running_var".
template <typename Scalar>
using TensorRegistry = std::map<std::string, nn::RowMatrix<Scalar>>;

inline constexpr double kInitStddev = 0.02;

/// Copies registry entries into parameters by name; the registry must hold
/// exactly the same names and shapes.
template <typename Scalar>
void assign_tensors(const std::vector<nn::Parameter<Scalar>*>& params,
                    const TensorRegistry<Scalar>& tensors) {
  if (tensors.size() != params.size())
    throw DataError("shape mismatch: expected " + std::to_string(params.size()) +
                    " tensors, found " + std::to_string(tensors.size()));
  for (auto* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw DataError("shape mismatch: missing tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw DataError("shape mismatch: tensor " + p->name);
    p->value = it->second;
  }
}

/// Conditional generator G(z, c): conv down-path over [tile(z), c] with
/// BatchNorm + ReLU, transposed-conv up-path with BatchNorm + ReLU, tanh
/// output without normalization.
template <typename Scalar>
class Generator {
 public:
  explicit Generator(const GeneratorSpec& spec) : spec_(spec) {
    spec_.validate();
    const nn::ConvGeometry g;
    const auto down = spec_.down_filters();
    const auto up = spec_.up_filters();
    first_ = nn::LatentMapConv<Scalar>("down0", spec_.latent_dim, 3, down[0], g);
    norms_.emplace_back("down0.bn", down[0]);
    for (std::size_t i = 1; i < down.size(); ++i) {
      const std::string name = "down" + std::to_string(i);
      down_.emplace_back(name, down[i - 1], down[i], g, false);
      norms_.emplace_back(name + ".bn", down[i]);
    }
    Index in = down.back();
    for (std::size_t j = 0; j + 1 < up.size(); ++j) {
      const std::string name = "up" + std::to_string(j);
      up_.emplace_back(name, in, up[j], g, false);
      norms_.emplace_back(name + ".bn", up[j]);
      in = up[j];
    }
    out_ = nn::ConvTranspose2d<Scalar>("out", in, 3, g, true);
    relus_.resize(norms_.size());
  }

  const GeneratorSpec& spec() const { return spec_; }

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto* p : parameters())
      if (p->name.ends_with(".weight")) nn::init_normal(*p, rng, Scalar(kInitStddev));
  }

  /// z: latent_dim x N; maps: N x 3 x W x W. Returns N x 3 x W x W in [-1, 1].
  nn::Tensor<Scalar> forward(const LatentBatch<Scalar>& z, const nn::Tensor<Scalar>& maps,
                             nn::Mode mode) {
    if (maps.height != spec_.resolution || maps.width != spec_.resolution || maps.channels != 3)
      throw UsageError("generator: map resolution " + maps.shape_string() + " does not match spec " +
                       std::to_string(spec_.resolution));
    if (z.rows() != spec_.latent_dim || z.cols() != maps.batch)
      throw UsageError("generator: latent batch has wrong shape");
    shapes_.clear();
    std::size_t k = 0;
    auto norm_relu = [&](const nn::Tensor<Scalar>& x) {
      shapes_.push_back({x.channels, x.height, x.width});
      auto y = norms_[k].forward(x, mode);
      return relus_[k++].forward(y);
    };
    nn::Tensor<Scalar> x = norm_relu(first_.forward(z, maps));
    for (auto& conv : down_) x = norm_relu(conv.forward(x));
    for (auto& deconv : up_) x = norm_relu(deconv.forward(x));
    x = out_.forward(x);
    shapes_.push_back({x.channels, x.height, x.width});
    return tanh_.forward(x);
  }

  /// Propagates dL/d(output) back; returns dL/dz (latent_dim x N).
  LatentBatch<Scalar> backward(const nn::Tensor<Scalar>& d_out, nn::ParamGrads pg) {
    nn::Tensor<Scalar> d = out_.backward(tanh_.backward(d_out), pg);
    std::size_t k = norms_.size();
    auto relu_norm = [&](const nn::Tensor<Scalar>& dy) {
      --k;
      return norms_[k].backward(relus_[k].backward(dy), pg);
    };
    for (auto it = up_.rbegin(); it != up_.rend(); ++it) d = it->backward(relu_norm(d), pg);
    for (auto it = down_.rbegin(); it != down_.rend(); ++it) d = it->backward(relu_norm(d), pg);
    return first_.backward(relu_norm(d), pg);
  }

  /// Shapes realized by the most recent forward pass.
  const std::vector<std::array<Index, 3>>& realized_shapes() const { return shapes_; }

  /// Sign pattern of every ReLU input of the last forward pass; used to check
  /// that finite-difference probes stay on one linear piece.
  std::vector<bool> activation_pattern() const {
    std::vector<bool> bits;
    for (const auto& r : relus_)
      for (Index i = 0; i < r.output_.size(); ++i) bits.push_back(r.output_.data()[i] > Scalar(0));
    return bits;
  }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    std::vector<nn::Parameter<Scalar>*> ps;
    auto add = [&](nn::Parameter<Scalar>& p) { ps.push_back(&p); };
    first_.visit(add);
    std::size_t k = 0;
    norms_[k++].visit(add);
    for (auto& c : down_) {
      c.visit(add);
      norms_[k++].visit(add);
    }
    for (auto& c : up_) {
      c.visit(add);
      norms_[k++].visit(add);
    }
    out_.visit(add);
    return ps;
  }

  std::vector<nn::Parameter<Scalar>*> trainable_parameters() {
    std::vector<nn::Parameter<Scalar>*> ps;
    for (auto* p : parameters())
      if (p->trainable) ps.push_back(p);
    return ps;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  TensorRegistry<Scalar> export_tensors() {
    TensorRegistry<Scalar> out;
    for (auto* p : parameters()) out[p->name] = p->value;
    return out;
  }

  void import_tensors(const TensorRegistry<Scalar>& tensors) {
    assign_tensors(parameters(), tensors);
  }

 private:
  GeneratorSpec spec_;
  nn::LatentMapConv<Scalar> first_;
  std::vector<nn::Conv2d<Scalar>> down_;
  std::vector<nn::ConvTranspose2d<Scalar>> up_;
  std::vector<nn::BatchNorm<Scalar>> norms_;
  std::vector<nn::Relu<Scalar>> relus_;
  nn::ConvTranspose2d<Scalar> out_;
  nn::Tanh<Scalar> tanh_;
  std::vector<std::array<Index, 3>> shapes_;
};

/// Conditional discriminator D(x, c): stride-2 convs over [x, c] with
/// LeakyReLU(0.2), BatchNorm on every conv but the first, then a linear head
/// producing one logit per sample.
template <typename Scalar>
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorSpec& spec) : spec_(spec) {
    spec_.validate();
    const nn::ConvGeometry g;
    const auto f = spec_.filters();
    convs_.emplace_back("conv0", 6, f[0], g, true);
    for (std::size_t i = 1; i < f.size(); ++i) {
      const std::string name = "conv" + std::to_string(i);
      convs_.emplace_back(name, f[i - 1], f[i], g, false);
      norms_.emplace_back(name + ".bn", f[i]);
    }
    activations_.resize(convs_.size());
    head_ = nn::LinearHead<Scalar>("head", f.back() * 16);
  }

  const DiscriminatorSpec& spec() const { return spec_; }

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto* p : parameters())
      if (p->name.ends_with(".weight")) nn::init_normal(*p, rng, Scalar(kInitStddev));
  }

  /// Returns one logit per sample; probabilities are sigmoid(logit).
  nn::Vector<Scalar> forward(const nn::Tensor<Scalar>& images, const nn::Tensor<Scalar>& maps,
                             nn::Mode mode) {
    if (!images.same_shape(maps) || images.channels != 3 || images.height != spec_.resolution ||
        images.width != spec_.resolution)
      throw UsageError("discriminator: input " + images.shape_string() + " / map " +
                       maps.shape_string() + " do not match spec " +
                       std::to_string(spec_.resolution));
    nn::Tensor<Scalar> x(images.batch, 6, images.height, images.width);
    x.data.topRows(3) = images.data;
    x.data.bottomRows(3) = maps.data;
    shapes_.clear();
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      x = convs_[i].forward(x);
      shapes_.push_back({x.channels, x.height, x.width});
      if (i > 0) x = norms_[i - 1].forward(x, mode);
      x = activations_[i].forward(x);
    }
    return head_.forward(x);
  }

  nn::Vector<Scalar> probabilities(const nn::Tensor<Scalar>& images,
                                   const nn::Tensor<Scalar>& maps, nn::Mode mode) {
    return forward(images, maps, mode).unaryExpr([](Scalar v) { return nn::sigmoid(v); });
  }

  /// dL/dlogits -> dL/dimages (N x 3 x W x W).
  nn::Tensor<Scalar> backward(const nn::Vector<Scalar>& d_logits, nn::ParamGrads pg) {
    nn::Tensor<Scalar> d = head_.backward(d_logits, pg);
    for (std::size_t i = convs_.size(); i-- > 0;) {
      d = activations_[i].backward(d);
      if (i > 0) d = norms_[i - 1].backward(d, pg);
      d = convs_[i].backward(d, pg);
    }
    nn::Tensor<Scalar> d_images(d.batch, 3, d.height, d.width);
    d_images.data = d.data.topRows(3);
    return d_images;
  }

  const std::vector<std::array<Index, 3>>& realized_shapes() const { return shapes_; }

  std::vector<bool> activation_pattern() const {
    std::vector<bool> bits;
    for (const auto& a : activations_)
      for (Index i = 0; i < a.input_.size(); ++i) bits.push_back(a.input_.data()[i] > Scalar(0));
    return bits;
  }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    std::vector<nn::Parameter<Scalar>*> ps;
    auto add = [&](nn::Parameter<Scalar>& p) { ps.push_back(&p); };
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].visit(add);
      if (i > 0) norms_[i - 1].visit(add);
    }
    head_.visit(add);
    return ps;
  }

  std::vector<nn::Parameter<Scalar>*> trainable_parameters() {
    std::vector<nn::Parameter<Scalar>*> ps;
    for (auto* p : parameters())
      if (p->trainable) ps.push_back(p);
    return ps;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  TensorRegistry<Scalar> export_tensors() {
    TensorRegistry<Scalar> out;
    for (auto* p : parameters()) out[p->name] = p->value;
    return out;
  }

  void import_tensors(const TensorRegistry<Scalar>& tensors) {
    assign_tensors(parameters(), tensors);
  }

 private:
  DiscriminatorSpec spec_;
  std::vector<nn::Conv2d<Scalar>> convs_;
  std::vector<nn::BatchNorm<Scalar>> norms_;
  std::vector<nn::LeakyRelu<Scalar>> activations_;
  nn::LinearHead<Scalar> head_;
  std::vector<std::array<Index, 3>> shapes_;
};

/// True when every tensor entry is finite.
template <typename Scalar>
bool all_finite(const TensorRegistry<Scalar>& tensors) {
  for (const auto& [name, t] : tensors)
    if (!t.allFinite()) return false;
  return true;
}

}  // namespace sgan
