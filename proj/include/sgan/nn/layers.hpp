#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sgan/nn/tensor.hpp"

namespace sgan::nn {

enum class Mode {
  Train,      // batch statistics; running statistics are updated
  Inference,  // frozen running statistics; deterministic
};

/// Whether a backward pass should accumulate parameter gradients or only
/// propagate gradients to the inputs (latent optimization).
enum class ParamGrads { Accumulate, Skip };

template <typename Scalar>
struct Parameter {
  std::string name;
  RowMatrix<Scalar> value;
  RowMatrix<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols, bool train = true)
      : name(std::move(n)),
        value(RowMatrix<Scalar>::Zero(rows, cols)),
        grad(RowMatrix<Scalar>::Zero(rows, cols)),
        trainable(train) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
void init_normal(Parameter<Scalar>& p, std::mt19937_64& rng, Scalar stddev) {
  std::normal_distribution<Scalar> dist(Scalar(0), stddev);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
}

/// Strided convolution, weight laid out (Cout x Cin*K*K).
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, Index in_ch, Index out_ch, ConvGeometry g, bool with_bias)
      : geometry_(g),
        in_channels_(in_ch),
        weight(name + ".weight", out_ch, in_ch * g.kernel * g.kernel),
        bias(name + ".bias", with_bias ? out_ch : 0, with_bias ? 1 : 0) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    assert(x.channels == in_channels_);
    in_shape_ = Tensor<Scalar>{};
    in_shape_.batch = x.batch;
    in_shape_.channels = x.channels;
    in_shape_.height = x.height;
    in_shape_.width = x.width;
    const Index oh = geometry_.reduced(x.height), ow = geometry_.reduced(x.width);
    cols_ = im2col(x, geometry_, oh, ow);
    Tensor<Scalar> y;
    y.batch = x.batch;
    y.channels = weight.value.rows();
    y.height = oh;
    y.width = ow;
    y.data.noalias() = weight.value * cols_;
    if (bias.value.size() > 0) y.data.colwise() += bias.value.col(0);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, ParamGrads pg) {
    if (pg == ParamGrads::Accumulate) {
      weight.grad.noalias() += dy.data * cols_.transpose();
      if (bias.value.size() > 0) bias.grad.col(0) += dy.data.rowwise().sum();
    }
    RowMatrix<Scalar> dcols = weight.value.transpose() * dy.data;
    Tensor<Scalar> dx(in_shape_.batch, in_shape_.channels, in_shape_.height, in_shape_.width);
    col2im(dcols, geometry_, dy.height, dy.width, dx);
    return dx;
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    if (bias.value.size() > 0) f(bias);
  }

  const ConvGeometry& geometry() const { return geometry_; }

 private:
  ConvGeometry geometry_;
  Index in_channels_ = 0;
  Tensor<Scalar> in_shape_;
  RowMatrix<Scalar> cols_;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

/// Fractionally strided convolution doubling spatial extent; the exact adjoint
/// of Conv2d on the doubled grid. Weight laid out (Cin x Cout*K*K).
template <typename Scalar>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, Index in_ch, Index out_ch, ConvGeometry g, bool with_bias)
      : geometry_(g),
        out_channels_(out_ch),
        weight(name + ".weight", in_ch, out_ch * g.kernel * g.kernel),
        bias(name + ".bias", with_bias ? out_ch : 0, with_bias ? 1 : 0) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    const Index oh = x.height * geometry_.stride, ow = x.width * geometry_.stride;
    assert(geometry_.reduced(oh) == x.height);
    RowMatrix<Scalar> cols = weight.value.transpose() * x.data;
    Tensor<Scalar> y(x.batch, out_channels_, oh, ow);
    col2im(cols, geometry_, x.height, x.width, y);
    if (bias.value.size() > 0) y.data.colwise() += bias.value.col(0);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, ParamGrads pg) {
    RowMatrix<Scalar> dcols = im2col(dy, geometry_, input_.height, input_.width);
    if (pg == ParamGrads::Accumulate) {
      weight.grad.noalias() += input_.data * dcols.transpose();
      if (bias.value.size() > 0) bias.grad.col(0) += dy.data.rowwise().sum();
    }
    Tensor<Scalar> dx;
    dx.batch = input_.batch;
    dx.channels = input_.channels;
    dx.height = input_.height;
    dx.width = input_.width;
    dx.data.noalias() = weight.value * dcols;
    return dx;
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    if (bias.value.size() > 0) f(bias);
  }

 private:
  ConvGeometry geometry_;
  Index out_channels_ = 0;
  Tensor<Scalar> input_;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

/// Convolution over the channel concatenation [tile(z), map]. The weight has
/// the same layout as a Conv2d with Cin = latent_dim + map channels (latent
/// channels first); the tiled latent block is never materialized because a
/// spatially constant input only interacts with the kernel through the
/// tap-validity pattern.
template <typename Scalar>
class LatentMapConv {
 public:
  LatentMapConv() = default;
  LatentMapConv(std::string name, Index latent_dim, Index map_ch, Index out_ch, ConvGeometry g)
      : geometry_(g),
        latent_dim_(latent_dim),
        map_channels_(map_ch),
        weight(name + ".weight", out_ch, (latent_dim + map_ch) * g.kernel * g.kernel) {}

  /// z: latent_dim x N (one column per sample); maps: N x map_ch x H x W.
  Tensor<Scalar> forward(const Matrix<Scalar>& z, const Tensor<Scalar>& maps) {
    assert(z.rows() == latent_dim_ && z.cols() == maps.batch && maps.channels == map_channels_);
    const Index kk = geometry_.kernel * geometry_.kernel;
    const Index out_ch = weight.value.rows();
    const Index oh = geometry_.reduced(maps.height), ow = geometry_.reduced(maps.width);
    if (valid_.cols() != oh * ow || valid_h_ != maps.height || valid_w_ != maps.width) {
      valid_ = tap_validity<Scalar>(geometry_, maps.height, maps.width, oh, ow);
      valid_h_ = maps.height;
      valid_w_ = maps.width;
    }
    z_ = z;
    map_cols_ = im2col(maps, geometry_, oh, ow);
    Tensor<Scalar> y;
    y.batch = maps.batch;
    y.channels = out_ch;
    y.height = oh;
    y.width = ow;
    y.data.noalias() = weight.value.rightCols(map_channels_ * kk) * map_cols_;

    const Matrix<Scalar> taps = latent_taps();
    const Matrix<Scalar> tap_sums = taps * z;  // (out_ch*kk) x N
    for (Index n = 0; n < y.batch; ++n) {
      Eigen::Map<const RowMatrix<Scalar>> per_tap(tap_sums.col(n).data(), out_ch, kk);
      y.data.middleCols(n * oh * ow, oh * ow).noalias() += per_tap * valid_;
    }
    return y;
  }

  /// Returns dL/dz (latent_dim x N). Map gradients are not propagated.
  Matrix<Scalar> backward(const Tensor<Scalar>& dy, ParamGrads pg) {
    const Index kk = geometry_.kernel * geometry_.kernel;
    const Index out_ch = weight.value.rows();
    const Index sites = dy.height * dy.width;
    Matrix<Scalar> d_tap_sums(out_ch * kk, dy.batch);
    for (Index n = 0; n < dy.batch; ++n) {
      Eigen::Map<RowMatrix<Scalar>> per_tap(d_tap_sums.col(n).data(), out_ch, kk);
      per_tap.noalias() = dy.data.middleCols(n * sites, sites) * valid_.transpose();
    }
    if (pg == ParamGrads::Accumulate) {
      weight.grad.rightCols(map_channels_ * kk).noalias() += dy.data * map_cols_.transpose();
      const Matrix<Scalar> d_taps = d_tap_sums * z_.transpose();
      for (Index o = 0; o < out_ch; ++o)
        for (Index c = 0; c < latent_dim_; ++c)
          for (Index t = 0; t < kk; ++t) weight.grad(o, c * kk + t) += d_taps(o * kk + t, c);
    }
    return latent_taps().transpose() * d_tap_sums;
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
  }

  Index latent_dim() const { return latent_dim_; }

 private:
  /// Latent weight block rearranged to (out_ch*kk) x latent_dim.
  Matrix<Scalar> latent_taps() const {
    const Index kk = geometry_.kernel * geometry_.kernel;
    const Index out_ch = weight.value.rows();
    Matrix<Scalar> taps(out_ch * kk, latent_dim_);
    for (Index o = 0; o < out_ch; ++o)
      for (Index c = 0; c < latent_dim_; ++c)
        for (Index t = 0; t < kk; ++t) taps(o * kk + t, c) = weight.value(o, c * kk + t);
    return taps;
  }

  ConvGeometry geometry_;
  Index latent_dim_ = 0;
  Index map_channels_ = 0;
  RowMatrix<Scalar> valid_;
  Index valid_h_ = 0, valid_w_ = 0;
  Matrix<Scalar> z_;
  RowMatrix<Scalar> map_cols_;

 public:
  Parameter<Scalar> weight;
};

/// Per-channel batch normalization with affine parameters and running
/// statistics (running = momentum * running + (1 - momentum) * batch).
template <typename Scalar>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, Index channels, Scalar momentum = Scalar(0.9),
            Scalar eps = Scalar(1e-5))
      : momentum_(momentum),
        eps_(eps),
        gamma(name + ".gamma", channels, 1),
        beta(name + ".beta", channels, 1),
        running_mean(name + ".running_mean", channels, 1, false),
        running_var(name + ".running_var", channels, 1, false) {
    gamma.value.setOnes();
    running_var.value.setOnes();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) {
    mode_ = mode;
    const Index m = x.data.cols();
    Vector<Scalar> mean, var;
    if (mode == Mode::Train) {
      if (m < 2) throw UsageError("batch normalization in training mode needs at least 2 sites");
      mean = x.data.rowwise().mean();
      var = (x.data.colwise() - mean).array().square().rowwise().mean();
      running_mean.value.col(0) = momentum_ * running_mean.value.col(0) + (Scalar(1) - momentum_) * mean;
      const Scalar unbiased = Scalar(m) / Scalar(m - 1);
      running_var.value.col(0) =
          momentum_ * running_var.value.col(0) + (Scalar(1) - momentum_) * unbiased * var;
    } else {
      mean = running_mean.value.col(0);
      var = running_var.value.col(0);
    }
    inv_std_ = (var.array() + eps_).rsqrt().matrix();
    xhat_ = x;
    xhat_.data = (x.data.colwise() - mean).array().colwise() * inv_std_.array();
    Tensor<Scalar> y = xhat_;
    y.data = (xhat_.data.array().colwise() * gamma.value.col(0).array()).colwise() +
             beta.value.col(0).array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, ParamGrads pg) {
    if (pg == ParamGrads::Accumulate) {
      gamma.grad.col(0) += dy.data.cwiseProduct(xhat_.data).rowwise().sum();
      beta.grad.col(0) += dy.data.rowwise().sum();
    }
    Tensor<Scalar> dx = dy;
    const auto scale = (gamma.value.col(0).array() * inv_std_.array()).eval();
    if (mode_ == Mode::Inference) {
      dx.data = dy.data.array().colwise() * scale;
      return dx;
    }
    const Scalar m = Scalar(dy.data.cols());
    const Vector<Scalar> sum_dy = dy.data.rowwise().sum();
    const Vector<Scalar> sum_dy_xhat = dy.data.cwiseProduct(xhat_.data).rowwise().sum();
    dx.data = ((dy.data * m).colwise() - sum_dy -
               (xhat_.data.array().colwise() * sum_dy_xhat.array()).matrix())
                  .array()
                  .colwise() *
              (scale / m);
    return dx;
  }

  template <typename F>
  void visit(F&& f) {
    f(gamma);
    f(beta);
    f(running_mean);
    f(running_var);
  }

 private:
  Scalar momentum_ = Scalar(0.9);
  Scalar eps_ = Scalar(1e-5);
  Mode mode_ = Mode::Train;
  Tensor<Scalar> xhat_;
  Vector<Scalar> inv_std_;

 public:
  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Parameter<Scalar> running_mean;
  Parameter<Scalar> running_var;
};

/// Fully connected layer from a flattened feature map to one logit per sample.
/// Feature index within a sample is c * (H*W) + site.
template <typename Scalar>
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(const std::string& name, Index features)
      : weight(name + ".weight", 1, features), bias(name + ".bias", 1, 1) {}

  Vector<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    assert(x.channels * x.sites() == weight.value.cols());
    Eigen::Map<const RowMatrix<Scalar>> w(weight.value.data(), x.channels, x.sites());
    Vector<Scalar> logits(x.batch);
    for (Index n = 0; n < x.batch; ++n)
      logits(n) = w.cwiseProduct(x.data.middleCols(n * x.sites(), x.sites())).sum() + bias.value(0, 0);
    return logits;
  }

  Tensor<Scalar> backward(const Vector<Scalar>& dlogits, ParamGrads pg) {
    const Index sites = input_.sites();
    Eigen::Map<const RowMatrix<Scalar>> w(weight.value.data(), input_.channels, sites);
    Tensor<Scalar> dx(input_.batch, input_.channels, input_.height, input_.width);
    for (Index n = 0; n < input_.batch; ++n) {
      dx.data.middleCols(n * sites, sites) = dlogits(n) * w;
      if (pg == ParamGrads::Accumulate) {
        Eigen::Map<RowMatrix<Scalar>> gw(weight.grad.data(), input_.channels, sites);
        gw += dlogits(n) * input_.data.middleCols(n * sites, sites);
        bias.grad(0, 0) += dlogits(n);
      }
    }
    return dx;
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    f(bias);
  }

 private:
  Tensor<Scalar> input_;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

// Pointwise activations. Each caches what its backward needs.

template <typename Scalar>
struct Relu {
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    Tensor<Scalar> y = x;
    y.data = x.data.cwiseMax(Scalar(0));
    output_ = y.data;
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) const {
    Tensor<Scalar> dx = dy;
    dx.data = (output_.array() > Scalar(0)).select(dy.data, Scalar(0));
    return dx;
  }
  RowMatrix<Scalar> output_;
};

template <typename Scalar>
struct LeakyRelu {
  Scalar slope = Scalar(0.2);
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x.data;
    Tensor<Scalar> y = x;
    y.data = (x.data.array() > Scalar(0)).select(x.data, slope * x.data);
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) const {
    Tensor<Scalar> dx = dy;
    dx.data = (input_.array() > Scalar(0)).select(dy.data, slope * dy.data);
    return dx;
  }
  RowMatrix<Scalar> input_;
};

template <typename Scalar>
struct Tanh {
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    Tensor<Scalar> y = x;
    y.data = x.data.array().tanh();
    output_ = y.data;
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) const {
    Tensor<Scalar> dx = dy;
    dx.data = dy.data.array() * (Scalar(1) - output_.array().square());
    return dx;
  }
  RowMatrix<Scalar> output_;
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

}  // namespace sgan::nn
