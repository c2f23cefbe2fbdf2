#pragma once

#include <cmath>
#include <vector>

#include "sgan/nn/layers.hpp"

namespace sgan::nn {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.5;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are bound to parameters by
/// position, so the same parameter list must be passed on every step.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  void step(const std::vector<Parameter<Scalar>*>& params) {
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.push_back(RowMatrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
        second_.push_back(RowMatrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    assert(first_.size() == params.size());
    ++steps_;
    const Scalar b1 = Scalar(opts_.beta1), b2 = Scalar(opts_.beta2);
    const Scalar lr = Scalar(opts_.learning_rate), eps = Scalar(opts_.eps);
    const Scalar correct1 = Scalar(1) - Scalar(std::pow(opts_.beta1, double(steps_)));
    const Scalar correct2 = Scalar(1) - Scalar(std::pow(opts_.beta2, double(steps_)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<Scalar>& p = *params[i];
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * p.grad;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (first_[i].array() / correct1) /
                         ((second_[i].array() / correct2).sqrt() + eps);
    }
  }

  long steps() const { return steps_; }
  const AdamOptions& options() const { return opts_; }

 private:
  AdamOptions opts_;
  long steps_ = 0;
  std::vector<RowMatrix<Scalar>> first_;
  std::vector<RowMatrix<Scalar>> second_;
};

}  // namespace sgan::nn
