#pragma once

#include <vector>

#include "epose/nn/params.hpp"

namespace epose::train {

// Gradient accumulator indexed like a ParameterSet; an empty Mat means zero.
struct GradAccum {
  std::vector<nn::Mat> g;

  explicit GradAccum(std::size_t n) : g(n) {}
  void add(const GradAccum& other);
  void scale(double k);
  void clear();
};

// Adaptive first/second-moment optimizer over a fixed set of parameter
// entries. Missing gradients count as zero (moments still decay).
class Adam {
 public:
  Adam(std::vector<int> indices, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(nn::ParameterSet& params, const std::vector<nn::Mat>& grads);
  int steps_taken() const { return t_; }
  double lr() const { return lr_; }

 private:
  std::vector<int> idx_;
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<nn::Mat> m_, v_;
};

}  // namespace epose::train
