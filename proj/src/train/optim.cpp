#include "epose/train/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace epose::train {

void GradAccum::add(const GradAccum& other) {
  if (other.g.size() != g.size()) throw std::logic_error("GradAccum: size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const nn::Mat& src = other.g[i];
    if (src.size() == 0) continue;
    nn::Mat& dst = g[i];
    if (dst.size() == 0) {
      dst = src;
      continue;
    }
    if (!dst.same_shape(src)) throw std::logic_error("GradAccum: shape mismatch");
    for (std::size_t k = 0; k < dst.a.size(); ++k) dst.a[k] += src.a[k];
  }
}

void GradAccum::scale(double k) {
  for (auto& m : g)
    for (auto& v : m.a) v *= k;
}

void GradAccum::clear() {
  for (auto& m : g) m = nn::Mat();
}

Adam::Adam(std::vector<int> indices, double lr, double beta1, double beta2, double eps)
    : idx_(std::move(indices)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  m_.resize(idx_.size());
  v_.resize(idx_.size());
}

void Adam::step(nn::ParameterSet& params, const std::vector<nn::Mat>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, t_);
  const double bc2 = 1.0 - std::pow(b2_, t_);
  for (std::size_t i = 0; i < idx_.size(); ++i) {
    nn::Mat& p = params.value(idx_[i]);
    if (m_[i].size() == 0) {
      m_[i] = nn::Mat(p.rows, p.cols);
      v_[i] = nn::Mat(p.rows, p.cols);
    }
    const nn::Mat* gm = &grads[static_cast<std::size_t>(idx_[i])];
    const bool zero = gm->size() == 0;
    for (std::size_t k = 0; k < p.a.size(); ++k) {
      const double gk = zero ? 0.0 : gm->a[k];
      m_[i].a[k] = b1_ * m_[i].a[k] + (1.0 - b1_) * gk;
      v_[i].a[k] = b2_ * v_[i].a[k] + (1.0 - b2_) * gk * gk;
      const double mhat = m_[i].a[k] / bc1;
      const double vhat = v_[i].a[k] / bc2;
      p.a[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace epose::train
