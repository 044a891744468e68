#include "epose/nn/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace epose::nn {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Var Tape::push(Mat value, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Mat value) { return push(std::move(value), nullptr); }

Var Tape::leaf_ref(const Mat* value) {
  Node n;
  n.ext = value;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Mat& v = value_of(id);
  if (n.grad.rows != v.rows || n.grad.cols != v.cols) n.grad = Mat(v.rows, v.cols);
  return n.grad;
}

void Tape::add_grad(int id, const Mat& g) {
  Mat& dst = grad_of(id);
  for (std::size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += g.a[i];
}

const Mat& Tape::grad(Var v) const {
  static const Mat empty;
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.a.empty() && value_of(v.id).size() != 0) {
    const_cast<Node&>(n).grad = Mat(value_of(v.id).rows, value_of(v.id).cols);
  }
  return n.grad.a.empty() ? empty : n.grad;
}

void Tape::clear() { nodes_.clear(); }

void Tape::backward(Var loss) {
  const Mat& lv = val(loss);
  if (lv.rows != 1 || lv.cols != 1) throw std::logic_error("backward: loss must be 1x1");
  grad_of(loss.id).a[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.back || n.grad.a.empty()) continue;
    n.back(*this);
  }
}

// --- arithmetic --------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  const Mat &A = val(a), &B = val(b);
  Mat out;
  gemm_nn(A, B, out, false);
  const int ia = a.id, ib = b.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, ib, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    gemm_nt(g, t.value_of(ib), t.grad_of(ia), true);  // dA += g * B^T
    gemm_tn(t.value_of(ia), g, t.grad_of(ib), true);  // dB += A^T * g
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Mat &A = val(a), &B = val(b);
  Mat out;
  gemm_nt(A, B, out, false);
  const int ia = a.id, ib = b.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, ib, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    gemm_nn(g, t.value_of(ib), t.grad_of(ia), true);  // dA += g * B
    gemm_tn(g, t.value_of(ia), t.grad_of(ib), true);  // dB += g^T * A
  });
}

Var Tape::add(Var a, Var b) {
  const Mat &A = val(a), &B = val(b);
  if (!A.same_shape(B)) throw std::logic_error("add: shape mismatch");
  Mat out = A;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += B.a[i];
  const int ia = a.id, ib = b.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, ib, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.add_grad(ia, g);
    t.add_grad(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  const Mat &A = val(a), &B = val(b);
  if (!A.same_shape(B)) throw std::logic_error("sub: shape mismatch");
  Mat out = A;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] -= B.a[i];
  const int ia = a.id, ib = b.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, ib, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.add_grad(ia, g);
    Mat& gb = t.grad_of(ib);
    for (std::size_t i = 0; i < gb.a.size(); ++i) gb.a[i] -= g.a[i];
  });
}

Var Tape::mul(Var a, Var b) {
  const Mat &A = val(a), &B = val(b);
  if (!A.same_shape(B)) throw std::logic_error("mul: shape mismatch");
  Mat out = A;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] *= B.a[i];
  const int ia = a.id, ib = b.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, ib, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat &A2 = t.value_of(ia), &B2 = t.value_of(ib);
    Mat& ga = t.grad_of(ia);
    Mat& gb = t.grad_of(ib);
    for (std::size_t i = 0; i < g.a.size(); ++i) {
      ga.a[i] += g.a[i] * B2.a[i];
      gb.a[i] += g.a[i] * A2.a[i];
    }
  });
}

Var Tape::add_rowvec(Var x, Var b) {
  const Mat &X = val(x), &B = val(b);
  if (B.rows != 1 || B.cols != X.cols) throw std::logic_error("add_rowvec: shape mismatch");
  Mat out = X;
  for (int r = 0; r < X.rows; ++r)
    for (int c = 0; c < X.cols; ++c) out(r, c) += B(0, c);
  const int ix = x.id, ib = b.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ix, ib, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    t.add_grad(ix, g);
    Mat& gb = t.grad_of(ib);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) gb(0, c) += g(r, c);
  });
}

Var Tape::scale(Var a, double k) {
  Mat out = val(a);
  for (auto& v : out.a) v *= k;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, k, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Mat& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.a.size(); ++i) ga.a[i] += k * g.a[i];
  });
}

Var Tape::add_scalar(Var a, double k) {
  Mat out = val(a);
  for (auto& v : out.a) v += k;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    t.add_grad(ia, t.nodes_[static_cast<std::size_t>(self)].grad);
  });
}

Var Tape::relu(Var a) {
  Mat out = val(a);
  for (auto& v : out.a) v = v > 0.0 ? v : 0.0;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& y = t.value_of(self);
    Mat& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.a.size(); ++i)
      if (y.a[i] > 0.0) ga.a[i] += g.a[i];
  });
}

Var Tape::tanh_op(Var a) {
  Mat out = val(a);
  for (auto& v : out.a) v = std::tanh(v);
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& y = t.value_of(self);
    Mat& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.a.size(); ++i) ga.a[i] += g.a[i] * (1.0 - y.a[i] * y.a[i]);
  });
}

Var Tape::exp_op(Var a) {
  Mat out = val(a);
  for (auto& v : out.a) v = std::exp(v);
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& y = t.value_of(self);
    Mat& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.a.size(); ++i) ga.a[i] += g.a[i] * y.a[i];
  });
}

Var Tape::slice_cols(Var a, int start, int len) {
  const Mat& A = val(a);
  Mat out(A.rows, len);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < len; ++c) out(r, c) = A(r, start + c);
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, start, len, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Mat& ga = t.grad_of(ia);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < len; ++c) ga(r, start + c) += g(r, c);
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  int rows = val(parts.front()).rows, cols = 0;
  for (const Var p : parts) cols += val(p).cols;
  Mat out(rows, cols);
  int off = 0;
  std::vector<int> ids, widths;
  for (const Var p : parts) {
    const Mat& P = val(p);
    if (P.rows != rows) throw std::logic_error("concat_cols: row mismatch");
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < P.cols; ++c) out(r, off + c) = P(r, c);
    ids.push_back(p.id);
    widths.push_back(P.cols);
    off += P.cols;
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ids, widths, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    int off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Mat& gp = t.grad_of(ids[k]);
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < widths[k]; ++c) gp(r, c) += g(r, off2 + c);
      off2 += widths[k];
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  int cols = val(parts.front()).cols, rows = 0;
  for (const Var p : parts) rows += val(p).rows;
  Mat out(rows, cols);
  int off = 0;
  std::vector<int> ids, heights;
  for (const Var p : parts) {
    const Mat& P = val(p);
    if (P.cols != cols) throw std::logic_error("concat_rows: col mismatch");
    for (int r = 0; r < P.rows; ++r)
      for (int c = 0; c < cols; ++c) out(off + r, c) = P(r, c);
    ids.push_back(p.id);
    heights.push_back(P.rows);
    off += P.rows;
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ids, heights, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    int off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Mat& gp = t.grad_of(ids[k]);
      for (int r = 0; r < heights[k]; ++r)
        for (int c = 0; c < g.cols; ++c) gp(r, c) += g(off2 + r, c);
      off2 += heights[k];
    }
  });
}

Var Tape::row(Var a, int r) {
  const Mat& A = val(a);
  Mat out(1, A.cols);
  for (int c = 0; c < A.cols; ++c) out(0, c) = A(r, c);
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, r, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Mat& ga = t.grad_of(ia);
    for (int c = 0; c < g.cols; ++c) ga(r, c) += g(0, c);
  });
}

Var Tape::mean_rows(Var a) {
  const Mat& A = val(a);
  Mat out(1, A.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < A.cols; ++c) out(0, c) += A(r, c);
  for (auto& v : out.a) v /= A.rows;
  const int ia = a.id, n = A.rows;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, n, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    Mat& ga = t.grad_of(ia);
    for (int r = 0; r < ga.rows; ++r)
      for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(0, c) / n;
  });
}

Var Tape::sum(Var a) {
  const Mat& A = val(a);
  double s = 0.0;
  for (const double v : A.a) s += v;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(Mat::scalar(s), [ia, self](Tape& t) {
    const double g = t.nodes_[static_cast<std::size_t>(self)].grad.a[0];
    Mat& ga = t.grad_of(ia);
    for (auto& v : ga.a) v += g;
  });
}

Var Tape::square(Var a) {
  Mat out = val(a);
  for (auto& v : out.a) v *= v;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& x = t.value_of(ia);
    Mat& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.a.size(); ++i) ga.a[i] += 2.0 * x.a[i] * g.a[i];
  });
}

Var Tape::pick(Var a, int idx) {
  const Mat& A = val(a);
  if (A.rows != 1) throw std::logic_error("pick: expects a row vector");
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(Mat::scalar(A(0, idx)), [ia, idx, self](Tape& t) {
    t.grad_of(ia)(0, idx) += t.nodes_[static_cast<std::size_t>(self)].grad.a[0];
  });
}

// --- softmax family ----------------------------------------------------------

Var Tape::softmax_rows(Var a) {
  const Mat& A = val(a);
  Mat out = A;
  for (int r = 0; r < A.rows; ++r) {
    double mx = A(r, 0);
    for (int c = 1; c < A.cols; ++c) mx = std::max(mx, A(r, c));
    double z = 0.0;
    for (int c = 0; c < A.cols; ++c) {
      out(r, c) = std::exp(A(r, c) - mx);
      z += out(r, c);
    }
    for (int c = 0; c < A.cols; ++c) out(r, c) /= z;
  }
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& p = t.value_of(self);
    Mat& ga = t.grad_of(ia);
    for (int r = 0; r < g.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < g.cols; ++c) dot += g(r, c) * p(r, c);
      for (int c = 0; c < g.cols; ++c) ga(r, c) += p(r, c) * (g(r, c) - dot);
    }
  });
}

Var Tape::masked_softmax_vec(Var a, std::vector<std::uint8_t> mask) {
  const Mat& A = val(a);
  if (A.rows != 1 || A.cols != static_cast<int>(mask.size()))
    throw std::logic_error("masked_softmax_vec: shape mismatch");
  Mat out(1, A.cols);
  double mx = kNegInf;
  for (int c = 0; c < A.cols; ++c)
    if (mask[static_cast<std::size_t>(c)]) mx = std::max(mx, A(0, c));
  if (mx == kNegInf) throw std::logic_error("masked_softmax_vec: empty mask");
  double z = 0.0;
  for (int c = 0; c < A.cols; ++c) {
    if (!mask[static_cast<std::size_t>(c)]) continue;
    out(0, c) = std::exp(A(0, c) - mx);
    z += out(0, c);
  }
  for (int c = 0; c < A.cols; ++c) out(0, c) /= z;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, mask = std::move(mask), self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& p = t.value_of(self);
    Mat& ga = t.grad_of(ia);
    double dot = 0.0;
    for (int c = 0; c < g.cols; ++c)
      if (mask[static_cast<std::size_t>(c)]) dot += g(0, c) * p(0, c);
    for (int c = 0; c < g.cols; ++c)
      if (mask[static_cast<std::size_t>(c)]) ga(0, c) += p(0, c) * (g(0, c) - dot);
  });
}

Var Tape::masked_log_softmax_vec(Var a, std::vector<std::uint8_t> mask) {
  const Mat& A = val(a);
  if (A.rows != 1 || A.cols != static_cast<int>(mask.size()))
    throw std::logic_error("masked_log_softmax_vec: shape mismatch");
  double mx = kNegInf;
  for (int c = 0; c < A.cols; ++c)
    if (mask[static_cast<std::size_t>(c)]) mx = std::max(mx, A(0, c));
  if (mx == kNegInf) throw std::logic_error("masked_log_softmax_vec: empty mask");
  double z = 0.0;
  for (int c = 0; c < A.cols; ++c)
    if (mask[static_cast<std::size_t>(c)]) z += std::exp(A(0, c) - mx);
  const double lse = mx + std::log(z);
  Mat out(1, A.cols);
  for (int c = 0; c < A.cols; ++c)
    out(0, c) = mask[static_cast<std::size_t>(c)] ? A(0, c) - lse : kNegInf;
  const int ia = a.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [ia, mask = std::move(mask), self](Tape& t) {
    const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Mat& lp = t.value_of(self);
    Mat& ga = t.grad_of(ia);
    double gsum = 0.0;
    for (int c = 0; c < g.cols; ++c)
      if (mask[static_cast<std::size_t>(c)]) gsum += g(0, c);
    for (int c = 0; c < g.cols; ++c)
      if (mask[static_cast<std::size_t>(c)])
        ga(0, c) += g(0, c) - std::exp(lp(0, c)) * gsum;
  });
}

Var Tape::entropy_from_logp(Var logp, std::vector<std::uint8_t> mask) {
  const Mat& L = val(logp);
  double h = 0.0;
  for (int c = 0; c < L.cols; ++c)
    if (mask[static_cast<std::size_t>(c)]) h -= std::exp(L(0, c)) * L(0, c);
  const int il = logp.id;
  const int self = static_cast<int>(nodes_.size());
  return push(Mat::scalar(h), [il, mask = std::move(mask), self](Tape& t) {
    const double g = t.nodes_[static_cast<std::size_t>(self)].grad.a[0];
    const Mat& lp = t.value_of(il);
    Mat& gl = t.grad_of(il);
    for (int c = 0; c < lp.cols; ++c)
      if (mask[static_cast<std::size_t>(c)])
        gl(0, c) -= g * std::exp(lp(0, c)) * (1.0 + lp(0, c));
  });
}

// --- batch norm ----------------------------------------------------------------

Var Tape::batchnorm(Var x, Var gamma, Var beta, const Mat* run_mean, const Mat* run_var,
                    bool train, double eps, BnStats* out_stats) {
  const Mat& X = val(x);
  const int n = X.rows, d = X.cols;
  Mat mean(1, d), var(1, d);
  if (train) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) mean(0, c) += X(r, c);
    for (auto& v : mean.a) v /= n;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) {
        const double dv = X(r, c) - mean(0, c);
        var(0, c) += dv * dv;
      }
    for (auto& v : var.a) v /= n;
    if (out_stats) {
      out_stats->mean = mean;
      out_stats->var = var;
    }
  } else {
    mean = *run_mean;
    var = *run_var;
  }

  Mat inv_std(1, d);
  for (int c = 0; c < d; ++c) inv_std(0, c) = 1.0 / std::sqrt(var(0, c) + eps);

  const Mat &G = val(gamma), &B = val(beta);
  Mat xhat(n, d), out(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) {
      xhat(r, c) = (X(r, c) - mean(0, c)) * inv_std(0, c);
      out(r, c) = G(0, c) * xhat(r, c) + B(0, c);
    }

  const int ix = x.id, ig = gamma.id, ib = beta.id;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out),
              [ix, ig, ib, self, train, n, d, xhat = std::move(xhat),
               inv_std = std::move(inv_std)](Tape& t) {
                const Mat& g = t.nodes_[static_cast<std::size_t>(self)].grad;
                const Mat& G2 = t.value_of(ig);
                Mat& gx = t.grad_of(ix);
                Mat& gg = t.grad_of(ig);
                Mat& gb = t.grad_of(ib);
                for (int c = 0; c < d; ++c) {
                  double sum_g = 0.0, sum_gx = 0.0;
                  for (int r = 0; r < n; ++r) {
                    sum_g += g(r, c);
                    sum_gx += g(r, c) * xhat(r, c);
                  }
                  gb(0, c) += sum_g;
                  gg(0, c) += sum_gx;
                  const double k = G2(0, c) * inv_std(0, c);
                  if (train) {
                    for (int r = 0; r < n; ++r)
                      gx(r, c) += k * (g(r, c) - sum_g / n - xhat(r, c) * sum_gx / n);
                  } else {
                    for (int r = 0; r < n; ++r) gx(r, c) += k * g(r, c);
                  }
                }
              });
}

}  // namespace epose::nn
