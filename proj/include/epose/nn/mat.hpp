#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace epose::nn {

// Dense row-major matrix of doubles. Scalars are 1x1, row vectors 1xn.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  static Mat scalar(double v) {
    Mat m(1, 1);
    m.a[0] = v;
    return m;
  }

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return a.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  double item() const {
    assert(rows == 1 && cols == 1);
    return a[0];
  }
};

// out (+)= A * B
void gemm_nn(const Mat& A, const Mat& B, Mat& out, bool accumulate);
// out (+)= A * B^T
void gemm_nt(const Mat& A, const Mat& B, Mat& out, bool accumulate);
// out (+)= A^T * B
void gemm_tn(const Mat& A, const Mat& B, Mat& out, bool accumulate);

}  // namespace epose::nn
