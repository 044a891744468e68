#include "epose/nn/mat.hpp"

namespace epose::nn {

void gemm_nn(const Mat& A, const Mat& B, Mat& out, bool accumulate) {
  assert(A.cols == B.rows);
  if (!accumulate) {
    out.rows = A.rows;
    out.cols = B.cols;
    out.a.assign(static_cast<std::size_t>(A.rows) * B.cols, 0.0);
  } else {
    assert(out.rows == A.rows && out.cols == B.cols);
  }
  const int m = A.rows, k = A.cols, n = B.cols;
  for (int i = 0; i < m; ++i) {
    double* o = &out.a[static_cast<std::size_t>(i) * n];
    const double* ar = &A.a[static_cast<std::size_t>(i) * k];
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      const double* br = &B.a[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

void gemm_nt(const Mat& A, const Mat& B, Mat& out, bool accumulate) {
  assert(A.cols == B.cols);
  if (!accumulate) {
    out.rows = A.rows;
    out.cols = B.rows;
    out.a.assign(static_cast<std::size_t>(A.rows) * B.rows, 0.0);
  } else {
    assert(out.rows == A.rows && out.cols == B.rows);
  }
  const int m = A.rows, k = A.cols, n = B.rows;
  for (int i = 0; i < m; ++i) {
    const double* ar = &A.a[static_cast<std::size_t>(i) * k];
    double* o = &out.a[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) {
      const double* br = &B.a[static_cast<std::size_t>(j) * k];
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
      o[j] += acc;
    }
  }
}

void gemm_tn(const Mat& A, const Mat& B, Mat& out, bool accumulate) {
  assert(A.rows == B.rows);
  if (!accumulate) {
    out.rows = A.cols;
    out.cols = B.cols;
    out.a.assign(static_cast<std::size_t>(A.cols) * B.cols, 0.0);
  } else {
    assert(out.rows == A.cols && out.cols == B.cols);
  }
  const int m = A.cols, k = A.rows, n = B.cols;
  for (int p = 0; p < k; ++p) {
    const double* ar = &A.a[static_cast<std::size_t>(p) * m];
    const double* br = &B.a[static_cast<std::size_t>(p) * n];
    for (int i = 0; i < m; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = &out.a[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

}  // namespace epose::nn
