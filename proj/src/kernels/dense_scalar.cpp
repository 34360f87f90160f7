#include "tiltrotor/kernels.hpp"

namespace tiltrotor::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine_forward_scalar(const double* x, const double* w, const double* b, double* y,
                           AffineShape s) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    const double* xr = x + r * s.in;
    double* yr = y + r * s.out;
    for (std::size_t o = 0; o < s.out; ++o) yr[o] = b[o] + dot_scalar(xr, w + o * s.in, s.in);
  }
}

void affine_backward_input_scalar(const double* dy, const double* w, double* dx, AffineShape s) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    double* dxr = dx + r * s.in;
    for (std::size_t i = 0; i < s.in; ++i) dxr[i] = 0.0;
    const double* dyr = dy + r * s.out;
    for (std::size_t o = 0; o < s.out; ++o) axpy_scalar(dyr[o], w + o * s.in, dxr, s.in);
  }
}

void affine_backward_params_scalar(const double* dy, const double* x, double* dw, double* db,
                                   AffineShape s) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    const double* dyr = dy + r * s.out;
    const double* xr = x + r * s.in;
    for (std::size_t o = 0; o < s.out; ++o) {
      db[o] += dyr[o];
      axpy_scalar(dyr[o], xr, dw + o * s.in, s.in);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Backend::scalar,          "scalar",
                             dot_scalar,               axpy_scalar,
                             affine_forward_scalar,    affine_backward_input_scalar,
                             affine_backward_params_scalar};
  return t;
}

}  // namespace tiltrotor::kernels
