#pragma once

// Dense affine-layer kernels used by the policy/value networks.
//
// Every routine has a scalar reference implementation and, when built with
// TILTROTOR_ENABLE_AVX2, an AVX2/FMA variant. The variant is picked once at
// startup from CPUID; TILTROTOR_KERNELS=scalar in the environment forces the
// reference path. Both paths agree to rounding (see tests/test_kernels.cpp).
//
// Layout is row-major throughout:
//   x  [batch x in]    w [out x in]    b [out]    y [batch x out]

#include <cstddef>
#include <span>
#include <string_view>

namespace tiltrotor::kernels {

enum class Backend { scalar, avx2 };

struct AffineShape {
  std::size_t batch = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

struct KernelTable {
  Backend backend;
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y = x w^T + b
  void (*affine_forward)(const double* x, const double* w, const double* b, double* y,
                         AffineShape shape);
  /// dx = dy w
  void (*affine_backward_input)(const double* dy, const double* w, double* dx, AffineShape shape);
  /// dw += dy^T x, db += column sums of dy
  void (*affine_backward_params)(const double* dy, const double* x, double* dw, double* db,
                                 AffineShape shape);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool backend_available(Backend backend);
const KernelTable& table(Backend backend);

/// Kernels selected for this process.
const KernelTable& active();
Backend active_backend();
/// Overrides runtime selection (tests and benchmarks). Throws if unavailable.
void set_active_backend(Backend backend);

// Span-checked wrappers over the active table.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void affine_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y, AffineShape shape);
void affine_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, AffineShape shape);
void affine_backward_params(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> db, AffineShape shape);

}  // namespace tiltrotor::kernels
