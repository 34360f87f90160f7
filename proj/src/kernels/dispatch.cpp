#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "tiltrotor/kernels.hpp"

namespace tiltrotor::kernels {

#if !defined(TILTROTOR_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(TILTROTOR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__)) && \
    (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* select_initial() {
  if (const char* forced = std::getenv("TILTROTOR_KERNELS")) {
    if (std::string_view(forced) == "scalar") return &scalar_table();
  }
  if (cpu_has_avx2() && avx2_table() != nullptr) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{select_initial()};
  return slot;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

bool backend_available(Backend backend) {
  return backend == Backend::scalar || (cpu_has_avx2() && avx2_table() != nullptr);
}

const KernelTable& table(Backend backend) {
  if (!backend_available(backend)) throw std::runtime_error("kernel backend not available on this CPU");
  return backend == Backend::scalar ? scalar_table() : *avx2_table();
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }
Backend active_backend() { return active().backend; }
void set_active_backend(Backend backend) { active_slot().store(&table(backend)); }

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: size mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: size mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void affine_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y, AffineShape s) {
  require(x.size() == s.batch * s.in && w.size() == s.out * s.in && b.size() == s.out &&
              y.size() == s.batch * s.out,
          "affine_forward: shape mismatch");
  active().affine_forward(x.data(), w.data(), b.data(), y.data(), s);
}

void affine_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, AffineShape s) {
  require(dy.size() == s.batch * s.out && w.size() == s.out * s.in && dx.size() == s.batch * s.in,
          "affine_backward_input: shape mismatch");
  active().affine_backward_input(dy.data(), w.data(), dx.data(), s);
}

void affine_backward_params(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> db, AffineShape s) {
  require(dy.size() == s.batch * s.out && x.size() == s.batch * s.in &&
              dw.size() == s.out * s.in && db.size() == s.out,
          "affine_backward_params: shape mismatch");
  active().affine_backward_params(dy.data(), x.data(), dw.data(), db.data(), s);
}

}  // namespace tiltrotor::kernels
