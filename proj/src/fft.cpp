#include "aclstm/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "aclstm/error.hpp"

namespace aclstm {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Fft::Fft(std::size_t n, FftDirection direction) : n_(n), direction_(direction), plan_(nullptr) {
  if (n == 0) throw ConfigError("fft: zero length");
  std::vector<std::complex<double>> scratch(n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, direction == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan_ == nullptr) throw ConfigError("fft: planning failed");
}

Fft::~Fft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void Fft::execute(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw ConfigError("fft: length does not match plan");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_), buf, buf);
  if (direction_ == FftDirection::inverse) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= scale;
  }
}

void fft_inplace(std::span<std::complex<double>> data) { Fft(data.size(), FftDirection::forward).execute(data); }

void ifft_inplace(std::span<std::complex<double>> data) { Fft(data.size(), FftDirection::inverse).execute(data); }

}  // namespace aclstm
