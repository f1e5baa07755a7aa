#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace aclstm {

enum class FftDirection { forward, inverse };

// Reusable in-place DFT of a fixed length. Forward is unnormalized; inverse
// scales by 1/n so that inverse(forward(x)) == x.
class Fft {
 public:
  Fft(std::size_t n, FftDirection direction);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }
  void execute(std::span<std::complex<double>> data) const;

 private:
  std::size_t n_;
  FftDirection direction_;
  void* plan_;
};

void fft_inplace(std::span<std::complex<double>> data);
void ifft_inplace(std::span<std::complex<double>> data);

}  // namespace aclstm
