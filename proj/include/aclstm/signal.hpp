#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aclstm {

using Complex = std::complex<double>;

// Complex baseband sample sequence. Every stored sample is finite.
struct Waveform {
  std::vector<Complex> samples;
  double sample_rate_hz = 1.0;
  std::string label;

  std::size_t size() const { return samples.size(); }
  // Throws ConfigError on empty samples, non-finite samples, or a bad rate.
  void validate() const;
};

// CP-OFDM frame description. `symbols` is row-major (num_symbols x
// active_subcarriers); when empty, generate_ofdm draws random QAM symbols.
struct OfdmPlan {
  int fft_size = 256;
  int active_subcarriers = 128;
  int cp_len = 16;
  int num_symbols = 1;
  int qam_order = 256;
  std::uint64_t seed = 0;
  std::vector<Complex> symbols;

  void validate() const;
  // Samples per OFDM symbol including the cyclic prefix, at the oversampled rate.
  std::size_t symbol_length(int oversample) const;
  std::size_t frame_length(int oversample) const;
  // Two-sided occupied bandwidth as a fraction of the sample rate.
  double occupied_fraction(int oversample) const;
  // Signed subcarrier offset (in bins) of active index j. DC is never used.
  int subcarrier_offset(int j) const;
  Complex symbol(int s, int j) const { return symbols[static_cast<std::size_t>(s) * active_subcarriers + j]; }
};

// Unit-average-power square QAM alphabet of the given order (4, 16, 64, 256).
std::vector<Complex> qam_constellation(int order);

// Returns the waveform (mean power 1) and the plan carrying the symbols used.
std::pair<Waveform, OfdmPlan> generate_ofdm(OfdmPlan plan, int oversample, double sample_rate_hz = 1.0);

// Smallest symbol count whose frame reaches at least `min_samples`.
int symbols_for_length(const OfdmPlan& plan, int oversample, std::size_t min_samples);

double mean_power(std::span<const Complex> x);
// 10 log10(peak power / mean power). Throws DomainError on an all-zero input.
double papr_db(std::span<const Complex> x);
inline double papr_db(const Waveform& w) { return papr_db(w.samples); }

struct CfrOptions {
  // Two-sided bandwidth (fraction of sample rate, centered at DC) kept by the
  // frequency-domain filter. 1.0 keeps every bin.
  double passband = 1.0;
  int max_iterations = 10;
};

struct CfrResult {
  Waveform waveform;
  double papr_db = 0.0;
  int iterations = 0;
  // False when the target was not met within +0.3 dB; waveform is then the best iterate.
  bool reached = true;
};

// Iterative hard clipping followed by a band-limiting filter. Never returns a
// waveform with higher PAPR than its input; mean power matches the input.
CfrResult crest_factor_reduce(const Waveform& w, double target_papr_db, const CfrOptions& options = {});

// Per-component affine normalization statistics (population variance).
struct NormStats {
  double mean_i = 0.0;
  double mean_q = 0.0;
  double std_i = 1.0;
  double std_q = 1.0;
};

NormStats fit_norm(std::span<const Complex> x);
inline NormStats fit_norm(const Waveform& w) { return fit_norm(w.samples); }

template <class T>
std::vector<std::complex<T>> apply_norm(std::span<const std::complex<T>> x, const NormStats& stats);
template <class T>
std::vector<std::complex<T>> invert_norm(std::span<const std::complex<T>> x, const NormStats& stats);

Waveform apply_norm(const Waveform& w, const NormStats& stats);
Waveform invert_norm(const Waveform& w, const NormStats& stats);

// "IQF1" waveform files: magic ACWAVEIQ, u32 version 1, u32 reserved,
// f64 sample rate, u64 count, interleaved little-endian f32 (I, Q).
void write_iqf(const std::filesystem::path& path, const Waveform& w);
Waveform read_iqf(const std::filesystem::path& path);

// Plain-text plan files (exact round trip of the symbol matrix).
void write_plan(const std::filesystem::path& path, const OfdmPlan& plan, int oversample);
std::pair<OfdmPlan, int> read_plan(const std::filesystem::path& path);

}  // namespace aclstm
