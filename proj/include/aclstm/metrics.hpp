#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aclstm/dut.hpp"
#include "aclstm/signal.hpp"

namespace aclstm {

// Floor used in place of -infinity for every log-domain metric.
inline constexpr double kDbFloor = -200.0;

// Error energy over reference energy, in dB. DomainError on a zero-energy reference.
double nmse_db(std::span<const Complex> y, std::span<const Complex> y_hat);

enum class WindowKind { rectangular, hann };
const char* to_string(WindowKind kind);
WindowKind parse_window_kind(std::string_view text);

// Welch estimate on a DC-centred axis (cycles/sample, [-0.5, 0.5)). Density is
// scaled so that sum(power) * bin_width() equals mean power for white input.
struct PsdEstimate {
  std::vector<double> freqs;
  std::vector<double> power;
  std::size_t segment_len = 0;
  double overlap = 0.0;
  WindowKind window = WindowKind::hann;
  std::size_t segments = 0;

  double bin_width() const { return 1.0 / static_cast<double>(segment_len); }
  double integrated_power() const;
};

struct WelchOptions {
  std::size_t segment_len = 1024;
  double overlap = 0.5;
  WindowKind window = WindowKind::hann;
};

PsdEstimate welch_psd(std::span<const Complex> x, std::size_t segment_len, double overlap, WindowKind window);
inline PsdEstimate welch_psd(std::span<const Complex> x, const WelchOptions& o = {}) {
  return welch_psd(x, o.segment_len, o.overlap, o.window);
}

// Bands are half-open in normalized frequency: a bin belongs to [lo, hi) by its centre.
struct ChannelMask {
  double main_lo = -0.125;
  double main_hi = 0.125;
  double adj_offset = 0.25;  // centre-to-centre spacing of main and adjacent channels
  double adj_bandwidth = 0.25;

  void validate() const;
  // Main = occupied band; adjacent channels one channel bandwidth away, same width.
  static ChannelMask contiguous(double occupied_fraction);
};

struct Acpr {
  double lower = 0.0;
  double upper = 0.0;
  double combined = 0.0;  // 10 log10 of the mean of the two linear ratios
};

Acpr acpr_db(const PsdEstimate& psd, const ChannelMask& mask);

// 100 sqrt(sum |demod - ideal|^2 / sum |ideal|^2).
double evm_rms_percent(std::span<const Complex> demod, std::span<const Complex> ideal);

// Demodulates `symbol_count` whole symbols starting at plan symbol `first_symbol`;
// `x` must begin at that symbol's first (cyclic prefix) sample. One complex
// least-squares gain over the whole block is removed. Row-major result
// (symbol_count x active_subcarriers).
std::vector<Complex> ofdm_demod(std::span<const Complex> x, const OfdmPlan& plan, int oversample,
                                std::size_t first_symbol = 0, std::size_t symbol_count = static_cast<std::size_t>(-1));

// EVM over the plan symbols lying entirely inside samples [begin, begin + x.size()).
// Returns NaN when no whole symbol fits.
double evm_over_span(std::span<const Complex> x, std::size_t begin, const OfdmPlan& plan, int oversample);

struct MetricsReport {
  std::string model;
  double nmse_db = 0.0;
  Acpr acpr;
  double evm_pct = 0.0;
  double papr_db = 0.0;
  std::size_t params = 0;

  std::string csv_row() const;
  std::string text() const;
};

std::string metrics_csv_header();

// Metrics of `test_output` (de-normalized model output over the dataset's test
// split) against the measured test split.
MetricsReport metrics_report(const Dataset& data, std::span<const Complex> test_output, const std::string& model,
                             std::size_t params, const OfdmPlan* plan, int oversample, const ChannelMask& mask,
                             const WelchOptions& welch = {});

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& rows);
void write_psd_csv(const std::filesystem::path& path, const PsdEstimate& psd);

}  // namespace aclstm
