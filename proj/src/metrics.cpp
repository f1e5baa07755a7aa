#include "aclstm/metrics.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "aclstm/error.hpp"
#include "aclstm/fft.hpp"

namespace aclstm {

namespace {

double to_db(double ratio) {
  if (!(ratio > 0.0)) return kDbFloor;
  return std::max(10.0 * std::log10(ratio), kDbFloor);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double nmse_db(std::span<const Complex> y, std::span<const Complex> y_hat) {
  if (y.size() != y_hat.size()) throw ConfigError("nmse: length mismatch");
  double err = 0.0, ref = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    err += std::norm(y[n] - y_hat[n]);
    ref += std::norm(y[n]);
  }
  if (!(ref > 0.0)) throw DomainError("nmse: reference has zero energy");
  return to_db(err / ref);
}

const char* to_string(WindowKind kind) { return kind == WindowKind::hann ? "hann" : "rectangular"; }

WindowKind parse_window_kind(std::string_view text) {
  if (text == "hann") return WindowKind::hann;
  if (text == "rectangular" || text == "rect") return WindowKind::rectangular;
  throw ConfigError("window must be hann or rectangular, got '" + std::string(text) + "'");
}

double PsdEstimate::integrated_power() const {
  double acc = 0.0;
  for (double p : power) acc += p;
  return acc * bin_width();
}

PsdEstimate welch_psd(std::span<const Complex> x, std::size_t segment_len, double overlap, WindowKind window) {
  if (segment_len < 2 || !std::has_single_bit(segment_len)) throw ConfigError("welch: segment length must be a power of two >= 2");
  if (segment_len > x.size()) throw ConfigError("welch: segment longer than the waveform");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("welch: overlap must lie in [0, 1)");

  const std::size_t len = segment_len;
  std::vector<double> w(len, 1.0);
  if (window == WindowKind::hann)
    for (std::size_t n = 0; n < len; ++n)
      w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len)));
  double wpow = 0.0;
  for (double v : w) wpow += v * v;

  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - overlap))));
  Fft fft(len, FftDirection::forward);
  std::vector<Complex> buf(len);
  std::vector<double> acc(len, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + len <= x.size(); start += hop) {
    for (std::size_t n = 0; n < len; ++n) buf[n] = x[start + n] * w[n];
    fft.execute(buf);
    for (std::size_t k = 0; k < len; ++k) acc[k] += std::norm(buf[k]);
    ++segments;
  }

  PsdEstimate psd;
  psd.segment_len = len;
  psd.overlap = overlap;
  psd.window = window;
  psd.segments = segments;
  psd.freqs.resize(len);
  psd.power.resize(len);
  const double scale = 1.0 / (static_cast<double>(segments) * wpow);
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t k = (j + len / 2) % len;
    psd.freqs[j] = (static_cast<double>(j) - static_cast<double>(len / 2)) / static_cast<double>(len);
    psd.power[j] = acc[k] * scale;
  }
  return psd;
}

void ChannelMask::validate() const {
  constexpr double eps = 1e-12;
  if (!(main_lo < main_hi)) throw ConfigError("mask: main band is empty");
  if (main_lo < -0.5 - eps || main_hi > 0.5 + eps) throw ConfigError("mask: main band exceeds Nyquist");
  if (!(adj_bandwidth > 0.0) || !(adj_offset > 0.0)) throw ConfigError("mask: adjacent band must have positive width and offset");
  const double centre = 0.5 * (main_lo + main_hi);
  const double half = 0.5 * adj_bandwidth;
  if (centre - adj_offset - half < -0.5 - eps || centre + adj_offset + half > 0.5 + eps)
    throw ConfigError("mask: adjacent bands exceed Nyquist");
  if (adj_offset + eps < 0.5 * (main_hi - main_lo) + half) throw ConfigError("mask: adjacent bands overlap the main band");
}

ChannelMask ChannelMask::contiguous(double occupied_fraction) {
  ChannelMask m{-0.5 * occupied_fraction, 0.5 * occupied_fraction, occupied_fraction, occupied_fraction};
  m.validate();
  return m;
}

Acpr acpr_db(const PsdEstimate& psd, const ChannelMask& mask) {
  mask.validate();
  const double centre = 0.5 * (mask.main_lo + mask.main_hi);
  const double half = 0.5 * mask.adj_bandwidth;
  auto band_power = [&](double lo, double hi) {
    double acc = 0.0;
    std::size_t bins = 0;
    for (std::size_t j = 0; j < psd.freqs.size(); ++j) {
      if (psd.freqs[j] >= lo && psd.freqs[j] < hi) {
        acc += psd.power[j];
        ++bins;
      }
    }
    if (bins == 0) throw ConfigError("acpr: a mask band contains no frequency bins");
    return acc;
  };
  const double main = band_power(mask.main_lo, mask.main_hi);
  const double lower = band_power(centre - mask.adj_offset - half, centre - mask.adj_offset + half);
  const double upper = band_power(centre + mask.adj_offset - half, centre + mask.adj_offset + half);
  if (!(main > 0.0)) throw DomainError("acpr: main channel has no power");
  return {to_db(lower / main), to_db(upper / main), to_db(0.5 * (lower / main + upper / main))};
}

double evm_rms_percent(std::span<const Complex> demod, std::span<const Complex> ideal) {
  if (demod.size() != ideal.size()) throw ConfigError("evm: shape mismatch");
  double err = 0.0, ref = 0.0;
  for (std::size_t k = 0; k < ideal.size(); ++k) {
    err += std::norm(demod[k] - ideal[k]);
    ref += std::norm(ideal[k]);
  }
  if (!(ref > 0.0)) throw DomainError("evm: ideal symbols have zero energy");
  return 100.0 * std::sqrt(err / ref);
}

std::vector<Complex> ofdm_demod(std::span<const Complex> x, const OfdmPlan& plan, int oversample,
                                std::size_t first_symbol, std::size_t symbol_count) {
  plan.validate();
  if (oversample < 1) throw ConfigError("demod: oversample must be >= 1");
  const std::size_t sym_len = plan.symbol_length(oversample);
  if (symbol_count == static_cast<std::size_t>(-1)) symbol_count = x.size() / sym_len;
  if (symbol_count == 0 || x.size() < symbol_count * sym_len) throw ConfigError("demod: waveform shorter than the symbol block");
  if (first_symbol + symbol_count > static_cast<std::size_t>(plan.num_symbols))
    throw ConfigError("demod: symbol block exceeds the plan");
  if (plan.symbols.empty()) throw ConfigError("demod: plan carries no symbols");

  const std::size_t n = static_cast<std::size_t>(plan.fft_size) * static_cast<std::size_t>(oversample);
  const std::size_t cp = static_cast<std::size_t>(plan.cp_len) * static_cast<std::size_t>(oversample);
  const auto active = static_cast<std::size_t>(plan.active_subcarriers);
  Fft fft(n, FftDirection::forward);
  std::vector<Complex> buf(n);
  std::vector<Complex> out(symbol_count * active);
  Complex cross{};
  double ideal_energy = 0.0;
  for (std::size_t s = 0; s < symbol_count; ++s) {
    const auto body = x.subspan(s * sym_len + cp, n);
    std::copy(body.begin(), body.end(), buf.begin());
    fft.execute(buf);
    for (std::size_t j = 0; j < active; ++j) {
      const long off = plan.subcarrier_offset(static_cast<int>(j));
      const Complex rx = buf[static_cast<std::size_t>((off + static_cast<long>(n)) % static_cast<long>(n))];
      const Complex ideal = plan.symbol(static_cast<int>(first_symbol + s), static_cast<int>(j));
      out[s * active + j] = rx;
      cross += std::conj(ideal) * rx;
      ideal_energy += std::norm(ideal);
    }
  }
  if (!(ideal_energy > 0.0)) throw DomainError("demod: ideal symbols have zero energy");
  const Complex gain = cross / ideal_energy;
  if (gain == Complex{}) throw DomainError("demod: received block is orthogonal to the ideal symbols");
  for (auto& v : out) v /= gain;
  return out;
}

double evm_over_span(std::span<const Complex> x, std::size_t begin, const OfdmPlan& plan, int oversample) {
  const std::size_t sym_len = plan.symbol_length(oversample);
  const std::size_t first = (begin + sym_len - 1) / sym_len;
  const std::size_t last = std::min<std::size_t>(static_cast<std::size_t>(plan.num_symbols), (begin + x.size()) / sym_len);
  if (first >= last) return kNaN;
  const std::size_t count = last - first;
  const auto block = x.subspan(first * sym_len - begin, count * sym_len);
  const auto demod = ofdm_demod(block, plan, oversample, first, count);
  const auto active = static_cast<std::size_t>(plan.active_subcarriers);
  const std::span<const Complex> ideal(plan.symbols.data() + first * active, count * active);
  return evm_rms_percent(demod, ideal);
}

std::string metrics_csv_header() { return "model,nmse_db,acpr_lo_db,acpr_hi_db,acpr_db,evm_pct,papr_db,params"; }

std::string MetricsReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%zu", model.c_str(), nmse_db, acpr.lower,
                acpr.upper, acpr.combined, evm_pct, papr_db, params);
  return buf;
}

std::string MetricsReport::text() const {
  char buf[384];
  std::snprintf(buf, sizeof buf,
                "%-10s NMSE %8.2f dB | ACPR %7.2f dB (lower %7.2f, upper %7.2f) | EVM %6.2f %% | PAPR %5.2f dB | "
                "params %zu",
                model.c_str(), nmse_db, acpr.combined, acpr.lower, acpr.upper, evm_pct, papr_db, params);
  return buf;
}

MetricsReport metrics_report(const Dataset& data, std::span<const Complex> test_output, const std::string& model,
                             std::size_t params, const OfdmPlan* plan, int oversample, const ChannelMask& mask,
                             const WelchOptions& welch) {
  const std::size_t begin = data.val_end;
  if (test_output.size() != data.size() - begin) throw ConfigError("metrics: output is not aligned with the test split");
  const std::span<const Complex> measured(data.output.samples.data() + begin, test_output.size());

  MetricsReport r;
  r.model = model;
  r.params = params;
  r.nmse_db = nmse_db(measured, test_output);
  const std::size_t seg = std::min(welch.segment_len, std::bit_floor(test_output.size()));
  try {
    r.acpr = acpr_db(welch_psd(test_output, seg, welch.overlap, welch.window), mask);
  } catch (const DomainError&) {
    r.acpr = {kNaN, kNaN, kNaN};
  }
  try {
    r.evm_pct = plan ? evm_over_span(test_output, begin, *plan, oversample) : kNaN;
  } catch (const DomainError&) {
    r.evm_pct = kNaN;
  }
  try {
    r.papr_db = papr_db(test_output);
  } catch (const DomainError&) {
    r.papr_db = kNaN;
  }
  return r;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out << metrics_csv_header() << '\n';
  for (const auto& r : rows) out << r.csv_row() << '\n';
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

void write_psd_csv(const std::filesystem::path& path, const PsdEstimate& psd) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out << "freq_norm,psd_db\n";
  char buf[64];
  for (std::size_t j = 0; j < psd.freqs.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.6f,%.4f\n", psd.freqs[j], to_db(psd.power[j]));
    out << buf;
  }
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

}  // namespace aclstm
