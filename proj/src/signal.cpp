#include "aclstm/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "aclstm/error.hpp"
#include "aclstm/fft.hpp"
#include "aclstm/rng.hpp"
#include "text_util.hpp"

namespace aclstm {

void Waveform::validate() const {
  if (samples.empty()) throw ConfigError("waveform '" + label + "' is empty");
  if (!std::isfinite(sample_rate_hz) || sample_rate_hz <= 0.0)
    throw ConfigError("waveform '" + label + "' has a non-positive sample rate");
  for (const auto& s : samples)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw ConfigError("waveform '" + label + "' contains non-finite samples");
}

void OfdmPlan::validate() const {
  if (fft_size < 2 || !std::has_single_bit(static_cast<unsigned>(fft_size)))
    throw ConfigError("ofdm: fft_size must be a power of two >= 2");
  if (active_subcarriers < 1 || active_subcarriers >= fft_size)
    throw ConfigError("ofdm: active_subcarriers must lie in [1, fft_size)");
  if (cp_len < 0 || cp_len > fft_size) throw ConfigError("ofdm: cp_len must lie in [0, fft_size]");
  if (num_symbols < 1) throw ConfigError("ofdm: num_symbols must be >= 1");
  if (qam_order != 4 && qam_order != 16 && qam_order != 64 && qam_order != 256)
    throw ConfigError("ofdm: qam_order must be one of 4, 16, 64, 256");
  if (!symbols.empty() &&
      symbols.size() != static_cast<std::size_t>(num_symbols) * static_cast<std::size_t>(active_subcarriers))
    throw ConfigError("ofdm: symbol matrix does not match num_symbols x active_subcarriers");
}

std::size_t OfdmPlan::symbol_length(int oversample) const {
  return static_cast<std::size_t>(fft_size + cp_len) * static_cast<std::size_t>(oversample);
}

std::size_t OfdmPlan::frame_length(int oversample) const {
  return symbol_length(oversample) * static_cast<std::size_t>(num_symbols);
}

double OfdmPlan::occupied_fraction(int oversample) const {
  return static_cast<double>(active_subcarriers) / (static_cast<double>(fft_size) * oversample);
}

int OfdmPlan::subcarrier_offset(int j) const {
  const int lower = active_subcarriers / 2;
  return j < lower ? j - lower : j - lower + 1;
}

std::vector<Complex> qam_constellation(int order) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
  if (side * side != order || side < 2) throw ConfigError("qam: order must be a square >= 4");
  const double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  std::vector<Complex> points;
  points.reserve(static_cast<std::size_t>(order));
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b)
      points.emplace_back((2 * a - side + 1) * scale, (2 * b - side + 1) * scale);
  return points;
}

int symbols_for_length(const OfdmPlan& plan, int oversample, std::size_t min_samples) {
  const std::size_t len = plan.symbol_length(oversample);
  return static_cast<int>(std::max<std::size_t>(1, (min_samples + len - 1) / len));
}

std::pair<Waveform, OfdmPlan> generate_ofdm(OfdmPlan plan, int oversample, double sample_rate_hz) {
  plan.validate();
  if (oversample < 1 || oversample > (1 << 12)) throw ConfigError("ofdm: oversample must lie in [1, 4096]");
  const auto active = static_cast<std::size_t>(plan.active_subcarriers);
  if (plan.symbols.empty()) {
    const auto alphabet = qam_constellation(plan.qam_order);
    auto rng = make_stream(plan.seed, "signal");
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    plan.symbols.resize(static_cast<std::size_t>(plan.num_symbols) * active);
    for (auto& s : plan.symbols) s = alphabet[pick(rng)];
  }

  const std::size_t n = static_cast<std::size_t>(plan.fft_size) * static_cast<std::size_t>(oversample);
  const std::size_t cp = static_cast<std::size_t>(plan.cp_len) * static_cast<std::size_t>(oversample);
  Fft inverse(n, FftDirection::inverse);
  std::vector<Complex> buf(n);

  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.label = "ofdm";
  w.samples.reserve(plan.frame_length(oversample));
  for (int s = 0; s < plan.num_symbols; ++s) {
    std::fill(buf.begin(), buf.end(), Complex{});
    for (int j = 0; j < plan.active_subcarriers; ++j) {
      const long bin = plan.subcarrier_offset(j);
      buf[static_cast<std::size_t>((bin + static_cast<long>(n)) % static_cast<long>(n))] = plan.symbol(s, j);
    }
    inverse.execute(buf);
    w.samples.insert(w.samples.end(), buf.end() - static_cast<long>(cp), buf.end());
    w.samples.insert(w.samples.end(), buf.begin(), buf.end());
  }

  const double scale = 1.0 / std::sqrt(mean_power(w.samples));
  for (auto& v : w.samples) v *= scale;
  return {std::move(w), std::move(plan)};
}

double mean_power(std::span<const Complex> x) {
  if (x.empty()) throw DomainError("mean_power: empty input");
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

double papr_db(std::span<const Complex> x) {
  if (x.empty()) throw DomainError("papr: empty input");
  double peak = 0.0;
  double acc = 0.0;
  for (const auto& v : x) {
    const double p = std::norm(v);
    peak = std::max(peak, p);
    acc += p;
  }
  if (peak == 0.0) throw DomainError("papr: all-zero waveform");
  return 10.0 * std::log10(peak / (acc / static_cast<double>(x.size())));
}

namespace {

void rescale_power(std::vector<Complex>& x, double target_power) {
  const double p = mean_power(x);
  if (p == 0.0) return;
  const double g = std::sqrt(target_power / p);
  for (auto& v : x) v *= g;
}

}  // namespace

CfrResult crest_factor_reduce(const Waveform& w, double target_papr_db, const CfrOptions& options) {
  w.validate();
  if (!(target_papr_db > 0.0)) throw ConfigError("cfr: target PAPR must be positive");
  if (options.max_iterations < 1) throw ConfigError("cfr: max_iterations must be >= 1");
  if (!(options.passband > 0.0)) throw ConfigError("cfr: passband must be positive");

  CfrResult result{w, papr_db(w), 0, true};
  if (result.papr_db <= target_papr_db) return result;

  const double power = mean_power(w.samples);
  const std::size_t len = w.size();
  const bool filtering = options.passband < 1.0;
  std::vector<char> keep;
  if (filtering) {
    keep.resize(len);
    const double edge = options.passband / 2.0 + 1e-12;
    for (std::size_t k = 0; k < len; ++k) {
      const double f = (k < (len + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(len)) /
                       static_cast<double>(len);
      keep[k] = std::abs(f) <= edge;
    }
  }
  std::unique_ptr<Fft> forward, inverse;
  if (filtering) {
    forward = std::make_unique<Fft>(len, FftDirection::forward);
    inverse = std::make_unique<Fft>(len, FftDirection::inverse);
  }

  std::vector<Complex> cur = w.samples;
  double threshold_db = target_papr_db;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const double limit = std::sqrt(mean_power(cur) * std::pow(10.0, threshold_db / 10.0));
    for (auto& v : cur) {
      const double r = std::abs(v);
      if (r > limit) v *= limit / r;
    }
    if (filtering) {
      forward->execute(cur);
      for (std::size_t k = 0; k < len; ++k)
        if (!keep[k]) cur[k] = Complex{};
      inverse->execute(cur);
    }
    rescale_power(cur, power);
    const double p = papr_db(cur);
    result.iterations = it;
    if (p < result.papr_db) {
      result.papr_db = p;
      result.waveform.samples = cur;
    }
    if (p <= target_papr_db) break;
    threshold_db -= p - target_papr_db;
  }
  result.reached = result.papr_db <= target_papr_db + 0.3;
  return result;
}

NormStats fit_norm(std::span<const Complex> x) {
  if (x.size() < 2) throw ConfigError("fit_norm: need at least two samples");
  const auto constant = [&](auto part) {
    return std::all_of(x.begin(), x.end(), [&](const Complex& v) { return part(v) == part(x[0]); });
  };
  if (constant([](const Complex& v) { return v.real(); }) || constant([](const Complex& v) { return v.imag(); }))
    throw ConfigError("fit_norm: zero variance in I or Q");
  const double n = static_cast<double>(x.size());
  double mi = 0.0, mq = 0.0;
  for (const auto& v : x) {
    mi += v.real();
    mq += v.imag();
  }
  mi /= n;
  mq /= n;
  double vi = 0.0, vq = 0.0;
  for (const auto& v : x) {
    vi += (v.real() - mi) * (v.real() - mi);
    vq += (v.imag() - mq) * (v.imag() - mq);
  }
  vi /= n;
  vq /= n;
  if (!(vi > 0.0) || !(vq > 0.0)) throw ConfigError("fit_norm: zero variance in I or Q");
  return {mi, mq, std::sqrt(vi), std::sqrt(vq)};
}

template <class T>
std::vector<std::complex<T>> apply_norm(std::span<const std::complex<T>> x, const NormStats& s) {
  std::vector<std::complex<T>> out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n)
    out[n] = {static_cast<T>((static_cast<double>(x[n].real()) - s.mean_i) / s.std_i),
              static_cast<T>((static_cast<double>(x[n].imag()) - s.mean_q) / s.std_q)};
  return out;
}

template <class T>
std::vector<std::complex<T>> invert_norm(std::span<const std::complex<T>> x, const NormStats& s) {
  std::vector<std::complex<T>> out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n)
    out[n] = {static_cast<T>(static_cast<double>(x[n].real()) * s.std_i + s.mean_i),
              static_cast<T>(static_cast<double>(x[n].imag()) * s.std_q + s.mean_q)};
  return out;
}

template std::vector<std::complex<float>> apply_norm(std::span<const std::complex<float>>, const NormStats&);
template std::vector<std::complex<double>> apply_norm(std::span<const std::complex<double>>, const NormStats&);
template std::vector<std::complex<float>> invert_norm(std::span<const std::complex<float>>, const NormStats&);
template std::vector<std::complex<double>> invert_norm(std::span<const std::complex<double>>, const NormStats&);

Waveform apply_norm(const Waveform& w, const NormStats& stats) {
  return {apply_norm<double>(w.samples, stats), w.sample_rate_hz, w.label};
}

Waveform invert_norm(const Waveform& w, const NormStats& stats) {
  return {invert_norm<double>(w.samples, stats), w.sample_rate_hz, w.label};
}

// ---------------------------------------------------------------------------
// IQF1

namespace {

constexpr char kIqfMagic[8] = {'A', 'C', 'W', 'A', 'V', 'E', 'I', 'Q'};
constexpr std::uint32_t kIqfVersion = 1;

template <class U>
void put_le(std::string& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xffu));
}

template <class U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::unreadable, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(IoErrc::unreadable, path.string());
  return std::move(ss).str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

}  // namespace

void write_iqf(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  std::string bytes(kIqfMagic, sizeof kIqfMagic);
  put_le<std::uint32_t>(bytes, kIqfVersion);
  put_le<std::uint32_t>(bytes, 0);
  put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(w.sample_rate_hz));
  put_le<std::uint64_t>(bytes, w.size());
  bytes.reserve(bytes.size() + 8 * w.size());
  for (const auto& s : w.samples) {
    put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(s.real())));
    put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(s.imag())));
  }
  write_all(path, bytes);
}

Waveform read_iqf(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  constexpr std::size_t kHeader = 32;
  if (bytes.size() < sizeof kIqfMagic || std::memcmp(bytes.data(), kIqfMagic, sizeof kIqfMagic) != 0)
    throw IoError(IoErrc::bad_magic, path.string());
  if (bytes.size() < kHeader) throw IoError(IoErrc::truncated, path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (get_le<std::uint32_t>(p + 8) != kIqfVersion) throw IoError(IoErrc::bad_version, path.string());
  Waveform w;
  w.sample_rate_hz = std::bit_cast<double>(get_le<std::uint64_t>(p + 16));
  const auto count = get_le<std::uint64_t>(p + 24);
  if (count > (bytes.size() - kHeader) / 8 || bytes.size() - kHeader != count * 8)
    throw IoError(IoErrc::truncated, path.string() + ": sample count does not match payload");
  w.samples.resize(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto* q = p + kHeader + 8 * n;
    w.samples[n] = {std::bit_cast<float>(get_le<std::uint32_t>(q)), std::bit_cast<float>(get_le<std::uint32_t>(q + 4))};
  }
  w.label = path.filename().string();
  try {
    w.validate();
  } catch (const ConfigError& e) {
    throw IoError(IoErrc::bad_format, path.string() + ": " + e.what());
  }
  return w;
}

// ---------------------------------------------------------------------------
// Plan files

void write_plan(const std::filesystem::path& path, const OfdmPlan& plan, int oversample) {
  plan.validate();
  std::string out = "ACPLAN1\n";
  out += "fft_size=" + std::to_string(plan.fft_size) + "\n";
  out += "active_subcarriers=" + std::to_string(plan.active_subcarriers) + "\n";
  out += "cp_len=" + std::to_string(plan.cp_len) + "\n";
  out += "num_symbols=" + std::to_string(plan.num_symbols) + "\n";
  out += "qam_order=" + std::to_string(plan.qam_order) + "\n";
  out += "seed=" + std::to_string(plan.seed) + "\n";
  out += "oversample=" + std::to_string(oversample) + "\n";
  out += "symbols=" + std::to_string(plan.symbols.size()) + "\n";
  for (const auto& s : plan.symbols) out += text::format_double(s.real()) + " " + text::format_double(s.imag()) + "\n";
  write_all(path, out);
}

std::pair<OfdmPlan, int> read_plan(const std::filesystem::path& path) {
  std::istringstream in(read_all(path));
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "ACPLAN1") throw IoError(IoErrc::bad_magic, path.string());
  OfdmPlan plan;
  int oversample = 1;
  std::size_t count = 0;
  auto field = [&](std::string_view key) -> std::string {
    if (!std::getline(in, line)) throw IoError(IoErrc::truncated, path.string());
    const auto eq = line.find('=');
    if (eq == std::string::npos || text::trim(std::string_view(line).substr(0, eq)) != key)
      throw IoError(IoErrc::bad_format, path.string() + ": expected " + std::string(key));
    return line.substr(eq + 1);
  };
  try {
    plan.fft_size = static_cast<int>(text::parse_int(field("fft_size"), "fft_size"));
    plan.active_subcarriers = static_cast<int>(text::parse_int(field("active_subcarriers"), "active_subcarriers"));
    plan.cp_len = static_cast<int>(text::parse_int(field("cp_len"), "cp_len"));
    plan.num_symbols = static_cast<int>(text::parse_int(field("num_symbols"), "num_symbols"));
    plan.qam_order = static_cast<int>(text::parse_int(field("qam_order"), "qam_order"));
    plan.seed = static_cast<std::uint64_t>(text::parse_int(field("seed"), "seed"));
    oversample = static_cast<int>(text::parse_int(field("oversample"), "oversample"));
    count = static_cast<std::size_t>(text::parse_int(field("symbols"), "symbols"));
    plan.symbols.resize(count);
    for (auto& s : plan.symbols) {
      if (!std::getline(in, line)) throw IoError(IoErrc::truncated, path.string());
      const auto parts = text::split(text::trim(line), ' ');
      if (parts.size() != 2) throw IoError(IoErrc::bad_format, path.string() + ": bad symbol line");
      s = {text::parse_double(parts[0], "symbol"), text::parse_double(parts[1], "symbol")};
    }
    plan.validate();
  } catch (const ConfigError& e) {
    throw IoError(IoErrc::bad_format, path.string() + ": " + e.what());
  }
  return {std::move(plan), oversample};
}

}  // namespace aclstm
