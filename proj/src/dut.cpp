#include "aclstm/dut.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "aclstm/error.hpp"
#include "aclstm/rng.hpp"
#include "text_util.hpp"

namespace aclstm {

void SynthDutSpec::validate() const {
  if (pre_fir.empty() || post_fir.empty()) throw ConfigError("dut: FIR tap vectors must be nonempty");
  if (pre_fir.front() == Complex{} || post_fir.front() == Complex{})
    throw ConfigError("dut: FIR vectors need a nonzero first tap");
  if (!(saleh_beta_a > 0.0)) throw ConfigError("dut: saleh_beta_a must be positive");
  if (!(saleh_beta_p >= 0.0)) throw ConfigError("dut: saleh_beta_p must be non-negative");
  if (!(noise_dbc <= -60.0)) throw ConfigError("dut: noise_dbc must be <= -60 (or -inf)");
}

Complex saleh(const SynthDutSpec& spec, Complex x) {
  const double r = std::abs(x);
  if (r == 0.0) return {};
  const double r2 = r * r;
  const double gain = spec.saleh_alpha_a / (1.0 + spec.saleh_beta_a * r2);
  const double phase = spec.saleh_alpha_p * r2 / (1.0 + spec.saleh_beta_p * r2);
  return x * gain * std::polar(1.0, phase);
}

namespace {

std::vector<Complex> fir(std::span<const Complex> x, std::span<const Complex> taps) {
  std::vector<Complex> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    Complex acc{};
    for (std::size_t k = 0; k < taps.size() && k <= n; ++k) acc += taps[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

}  // namespace

Waveform synth_dut_forward(const SynthDutSpec& spec, const Waveform& x, std::uint64_t seed) {
  spec.validate();
  x.validate();
  auto v = fir(x.samples, spec.pre_fir);
  for (auto& s : v) s = saleh(spec, s);
  Waveform y{fir(v, spec.post_fir), x.sample_rate_hz, "dut_output"};

  if (std::isfinite(spec.noise_dbc)) {
    const double p = mean_power(y.samples);
    const double sigma = std::sqrt(p * std::pow(10.0, spec.noise_dbc / 10.0) / 2.0);
    auto rng = make_stream(seed, "noise");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& s : y.samples) {
      const double ni = gauss(rng);
      const double nq = gauss(rng);
      s += Complex{sigma * ni, sigma * nq};
    }
  }
  return y;
}

Dataset make_dataset(Waveform x, Waveform y, const SplitFractions& fractions) {
  x.validate();
  y.validate();
  if (x.size() != y.size()) throw ConfigError("dataset: input and output lengths differ");
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0) ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
    throw ConfigError("dataset: split fractions must be positive and sum to 1");
  const double n = static_cast<double>(x.size());
  Dataset d;
  d.train_end = static_cast<std::size_t>(std::llround(fractions.train * n));
  d.val_end = static_cast<std::size_t>(std::llround((fractions.train + fractions.val) * n));
  if (!(0 < d.train_end && d.train_end < d.val_end && d.val_end < x.size()))
    throw ConfigError("dataset: too short for a three-way split");
  d.norm_in = fit_norm(std::span(x.samples).first(d.train_end));
  d.norm_out = fit_norm(std::span(y.samples).first(d.train_end));
  d.input = std::move(x);
  d.output = std::move(y);
  return d;
}

Dataset ingest_dataset(const std::filesystem::path& path_in, const std::filesystem::path& path_out) {
  auto x = read_iqf(path_in);
  auto y = read_iqf(path_out);
  if (x.size() != y.size())
    throw IoError(IoErrc::length_mismatch, path_in.string() + " has " + std::to_string(x.size()) + " samples, " +
                                               path_out.string() + " has " + std::to_string(y.size()));
  if (x.sample_rate_hz != y.sample_rate_hz)
    throw IoError(IoErrc::rate_mismatch, path_in.string() + " vs " + path_out.string());
  return make_dataset(std::move(x), std::move(y));
}

namespace {

std::string norm_line(const NormStats& s) {
  return text::format_double(s.mean_i) + "," + text::format_double(s.mean_q) + "," + text::format_double(s.std_i) +
         "," + text::format_double(s.std_q);
}

NormStats parse_norm_line(const std::string& v) {
  const auto parts = text::split(v, ',');
  if (parts.size() != 4) throw ConfigError("norm stats need four values");
  return {text::parse_double(parts[0], "norm"), text::parse_double(parts[1], "norm"),
          text::parse_double(parts[2], "norm"), text::parse_double(parts[3], "norm")};
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out << "input=" << m.input.string() << "\n"
      << "output=" << m.output.string() << "\n"
      << "plan=" << m.plan.string() << "\n"
      << "length=" << m.length << "\n"
      << "train_end=" << m.train_end << "\n"
      << "val_end=" << m.val_end << "\n"
      << "norm_in=" << norm_line(m.norm_in) << "\n"
      << "norm_out=" << norm_line(m.norm_out) << "\n";
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrc::unreadable, path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw IoError(IoErrc::bad_format, path.string() + ": " + std::string(t));
    kv[std::string(text::trim(t.substr(0, eq)))] = std::string(text::trim(t.substr(eq + 1)));
  }
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError(IoErrc::bad_format, path.string() + ": missing " + key);
    return it->second;
  };
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  try {
    DatasetManifest m;
    m.input = resolve(need("input"));
    m.output = resolve(need("output"));
    m.plan = kv.count("plan") ? resolve(kv["plan"]) : std::filesystem::path{};
    m.length = static_cast<std::size_t>(text::parse_int(need("length"), "length"));
    m.train_end = static_cast<std::size_t>(text::parse_int(need("train_end"), "train_end"));
    m.val_end = static_cast<std::size_t>(text::parse_int(need("val_end"), "val_end"));
    m.norm_in = parse_norm_line(need("norm_in"));
    m.norm_out = parse_norm_line(need("norm_out"));
    return m;
  } catch (const ConfigError& e) {
    throw IoError(IoErrc::bad_format, path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const DatasetManifest& m) {
  auto x = read_iqf(m.input);
  auto y = read_iqf(m.output);
  if (x.size() != y.size() || x.size() != m.length)
    throw IoError(IoErrc::length_mismatch, "dataset files disagree with manifest length");
  if (!(0 < m.train_end && m.train_end < m.val_end && m.val_end < m.length))
    throw IoError(IoErrc::bad_format, "manifest split bounds are invalid");
  Dataset d;
  d.train_end = m.train_end;
  d.val_end = m.val_end;
  d.norm_in = fit_norm(std::span(x.samples).first(d.train_end));
  d.norm_out = fit_norm(std::span(y.samples).first(d.train_end));
  d.input = std::move(x);
  d.output = std::move(y);
  return d;
}

}  // namespace aclstm
