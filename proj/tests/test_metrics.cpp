#include <doctest.h>

#include <cmath>
#include <numbers>

#include "aclstm/dut.hpp"
#include "aclstm/error.hpp"
#include "aclstm/metrics.hpp"
#include "oracles.hpp"

using namespace aclstm;

namespace {

PsdEstimate flat_psd(std::size_t len, double main, double adjacent, double occupied) {
  PsdEstimate p;
  p.segment_len = len;
  for (std::size_t j = 0; j < len; ++j) {
    const double f = (static_cast<double>(j) - static_cast<double>(len / 2)) / static_cast<double>(len);
    p.freqs.push_back(f);
    p.power.push_back(f >= -0.5 * occupied && f < 0.5 * occupied ? main : adjacent);
  }
  return p;
}

std::pair<Waveform, OfdmPlan> small_ofdm(int symbols, unsigned seed) {
  OfdmPlan plan;
  plan.num_symbols = symbols;
  plan.seed = seed;
  return generate_ofdm(plan, 2);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("NMSE") {
    const std::vector<Complex> y{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    CHECK(nmse_db(y, y) == kDbFloor);
    std::vector<Complex> half(y);
    for (auto& v : half) v *= 0.9;
    CHECK(nmse_db(y, half) == doctest::Approx(-20.0));
    for (auto& v : half) v = v / 0.9 * 0.5;
    CHECK(nmse_db(y, half) == doctest::Approx(-6.0206).epsilon(1e-5));
    const std::vector<Complex> zero(4);
    CHECK(nmse_db(y, zero) == doctest::Approx(0.0));
    CHECK_THROWS_AS(nmse_db(zero, y), DomainError);
    CHECK_THROWS_AS(nmse_db(y, std::vector<Complex>(3)), ConfigError);
  }

  TEST_CASE("NMSE is invariant to a common scale") {
    const auto y = oracle::complex_gaussian(256, 1);
    auto yh = oracle::complex_gaussian(256, 2, 0.1);
    for (std::size_t n = 0; n < y.size(); ++n) yh[n] += y[n];
    const double base = nmse_db(y, yh);
    for (double s : {1e-3, 7.0, 1e4}) {
      std::vector<Complex> a(y), b(yh);
      for (auto& v : a) v *= s;
      for (auto& v : b) v *= s;
      CHECK(nmse_db(a, b) == doctest::Approx(base).epsilon(1e-10));
    }
  }

  TEST_CASE("Welch PSD") {
    SUBCASE("axis is DC-centred") {
      const auto psd = welch_psd(oracle::complex_gaussian(64, 3), 16, 0.5, WindowKind::hann);
      CHECK(psd.freqs.front() == -0.5);
      CHECK(psd.freqs[8] == 0.0);
      CHECK(psd.freqs.back() == doctest::Approx(0.4375));
      CHECK(psd.segments == 7);
    }
    SUBCASE("a bin-centred tone concentrates its power") {
      std::vector<Complex> x(8192);
      for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::polar(1.0, 2.0 * std::numbers::pi * 0.125 * static_cast<double>(n));
      const auto psd = welch_psd(x, 1024, 0.5, WindowKind::hann);
      const std::size_t peak = 512 + 128;
      CHECK(psd.freqs[peak] == 0.125);
      double near = 0.0;
      for (std::size_t j = peak - 2; j <= peak + 2; ++j) near += psd.power[j];
      CHECK(near * psd.bin_width() > 0.99 * psd.integrated_power());
      CHECK(psd.integrated_power() == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("rectangular window, one segment: a tone lands in its bin") {
      std::vector<Complex> x(256);
      for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::polar(2.0, 2.0 * std::numbers::pi * 37.0 * static_cast<double>(n) / 256.0);
      const auto psd = welch_psd(x, 256, 0.0, WindowKind::rectangular);
      CHECK(psd.segments == 1);
      CHECK(psd.power[128 + 37] * psd.bin_width() >= 0.999 * psd.integrated_power());
    }
    SUBCASE("Hann and rectangular agree on the power of a tone") {
      std::vector<Complex> x(16384);
      for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::polar(1.5, 2.0 * std::numbers::pi * 0.0371 * static_cast<double>(n));
      const double hann = welch_psd(x, 1024, 0.5, WindowKind::hann).integrated_power();
      const double rect = welch_psd(x, 1024, 0.5, WindowKind::rectangular).integrated_power();
      CHECK(hann == doctest::Approx(rect).epsilon(0.01));
      CHECK(rect == doctest::Approx(2.25).epsilon(1e-9));
    }
    SUBCASE("white noise is flat at its variance") {
      const auto x = oracle::complex_gaussian(1 << 18, 4, 0.5);
      const auto psd = welch_psd(x, 256, 0.5, WindowKind::hann);
      double mean = 0.0;
      for (double p : psd.power) mean += p;
      mean /= static_cast<double>(psd.power.size());
      CHECK(mean == doctest::Approx(mean_power(x)).epsilon(0.02));
      CHECK(mean == doctest::Approx(0.25).epsilon(0.02));
    }
    SUBCASE("Hann and rectangular windows agree on total power") {
      const auto x = oracle::complex_gaussian(1 << 15, 5);
      const double hann = welch_psd(x, 512, 0.5, WindowKind::hann).integrated_power();
      const double rect = welch_psd(x, 512, 0.5, WindowKind::rectangular).integrated_power();
      CHECK(hann == doctest::Approx(rect).epsilon(0.01));
    }
    SUBCASE("rectangular, no overlap: Parseval") {
      const auto x = oracle::complex_gaussian(4096, 6);
      const auto psd = welch_psd(x, 512, 0.0, WindowKind::rectangular);
      CHECK(psd.segments == 8);
      CHECK(psd.integrated_power() == doctest::Approx(mean_power(x)).epsilon(1e-9));
    }
    SUBCASE("invalid arguments") {
      const auto x = oracle::complex_gaussian(100, 7);
      CHECK_THROWS_AS(welch_psd(x, 48, 0.5, WindowKind::hann), ConfigError);
      CHECK_THROWS_AS(welch_psd(x, 128, 0.5, WindowKind::hann), ConfigError);
      CHECK_THROWS_AS(welch_psd(x, 64, 1.0, WindowKind::hann), ConfigError);
      CHECK_THROWS_AS(welch_psd(x, 64, -0.1, WindowKind::hann), ConfigError);
      CHECK_THROWS_AS(parse_window_kind("hamming"), ConfigError);
    }
  }

  TEST_CASE("ACPR on synthetic spectra") {
    const auto mask = ChannelMask::contiguous(0.25);
    CHECK(mask.main_lo == -0.125);
    CHECK(mask.adj_offset == 0.25);
    SUBCASE("flat adjacent floor 20 dB down") {
      const auto r = acpr_db(flat_psd(1024, 1.0, 0.01, 0.25), mask);
      CHECK(r.lower == doctest::Approx(-20.0));
      CHECK(r.upper == doctest::Approx(-20.0));
      CHECK(r.combined == doctest::Approx(-20.0));
    }
    SUBCASE("empty adjacent channels hit the floor") {
      const auto r = acpr_db(flat_psd(1024, 1.0, 0.0, 0.25), mask);
      CHECK(r.lower == kDbFloor);
      CHECK(r.combined == kDbFloor);
    }
    SUBCASE("combined is the mean of the linear ratios") {
      auto psd = flat_psd(1024, 1.0, 0.0, 0.25);
      for (std::size_t j = 0; j < psd.freqs.size(); ++j) {
        if (psd.freqs[j] >= -0.375 && psd.freqs[j] < -0.125) psd.power[j] = 0.01;
        if (psd.freqs[j] >= 0.125 && psd.freqs[j] < 0.375) psd.power[j] = 0.001;
      }
      const auto r = acpr_db(psd, mask);
      CHECK(r.lower == doctest::Approx(-20.0));
      CHECK(r.upper == doctest::Approx(-30.0));
      CHECK(r.combined == doctest::Approx(10.0 * std::log10(0.5 * (0.01 + 0.001))));
    }
    SUBCASE("invariant to spectrum scaling") {
      auto psd = welch_psd(oracle::complex_gaussian(8192, 8), 1024, 0.5, WindowKind::hann);
      const auto a = acpr_db(psd, mask);
      for (auto& p : psd.power) p *= 123.0;
      CHECK(acpr_db(psd, mask).combined == doctest::Approx(a.combined).epsilon(1e-12));
    }
    SUBCASE("errors") {
      CHECK_THROWS_AS(acpr_db(flat_psd(1024, 0.0, 0.0, 0.25), mask), DomainError);
      CHECK_THROWS_AS(ChannelMask::contiguous(0.5), ConfigError);
      ChannelMask bad;
      bad.main_lo = 0.1;
      bad.main_hi = 0.1;
      CHECK_THROWS_AS(bad.validate(), ConfigError);
      bad = ChannelMask{};
      bad.adj_offset = 0.1;
      CHECK_THROWS_AS(bad.validate(), ConfigError);
      ChannelMask narrow{-0.01, 0.01, 0.02, 0.001};
      CHECK_THROWS_AS(acpr_db(flat_psd(16, 1.0, 1.0, 0.25), narrow), ConfigError);
    }
  }

  TEST_CASE("ACPR of a distorted OFDM signal matches a single-transform periodogram") {
    auto [w, plan] = small_ofdm(8, 9);
    for (auto& v : w.samples) v *= 0.5;
    const auto y = synth_dut_forward(SynthDutSpec{}, w, 9);
    const std::vector<Complex> x(y.samples.begin(), y.samples.begin() + 4096);

    // Hann-windowed periodogram of the whole record via the direct transform.
    std::vector<Complex> xw(x);
    for (std::size_t n = 0; n < xw.size(); ++n)
      xw[n] *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / 4096.0));
    const auto X = oracle::dft(xw);
    double main = 0.0, lower = 0.0, upper = 0.0;
    for (int k = 0; k < 4096; ++k) {
      const double f = (k < 2048 ? k : k - 4096) / 4096.0;
      const double p = std::norm(X[static_cast<std::size_t>(k)]);
      if (f >= -0.125 && f < 0.125) main += p;
      if (f >= -0.375 && f < -0.125) lower += p;
      if (f >= 0.125 && f < 0.375) upper += p;
    }
    const double expect = 10.0 * std::log10(0.5 * (lower + upper) / main);

    // One segment spanning the record is the same estimator; averaged segments differ only statistically.
    const auto whole = acpr_db(welch_psd(x, 4096, 0.5, WindowKind::hann), ChannelMask::contiguous(0.25));
    CHECK(std::abs(whole.combined - expect) < 1e-9);
    const auto r = acpr_db(welch_psd(x, 1024, 0.5, WindowKind::hann), ChannelMask::contiguous(0.25));
    CHECK(r.combined == doctest::Approx(expect).epsilon(0.1 / std::abs(expect)));
    CHECK(r.combined > -60.0);
  }

  TEST_CASE("EVM") {
    const std::vector<Complex> ideal{{1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
    CHECK(evm_rms_percent(ideal, ideal) == 0.0);
    std::vector<Complex> off(ideal);
    for (auto& v : off) v *= 1.1;
    CHECK(evm_rms_percent(off, ideal) == doctest::Approx(10.0).epsilon(1e-12));
    for (auto& v : off) v = v / 1.1 * Complex{1.0, 0.1};
    CHECK(evm_rms_percent(off, ideal) == doctest::Approx(10.0).epsilon(1e-12));
    // Fixed offset e on every point: 100 sqrt(N |e|^2 / sum |ideal|^2).
    const Complex e{0.1, -0.05};
    std::vector<Complex> shifted(ideal);
    for (auto& v : shifted) v += e;
    CHECK(std::abs(evm_rms_percent(shifted, ideal) - 100.0 * std::sqrt(4.0 * std::norm(e) / 8.0)) < 1e-12);
    CHECK_THROWS_AS(evm_rms_percent(std::vector<Complex>(4), std::vector<Complex>(4)), DomainError);
    CHECK_THROWS_AS(evm_rms_percent(ideal, std::vector<Complex>(3)), ConfigError);
  }

  TEST_CASE("OFDM demodulation") {
    const auto [w, plan] = small_ofdm(4, 10);
    const auto active = static_cast<std::size_t>(plan.active_subcarriers);
    SUBCASE("clean waveform returns the transmitted symbols") {
      const auto d = ofdm_demod(w.samples, plan, 2);
      REQUIRE(d.size() == 4 * active);
      for (std::size_t k = 0; k < d.size(); ++k) CHECK(std::abs(d[k] - plan.symbols[k]) < 1e-9);
      CHECK(evm_over_span(w.samples, 0, plan, 2) < 1e-7);
    }
    SUBCASE("a complex gain is removed") {
      std::vector<Complex> x(w.samples);
      for (auto& v : x) v *= std::polar(0.7, std::numbers::pi / 5.0);
      CHECK(evm_over_span(x, 0, plan, 2) < 1e-7);
    }
    SUBCASE("spans select whole symbols only") {
      const std::size_t sym = plan.symbol_length(2);
      const std::span<const Complex> all(w.samples);
      CHECK(evm_over_span(all.subspan(sym / 2), sym / 2, plan, 2) < 1e-7);
      CHECK(std::isnan(evm_over_span(all.subspan(sym / 2, sym), sym / 2, plan, 2)));
      const auto d = ofdm_demod(all.subspan(2 * sym, sym), plan, 2, 2, 1);
      for (std::size_t j = 0; j < active; ++j) CHECK(std::abs(d[j] - plan.symbols[2 * active + j]) < 1e-9);
    }
    SUBCASE("errors") {
      CHECK_THROWS_AS(ofdm_demod(w.samples, plan, 2, 3, 2), ConfigError);
      CHECK_THROWS_AS(ofdm_demod(std::span<const Complex>(w.samples).first(10), plan, 2), ConfigError);
      CHECK_THROWS_AS(ofdm_demod(std::vector<Complex>(w.size()), plan, 2), DomainError);
    }
  }

  TEST_CASE("in-band noise at -30 dBc gives 3.16 % EVM") {
    const auto [w, plan] = small_ofdm(40, 11);
    // Noise confined to the active subcarriers: an OFDM frame carrying Gaussian symbols.
    OfdmPlan noise_plan = plan;
    noise_plan.symbols = oracle::complex_gaussian(plan.symbols.size(), 13);
    const auto [noise, unused] = generate_ofdm(noise_plan, 2);
    const double scale = std::sqrt(1e-3 * mean_power(w.samples) / mean_power(noise.samples));
    std::vector<Complex> x(w.samples);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] += scale * noise.samples[n];
    CHECK(evm_over_span(x, 0, plan, 2) == doctest::Approx(100.0 * std::pow(10.0, -30.0 / 20.0)).epsilon(0.1));
  }

  TEST_CASE("white noise sets EVM by the in-band share of its power") {
    const auto [w, plan] = small_ofdm(40, 11);
    const double sigma2 = 1e-3 * mean_power(w.samples);
    const auto noise = oracle::complex_gaussian(w.size(), 12, std::sqrt(sigma2));
    std::vector<Complex> x(w.samples);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] += noise[n];
    // Only the active bins of the oversampled transform carry noise into the symbols.
    const double n_fft = plan.fft_size * 2.0;
    const double expect = 100.0 * std::sqrt(1e-3 * plan.active_subcarriers / n_fft);
    CHECK(evm_over_span(x, 0, plan, 2) == doctest::Approx(expect).epsilon(0.1));
  }

  TEST_CASE("metrics report") {
    const auto x = oracle::complex_gaussian(5000, 13);
    auto y = x;
    for (auto& v : y) v *= 2.0;
    const auto data = make_dataset(Waveform{x, 1.0, "in"}, Waveform{y, 1.0, "out"});
    const std::span<const Complex> measured(data.output.samples.data() + data.val_end, data.size() - data.val_end);
    const auto mask = ChannelMask::contiguous(0.25);
    const auto same = metrics_report(data, measured, "measured", 0, nullptr, 2, mask);
    CHECK(same.nmse_db == kDbFloor);
    CHECK(std::isnan(same.evm_pct));
    CHECK(std::isfinite(same.acpr.combined));
    CHECK(same.papr_db == doctest::Approx(papr_db(measured)));
    const std::vector<Complex> zero(measured.size());
    const auto z = metrics_report(data, zero, "zero", 7, nullptr, 2, mask);
    CHECK(z.nmse_db == doctest::Approx(0.0));
    CHECK(std::isnan(z.acpr.combined));
    CHECK(std::isnan(z.papr_db));
    CHECK(z.csv_row().rfind("zero,0.0000,", 0) == 0);
    CHECK_THROWS_AS(metrics_report(data, measured.first(10), "x", 0, nullptr, 2, mask), ConfigError);
  }
}
